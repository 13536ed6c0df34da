//! Kohn's regularized radial map and the Cosserat and Willis push-forwards.
//!
//! The map blows `B_ε` up to `B_1`, compresses `B_2 \ B_ε` onto `B_2 \ B_1` and
//! is the identity outside `B_2`. Radii here are normalized so that the cloak
//! occupies `1 ≤ r' ≤ 2`.

use crate::error::{Error, Result};
use crate::materials::IsotropicMaterial;
use crate::tensor::{polar_frame, rotate2, Mat2, Tensor3, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KohnMap {
    epsilon: f64,
}

/// Value, Jacobian and determinant of the map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub y: [f64; 2],
    pub j: Mat2,
    pub det: f64,
}

impl KohnMap {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Parameter(format!("epsilon = {epsilon} not in (0, 1]")));
        }
        Ok(KohnMap { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn s(&self) -> f64 {
        2.0 - self.epsilon
    }

    fn c(&self) -> f64 {
        2.0 - 2.0 * self.epsilon
    }

    /// `(f, f', f'')` of the radial profile `r ↦ r'`.
    pub fn radial_derivatives(&self, r: f64) -> (f64, f64, f64) {
        let e = self.epsilon;
        if r >= 2.0 {
            (r, 1.0, 0.0)
        } else if r >= e {
            ((self.c() + r) / self.s(), 1.0 / self.s(), 0.0)
        } else {
            (r / e, 1.0 / e, 0.0)
        }
    }

    pub fn radial(&self, r: f64) -> f64 {
        self.radial_derivatives(r).0
    }

    /// Inverse of the radial profile.
    pub fn inverse_radial(&self, rp: f64) -> f64 {
        if rp >= 2.0 {
            rp
        } else if rp > 1.0 {
            self.s() * rp - self.c()
        } else {
            rp * self.epsilon
        }
    }

    pub fn map(&self, x: [f64; 2]) -> MapPoint {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            let e = 1.0 / self.epsilon;
            return MapPoint {
                y: [0.0, 0.0],
                j: [[e, 0.0], [0.0, e]],
                det: e * e,
            };
        }
        let (f, fp, _) = self.radial_derivatives(r);
        let g = f / r;
        let (c, s) = (x[0] / r, x[1] / r);
        // J = f' e_r e_rᵀ + (f/r) e_θ e_θᵀ
        let j = [
            [fp * c * c + g * s * s, (fp - g) * c * s],
            [(fp - g) * c * s, fp * s * s + g * c * c],
        ];
        MapPoint {
            y: [g * x[0], g * x[1]],
            j,
            det: fp * g,
        }
    }

    /// `H[k][p][q] = ∂²F_k / ∂x_p ∂x_q`, evaluated in the polar frame and rotated.
    pub fn second_derivatives(&self, x: [f64; 2]) -> Tensor3 {
        let r = x[0].hypot(x[1]);
        // the map is linear in the ball and outside the cloak
        if r < self.epsilon || r >= 2.0 {
            return Tensor3::zero();
        }
        let (f, fp, fpp) = self.radial_derivatives(r);
        let gp = (fp * r - f) / (r * r);
        let mut h = Tensor3::zero();
        h.set(0, 0, 0, fpp);
        h.set(0, 1, 1, gp);
        h.set(1, 0, 1, gp);
        h.set(1, 1, 0, gp);
        h.rotate(&polar_frame(x[1].atan2(x[0])))
    }
}

pub fn kohn_radial(epsilon: f64, r: f64) -> Result<f64> {
    let m = KohnMap::new(epsilon)?;
    if r < 0.0 {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    Ok(m.radial(r))
}

pub fn kohn_map(epsilon: f64, x: [f64; 2]) -> Result<MapPoint> {
    Ok(KohnMap::new(epsilon)?.map(x))
}

/// `[F*C]_ijkl = (1/det J) Σ_pq J_ip J_kq C_pjql`
pub fn pushforward_cosserat(c: &Tensor4, j: &Mat2, det: f64) -> Result<Tensor4> {
    if !(det > 0.0) {
        return Err(Error::SingularMap(det));
    }
    Ok(Tensor4::from_fn(|i, jj, k, l| {
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                acc += j[i][p] * j[k][q] * c.get(p, jj, q, l);
            }
        }
        acc / det
    }))
}

/// The four push-forward tensors as they appear in the change-of-variables formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WillisPushforward {
    pub f1: Tensor4,
    pub f2: Tensor3,
    pub f3: Tensor3,
    pub f4: Mat2,
}

pub fn pushforward_willis(c: &Tensor4, j: &Mat2, h: &Tensor3, det: f64) -> Result<WillisPushforward> {
    if !(det > 0.0) {
        return Err(Error::SingularMap(det));
    }
    let inv = 1.0 / det;
    let f1 = Tensor4::from_fn(|i, jj, k, l| {
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        acc += c.get(p, q, r, s) * j[k][r] * j[l][s] * j[i][p] * j[jj][q];
                    }
                }
            }
        }
        acc * inv
    });
    let f2 = Tensor3::from_fn(|i, jj, k| {
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        acc += c.get(p, q, r, s) * h.get(k, r, s) * j[i][p] * j[jj][q];
                    }
                }
            }
        }
        acc * inv
    });
    let f3 = Tensor3::from_fn(|i, jj, k| {
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                for r in 0..2 {
                    for s in 0..2 {
                        acc += c.get(p, q, r, s) * j[jj][r] * j[k][s] * h.get(i, p, q);
                    }
                }
            }
        }
        acc * inv
    });
    let mut f4 = [[0.0; 2]; 2];
    for (i, row) in f4.iter_mut().enumerate() {
        for (jj, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    for r in 0..2 {
                        for s in 0..2 {
                            acc += c.get(p, q, r, s) * h.get(jj, r, s) * h.get(i, p, q);
                        }
                    }
                }
            }
            *v = acc * inv;
        }
    }
    Ok(WillisPushforward { f1, f2, f3, f4 })
}

/// Coefficients of `∇·(C:∇u + D·u) + S:∇u + B u = 0` with
/// `(D·u)_ij = D_ijk u_k`, `(S:∇u)_i = S_ijk ∂_k u_j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WillisTensors {
    pub c: Tensor4,
    pub d: Tensor3,
    pub s: Tensor3,
    pub b: Mat2,
}

impl WillisTensors {
    pub fn elastic(c: Tensor4) -> Self {
        WillisTensors {
            c,
            ..Default::default()
        }
    }

    /// Euler-Lagrange equation of the transformed energy: the first-order and
    /// zeroth-order terms enter with a minus sign.
    pub fn from_pushforward(pf: &WillisPushforward) -> Self {
        WillisTensors {
            c: pf.f1,
            d: pf.f2,
            s: -1.0 * pf.f3,
            b: [[-pf.f4[0][0], -pf.f4[0][1]], [-pf.f4[1][0], -pf.f4[1][1]]],
        }
    }

    pub fn rotate(&self, r: &Mat2) -> Self {
        WillisTensors {
            c: self.c.rotate(r),
            d: self.d.rotate(r),
            s: self.s.rotate(r),
            b: rotate2(&self.b, r),
        }
    }

    /// Scale of the geometry: the map `x ↦ L F(x/L)` leaves `C` unchanged and
    /// divides `D`, `S` by `L` and `B` by `L²`.
    pub fn rescaled(&self, length: f64) -> Self {
        let b = 1.0 / (length * length);
        WillisTensors {
            c: self.c,
            d: (1.0 / length) * self.d,
            s: (1.0 / length) * self.s,
            b: [[b * self.b[0][0], b * self.b[0][1]], [b * self.b[1][0], b * self.b[1][1]]],
        }
    }
}

/// Nonzero cylindrical components of a rank-4 tensor with `rθ` coupling only
/// through the shear slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarProfile {
    pub rrrr: f64,
    pub tttt: f64,
    pub rrtt: f64,
    pub ttrr: f64,
    pub rttr: f64,
    pub trrt: f64,
    pub rtrt: f64,
    pub trtr: f64,
}

impl PolarProfile {
    pub const NAMES: [&'static str; 8] = [
        "rrrr", "tttt", "rrtt", "ttrr", "rttr", "trrt", "rtrt", "trtr",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.rrrr, self.tttt, self.rrtt, self.ttrr, self.rttr, self.trrt, self.rtrt, self.trtr,
        ]
    }

    /// Components in the polar frame, index 0 = r, 1 = θ.
    pub fn to_tensor(&self) -> Tensor4 {
        let mut t = Tensor4::zero();
        t.set(0, 0, 0, 0, self.rrrr);
        t.set(1, 1, 1, 1, self.tttt);
        t.set(0, 0, 1, 1, self.rrtt);
        t.set(1, 1, 0, 0, self.ttrr);
        t.set(0, 1, 1, 0, self.rttr);
        t.set(1, 0, 0, 1, self.trrt);
        t.set(0, 1, 0, 1, self.rtrt);
        t.set(1, 0, 1, 0, self.trtr);
        t
    }

    pub fn from_tensor(t: &Tensor4) -> Self {
        PolarProfile {
            rrrr: t.get(0, 0, 0, 0),
            tttt: t.get(1, 1, 1, 1),
            rrtt: t.get(0, 0, 1, 1),
            ttrr: t.get(1, 1, 0, 0),
            rttr: t.get(0, 1, 1, 0),
            trrt: t.get(1, 0, 0, 1),
            rtrt: t.get(0, 1, 0, 1),
            trtr: t.get(1, 0, 1, 0),
        }
    }
}

pub fn polar_to_cartesian(t: &Tensor4, theta: f64) -> Tensor4 {
    t.rotate(&polar_frame(theta))
}

pub fn polar_to_cartesian3(t: &Tensor3, theta: f64) -> Tensor3 {
    t.rotate(&polar_frame(theta))
}

pub fn polar_to_cartesian2(t: &Mat2, theta: f64) -> Mat2 {
    rotate2(t, &polar_frame(theta))
}

fn check_annulus(epsilon: f64, rp: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon = {epsilon} not in (0, 1]")));
    }
    if !(1.0..=2.0).contains(&rp) {
        return Err(Error::Domain(format!("r' = {rp} outside [1, 2]")));
    }
    Ok(())
}

/// `a(ε, r') = ((ε-2) r' - 2(ε-1)) / ((ε-2) r')`, the ratio of pre-image to image radius over `2-ε`.
pub fn cosserat_a(epsilon: f64, rp: f64) -> f64 {
    ((epsilon - 2.0) * rp - 2.0 * (epsilon - 1.0)) / ((epsilon - 2.0) * rp)
}

fn cosserat_profile_unchecked(epsilon: f64, rp: f64, mat0: &IsotropicMaterial) -> PolarProfile {
    let a = cosserat_a(epsilon, rp);
    let m = mat0.p_modulus();
    PolarProfile {
        rrrr: a * m,
        tttt: m / a,
        rrtt: mat0.lambda,
        ttrr: mat0.lambda,
        rttr: mat0.mu,
        trrt: mat0.mu,
        rtrt: a * mat0.mu,
        trtr: mat0.mu / a,
    }
}

pub fn cosserat_cloak_polar(epsilon: f64, rp: f64, mat0: &IsotropicMaterial) -> Result<PolarProfile> {
    check_annulus(epsilon, rp)?;
    Ok(cosserat_profile_unchecked(epsilon, rp, mat0))
}

/// Willis cloak in the polar frame: rank-4 part plus the equation coefficients
/// `D`, `S`, `B` of [`WillisTensors`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WillisPolar {
    pub c4: PolarProfile,
    pub d3: Tensor3,
    pub s3: Tensor3,
    pub b2: Mat2,
}

impl WillisPolar {
    pub fn to_tensors(&self) -> WillisTensors {
        WillisTensors {
            c: self.c4.to_tensor(),
            d: self.d3,
            s: self.s3,
            b: self.b2,
        }
    }
}

fn willis_polar_unchecked(epsilon: f64, rp: f64, mat0: &IsotropicMaterial) -> WillisPolar {
    let s = 2.0 - epsilon;
    let c = 2.0 - 2.0 * epsilon;
    let r = s * rp - c;
    let (lam, mu, m) = (mat0.lambda, mat0.mu, mat0.p_modulus());
    let shear = rp / (s * r);
    let c4 = PolarProfile {
        rrrr: r / (rp * s.powi(3)) * m,
        tttt: s * rp.powi(3) / r.powi(3) * m,
        rrtt: shear * lam,
        ttrr: shear * lam,
        rttr: shear * mu,
        trrt: shear * mu,
        rtrt: shear * mu,
        trtr: shear * mu,
    };
    let mut d3 = Tensor3::zero();
    d3.set(0, 0, 0, -c * lam / (s * s * r * rp));
    d3.set(1, 1, 0, -c * rp * m / r.powi(3));
    d3.set(0, 1, 1, -2.0 * c * mu / (s * r * r));
    d3.set(1, 0, 1, -2.0 * c * mu / (s * r * r));
    let s3 = Tensor3::from_fn(|i, j, k| -d3.get(j, k, i));
    let w = c * c / (s * r.powi(3) * rp);
    let b2 = [[-m * w, 0.0], [0.0, -4.0 * mu * w]];
    WillisPolar { c4, d3, s3, b2 }
}

pub fn willis_cloak_polar(epsilon: f64, rp: f64, mat0: &IsotropicMaterial) -> Result<WillisPolar> {
    check_annulus(epsilon, rp)?;
    Ok(willis_polar_unchecked(epsilon, rp, mat0))
}

/// Cosserat cloak in Cartesian components on an annulus of inner radius `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosseratCloak {
    pub epsilon: f64,
    pub mat0: IsotropicMaterial,
    pub length: f64,
}

impl CosseratCloak {
    pub fn new(epsilon: f64, mat0: IsotropicMaterial, length: f64) -> Result<Self> {
        KohnMap::new(epsilon)?;
        mat0.check(2)?;
        Ok(CosseratCloak { epsilon, mat0, length })
    }

    /// Radii just off `[1, 2]` (polygonized interfaces) are clamped.
    pub fn tensor_at(&self, y: [f64; 2]) -> Tensor4 {
        let rp = (y[0].hypot(y[1]) / self.length).clamp(1.0, 2.0);
        cosserat_profile_unchecked(self.epsilon, rp, &self.mat0)
            .to_tensor()
            .rotate(&polar_frame(y[1].atan2(y[0])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WillisCloak {
    pub epsilon: f64,
    pub mat0: IsotropicMaterial,
    pub length: f64,
}

impl WillisCloak {
    pub fn new(epsilon: f64, mat0: IsotropicMaterial, length: f64) -> Result<Self> {
        KohnMap::new(epsilon)?;
        mat0.check(2)?;
        Ok(WillisCloak { epsilon, mat0, length })
    }

    pub fn tensors_at(&self, y: [f64; 2]) -> WillisTensors {
        let rp = (y[0].hypot(y[1]) / self.length).clamp(1.0, 2.0);
        willis_polar_unchecked(self.epsilon, rp, &self.mat0)
            .to_tensors()
            .rotate(&polar_frame(y[1].atan2(y[0])))
            .rescaled(self.length)
    }

    /// `G` with `u'_outside = G u'_annulus` across the cloak boundary nearest
    /// to `y`; the outside is the ball for `r' = L` and the exterior for
    /// `r' = 2L`. The gauge `u' = J⁻ᵀ u` jumps there because `J_rr = 1/(2-ε)`
    /// in the annulus, `1/ε` in the ball and `1` outside.
    pub fn interface_gauge(&self, y: [f64; 2]) -> Mat2 {
        let s = 2.0 - self.epsilon;
        let radial = if y[0].hypot(y[1]) < 1.5 * self.length {
            self.epsilon / s
        } else {
            1.0 / s
        };
        let polar = [[radial, 0.0], [0.0, 1.0]];
        polar_to_cartesian2(&polar, y[1].atan2(y[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn radial_examples() {
        assert_eq!(kohn_radial(1.0, 0.7).unwrap(), 0.7);
        assert!((kohn_radial(0.2, 0.2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kohn_radial(0.2, 2.0).unwrap(), 2.0);
        assert!(kohn_radial(0.0, 1.0).is_err());
        assert!(kohn_radial(1.5, 1.0).is_err());
    }

    #[test]
    fn middle_branch_agrees_at_epsilon() {
        let m = KohnMap::new(0.2).unwrap();
        assert!((m.radial(0.2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn map_examples() {
        let p = kohn_map(1.0, [0.3, 0.4]).unwrap();
        assert!((p.y[0] - 0.3).abs() < 1e-15 && (p.y[1] - 0.4).abs() < 1e-15);
        assert!((p.j[0][0] - 1.0).abs() < 1e-15 && p.j[0][1].abs() < 1e-15);

        // derivatives at the kink r = ε are taken from the annulus side
        let p = kohn_map(0.2, [0.2, 0.0]).unwrap();
        assert!((p.y[0] - 1.0).abs() < 1e-14);
        assert!((p.j[0][0] - 1.0 / 1.8).abs() < 1e-14);
        assert!((p.j[1][1] - 5.0).abs() < 1e-12);

        let p = kohn_map(0.2, [3.0, 0.0]).unwrap();
        assert_eq!(p.y, [3.0, 0.0]);
        assert_eq!(p.det, 1.0);

        let p = kohn_map(0.2, [0.0, 0.0]).unwrap();
        assert!((p.j[0][0] - 5.0).abs() < 1e-15 && (p.det - 25.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_radial_round_trip() {
        let m = KohnMap::new(0.3).unwrap();
        for k in 0..=40 {
            let r = 0.05 * k as f64 + 0.01;
            assert!((m.inverse_radial(m.radial(r)) - r).abs() < 1e-13);
        }
    }

    #[test]
    fn cosserat_a_examples() {
        assert!(rel(cosserat_a(0.2, 1.0), 0.2 / 1.8) < 1e-14);
        assert!(rel(cosserat_a(0.2, 2.0), 1.0 / 1.8) < 1e-14);
        let p = cosserat_cloak_polar(1.0, 1.3, &IsotropicMaterial::steel()).unwrap();
        assert!(rel(p.rrrr, 3e11) < 1e-14 && rel(p.trtr, 7.5e10) < 1e-14);
        assert!(cosserat_cloak_polar(0.2, 0.9, &IsotropicMaterial::steel()).is_err());
    }

    #[test]
    fn willis_rrrr_at_outer_interface() {
        let w = willis_cloak_polar(0.2, 2.0, &IsotropicMaterial::steel()).unwrap();
        let expect = (2.0 * 1.8 + 2.0 * (-0.8)) / (2.0 * 1.8_f64.powi(3)) * 3e11;
        assert!(rel(w.c4.rrrr, expect) < 1e-13);
        assert!((w.c4.rrrr - 5.144e10).abs() < 1e7);
    }

    #[test]
    fn identity_pushforward() {
        let c = Tensor4::isotropic(2.0, 3.0);
        let i = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(pushforward_cosserat(&c, &i, 1.0).unwrap(), c);
        let w = pushforward_willis(&c, &i, &Tensor3::zero(), 1.0).unwrap();
        assert_eq!(w.f1, c);
        assert_eq!(w.f2, Tensor3::zero());
        assert_eq!(w.f4, [[0.0; 2]; 2]);
        assert!(pushforward_cosserat(&c, &i, 0.0).is_err());
    }

    #[test]
    fn conformal_scaling_is_neutral_in_2d() {
        let c = Tensor4::isotropic(1.5e11, 7.5e10);
        let j = [[2.0, 0.0], [0.0, 2.0]];
        let p = pushforward_cosserat(&c, &j, 4.0).unwrap();
        for (a, b) in p.c.iter().zip(c.c) {
            assert!((a - b).abs() <= 1e-15 * 3e11);
        }
    }

    #[test]
    fn second_derivatives_match_finite_differences() {
        let m = KohnMap::new(0.35).unwrap();
        let x = [0.9, -0.7];
        let h = m.second_derivatives(x);
        let step = 1e-4;
        for p in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[p] += step;
            xm[p] -= step;
            let (jp, jm) = (m.map(xp).j, m.map(xm).j);
            for k in 0..2 {
                for q in 0..2 {
                    let fd = (jp[k][q] - jm[k][q]) / (2.0 * step);
                    assert!((fd - h.get(k, q, p)).abs() < 1e-7, "{k}{q}{p}");
                }
            }
        }
    }
}
