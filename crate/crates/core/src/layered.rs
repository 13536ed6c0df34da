//! Symmetrized Cosserat tensor, two-phase laminate averaging and layered
//! isotropic approximations of the cloak.

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::IsotropicMaterial;
use crate::tensor::{polar_frame, Tensor4};
use crate::transform::{cosserat_a, cosserat_cloak_polar, KohnMap, PolarProfile};

/// Shear weight `(2 + a + 1/a) / 4`; at least 1 for `a > 0`.
pub fn beta(a: f64) -> f64 {
    0.25 * (2.0 + a + 1.0 / a)
}

/// Cosserat profile with the four shear slots replaced by `β μ₀`.
pub fn symmetrize_cosserat(epsilon: f64, rp: f64, mat0: &IsotropicMaterial) -> Result<PolarProfile> {
    let mut p = cosserat_cloak_polar(epsilon, rp, mat0)?;
    let s = beta(cosserat_a(epsilon, rp)) * mat0.mu;
    p.rttr = s;
    p.trrt = s;
    p.rtrt = s;
    p.trtr = s;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrizedCloak {
    pub epsilon: f64,
    pub mat0: IsotropicMaterial,
    pub length: f64,
}

impl SymmetrizedCloak {
    pub fn new(epsilon: f64, mat0: IsotropicMaterial, length: f64) -> Result<Self> {
        KohnMap::new(epsilon)?;
        mat0.check(2)?;
        Ok(SymmetrizedCloak { epsilon, mat0, length })
    }

    pub fn tensor_at(&self, y: [f64; 2]) -> Tensor4 {
        let rp = (y[0].hypot(y[1]) / self.length).clamp(1.0, 2.0);
        symmetrize_cosserat(self.epsilon, rp, &self.mat0)
            .expect("clamped radius")
            .to_tensor()
            .rotate(&polar_frame(y[1].atan2(y[0])))
    }
}

/// Two isotropic phases stacked with equal volume fractions, normal along `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaminateSpec {
    pub lam1: f64,
    pub mu1: f64,
    pub lam2: f64,
    pub mu2: f64,
}

impl LaminateSpec {
    pub fn phases(&self) -> (IsotropicMaterial, IsotropicMaterial) {
        (
            IsotropicMaterial {
                lambda: self.lam1,
                mu: self.mu1,
            },
            IsotropicMaterial {
                lambda: self.lam2,
                mu: self.mu2,
            },
        )
    }

    pub fn check(&self) -> Result<()> {
        let (a, b) = self.phases();
        a.check(2)?;
        b.check(2)
    }
}

/// Effective laminate components in the lamination frame (normal = r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackusComponents {
    pub rrrr: f64,
    pub rtrt: f64,
    pub rrtt: f64,
    pub tttt: f64,
}

impl BackusComponents {
    pub fn values(&self) -> [f64; 4] {
        [self.rrrr, self.rtrt, self.rrtt, self.tttt]
    }

    pub fn from_values(v: [f64; 4]) -> Self {
        BackusComponents {
            rrrr: v[0],
            rtrt: v[1],
            rrtt: v[2],
            tttt: v[3],
        }
    }

    pub fn from_profile(p: &PolarProfile) -> Self {
        BackusComponents {
            rrrr: p.rrrr,
            rtrt: p.rtrt,
            rrtt: p.rrtt,
            tttt: p.tttt,
        }
    }

    /// Full tensor in the lamination frame; all shear slots equal `rtrt`.
    pub fn to_tensor(&self) -> Tensor4 {
        PolarProfile {
            rrrr: self.rrrr,
            tttt: self.tttt,
            rrtt: self.rrtt,
            ttrr: self.rrtt,
            rttr: self.rtrt,
            trrt: self.rtrt,
            rtrt: self.rtrt,
            trtr: self.rtrt,
        }
        .to_tensor()
    }

    /// Largest componentwise relative mismatch, each component measured against
    /// `max(|target_c|, 1e-12 max|target|)`.
    pub fn relative_residual(&self, target: &BackusComponents) -> f64 {
        let t = target.values();
        let floor = 1e-12 * t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        self.values()
            .iter()
            .zip(t)
            .map(|(v, tv)| (v - tv).abs() / tv.abs().max(floor))
            .fold(0.0, f64::max)
    }
}

pub fn backus_effective(spec: &LaminateSpec) -> BackusComponents {
    let m1 = spec.lam1 + 2.0 * spec.mu1;
    let m2 = spec.lam2 + 2.0 * spec.mu2;
    let rrrr = 2.0 * m1 * m2 / (m1 + m2);
    let rtrt = 2.0 * spec.mu1 * spec.mu2 / (spec.mu1 + spec.mu2);
    let rrtt = (spec.lam1 * m2 + spec.lam2 * m1) / (m1 + m2);
    let inplane = 0.5
        * (4.0 * spec.mu1 * (spec.lam1 + spec.mu1) / m1
            + 4.0 * spec.mu2 * (spec.lam2 + spec.mu2) / m2);
    BackusComponents {
        rrrr,
        rtrt,
        rrtt,
        tttt: inplane + rrtt * rrtt / rrrr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub spec: LaminateSpec,
    pub residual: f64,
}

// Unknowns x = (ln μ1, ln(λ1+μ1), ln μ2, ln(λ2+μ2)) in units of `scale`; every
// iterate is a strongly convex pair.
//
// Each coordinate stays in [LOG_MIN, LOG_MAX]: unrealizable targets otherwise
// drive one phase towards incompressibility without bound.
const LOG_MIN: f64 = -13.815510557964274; // ln 1e-6
const LOG_MAX: f64 = 6.907755278982137; // ln 1e3

fn spec_of(x: &[f64; 4], scale: f64) -> LaminateSpec {
    let mu1 = x[0].exp();
    let mu2 = x[2].exp();
    LaminateSpec {
        lam1: (x[1].exp() - mu1) * scale,
        mu1: mu1 * scale,
        lam2: (x[3].exp() - mu2) * scale,
        mu2: mu2 * scale,
    }
}

fn residual_vec(x: &[f64; 4], scale: f64, target: &[f64; 4], weights: &[f64; 4]) -> [f64; 4] {
    let v = backus_effective(&spec_of(x, scale)).values();
    let mut r = [0.0; 4];
    for c in 0..4 {
        r[c] = (v[c] - target[c]) * weights[c];
    }
    r
}

fn norm2(r: &[f64; 4]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn levenberg_marquardt(x0: [f64; 4], scale: f64, target: &[f64; 4], w: &[f64; 4]) -> [f64; 4] {
    let mut x = x0;
    let mut r = residual_vec(&x, scale, target, w);
    let mut f = norm2(&r);
    let mut damping = 1e-3;
    for _ in 0..400 {
        if !f.is_finite() || f < 1e-30 {
            break;
        }
        let mut jac = [[0.0; 4]; 4];
        for p in 0..4 {
            let h = 1e-7 * (1.0 + x[p].abs());
            let mut xp = x;
            let mut xm = x;
            xp[p] += h;
            xm[p] -= h;
            let (rp, rm) = (
                residual_vec(&xp, scale, target, w),
                residual_vec(&xm, scale, target, w),
            );
            for c in 0..4 {
                jac[c][p] = (rp[c] - rm[c]) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                jtj[a][b] = (0..4).map(|c| jac[c][a] * jac[c][b]).sum();
            }
            jtr[a] = (0..4).map(|c| jac[c][a] * r[c]).sum();
        }
        let mut improved = false;
        for _ in 0..30 {
            let a = Mat::from_fn(4, 4, |i, j| if i == j { jtj[i][j] * (1.0 + damping) + 1e-300 } else { jtj[i][j] });
            let sol = a.partial_piv_lu().solve(Mat::from_fn(4, 1, |i, _| -jtr[i]));
            let step: Vec<f64> = (0..4).map(|i| sol[(i, 0)]).collect();
            if step.iter().any(|v| !v.is_finite()) {
                damping *= 10.0;
                continue;
            }
            let mut xn = x;
            for p in 0..4 {
                xn[p] = (xn[p] + step[p].clamp(-2.0, 2.0)).clamp(LOG_MIN, LOG_MAX);
            }
            let rn = residual_vec(&xn, scale, target, w);
            let fn_ = norm2(&rn);
            if fn_.is_finite() && fn_ < f {
                let rel_drop = (f - fn_) / f;
                x = xn;
                r = rn;
                f = fn_;
                damping = (damping * 0.3).max(1e-12);
                improved = rel_drop > 1e-14;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    x
}

fn starts(target: &BackusComponents, scale: f64) -> Vec<[f64; 4]> {
    let mbar = target.rrrr.abs().max(1e-12 * scale) / scale;
    let sbar = target.rtrt.abs().max(1e-12 * scale) / scale;
    let mut out = Vec::with_capacity(8);
    for t in [1.0_f64, 4.0, 16.0, 64.0] {
        let g = t.sqrt();
        let c = 0.5 * (g + 1.0 / g);
        for flip in [false, true] {
            let (ms1, ms2) = (mbar * g * c, mbar / g * c);
            let (s1, s2) = if flip {
                (sbar / g * c, sbar * g * c)
            } else {
                (sbar * g * c, sbar / g * c)
            };
            // λ + μ = M - μ, kept positive
            let lm1 = (ms1 - s1).max(0.05 * s1);
            let lm2 = (ms2 - s2).max(0.05 * s2);
            out.push([s1, lm1, s2, lm2].map(|v| v.ln().clamp(LOG_MIN, LOG_MAX)));
        }
    }
    out
}

// With a = 1/M, the averages of a, 1/μ and μa are fixed directly by the
// target. Writing μ = m(1 ± δ) and a = A ± α leaves a closed form for m, δ
// and α; the two signs of δ are the phase swap.
fn invert_closed_form(target: &BackusComponents) -> Option<LaminateSpec> {
    let a = 1.0 / target.rrrr;
    let p = 0.5 * (1.0 - target.rrtt * a);
    let q = target.tttt - target.rrtt * target.rrtt * a;
    let m = q / (4.0 * (1.0 - 2.0 * p + a * target.rtrt));
    let d2 = 1.0 - target.rtrt / m;
    if !(m > 0.0) || !(-1e-12..1.0).contains(&d2) {
        return None;
    }
    let d = d2.max(0.0).sqrt();
    let alpha = if d > 0.0 { (p / m - a) / d } else { 0.0 };
    let phase = |sign: f64| {
        let mu = m * (1.0 + sign * d);
        let big_m = 1.0 / (a + sign * alpha);
        (big_m - 2.0 * mu, mu)
    };
    let ((lam1, mu1), (lam2, mu2)) = (phase(1.0), phase(-1.0));
    let spec = LaminateSpec { lam1, mu1, lam2, mu2 };
    let swapped = LaminateSpec { lam1: lam2, mu1: mu2, lam2: lam1, mu2: mu1 };
    let spec = if [lam2, mu2] < [lam1, mu1] { swapped } else { spec };
    (spec.check().is_ok() && [lam1, mu1, lam2, mu2].iter().all(|v| v.is_finite())).then_some(spec)
}

/// Best convex laminate for `target`. Realizable targets are inverted in
/// closed form; otherwise eight multi-started damped Gauss-Newton runs pick
/// the closest fit. Never fails; see [`invert_backus`] for the tolerance check.
pub fn invert_backus_best(target: &BackusComponents) -> Inversion {
    if let Some(spec) = invert_closed_form(target) {
        let residual = backus_effective(&spec).relative_residual(target);
        if residual <= REALIZABILITY_TOL {
            return Inversion { spec, residual };
        }
    }
    let t = target.values();
    let scale = t.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut w = [0.0; 4];
    for c in 0..4 {
        w[c] = 1.0 / t[c].abs().max(1e-12 * scale);
    }
    let mut best: Option<Inversion> = None;
    for x0 in starts(target, scale) {
        let x = levenberg_marquardt(x0, scale, &t, &w);
        let spec = spec_of(&x, scale);
        let residual = backus_effective(&spec).relative_residual(target);
        let cand = Inversion { spec, residual };
        let better = match &best {
            None => true,
            Some(b) => {
                cand.residual < b.residual
                    || (cand.residual == b.residual
                        && [spec.lam1, spec.mu1, spec.lam2, spec.mu2]
                            < [b.spec.lam1, b.spec.mu1, b.spec.lam2, b.spec.mu2])
            }
        };
        if residual.is_finite() && better {
            best = Some(cand);
        }
    }
    best.unwrap_or(Inversion {
        spec: LaminateSpec {
            lam1: f64::NAN,
            mu1: f64::NAN,
            lam2: f64::NAN,
            mu2: f64::NAN,
        },
        residual: f64::INFINITY,
    })
}

pub const REALIZABILITY_TOL: f64 = 1e-8;

pub fn invert_backus(target: &BackusComponents) -> Result<LaminateSpec> {
    let inv = invert_backus_best(target);
    if inv.residual <= REALIZABILITY_TOL && inv.spec.check().is_ok() {
        Ok(inv.spec)
    } else {
        Err(Error::Realizability {
            best_residual: inv.residual,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub r_inner: f64,
    pub r_outer: f64,
    pub material: IsotropicMaterial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredCloak {
    pub n: usize,
    pub epsilon: f64,
    /// Radii of the unit-normalized annulus `[1, 2]`.
    pub layers: Vec<Layer>,
    /// Relative laminate residual of each layer pair.
    pub pair_residuals: Vec<f64>,
}

impl LayeredCloak {
    pub fn max_residual(&self) -> f64 {
        self.pair_residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Layer index containing normalized radius `rp` (clamped to `[1, 2]`).
    pub fn layer_index(&self, rp: f64) -> usize {
        let k = ((rp - 1.0) * self.n as f64).floor();
        (k.max(0.0) as usize).min(self.n - 1)
    }

    /// Layer interfaces strictly inside the annulus.
    pub fn interior_radii(&self) -> Vec<f64> {
        self.layers[1..].iter().map(|l| l.r_inner).collect()
    }
}

/// Which laminate residual is acceptable when building a layered cloak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Realization {
    /// Every pair must match its target within [`REALIZABILITY_TOL`].
    Exact,
    /// Accept the best convex fit and record its residual.
    BestFit,
}

pub fn build_layered_cloak(n: usize, epsilon: f64, mat0: &IsotropicMaterial) -> Result<LayeredCloak> {
    build_layered_cloak_with(n, epsilon, mat0, Realization::Exact)
}

pub fn build_layered_cloak_with(
    n: usize,
    epsilon: f64,
    mat0: &IsotropicMaterial,
    mode: Realization,
) -> Result<LayeredCloak> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Parameter(format!("layer count {n} must be even and >= 2")));
    }
    KohnMap::new(epsilon)?;
    mat0.check(2)?;
    let pairs = n / 2;
    let fits: Vec<Inversion> = crate::par::map_collect(pairs, |p| {
        let mid = 1.0 + (2 * p + 1) as f64 / n as f64;
        let target = BackusComponents::from_profile(
            &symmetrize_cosserat(epsilon, mid, mat0).expect("midpoint inside annulus"),
        );
        invert_backus_best(&target)
    });
    let mut layers = Vec::with_capacity(n);
    let mut pair_residuals = Vec::with_capacity(pairs);
    for (p, fit) in fits.iter().enumerate() {
        if mode == Realization::Exact && fit.residual > REALIZABILITY_TOL {
            return Err(Error::Realizability {
                best_residual: fit.residual,
            });
        }
        fit.spec.check()?;
        let (a, b) = fit.spec.phases();
        for (k, m) in [(2 * p, a), (2 * p + 1, b)] {
            layers.push(Layer {
                r_inner: 1.0 + k as f64 / n as f64,
                r_outer: 1.0 + (k + 1) as f64 / n as f64,
                material: m,
            });
        }
        pair_residuals.push(fit.residual);
    }
    layers.last_mut().expect("n >= 2").r_outer = 2.0;
    Ok(LayeredCloak {
        n,
        epsilon,
        layers,
        pair_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        assert_eq!(beta(1.0), 1.0);
        let a = cosserat_a(0.2, 1.0);
        assert!((beta(a) - 100.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn identical_phases() {
        let b = backus_effective(&LaminateSpec {
            lam1: 1.0,
            mu1: 2.0,
            lam2: 1.0,
            mu2: 2.0,
        });
        assert!((b.rrrr - 5.0).abs() < 1e-14);
        assert!((b.rtrt - 2.0).abs() < 1e-14);
        assert!((b.rrtt - 1.0).abs() < 1e-14);
        assert!((b.tttt - 5.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_shear() {
        let b = backus_effective(&LaminateSpec {
            lam1: 0.0,
            mu1: 1.0,
            lam2: 0.0,
            mu2: 2.0,
        });
        assert!((b.rtrt - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn round_trip_example() {
        let spec = LaminateSpec {
            lam1: 1.0,
            mu1: 1.0,
            lam2: 2.0,
            mu2: 3.0,
        };
        let t = backus_effective(&spec);
        let got = invert_backus(&t).unwrap();
        assert!(backus_effective(&got).relative_residual(&t) < 1e-8);
    }

    #[test]
    fn isotropic_target_is_realizable() {
        let t = BackusComponents {
            rrrr: 4.0,
            rtrt: 1.0,
            rrtt: 2.0,
            tttt: 4.0,
        };
        let got = invert_backus(&t).unwrap();
        assert!(backus_effective(&got).relative_residual(&t) < 1e-8);
        let same = LaminateSpec {
            lam1: 2.0,
            mu1: 1.0,
            lam2: 2.0,
            mu2: 1.0,
        };
        assert!(backus_effective(&same).relative_residual(&t) < 1e-15);
    }

    #[test]
    fn layer_geometry() {
        let lc = build_layered_cloak_with(20, 0.2, &IsotropicMaterial::steel(), Realization::BestFit)
            .unwrap();
        assert_eq!(lc.layers.len(), 20);
        for (k, l) in lc.layers.iter().enumerate() {
            assert!((l.r_outer - l.r_inner - 0.05).abs() < 1e-12, "layer {k}");
            l.material.check(2).unwrap();
        }
        assert_eq!(lc.layers[0].r_inner, 1.0);
        assert_eq!(lc.layers[19].r_outer, 2.0);
        assert_eq!(lc.layer_index(1.0), 0);
        assert_eq!(lc.layer_index(1.999), 19);
        assert_eq!(lc.layer_index(1.07), 1);

        let two = build_layered_cloak_with(2, 0.2, &IsotropicMaterial::steel(), Realization::BestFit)
            .unwrap();
        assert_eq!(two.layers.len(), 2);
        assert!(build_layered_cloak(3, 0.2, &IsotropicMaterial::steel()).is_err());
    }
}
