//! Isotropic materials, derived moduli and quadratic-form bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::tensor::{Mat2, Tensor4};

/// Lamé pair in N/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicMaterial {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicMaterial {
    /// Validates strong convexity in two dimensions.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        Self::new_in(lambda, mu, 2)
    }

    pub fn new_in(lambda: f64, mu: f64, d: usize) -> Result<Self> {
        let m = IsotropicMaterial { lambda, mu };
        m.check(d)?;
        Ok(m)
    }

    pub fn check(&self, d: usize) -> Result<()> {
        if !(self.lambda.is_finite() && self.mu.is_finite()) {
            return Err(Error::Convexity("non-finite Lamé parameter".into()));
        }
        if self.mu <= 0.0 {
            return Err(Error::Convexity(format!("mu = {} must be positive", self.mu)));
        }
        let dl = d as f64 * self.lambda + 2.0 * self.mu;
        if dl <= 0.0 {
            return Err(Error::Convexity(format!(
                "{d}*lambda + 2*mu = {dl} must be positive"
            )));
        }
        Ok(())
    }

    /// Plane P-wave modulus λ + 2μ.
    pub fn p_modulus(&self) -> f64 {
        self.lambda + 2.0 * self.mu
    }

    pub fn scaled(&self, eta: f64) -> Self {
        IsotropicMaterial {
            lambda: eta * self.lambda,
            mu: eta * self.mu,
        }
    }

    pub fn steel() -> Self {
        IsotropicMaterial {
            lambda: 1.5e11,
            mu: 7.5e10,
        }
    }

    pub fn aluminium() -> Self {
        IsotropicMaterial {
            lambda: 5.1e10,
            mu: 2.6e10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedModuli {
    pub nu: f64,
    pub kappa: f64,
    pub young: f64,
}

pub fn isotropic_tensor(mat: &IsotropicMaterial, d: usize) -> Result<Tensor4> {
    if d != 2 {
        return Err(Error::Parameter(format!(
            "tensors are materialized in 2D only, got d = {d}"
        )));
    }
    mat.check(d)?;
    Ok(Tensor4::isotropic(mat.lambda, mat.mu))
}

pub fn derived_moduli(mat: &IsotropicMaterial, d: usize) -> Result<DerivedModuli> {
    mat.check(d)?;
    let (l, m, df) = (mat.lambda, mat.mu, d as f64);
    let den = (df - 1.0) * l + 2.0 * m;
    Ok(DerivedModuli {
        nu: l / den,
        kappa: (df * l + 2.0 * m) / df,
        young: 2.0 * m * (df * l + 2.0 * m) / den,
    })
}

/// `Σ C_ijkl A_ij A_kl`
pub fn quadratic_form(c: &Tensor4, a: &Mat2) -> f64 {
    let s = c.contract(a);
    s[0][0] * a[0][0] + s[0][1] * a[0][1] + s[1][0] * a[1][0] + s[1][1] * a[1][1]
}

pub fn is_ordered(m1: &IsotropicMaterial, m2: &IsotropicMaterial, d: usize) -> bool {
    let df = d as f64;
    df * m1.lambda + 2.0 * m1.mu <= df * m2.lambda + 2.0 * m2.mu && m1.mu <= m2.mu
}

/// `(min, max)` of `{dλ + 2μ, 2μ}`.
pub fn form_bounds(mat: &IsotropicMaterial, d: usize) -> (f64, f64) {
    let a = d as f64 * mat.lambda + 2.0 * mat.mu;
    let b = 2.0 * mat.mu;
    (a.min(b), a.max(b))
}

pub fn random_symmetric(rng: &mut impl Rng) -> Mat2 {
    let a = rng.gen_range(-1.0..1.0);
    let b = rng.gen_range(-1.0..1.0);
    let c = rng.gen_range(-1.0..1.0);
    [[a, b], [b, c]]
}

/// Sampled ordering test for general tensors: `(C2 - C1):A:A ≥ -tol‖A‖²·max|C|`
/// on `samples` random symmetric `A`.
pub fn is_ordered_sampled(c1: &Tensor4, c2: &Tensor4, samples: usize, seed: u64) -> bool {
    let diff = *c2 - *c1;
    let scale = c1.max_abs().max(c2.max_abs());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).all(|_| {
        let a = random_symmetric(&mut rng);
        let n2 = crate::tensor::frobenius(&a).powi(2);
        quadratic_form(&diff, &a) >= -1e-12 * scale * n2
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn pure_shear_components() {
        let c = isotropic_tensor(&IsotropicMaterial::new(0.0, 1.0).unwrap(), 2).unwrap();
        assert_eq!(c.get(0, 0, 0, 0), 2.0);
        assert_eq!(c.get(0, 0, 1, 1), 0.0);
        assert_eq!(c.get(0, 1, 0, 1), 1.0);
    }

    #[test]
    fn steel_components() {
        let c = isotropic_tensor(&IsotropicMaterial::steel(), 2).unwrap();
        assert!(close(c.get(0, 0, 0, 0), 3.0e11, 1e-15));
        assert!(close(c.get(0, 0, 1, 1), 1.5e11, 1e-15));
        assert!(close(c.get(0, 1, 0, 1), 7.5e10, 1e-15));
    }

    #[test]
    fn zero_shear_rejected() {
        assert!(matches!(
            IsotropicMaterial::new(1.0, 0.0),
            Err(Error::Convexity(_))
        ));
    }

    #[test]
    fn moduli_examples() {
        let m = derived_moduli(&IsotropicMaterial { lambda: 1.0, mu: 1.0 }, 3).unwrap();
        assert!(close(m.nu, 0.25, 1e-15));
        let m = derived_moduli(&IsotropicMaterial { lambda: 0.0, mu: 1.0 }, 2).unwrap();
        assert_eq!((m.nu, m.kappa, m.young), (0.0, 1.0, 2.0));
        let m = derived_moduli(&IsotropicMaterial::steel(), 2).unwrap();
        assert!(close(m.kappa, 2.25e11, 1e-15));
    }

    #[test]
    fn quadratic_form_examples() {
        let i = [[1.0, 0.0], [0.0, 1.0]];
        let c = Tensor4::isotropic(0.0, 1.0);
        assert_eq!(quadratic_form(&c, &i), 4.0);
        assert_eq!(quadratic_form(&c, &[[0.0; 2]; 2]), 0.0);
        let c = Tensor4::isotropic(1.0, 1.0);
        assert_eq!(quadratic_form(&c, &i), 8.0);
    }

    #[test]
    fn ordering_examples() {
        let m = |l, u| IsotropicMaterial { lambda: l, mu: u };
        assert!(is_ordered(&m(1.0, 1.0), &m(2.0, 2.0), 2));
        assert!(is_ordered(&m(1.0, 1.0), &m(1.0, 1.0), 2));
        assert!(!is_ordered(&m(10.0, 1.0), &m(1.0, 2.0), 2));
    }

    #[test]
    fn bounds_examples() {
        let m = |l, u| IsotropicMaterial { lambda: l, mu: u };
        assert_eq!(form_bounds(&m(0.0, 1.0), 2), (2.0, 2.0));
        assert_eq!(form_bounds(&IsotropicMaterial::steel(), 2), (1.5e11, 4.5e11));
        let (lo, hi) = form_bounds(&m(-0.4, 1.0), 2);
        assert!(close(lo, 1.2, 1e-14) && hi == 2.0);
    }

    #[test]
    fn isotropic_major_symmetry_is_bitwise() {
        let c = Tensor4::isotropic(1.234e11, 5.678e10);
        assert_eq!(c.major_asymmetry(), 0.0);
        assert_eq!(c.minor_asymmetry(), 0.0);
    }
}
