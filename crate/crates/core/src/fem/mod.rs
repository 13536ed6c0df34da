//! P1/P2 finite elements for heterogeneous, possibly Cosserat or Willis, elasticity.
//!
//! Displacement degrees of freedom are interleaved: node `n` carries `2n` (x) and
//! `2n + 1` (y). All gradients are full gradients `(∇u)_kl = ∂_l u_k`; nothing is
//! symmetrized, so tensors without minor symmetry are assembled correctly.
//!
//! Cloak profiles from [`crate::transform`] put the derivative in the first slot
//! of each index pair; [`TensorSource`] swaps them into the assembly layout.

pub mod assembly;
pub mod output;
pub mod quadrature;
pub mod solve;
pub mod space;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::layered::{LayeredCloak, SymmetrizedCloak};
use crate::materials::IsotropicMaterial;
use crate::mesh::region;
use crate::tensor::{Mat2, Tensor4};
use crate::transform::{CosseratCloak, WillisCloak, WillisTensors};

pub use assembly::{assemble, LinearSystem};
pub use solve::*;
pub use space::{EdgeNodes, Geometry, Space};

/// Vector-valued function of position.
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Coefficient of one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TensorSource {
    Constant(Tensor4),
    Cosserat(CosseratCloak),
    Symmetrized(SymmetrizedCloak),
    Willis(WillisCloak),
    /// Constant Willis coefficients.
    WillisConstant(WillisTensors),
    /// Region left out of the assembly (traction-free cavity).
    Void,
}

impl TensorSource {
    pub fn isotropic(mat: &IsotropicMaterial) -> Self {
        TensorSource::Constant(Tensor4::isotropic(mat.lambda, mat.mu))
    }

    pub fn is_varying(&self) -> bool {
        matches!(
            self,
            TensorSource::Cosserat(_) | TensorSource::Symmetrized(_) | TensorSource::Willis(_)
        )
    }

    pub fn is_willis(&self) -> bool {
        matches!(self, TensorSource::Willis(_) | TensorSource::WillisConstant(_))
    }

    /// Rank-4 part at `y`; `None` for a void region.
    pub fn tensor_at(&self, y: [f64; 2]) -> Option<Tensor4> {
        match self {
            TensorSource::Constant(c) => Some(*c),
            TensorSource::Cosserat(c) => Some(c.tensor_at(y).swap_pairs()),
            TensorSource::Symmetrized(c) => Some(c.tensor_at(y)),
            TensorSource::Willis(c) => Some(c.tensors_at(y).c),
            TensorSource::WillisConstant(w) => Some(w.c),
            TensorSource::Void => None,
        }
    }

    pub fn willis_at(&self, y: [f64; 2]) -> Option<WillisTensors> {
        match self {
            TensorSource::Willis(c) => Some(c.tensors_at(y)),
            TensorSource::WillisConstant(w) => Some(*w),
            other => other.tensor_at(y).map(WillisTensors::elastic),
        }
    }
}

/// Region tag to coefficient source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientField {
    pub sources: BTreeMap<u32, TensorSource>,
}

impl CoefficientField {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every listed region gets the same isotropic material.
    pub fn uniform(mat: &IsotropicMaterial, regions: &[u32]) -> Self {
        let mut f = Self::new();
        for &r in regions {
            f.set(r, TensorSource::isotropic(mat));
        }
        f
    }

    pub fn with(mut self, tag: u32, source: TensorSource) -> Self {
        self.set(tag, source);
        self
    }

    pub fn set(&mut self, tag: u32, source: TensorSource) {
        self.sources.insert(tag, source);
    }

    /// Background everywhere, inclusion scaled by `eta`.
    pub fn inclusion(background: &IsotropicMaterial, inclusion: &IsotropicMaterial, eta: f64) -> Self {
        Self::new()
            .with(region::BACKGROUND, TensorSource::isotropic(background))
            .with(region::INCLUSION, TensorSource::isotropic(&inclusion.scaled(eta)))
    }

    /// One constant isotropic source per layer region `region::layer(k)`.
    pub fn with_layers(mut self, cloak: &LayeredCloak) -> Self {
        for (k, l) in cloak.layers.iter().enumerate() {
            self.set(region::layer(k), TensorSource::isotropic(&l.material));
        }
        self
    }

    pub fn source(&self, tag: u32) -> Result<&TensorSource> {
        self.sources.get(&tag).ok_or(Error::MissingRegion(tag))
    }

    pub fn is_willis(&self) -> bool {
        self.sources.values().any(|s| s.is_willis())
    }

    /// Fails if a region of `space` has no source.
    pub fn check_covers(&self, space: &Space) -> Result<()> {
        for tag in space.mesh.region_tags() {
            self.source(tag)?;
        }
        Ok(())
    }
}

/// Boundary data on the outer boundary.
#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet(VectorFn),
    /// Traction `(C:∇u) n = g`.
    Neumann(VectorFn),
}

impl std::fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet"),
            BoundaryCondition::Neumann(_) => f.write_str("Neumann"),
        }
    }
}

impl BoundaryCondition {
    pub fn dirichlet(g: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        BoundaryCondition::Dirichlet(Arc::new(g))
    }

    pub fn neumann(g: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        BoundaryCondition::Neumann(Arc::new(g))
    }

    /// Displacement `x/|x|` (the radial source).
    pub fn radial_dirichlet() -> Self {
        Self::dirichlet(unit)
    }

    /// Traction `t0 x/|x|`.
    pub fn radial_traction(t0: f64) -> Self {
        Self::neumann(move |x| {
            let e = unit(x);
            [t0 * e[0], t0 * e[1]]
        })
    }

    /// Displacement `A x`.
    pub fn linear(a: Mat2) -> Self {
        Self::dirichlet(move |x| mat_vec(&a, x))
    }

    pub fn is_neumann(&self) -> bool {
        matches!(self, BoundaryCondition::Neumann(_))
    }
}

fn unit(x: [f64; 2]) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        [0.0, 0.0]
    } else {
        [x[0] / r, x[1] / r]
    }
}

pub(crate) fn mat_vec(a: &Mat2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

/// Rigid displacements: two translations and the rotation `(−y, x)`.
pub fn rigid_mode(j: usize, x: [f64; 2]) -> [f64; 2] {
    match j {
        0 => [1.0, 0.0],
        1 => [0.0, 1.0],
        _ => [-x[1], x[0]],
    }
}

/// Which direct factorization produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Factorization {
    #[default]
    None,
    Cholesky,
    Lu,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveInfo {
    pub factorization: Factorization,
    pub dofs: usize,
    /// `‖b − A x‖ / ‖b‖` after refinement.
    pub relative_residual: f64,
    pub refinement_steps: usize,
    /// Ratio of largest to smallest diagonal entry; a cheap conditioning hint.
    pub diagonal_ratio: f64,
}

/// Nodal displacement field.
#[derive(Debug, Clone)]
pub struct Field {
    pub space: Arc<Space>,
    /// Interleaved `(u1, u2)` per node, in metres.
    pub values: Vec<f64>,
    pub info: SolveInfo,
}

impl Field {
    pub fn zeros(space: &Arc<Space>) -> Self {
        Field {
            space: space.clone(),
            values: vec![0.0; space.num_dofs()],
            info: SolveInfo::default(),
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: &Arc<Space>, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(space);
        for (n, p) in space.nodes.iter().enumerate() {
            let v = f(*p);
            out.values[2 * n] = v[0];
            out.values[2 * n + 1] = v[1];
        }
        out
    }

    pub fn node(&self, n: usize) -> [f64; 2] {
        [self.values[2 * n], self.values[2 * n + 1]]
    }

    pub fn same_discretization(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
            || (self.space.order == other.space.order
                && Arc::ptr_eq(&self.space.mesh, &other.space.mesh))
    }

    /// Value at barycentric point `l` of triangle `t`.
    pub fn eval(&self, t: usize, l: &[f64; 3]) -> [f64; 2] {
        let (phi, _) = self.shape(t, l);
        let mut u = [0.0; 2];
        for (a, &n) in self.space.element(t).iter().enumerate() {
            u[0] += phi[a] * self.values[2 * n];
            u[1] += phi[a] * self.values[2 * n + 1];
        }
        u
    }

    /// Gradient `(∇u)_kl = ∂_l u_k` at barycentric point `l` of triangle `t`.
    pub fn grad(&self, t: usize, l: &[f64; 3]) -> Mat2 {
        let (_, g) = self.shape(t, l);
        let mut du = [[0.0; 2]; 2];
        for (a, &n) in self.space.element(t).iter().enumerate() {
            for k in 0..2 {
                let v = self.values[2 * n + k];
                du[k][0] += v * g[a][0];
                du[k][1] += v * g[a][1];
            }
        }
        du
    }

    fn shape(&self, t: usize, l: &[f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
        let geo = self.space.geometry(t);
        let mut phi = [0.0; 6];
        let mut g = [[0.0; 2]; 6];
        geo.shape(self.space.order, l, &mut phi, &mut g);
        (phi, g)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        Field {
            space: self.space.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
            info: SolveInfo::default(),
        }
    }
}

/// Dilational and shear strain `½(∂₁u₁ + ∂₂u₂)`, `½(∂₁u₂ + ∂₂u₁)` at a sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrainSample {
    pub triangle: usize,
    pub x: [f64; 2],
    pub dilation: f64,
    pub shear: f64,
}

/// Per triangle for P1, per point of the 3-point rule for P2.
pub fn strain_outputs(field: &Field) -> Vec<StrainSample> {
    let space = &field.space;
    let rule = if space.order == 1 {
        quadrature::centroid_rule()
    } else {
        quadrature::degree2()
    };
    let mut out = Vec::with_capacity(space.mesh.num_triangles() * rule.len());
    for t in 0..space.mesh.num_triangles() {
        let geo = space.geometry(t);
        for (l, _) in &rule {
            let g = field.grad(t, l);
            out.push(StrainSample {
                triangle: t,
                x: geo.point(l),
                dilation: 0.5 * (g[0][0] + g[1][1]),
                shear: 0.5 * (g[1][0] + g[0][1]),
            });
        }
    }
    out
}
