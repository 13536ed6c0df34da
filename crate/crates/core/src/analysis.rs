//! Norms, log-log fits and the experiment runners.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    self, edge_value, quadrature, solve_with, BoundaryCondition, CoefficientField, Field, SolveOptions,
    Space, TensorSource,
};
use crate::layered::{build_layered_cloak_with, Realization, SymmetrizedCloak};
use crate::materials::IsotropicMaterial;
use crate::mesh::{boundary, build_mesh, region, GeometrySpec, Mesh, Shape};
use crate::par;
use crate::tensor::Mat2;
use crate::transform::{CosseratCloak, WillisCloak};

fn check_pair(f1: &Field, f2: &Field) -> Result<()> {
    if f1.same_discretization(f2) && f1.values.len() == f2.values.len() {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

fn region_integral(f1: &Field, f2: &Field, tags: &[u32], g: impl Fn(f64) -> f64) -> Result<f64> {
    check_pair(f1, f2)?;
    let space = &f1.space;
    let rule = quadrature::degree5();
    let mut total = 0.0;
    for t in 0..space.mesh.num_triangles() {
        if !tags.contains(&space.mesh.regions[t]) {
            continue;
        }
        let area = space.geometry(t).area;
        for (l, w) in &rule {
            let a = f1.eval(t, l);
            let b = f2.eval(t, l);
            total += w * area * g((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    Ok(total)
}

/// `(∫_R |f1 − f2|²)^½` over triangles tagged with any of `tags`.
pub fn norm_l2_region(f1: &Field, f2: &Field, tags: &[u32]) -> Result<f64> {
    Ok(region_integral(f1, f2, tags, |d| d * d)?.sqrt())
}

/// `∫_R |f1 − f2|`, the integral of the Euclidean magnitude of the difference.
pub fn norm_l1_region(f1: &Field, f2: &Field, tags: &[u32]) -> Result<f64> {
    region_integral(f1, f2, tags, |d| d)
}

/// `(∮ |f1 − f2|² dσ)^½` over edges tagged `tag`.
pub fn norm_l2_boundary(f1: &Field, f2: &Field, tag: u32) -> Result<f64> {
    check_pair(f1, f2)?;
    let space = &f1.space;
    let mut total = 0.0;
    for e in space.edges_with_tag(tag) {
        let (p, q) = space.edge_points(e);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        for (s, w) in quadrature::gauss3() {
            let a = edge_value(f1, e, s);
            let b = edge_value(f2, e, s);
            total += w * len * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
        }
    }
    Ok(total.sqrt())
}

/// Boundary distance after removing the best-fitting rigid motion, the natural
/// measure when both fields solve traction problems.
pub fn norm_l2_boundary_mod_rigid(f1: &Field, f2: &Field, tag: u32) -> Result<f64> {
    check_pair(f1, f2)?;
    let space = &f1.space;
    let samples = |visit: &mut dyn FnMut(f64, [f64; 2], [f64; 2])| {
        for e in space.edges_with_tag(tag) {
            let (p, q) = space.edge_points(e);
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            for (s, w) in quadrature::gauss3() {
                let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                let a = edge_value(f1, e, s);
                let b = edge_value(f2, e, s);
                visit(w * len, x, [a[0] - b[0], a[1] - b[1]]);
            }
        }
    };
    let mut gram = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    samples(&mut |w, x, d| {
        let psi: [[f64; 2]; 3] = std::array::from_fn(|j| fem::rigid_mode(j, x));
        for i in 0..3 {
            rhs[i] += w * (psi[i][0] * d[0] + psi[i][1] * d[1]);
            for j in 0..3 {
                gram[i][j] += w * (psi[i][0] * psi[j][0] + psi[i][1] * psi[j][1]);
            }
        }
    });
    let coef = Mat::from_fn(3, 3, |i, j| gram[i][j])
        .partial_piv_lu()
        .solve(Mat::from_fn(3, 1, |i, _| rhs[i]));
    let mut total = 0.0;
    samples(&mut |w, x, d| {
        let mut r = d;
        for j in 0..3 {
            let psi = fem::rigid_mode(j, x);
            r[0] -= coef[(j, 0)] * psi[0];
            r[1] -= coef[(j, 0)] * psi[1];
        }
        total += w * (r[0] * r[0] + r[1] * r[1]);
    });
    Ok(total.sqrt())
}

/// L² error against an exact field over the whole mesh.
pub fn l2_error(field: &Field, exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let space = &field.space;
    let mut total = 0.0;
    for t in 0..space.mesh.num_triangles() {
        let geo = space.geometry(t);
        for (l, w) in quadrature::degree5() {
            let u = field.eval(t, &l);
            let e = exact(geo.point(&l));
            total += w * geo.area * ((u[0] - e[0]).powi(2) + (u[1] - e[1]).powi(2));
        }
    }
    total.sqrt()
}

/// H¹ seminorm error against an exact gradient `(∇u)_kl = ∂_l u_k`.
pub fn h1_seminorm_error(field: &Field, exact_grad: impl Fn([f64; 2]) -> Mat2) -> f64 {
    let space = &field.space;
    let mut total = 0.0;
    for t in 0..space.mesh.num_triangles() {
        let geo = space.geometry(t);
        for (l, w) in quadrature::degree5() {
            let g = field.grad(t, &l);
            let e = exact_grad(geo.point(&l));
            let mut s = 0.0;
            for k in 0..2 {
                for m in 0..2 {
                    s += (g[k][m] - e[k][m]).powi(2);
                }
            }
            total += w * geo.area * s;
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub r_squared: f64,
    pub intercept: f64,
}

impl LogLogFit {
    /// `exp(intercept)`: the constant in `d ≈ B p^slope`.
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Least-squares line through `(ln p, ln d)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::Data(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(p, d)) = points.iter().find(|(p, d)| !(*p > 0.0 && *d > 0.0)) {
        return Err(Error::Data(format!("non-positive point ({p}, {d}) in log-log fit")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("all parameters equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        r_squared,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub triangles: usize,
    pub vertices: usize,
    pub dofs: usize,
    pub order: usize,
    pub h: f64,
}

impl MeshStats {
    fn of(space: &Space, h: f64) -> Self {
        MeshStats {
            triangles: space.mesh.num_triangles(),
            vertices: space.mesh.vertices.len(),
            dofs: space.num_dofs(),
            order: space.order,
            h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    /// L² distance in metres times square metres to the half.
    pub distance: f64,
    /// Integral of the magnitude of the difference.
    pub magnitude_integral: f64,
    /// Distance on the refined mesh, when checked.
    pub refined_distance: Option<f64>,
    /// Included in the slope fit.
    pub fitted: bool,
}

impl SweepPoint {
    /// Relative change under one refinement.
    pub fn refinement_change(&self) -> Option<f64> {
        self.refined_distance
            .map(|r| (r - self.distance).abs() / self.distance.abs().max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: String,
    pub parameter_name: String,
    /// Ordered by parameter as listed in the configuration.
    pub points: Vec<SweepPoint>,
    pub fit: Option<LogLogFit>,
    /// Fit of the magnitude integrals over the same points.
    pub fit_magnitude: Option<LogLogFit>,
    /// Reference distance without cloak, where meaningful.
    pub baseline: Option<f64>,
    pub mesh: MeshStats,
    pub runtime_s: f64,
    pub checks: Vec<Check>,
    /// Points that were skipped and why.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn distances(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.distance).collect()
    }

    /// Prefactor of the distance fit.
    pub fn prefactor(&self) -> Option<f64> {
        self.fit.map(|f| f.prefactor())
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fit_points(points: &[SweepPoint], pick: impl Fn(&SweepPoint) -> f64) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.fitted)
        .map(|p| (p.parameter, pick(p)))
        .collect();
    fit_loglog_slope(&pts).ok()
}

/// Mesh size and element order shared by the runners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub h: f64,
    /// Size on the inclusion boundary; `None` uses the geometric default.
    pub h_inclusion: Option<f64>,
    /// Size inside a cloak annulus; `None` uses `h`.
    pub h_cloak: Option<f64>,
    pub order: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            h: 0.3,
            h_inclusion: None,
            h_cloak: None,
            order: 2,
        }
    }
}

impl Discretization {
    fn apply(&self, mut spec: GeometrySpec) -> GeometrySpec {
        spec.h = self.h;
        spec.h_inclusion = self.h_inclusion;
        spec.h_cloak = self.h_cloak;
        spec
    }

    fn space(&self, spec: &GeometrySpec) -> Result<Arc<Space>> {
        Space::new(Arc::new(build_mesh(spec)?), self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `η → 0`, compared with the cavity solution.
    Soft,
    /// `η → ∞`, compared with the rigid-inclusion solution.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSweepConfig {
    pub shape: Shape,
    pub direction: Direction,
    pub etas: Vec<f64>,
    pub background: IsotropicMaterial,
    pub inclusion: IsotropicMaterial,
    pub outer_radius: f64,
    pub disc: Discretization,
    /// Angular frequency; positive values solve the time-harmonic problem.
    pub omega: f64,
    pub rho_background: f64,
    pub rho_inclusion: f64,
    /// Re-solve on a mesh refined by this factor and flag points changing by more than 5%.
    pub refine_factor: Option<f64>,
    /// Points with `|log10 η| < fit_min_decades` are left out of the fit.
    pub fit_min_decades: f64,
}

impl Default for ContrastSweepConfig {
    fn default() -> Self {
        ContrastSweepConfig {
            shape: Shape::Disk { r: 1.0 },
            direction: Direction::Soft,
            etas: vec![1e-2, 1e-3, 1e-4, 1e-5],
            background: IsotropicMaterial::steel(),
            inclusion: IsotropicMaterial::aluminium(),
            outer_radius: 10.0,
            disc: Discretization::default(),
            omega: 0.0,
            rho_background: 7850.0,
            rho_inclusion: 2700.0,
            refine_factor: None,
            fit_min_decades: 2.0 - 1e-9,
        }
    }
}

/// Relative change under refinement above which a point is not converged.
pub const CONVERGENCE_TOL: f64 = 0.05;

fn contrast_distances(cfg: &ContrastSweepConfig, space: &Arc<Space>) -> Result<Vec<(f64, f64)>> {
    let bc = BoundaryCondition::radial_dirichlet();
    let inertia = (cfg.omega != 0.0).then(|| {
        let rho: BTreeMap<u32, f64> = [
            (region::BACKGROUND, cfg.rho_background),
            (region::INCLUSION, cfg.rho_inclusion),
        ]
        .into();
        (rho, cfg.omega)
    });
    let background = CoefficientField::uniform(&cfg.background, &[region::BACKGROUND]);
    let limit_coeff = background.clone().with(region::INCLUSION, TensorSource::Void);
    let limit_opts = SolveOptions {
        inertia: inertia.clone(),
        rigid_region: (cfg.direction == Direction::Hard).then_some(region::INCLUSION),
        ..Default::default()
    };
    let n = cfg.etas.len();
    // Index n is the limit problem; the rest are the contrast points.
    let fields: Vec<Result<Field>> = par::map_collect(n + 1, |k| {
        if k == n {
            return Ok(solve_with(space, &limit_coeff, &bc, &limit_opts)?.0);
        }
        let coeff = CoefficientField::inclusion(&cfg.background, &cfg.inclusion, cfg.etas[k]);
        let opts = SolveOptions {
            inertia: inertia.clone(),
            ..Default::default()
        };
        Ok(solve_with(space, &coeff, &bc, &opts)?.0)
    });
    let fields: Vec<Field> = fields.into_iter().collect::<Result<_>>()?;
    let limit = &fields[n];
    fields[..n]
        .iter()
        .map(|f| {
            Ok((
                norm_l2_region(f, limit, &[region::BACKGROUND])?,
                norm_l1_region(f, limit, &[region::BACKGROUND])?,
            ))
        })
        .collect()
}

/// Distances `‖u^η − u_lim‖` over `Ω∖D` for each `η` on one shared mesh.
pub fn run_contrast_sweep(cfg: &ContrastSweepConfig) -> Result<SweepResult> {
    let start = Instant::now();
    cfg.background.check(2)?;
    cfg.inclusion.check(2)?;
    if cfg.etas.is_empty() || cfg.etas.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parameter("contrast list must be nonempty and positive".into()));
    }
    let spec = cfg.disc.apply(GeometrySpec::disk(cfg.outer_radius, cfg.disc.h).with_inclusion(cfg.shape));
    let space = cfg.disc.space(&spec)?;
    let coarse = contrast_distances(cfg, &space)?;
    let refined = match cfg.refine_factor {
        Some(f) => {
            let fine = Space::new(Arc::new(crate::mesh::refine(&space.mesh, f)?), cfg.disc.order)?;
            Some(contrast_distances(cfg, &fine)?)
        }
        None => None,
    };
    let mut points: Vec<SweepPoint> = cfg
        .etas
        .iter()
        .enumerate()
        .map(|(k, &eta)| SweepPoint {
            parameter: eta,
            distance: coarse[k].0,
            magnitude_integral: coarse[k].1,
            refined_distance: refined.as_ref().map(|r| r[k].0),
            fitted: eta.log10().abs() >= cfg.fit_min_decades,
        })
        .collect();
    for p in &mut points {
        if let Some(c) = p.refinement_change() {
            p.fitted &= c < CONVERGENCE_TOL;
        }
    }
    let fit = fit_points(&points, |p| p.distance);
    let fit_magnitude = fit_points(&points, |p| p.magnitude_integral);
    let dir = match cfg.direction {
        Direction::Soft => "soft",
        Direction::Hard => "hard",
    };
    let mut checks = vec![Check {
        name: "slope fit available".into(),
        passed: fit.is_some(),
    }];
    if let Some(f) = fit {
        let target = if cfg.direction == Direction::Soft { 1.0 } else { -1.0 };
        checks.push(Check {
            name: format!("slope {:.4} within 0.1 of {target}", f.slope),
            passed: (f.slope - target).abs() <= 0.1,
        });
    }
    Ok(SweepResult {
        experiment: format!("contrast-sweep-{dir}"),
        parameter_name: "eta".into(),
        points,
        fit,
        fit_magnitude,
        baseline: None,
        mesh: MeshStats::of(&space, cfg.disc.h),
        runtime_s: start.elapsed().as_secs_f64(),
        checks,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSweepConfig {
    pub radii: Vec<f64>,
    /// `(λ₁/λ₀, μ₁/μ₀)`.
    pub contrast: (f64, f64),
    pub background: IsotropicMaterial,
    pub outer_radius: f64,
    pub disc: Discretization,
}

impl Default for DefectSweepConfig {
    fn default() -> Self {
        DefectSweepConfig {
            radii: vec![1.0, 1e-1, 1e-2],
            contrast: (1e2, 1e2),
            background: IsotropicMaterial::steel(),
            outer_radius: 10.0,
            disc: Discretization::default(),
        }
    }
}

/// Smallest number of segments an inclusion boundary needs to be resolved.
pub const MIN_DEFECT_SEGMENTS: usize = 16;

/// Radii below this fraction of the outer radius are not meshed.
pub const MIN_DEFECT_RATIO: f64 = 1e-6;

/// `‖u_hom − u_tr‖` over `Ω∖B₁` for disks of decreasing radius.
pub fn run_defect_size_sweep(cfg: &DefectSweepConfig) -> Result<SweepResult> {
    let start = Instant::now();
    cfg.background.check(2)?;
    let inclusion = IsotropicMaterial::new(cfg.background.lambda * cfg.contrast.0, cfg.background.mu * cfg.contrast.1)?;
    let bc = BoundaryCondition::radial_dirichlet();
    let results: Vec<Result<Option<(SweepPoint, MeshStats)>>> = par::map_collect(cfg.radii.len(), |k| {
        let r = cfg.radii[k];
        // The unit circle is meshed as an interface so that Ω∖B₁ is a union of triangles;
        // it reuses the annulus machinery with a thin dummy annulus of background material.
        let mut spec = GeometrySpec::disk(cfg.outer_radius, cfg.disc.h).with_inclusion(Shape::Disk { r });
        spec = cfg.disc.apply(spec);
        if r <= 1.0 {
            spec = spec.with_cloak(1.0, 1.5);
        }
        let h_edge = spec.h_inclusion.unwrap_or(spec.h.min(r / 8.0));
        let segments = ((2.0 * std::f64::consts::PI * r / h_edge).ceil() as usize).max(spec.min_segments);
        if segments < MIN_DEFECT_SEGMENTS || r < MIN_DEFECT_RATIO * cfg.outer_radius {
            return Ok(None);
        }
        let space = cfg.disc.space(&spec)?;
        let mut hom = CoefficientField::new();
        for tag in space.mesh.region_tags() {
            hom.set(tag, TensorSource::isotropic(&cfg.background));
        }
        let tr = hom.clone().with(region::INCLUSION, TensorSource::isotropic(&inclusion));
        let u_hom = fem::solve(&space, &hom, &bc)?;
        let u_tr = fem::solve(&space, &tr, &bc)?;
        let outside: Vec<u32> = space
            .mesh
            .region_tags()
            .into_iter()
            .filter(|&t| t == region::BACKGROUND || region::is_cloak(t))
            .collect();
        Ok(Some((
            SweepPoint {
                parameter: r,
                distance: norm_l2_region(&u_hom, &u_tr, &outside)?,
                magnitude_integral: norm_l1_region(&u_hom, &u_tr, &outside)?,
                refined_distance: None,
                fitted: true,
            },
            MeshStats::of(&space, cfg.disc.h),
        )))
    });
    let mut points = Vec::new();
    let mut mesh = None;
    let mut warnings = Vec::new();
    for (r, radius) in results.into_iter().zip(&cfg.radii) {
        match r? {
            Some((p, m)) => {
                points.push(p);
                mesh = Some(m);
            }
            None => warnings.push(format!("radius {radius:e} m skipped: not resolvable")),
        }
    }
    let mesh = mesh.ok_or_else(|| Error::Parameter("no resolvable radius".into()))?;
    let fit = fit_points(&points, |p| p.distance);
    let fit_magnitude = fit_points(&points, |p| p.magnitude_integral);
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| b.parameter.total_cmp(&a.parameter));
    let checks = vec![Check {
        name: "distance decreases with radius".into(),
        passed: strictly_decreasing(&sorted.iter().map(|p| p.distance).collect::<Vec<_>>()),
    }];
    Ok(SweepResult {
        experiment: "defect-sweep".into(),
        parameter_name: "radius_m".into(),
        points,
        fit,
        fit_magnitude,
        baseline: None,
        mesh,
        runtime_s: start.elapsed().as_secs_f64(),
        checks,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CloakFamily {
    Cosserat,
    Symmetrized,
    /// Best-fit isotropic layers, `N` of them.
    Layered(usize),
    Willis,
}

impl CloakFamily {
    pub fn name(&self) -> String {
        match self {
            CloakFamily::Cosserat => "cosserat".into(),
            CloakFamily::Symmetrized => "symmetrized".into(),
            CloakFamily::Layered(n) => format!("layered{n}"),
            CloakFamily::Willis => "willis".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearCloakConfig {
    pub epsilons: Vec<f64>,
    pub family: CloakFamily,
    pub background: IsotropicMaterial,
    /// Material filling the cloaked ball.
    pub inclusion: IsotropicMaterial,
    /// Inner cloak radius; the annulus is `[L, 2L]`.
    pub length: f64,
    pub outer_radius: f64,
    /// Magnitude of the radial traction on the outer boundary, Pa.
    pub traction: f64,
    pub disc: Discretization,
}

impl Default for NearCloakConfig {
    fn default() -> Self {
        let steel = IsotropicMaterial::steel();
        NearCloakConfig {
            epsilons: vec![0.4, 0.3, 0.2, 0.1],
            family: CloakFamily::Cosserat,
            background: steel,
            inclusion: IsotropicMaterial {
                lambda: 1e2 * steel.lambda,
                mu: 1e5 * steel.mu,
            },
            length: 2.0,
            outer_radius: 10.0,
            traction: 1e9,
            disc: Discretization {
                h_cloak: Some(0.1),
                ..Default::default()
            },
        }
    }
}

impl NearCloakConfig {
    fn geometry(&self, layer_radii: Vec<f64>) -> GeometrySpec {
        let mut spec = self
            .disc
            .apply(GeometrySpec::disk(self.outer_radius, self.disc.h))
            .with_inclusion(Shape::Disk { r: self.length })
            .with_cloak(self.length, 2.0 * self.length);
        spec.layer_radii = layer_radii;
        spec
    }

    fn bc(&self) -> BoundaryCondition {
        BoundaryCondition::radial_traction(self.traction)
    }

    /// Background outside, inclusion in the ball, `annulus` on every cloak layer.
    fn coefficients(&self, mesh: &Mesh, annulus: impl Fn(usize) -> TensorSource) -> CoefficientField {
        let mut c = CoefficientField::new()
            .with(region::BACKGROUND, TensorSource::isotropic(&self.background))
            .with(region::INCLUSION, TensorSource::isotropic(&self.inclusion));
        for tag in mesh.region_tags() {
            if region::is_cloak(tag) {
                c.set(tag, annulus((tag - region::LAYER) as usize));
            }
        }
        c
    }

    fn cloak_coefficients(&self, mesh: &Mesh, eps: f64) -> Result<CoefficientField> {
        let (m0, l) = (self.background, self.length);
        Ok(match self.family {
            CloakFamily::Cosserat => {
                let c = CosseratCloak::new(eps, m0, l)?;
                self.coefficients(mesh, |_| TensorSource::Cosserat(c))
            }
            CloakFamily::Symmetrized => {
                let c = SymmetrizedCloak::new(eps, m0, l)?;
                self.coefficients(mesh, |_| TensorSource::Symmetrized(c))
            }
            CloakFamily::Willis => {
                let c = WillisCloak::new(eps, m0, l)?;
                self.coefficients(mesh, |_| TensorSource::Willis(c))
            }
            CloakFamily::Layered(n) => {
                let cloak = build_layered_cloak_with(n, eps, &m0, Realization::BestFit)?;
                self.coefficients(mesh, |k| TensorSource::isotropic(&cloak.layers[k].material))
            }
        })
    }

    fn layer_radii(&self) -> Vec<f64> {
        match self.family {
            CloakFamily::Layered(n) => (1..n).map(|k| self.length * (1.0 + k as f64 / n as f64)).collect(),
            _ => Vec::new(),
        }
    }
}

fn solve_family(space: &Arc<Space>, coeff: &CoefficientField, bc: &BoundaryCondition) -> Result<Field> {
    if coeff.is_willis() {
        fem::solve_willis(space, coeff, bc)
    } else {
        fem::solve(space, coeff, bc)
    }
}

/// Boundary distance modulo rigid motions to the homogeneous field for each `ε`,
/// plus the uncloaked baseline.
pub fn run_nearcloak_sweep(cfg: &NearCloakConfig) -> Result<SweepResult> {
    let start = Instant::now();
    cfg.background.check(2)?;
    cfg.inclusion.check(2)?;
    if cfg.epsilons.is_empty() {
        return Err(Error::Parameter("epsilon list must be nonempty".into()));
    }
    let spec = cfg.geometry(cfg.layer_radii());
    let space = cfg.disc.space(&spec)?;
    let bc = cfg.bc();
    let n = cfg.epsilons.len();
    let bg = TensorSource::isotropic(&cfg.background);
    // n: homogeneous, n + 1: bare inclusion.
    let fields: Vec<Result<Field>> = par::map_collect(n + 2, |k| {
        let coeff = if k == n {
            let mut c = cfg.coefficients(&space.mesh, |_| bg);
            c.set(region::INCLUSION, bg);
            c
        } else if k == n + 1 {
            cfg.coefficients(&space.mesh, |_| bg)
        } else {
            cfg.cloak_coefficients(&space.mesh, cfg.epsilons[k])?
        };
        solve_family(&space, &coeff, &bc)
    });
    let fields: Vec<Field> = fields.into_iter().collect::<Result<_>>()?;
    let hom = &fields[n];
    let baseline = norm_l2_boundary_mod_rigid(&fields[n + 1], hom, boundary::OUTER)?;
    let points: Vec<SweepPoint> = (0..n)
        .map(|k| {
            Ok(SweepPoint {
                parameter: cfg.epsilons[k],
                distance: norm_l2_boundary_mod_rigid(&fields[k], hom, boundary::OUTER)?,
                magnitude_integral: norm_l1_region(&fields[k], hom, &[region::BACKGROUND])?,
                refined_distance: None,
                fitted: true,
            })
        })
        .collect::<Result<_>>()?;
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| b.parameter.total_cmp(&a.parameter));
    let checks = vec![Check {
        name: "boundary distance strictly decreasing as epsilon decreases".into(),
        passed: strictly_decreasing(&sorted.iter().map(|p| p.distance).collect::<Vec<_>>()),
    }];
    Ok(SweepResult {
        experiment: format!("nearcloak-{}", cfg.family.name()),
        parameter_name: "epsilon".into(),
        fit: fit_points(&points, |p| p.distance),
        fit_magnitude: fit_points(&points, |p| p.magnitude_integral),
        points,
        baseline: Some(baseline),
        mesh: MeshStats::of(&space, cfg.disc.h),
        runtime_s: start.elapsed().as_secs_f64(),
        checks,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredComparisonConfig {
    pub layer_counts: Vec<usize>,
    pub epsilon: f64,
    /// Shared geometry, materials and discretization; `epsilons` and `family` are ignored.
    pub base: NearCloakConfig,
}

impl Default for LayeredComparisonConfig {
    fn default() -> Self {
        let mut base = NearCloakConfig::default();
        base.disc.order = 1;
        LayeredComparisonConfig {
            layer_counts: vec![10, 20, 40],
            epsilon: 0.2,
            base,
        }
    }
}

/// Boundary distance between the layered and symmetrized cloaks for each layer
/// count, all on one mesh carrying every layer interface.
pub fn run_layered_comparison(cfg: &LayeredComparisonConfig) -> Result<SweepResult> {
    let start = Instant::now();
    if cfg.layer_counts.is_empty() || cfg.layer_counts.contains(&0) {
        return Err(Error::Parameter("layer counts must be nonempty and positive".into()));
    }
    let l = cfg.base.length;
    let mut fractions: Vec<f64> = cfg
        .layer_counts
        .iter()
        .flat_map(|&n| (1..n).map(move |k| k as f64 / n as f64))
        .collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let radii: Vec<f64> = fractions.iter().map(|f| l * (1.0 + f)).collect();
    let space = cfg.base.disc.space(&cfg.base.geometry(radii.clone()))?;
    let bc = cfg.base.bc();

    // midpoint of each master layer, as a fraction of the annulus width
    let mut bounds = vec![0.0];
    bounds.extend(&fractions);
    bounds.push(1.0);
    let mids: Vec<f64> = bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let m0 = cfg.base.background;
    let sym = SymmetrizedCloak::new(cfg.epsilon, m0, l)?;
    let n = cfg.layer_counts.len();
    // index n: symmetrized reference
    let fields: Vec<Result<Field>> = par::map_collect(n + 1, |k| {
        let coeff = if k == n {
            cfg.base.coefficients(&space.mesh, |_| TensorSource::Symmetrized(sym))
        } else {
            let count = cfg.layer_counts[k];
            let cloak = build_layered_cloak_with(count, cfg.epsilon, &m0, Realization::BestFit)?;
            cfg.base.coefficients(&space.mesh, |j| {
                let layer = ((mids[j] * count as f64).floor() as usize).min(count - 1);
                TensorSource::isotropic(&cloak.layers[layer].material)
            })
        };
        fem::solve(&space, &coeff, &bc)
    });
    let fields: Vec<Field> = fields.into_iter().collect::<Result<_>>()?;
    let reference = &fields[n];
    let points: Vec<SweepPoint> = (0..n)
        .map(|k| {
            Ok(SweepPoint {
                parameter: cfg.layer_counts[k] as f64,
                distance: norm_l2_boundary_mod_rigid(&fields[k], reference, boundary::OUTER)?,
                magnitude_integral: norm_l1_region(&fields[k], reference, &[region::BACKGROUND])?,
                refined_distance: None,
                fitted: true,
            })
        })
        .collect::<Result<_>>()?;
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    let checks = vec![Check {
        name: "distance strictly decreasing in layer count".into(),
        passed: strictly_decreasing(&sorted.iter().map(|p| p.distance).collect::<Vec<_>>()),
    }];
    Ok(SweepResult {
        experiment: "layered-compare".into(),
        parameter_name: "layers".into(),
        fit: fit_points(&points, |p| p.distance),
        fit_magnitude: fit_points(&points, |p| p.magnitude_integral),
        points,
        baseline: None,
        mesh: MeshStats::of(&space, cfg.base.disc.h),
        runtime_s: start.elapsed().as_secs_f64(),
        checks,
        warnings: Vec::new(),
    })
}

/// Manufactured solution `(sin x₁ sin x₂, cos x₁ cos x₂)`; divergence free, so
/// the body force is `2μ u`.
pub fn manufactured_solution(x: [f64; 2]) -> [f64; 2] {
    [x[0].sin() * x[1].sin(), x[0].cos() * x[1].cos()]
}

pub fn manufactured_gradient(x: [f64; 2]) -> Mat2 {
    let (s1, c1, s2, c2) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
    [[c1 * s2, s1 * c2], [-s1 * c2, -c1 * s2]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub triangles: usize,
    pub l2_error: f64,
    pub h1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub order: usize,
    pub levels: Vec<ConvergenceLevel>,
    /// Fitted rates against `h`.
    pub l2_rate: f64,
    pub h1_rate: f64,
    pub checks: Vec<Check>,
}

/// Manufactured-solution study on the unit disk with `levels` halvings of `h0`.
pub fn run_convergence(mat: &IsotropicMaterial, order: usize, h0: f64, levels: usize) -> Result<ConvergenceResult> {
    mat.check(2)?;
    let mu = mat.mu;
    let coeff = CoefficientField::uniform(mat, &[region::BACKGROUND]);
    let bc = BoundaryCondition::dirichlet(manufactured_solution);
    let opts = SolveOptions {
        body: Some(Arc::new(move |x| {
            let u = manufactured_solution(x);
            [2.0 * mu * u[0], 2.0 * mu * u[1]]
        })),
        ..Default::default()
    };
    let mut out = Vec::new();
    for k in 0..levels {
        let h = h0 / 2f64.powi(k as i32);
        let mut spec = GeometrySpec::disk(1.0, h);
        spec.min_segments = 16;
        let space = Space::new(Arc::new(build_mesh(&spec)?), order)?;
        let (u, _) = solve_with(&space, &coeff, &bc, &opts)?;
        out.push(ConvergenceLevel {
            h,
            triangles: space.mesh.num_triangles(),
            l2_error: l2_error(&u, manufactured_solution),
            h1_error: h1_seminorm_error(&u, manufactured_gradient),
        });
    }
    let rate = |pick: fn(&ConvergenceLevel) -> f64| {
        fit_loglog_slope(&out.iter().map(|l| (l.h, pick(l))).collect::<Vec<_>>()).map(|f| f.slope)
    };
    let l2_rate = rate(|l| l.l2_error)?;
    let h1_rate = rate(|l| l.h1_error)?;
    let p = order as f64;
    let checks = vec![
        Check {
            name: format!("L2 rate {l2_rate:.3} >= {}", p + 1.0 - 0.2),
            passed: l2_rate >= p + 1.0 - 0.2,
        },
        Check {
            name: format!("H1 rate {h1_rate:.3} >= {}", p - 0.2),
            passed: h1_rate >= p - 0.2,
        },
    ];
    Ok(ConvergenceResult {
        order,
        levels: out,
        l2_rate,
        h1_rate,
        checks,
    })
}
