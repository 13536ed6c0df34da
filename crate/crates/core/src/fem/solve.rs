//! Boundary-value solvers built on one constrained direct solve.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use super::assembly::{add_traction, assemble_with, rigid_moments, to_csc, AssemblyOptions, NodeGauge};
use super::quadrature;
use super::{
    rigid_mode, BoundaryCondition, CoefficientField, Factorization, Field, SolveInfo, Space, TensorSource,
    VectorFn,
};
use crate::error::{Error, Result};
use crate::mesh::{boundary, region};

/// Residual above which a solve is reported as failed.
pub const SOLVER_FAILURE: f64 = 1e-6;
/// Relative force and torque imbalance tolerated in Neumann data.
pub const COMPATIBILITY_TOL: f64 = 1e-10;
/// `|A Ψ| / (max|diag A| |Ψ|)` below which a rigid mode counts as a null direction.
pub const NULL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dof {
    Free(usize),
    Fixed(f64),
    /// Component of the rigid motion of a node at `x`; unknowns start at `base`.
    Rigid { base: usize, comp: usize, x: [f64; 2] },
}

impl Dof {
    fn for_each_term(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Dof::Free(p) => f(p, 1.0),
            Dof::Fixed(_) => {}
            Dof::Rigid { base, comp, x } => {
                for j in 0..3 {
                    let c = rigid_mode(j, x)[comp];
                    if c != 0.0 {
                        f(base + j, c);
                    }
                }
            }
        }
    }

    fn constant(&self) -> f64 {
        match *self {
            Dof::Fixed(v) => v,
            _ => 0.0,
        }
    }
}

/// Everything beyond the elastic form and the outer boundary condition.
#[derive(Clone, Default)]
pub struct SolveOptions {
    pub body: Option<VectorFn>,
    /// `(ρ per region, ω)`.
    pub inertia: Option<(BTreeMap<u32, f64>, f64)>,
    /// Region whose closed set of nodes moves rigidly.
    pub rigid_region: Option<u32>,
    /// Skip Cholesky even for symmetric systems.
    pub force_lu: bool,
    pub gauge: Option<Arc<NodeGauge>>,
}

/// Solves with `bc` on the outer boundary. Returns the rigid coefficients when
/// `opts.rigid_region` is set.
pub fn solve_with(
    space: &Arc<Space>,
    coeff: &CoefficientField,
    bc: &BoundaryCondition,
    opts: &SolveOptions,
) -> Result<(Field, Option<[f64; 3]>)> {
    let omega2 = match &opts.inertia {
        Some((_, w)) if !(*w >= 0.0) => {
            return Err(Error::Parameter(format!("angular frequency {w} must be >= 0")))
        }
        Some((_, w)) => w * w,
        None => 0.0,
    };
    let aopts = AssemblyOptions {
        body: opts.body.clone(),
        inertia: opts.inertia.as_ref().map(|(rho, _)| (rho.clone(), omega2)),
        gauge: opts.gauge.clone(),
    };
    let mut sys = assemble_with(space, coeff, &aopts)?;

    let nn = space.num_nodes();
    let mut active = vec![false; nn];
    for t in 0..space.mesh.num_triangles() {
        if !matches!(coeff.source(space.mesh.regions[t])?, TensorSource::Void) {
            for &n in space.element(t) {
                active[n] = true;
            }
        }
    }
    let mut kinds: Vec<Option<Dof>> = vec![None; 2 * nn];
    for n in (0..nn).filter(|&n| !active[n]) {
        kinds[2 * n] = Some(Dof::Fixed(0.0));
        kinds[2 * n + 1] = Some(Dof::Fixed(0.0));
    }
    match bc {
        BoundaryCondition::Dirichlet(g) => {
            for n in space.nodes_on(boundary::OUTER) {
                let v = g(space.nodes[n]);
                kinds[2 * n] = Some(Dof::Fixed(v[0]));
                kinds[2 * n + 1] = Some(Dof::Fixed(v[1]));
            }
        }
        BoundaryCondition::Neumann(g) => {
            add_traction(space, g, boundary::OUTER, &mut sys.rhs);
            if omega2 == 0.0 {
                check_compatibility(space, &sys.rhs)?;
            }
        }
    }
    let mut next = 0;
    let mut rigid_base = None;
    if let Some(tag) = opts.rigid_region {
        let nodes = space.nodes_in(|r| r == tag);
        if nodes.is_empty() {
            return Err(Error::MissingRegion(tag));
        }
        rigid_base = Some(0);
        next = 3;
        for n in nodes {
            for comp in 0..2 {
                if kinds[2 * n + comp].is_none() || !active[n] {
                    kinds[2 * n + comp] = Some(Dof::Rigid {
                        base: 0,
                        comp,
                        x: space.nodes[n],
                    });
                }
            }
        }
    }
    let dofs: Vec<Dof> = kinds
        .into_iter()
        .map(|k| {
            k.unwrap_or_else(|| {
                next += 1;
                Dof::Free(next - 1)
            })
        })
        .collect();
    let norm = if bc.is_neumann() && omega2 == 0.0 {
        Some(normalization(space, &dofs, next, &rigid_moments(space, coeff)?))
    } else {
        None
    };
    let symmetric = sys.symmetric && !opts.force_lu;
    let (reduced, info) = solve_reduced(&sys, &dofs, next, norm.as_ref(), symmetric)?;

    let mut values = vec![0.0; 2 * nn];
    for (d, kind) in dofs.iter().enumerate() {
        let mut v = kind.constant();
        kind.for_each_term(|p, c| v += c * reduced[p]);
        values[d] = v;
    }
    let field = Field {
        space: space.clone(),
        values,
        info,
    };
    if !field.is_finite() {
        return Err(Error::Solver("non-finite solution".into()));
    }
    let alpha = rigid_base.map(|b| [reduced[b], reduced[b + 1], reduced[b + 2]]);
    Ok((field, alpha))
}

fn check_compatibility(space: &Space, rhs: &[f64]) -> Result<()> {
    for j in 0..3 {
        let (mut sum, mut scale) = (0.0, 0.0);
        for (n, x) in space.nodes.iter().enumerate() {
            let psi = rigid_mode(j, *x);
            for c in 0..2 {
                sum += rhs[2 * n + c] * psi[c];
                scale += (rhs[2 * n + c] * psi[c]).abs();
            }
        }
        if sum.abs() > COMPATIBILITY_TOL * scale {
            let what = ["x force", "y force", "torque"][j];
            return Err(Error::Data(format!(
                "incompatible Neumann data: net {what} {sum:e} (scale {scale:e})"
            )));
        }
    }
    Ok(())
}

/// Rigid modes and their moment rows, both in reduced coordinates.
struct Normalization {
    modes: [Vec<f64>; 3],
    rows: [Vec<f64>; 3],
    constants: [f64; 3],
}

fn normalization(space: &Space, dofs: &[Dof], nr: usize, moments: &[Vec<f64>; 3]) -> Normalization {
    let mut modes = [vec![0.0; nr], vec![0.0; nr], vec![0.0; nr]];
    let mut rows = [vec![0.0; nr], vec![0.0; nr], vec![0.0; nr]];
    let mut constants = [0.0; 3];
    for (d, kind) in dofs.iter().enumerate() {
        for j in 0..3 {
            match *kind {
                Dof::Free(p) => modes[j][p] = rigid_mode(j, space.nodes[d / 2])[d % 2],
                Dof::Rigid { base, .. } => modes[j][base + j] = 1.0,
                Dof::Fixed(_) => {}
            }
            let c = moments[j][d];
            if c != 0.0 {
                kind.for_each_term(|p, tp| rows[j][p] += tp * c);
                constants[j] += c * kind.constant();
            }
        }
    }
    Normalization { modes, rows, constants }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rows to pin so that the pinned block of `modes` is invertible
/// (complete pivoting on the tall mode matrix).
fn pivot_rows(modes: &[&Vec<f64>]) -> Vec<usize> {
    let mut cols: Vec<Vec<f64>> = modes.iter().map(|m| m.to_vec()).collect();
    let mut rows = Vec::new();
    for s in 0..cols.len() {
        let (mut best, mut at) = (0.0, (s, 0));
        for (c, col) in cols.iter().enumerate().skip(s) {
            for (r, v) in col.iter().enumerate() {
                if v.abs() > best && !rows.contains(&r) {
                    best = v.abs();
                    at = (c, r);
                }
            }
        }
        cols.swap(s, at.0);
        let r = at.1;
        rows.push(r);
        let (head, tail) = cols.split_at_mut(s + 1);
        for col in tail {
            let f = col[r] / head[s][r];
            for (x, y) in col.iter_mut().zip(&head[s]) {
                *x -= f * y;
            }
        }
    }
    rows
}

/// Reduces `A u = f` with `u = c + T ũ` and solves for `ũ`. With `norm`, the
/// rigid modes in the null space of the reduced operator are removed by the
/// moment conditions `cⱼ·u = 0`: the singular system is solved with a few
/// pinned unknowns and the result is projected onto the constraint set, which
/// gives the same solution as the bordered system.
fn solve_reduced(
    sys: &super::LinearSystem,
    dofs: &[Dof],
    nr: usize,
    norm: Option<&Normalization>,
    symmetric: bool,
) -> Result<(Vec<f64>, SolveInfo)> {
    let mut entries = Vec::with_capacity(sys.entries.len());
    let mut rhs = vec![0.0; nr];
    for (d, kind) in dofs.iter().enumerate() {
        let f = sys.rhs[d];
        if f != 0.0 {
            kind.for_each_term(|p, c| rhs[p] += c * f);
        }
    }
    for &(d, e, v) in &sys.entries {
        let (rd, re) = (&dofs[d], &dofs[e]);
        let ce = re.constant();
        rd.for_each_term(|p, tp| {
            if ce != 0.0 {
                rhs[p] -= tp * v * ce;
            }
            re.for_each_term(|q, tq| entries.push((p, q, tp * v * tq)));
        });
    }
    let mut diag = vec![0.0; nr];
    for &(p, q, v) in &entries {
        if p == q {
            diag[p] += v;
        }
    }
    let dmax = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let dmin = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let n = nr;
    if n == 0 {
        return Ok((Vec::new(), SolveInfo::default()));
    }
    let apply = |x: &[f64], transpose: bool| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for &(i, j, v) in &entries {
            if transpose {
                y[j] += v * x[i];
            } else {
                y[i] += v * x[j];
            }
        }
        y
    };

    // rigid modes that are genuinely singular directions of the operator
    let kernel: Vec<usize> = match norm {
        Some(nm) => (0..3)
            .filter(|&j| {
                let m = &nm.modes[j];
                let scale = dmax * norm2(m);
                scale > 0.0
                    && norm2(&apply(m, false)) <= NULL_TOL * scale
                    && norm2(&apply(m, true)) <= NULL_TOL * scale
            })
            .collect(),
        None => Vec::new(),
    };
    let pinned = match norm {
        Some(nm) if !kernel.is_empty() => {
            pivot_rows(&kernel.iter().map(|&j| &nm.modes[j]).collect::<Vec<_>>())
        }
        _ => Vec::new(),
    };
    let mut is_pinned = vec![false; n];
    for &p in &pinned {
        is_pinned[p] = true;
    }
    let mut work: Vec<(usize, usize, f64)> = if pinned.is_empty() {
        entries.clone()
    } else {
        entries
            .iter()
            .copied()
            .filter(|&(i, j, _)| !is_pinned[i] && !is_pinned[j])
            .collect()
    };
    let mut work_rhs = rhs.clone();
    for &p in &pinned {
        work.push((p, p, dmax));
        work_rhs[p] = 0.0;
    }

    let a = to_csc(n, &work)?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| work_rhs[i]);
    let mut factorization = Factorization::Lu;
    type Solver = Box<dyn Fn(&Mat<f64>) -> Mat<f64>>;
    let solver: Solver = match symmetric.then(|| a.sp_cholesky(Side::Lower).ok()).flatten() {
        Some(llt) => {
            factorization = Factorization::Cholesky;
            Box::new(move |r: &Mat<f64>| llt.solve(r))
        }
        None => {
            let lu = a
                .sp_lu()
                .map_err(|e| Error::Solver(format!("sparse LU failed: {e:?}")))?;
            Box::new(move |r: &Mat<f64>| lu.solve(r))
        }
    };
    let residual = |x: &Mat<f64>, ent: &[(usize, usize, f64)], f: &[f64]| -> Vec<f64> {
        let mut r = f.to_vec();
        for &(i, j, v) in ent {
            r[i] -= v * x[(j, 0)];
        }
        r
    };
    let bnorm = norm2(&work_rhs);
    let relative = |r: &[f64]| if bnorm > 0.0 { norm2(r) / bnorm } else { norm2(r) };
    let mut x = solver(&b);
    let mut r = residual(&x, &work, &work_rhs);
    let mut rel = relative(&r);
    let mut steps = 0;
    while steps < 3 && rel > 1e-14 && rel.is_finite() {
        let corr = solver(&Mat::<f64>::from_fn(n, 1, |i, _| r[i]));
        let trial = Mat::<f64>::from_fn(n, 1, |i, _| x[(i, 0)] + corr[(i, 0)]);
        let rt = residual(&trial, &work, &work_rhs);
        let relt = relative(&rt);
        steps += 1;
        if !(relt < rel) {
            break;
        }
        x = trial;
        r = rt;
        rel = relt;
    }
    let mut u: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();

    if let (Some(nm), false) = (norm, kernel.is_empty()) {
        let k = kernel.len();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let m = Mat::<f64>::from_fn(k, k, |i, j| dot(&nm.rows[kernel[i]], &nm.modes[kernel[j]]));
        let c = Mat::<f64>::from_fn(k, 1, |i, _| dot(&nm.rows[kernel[i]], &u) + nm.constants[kernel[i]]);
        let coef = m.partial_piv_lu().solve(&c);
        for (i, &j) in kernel.iter().enumerate() {
            let a = coef[(i, 0)];
            for (ui, mi) in u.iter_mut().zip(&nm.modes[j]) {
                *ui -= a * mi;
            }
        }
        // residual of the original singular system
        let ku = apply(&u, false);
        let r: Vec<f64> = rhs.iter().zip(&ku).map(|(f, k)| f - k).collect();
        let fnorm = norm2(&rhs);
        rel = if fnorm > 0.0 { norm2(&r) / fnorm } else { norm2(&r) };
    }
    let info = SolveInfo {
        factorization,
        dofs: n,
        relative_residual: rel,
        refinement_steps: steps,
        diagonal_ratio: if dmin > 0.0 { dmax / dmin } else { f64::INFINITY },
    };
    if !(rel <= SOLVER_FAILURE) {
        return Err(Error::Solver(format!(
            "relative residual {rel:e} (diagonal ratio {:e})",
            info.diagonal_ratio
        )));
    }
    Ok((u, info))
}

pub fn solve(space: &Arc<Space>, coeff: &CoefficientField, bc: &BoundaryCondition) -> Result<Field> {
    Ok(solve_with(space, coeff, bc, &SolveOptions::default())?.0)
}

pub fn solve_dirichlet(space: &Arc<Space>, coeff: &CoefficientField, g: VectorFn) -> Result<Field> {
    solve(space, coeff, &BoundaryCondition::Dirichlet(g))
}

/// Rigid modes the operator cannot see are fixed by `∫u = 0` and zero mean rotation.
pub fn solve_neumann(space: &Arc<Space>, coeff: &CoefficientField, g: VectorFn) -> Result<Field> {
    solve(space, coeff, &BoundaryCondition::Neumann(g))
}

fn require_inclusion(space: &Space) -> Result<()> {
    if space.mesh.region_tags().contains(&region::INCLUSION) {
        Ok(())
    } else {
        Err(Error::MissingRegion(region::INCLUSION))
    }
}

/// Inclusion elements dropped: traction-free cavity. Nodes strictly inside stay zero.
pub fn solve_soft_limit(space: &Arc<Space>, coeff: &CoefficientField, bc: &BoundaryCondition) -> Result<Field> {
    require_inclusion(space)?;
    let c = coeff.clone().with(region::INCLUSION, TensorSource::Void);
    solve(space, &c, bc)
}

/// Rigid inclusion: every node of the closed inclusion moves as `Σ αⱼ Ψⱼ`.
pub fn solve_hard_limit(
    space: &Arc<Space>,
    coeff: &CoefficientField,
    bc: &BoundaryCondition,
) -> Result<(Field, [f64; 3])> {
    require_inclusion(space)?;
    let c = coeff.clone().with(region::INCLUSION, TensorSource::Void);
    let opts = SolveOptions {
        rigid_region: Some(region::INCLUSION),
        ..Default::default()
    };
    let (f, a) = solve_with(space, &c, bc, &opts)?;
    Ok((f, a.expect("rigid region requested")))
}

/// Inclusion with its own coefficient; continuity across the interface is built in.
pub fn solve_transmission(space: &Arc<Space>, coeff: &CoefficientField, bc: &BoundaryCondition) -> Result<Field> {
    require_inclusion(space)?;
    solve(space, coeff, bc)
}

/// `−∇·σ − ρω²u = 0` with Dirichlet data; `ω = 0` is the static problem.
pub fn solve_elastodynamic(
    space: &Arc<Space>,
    coeff: &CoefficientField,
    rho: &BTreeMap<u32, f64>,
    omega: f64,
    g: VectorFn,
) -> Result<Field> {
    let opts = SolveOptions {
        inertia: Some((rho.clone(), omega)),
        ..Default::default()
    };
    Ok(solve_with(space, coeff, &BoundaryCondition::Dirichlet(g), &opts)?.0)
}

/// Nonsymmetric Willis system, always factored by LU.
///
/// With a Willis cloak the unknown is the gauged displacement, which jumps
/// across both cloak boundaries. Nodal values on those circles are the
/// annulus-side limits; elements outside the annulus see
/// [`crate::transform::WillisCloak::interface_gauge`] times them.
pub fn solve_willis(space: &Arc<Space>, coeff: &CoefficientField, bc: &BoundaryCondition) -> Result<Field> {
    let opts = SolveOptions {
        force_lu: true,
        gauge: willis_gauge(space, coeff)?.map(Arc::new),
        ..Default::default()
    };
    Ok(solve_with(space, coeff, bc, &opts)?.0)
}

/// Node gauges for the Willis cloak in `coeff`, if any.
pub fn willis_gauge(space: &Space, coeff: &CoefficientField) -> Result<Option<NodeGauge>> {
    let cloak = coeff.sources.values().find_map(|s| match s {
        TensorSource::Willis(c) => Some(*c),
        _ => None,
    });
    let Some(cloak) = cloak else { return Ok(None) };
    let mesh = &space.mesh;
    let mut elements = vec![false; mesh.num_triangles()];
    for (t, e) in elements.iter_mut().enumerate() {
        *e = !matches!(coeff.source(mesh.regions[t])?, TensorSource::Willis(_));
    }
    // Interface nodes are those shared by both kinds of element.
    let mut seen = vec![[false; 2]; space.nodes.len()];
    for (t, &outside) in elements.iter().enumerate() {
        for &n in space.element(t) {
            seen[n][outside as usize] = true;
        }
    }
    let nodes = (0..space.nodes.len())
        .filter(|&n| seen[n] == [true, true])
        .map(|n| (n, cloak.interface_gauge(space.nodes[n])))
        .collect();
    Ok(Some(NodeGauge { elements, nodes }))
}

/// Net generalized force of the exterior solution on the inclusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFlux {
    /// `Σ_n Ψⱼ(x_n)·R_n` over the closed inclusion nodes.
    pub moments: [f64; 3],
    /// `Σ_n |Ψⱼ(x_n)·R_n|`, the scale each moment cancels against.
    pub scales: [f64; 3],
}

impl RigidFlux {
    pub fn max_relative(&self) -> f64 {
        (0..3)
            .map(|j| {
                if self.scales[j] > 0.0 {
                    self.moments[j].abs() / self.scales[j]
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Discrete traction of the exterior field on `∂D` tested with the rigid modes,
/// computed from the exterior residual `K_ext u − f`.
pub fn rigid_flux_residual(field: &Field, coeff: &CoefficientField, bc: &BoundaryCondition) -> Result<RigidFlux> {
    let space = &field.space;
    let c = coeff.clone().with(region::INCLUSION, TensorSource::Void);
    let mut sys = assemble_with(space, &c, &AssemblyOptions::default())?;
    if let BoundaryCondition::Neumann(g) = bc {
        add_traction(space, g, boundary::OUTER, &mut sys.rhs);
    }
    let ku = sys.apply(&field.values);
    let mut moments = [0.0; 3];
    let mut scales = [0.0; 3];
    for n in space.nodes_in(|r| r == region::INCLUSION) {
        for j in 0..3 {
            let psi = rigid_mode(j, space.nodes[n]);
            for k in 0..2 {
                let v = (ku[2 * n + k] - sys.rhs[2 * n + k]) * psi[k];
                moments[j] += v;
                scales[j] += v.abs();
            }
        }
    }
    Ok(RigidFlux { moments, scales })
}

/// `∫ (C:∇u + D·u):∇u − (S:∇u + B u)·u` over non-void regions.
pub fn energy(field: &Field, coeff: &CoefficientField) -> Result<f64> {
    let space = &field.space;
    let mut total = 0.0;
    for t in 0..space.mesh.num_triangles() {
        let src = coeff.source(space.mesh.regions[t])?;
        if matches!(src, TensorSource::Void) {
            continue;
        }
        let geo = space.geometry(t);
        for (l, w) in quadrature::degree5() {
            let x = geo.point(&l);
            let wt = src.willis_at(x).expect("non-void source");
            let g = field.grad(t, &l);
            let u = field.eval(t, &l);
            let sig = wt.c.contract(&g);
            let mut e = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let du: f64 = (0..2).map(|k| wt.d.get(i, j, k) * u[k]).sum();
                    e += (sig[i][j] + du) * g[i][j];
                    e -= wt.s.get(i, j, 0) * g[j][0] * u[i] + wt.s.get(i, j, 1) * g[j][1] * u[i];
                    e -= wt.b[i][j] * u[j] * u[i];
                }
            }
            total += w * geo.area * e;
        }
    }
    Ok(total)
}

/// `∫ u·g dσ` over edges tagged `tag`.
pub fn boundary_work(field: &Field, g: &VectorFn, tag: u32) -> f64 {
    let space = &field.space;
    let mut total = 0.0;
    for e in space.edges_with_tag(tag) {
        let (p, q) = space.edge_points(e);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        for (s, w) in quadrature::gauss3() {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let u = edge_value(field, e, s);
            let gv = g(x);
            total += w * len * (u[0] * gv[0] + u[1] * gv[1]);
        }
    }
    total
}

/// Trace value at parameter `s` along a tagged edge.
pub fn edge_value(field: &Field, e: &super::EdgeNodes, s: f64) -> [f64; 2] {
    let sh = super::space::edge_shape(field.space.order, s);
    let nn = if field.space.order == 1 { 2 } else { 3 };
    let mut u = [0.0; 2];
    for a in 0..nn {
        let v = field.node(e.nodes[a]);
        u[0] += sh[a] * v[0];
        u[1] += sh[a] * v[1];
    }
    u
}
