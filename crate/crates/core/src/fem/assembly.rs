//! Element loops producing triplet lists.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::sparse::{SparseColMat, Triplet};

use super::quadrature::{self, gauss3, TriPoint};
use super::space::{edge_shape, Space};
use super::{CoefficientField, TensorSource, VectorFn};
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Mat2;

const CHUNK: usize = 256;

/// Sparse system in triplet form; duplicates are summed on conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    /// True whenever no Willis coupling is present.
    pub symmetric: bool,
}

impl LinearSystem {
    pub fn to_csc(&self) -> Result<SparseColMat<usize, f64>> {
        to_csc(self.n, &self.entries)
    }

    /// `max |A − Aᵀ| / max |A|` over the summed matrix.
    pub fn asymmetry(&self) -> f64 {
        let mut m: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in &self.entries {
            *m.entry((i, j)).or_default() += v;
        }
        let scale = m.values().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0_f64;
        for (&(i, j), &v) in &m {
            let t = m.get(&(j, i)).copied().unwrap_or(0.0);
            worst = worst.max((v - t).abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `A x` computed from the triplets.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

pub(crate) fn to_csc(n: usize, entries: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let trips: Vec<Triplet<usize, usize, f64>> =
        entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    SparseColMat::try_new_from_triplets(n, n, &trips)
        .map_err(|e| Error::Solver(format!("sparse matrix construction failed: {e:?}")))
}

/// Extra volume terms beyond the elastic form.
#[derive(Clone, Default)]
pub struct AssemblyOptions {
    /// Body force `f` in `−∇·σ = f`.
    pub body: Option<VectorFn>,
    /// `(ρ per region, ω²)`: subtracts `ω² ∫ ρ u·w`.
    pub inertia: Option<(BTreeMap<u32, f64>, f64)>,
    pub gauge: Option<Arc<NodeGauge>>,
}

/// Change of unknowns on selected elements: at a listed node such an element
/// sees `G u` instead of the shared nodal value `u`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeGauge {
    /// Per triangle.
    pub elements: Vec<bool>,
    pub nodes: BTreeMap<usize, Mat2>,
}

/// Stiffness of `∫ (C:∇u + D·u):∇w − ∫ (S:∇u + B u)·w` with zero right-hand side.
pub fn assemble(space: &Space, coeff: &CoefficientField) -> Result<LinearSystem> {
    assemble_with(space, coeff, &AssemblyOptions::default())
}

pub fn assemble_with(space: &Space, coeff: &CoefficientField, opts: &AssemblyOptions) -> Result<LinearSystem> {
    coeff.check_covers(space)?;
    if let Some((rho, _)) = &opts.inertia {
        for tag in space.mesh.region_tags() {
            if !matches!(coeff.source(tag)?, TensorSource::Void) && !rho.contains_key(&tag) {
                return Err(Error::MissingRegion(tag));
            }
        }
    }
    let nt = space.mesh.num_triangles();
    let chunks = par::map_chunks(nt, CHUNK, |range| {
        let mut entries = Vec::new();
        let mut rhs = Vec::new();
        for t in range {
            element(space, coeff, opts, t, &mut entries, &mut rhs)?;
        }
        Ok::<_, Error>((entries, rhs))
    });
    let n = space.num_dofs();
    let mut entries = Vec::with_capacity(nt * 4 * space.nodes_per_element().pow(2));
    let mut rhs = vec![0.0; n];
    for c in chunks {
        let (e, r) = c?;
        entries.extend(e);
        for (i, v) in r {
            rhs[i] += v;
        }
    }
    Ok(LinearSystem {
        n,
        entries,
        rhs,
        symmetric: !coeff.is_willis(),
    })
}

fn rule_for(order: usize, varying: bool) -> Vec<TriPoint> {
    match (order, varying) {
        (_, true) => quadrature::degree5(),
        (1, false) => quadrature::degree2(),
        _ => quadrature::degree4(),
    }
}

fn element(
    space: &Space,
    coeff: &CoefficientField,
    opts: &AssemblyOptions,
    t: usize,
    entries: &mut Vec<(usize, usize, f64)>,
    rhs: &mut Vec<(usize, f64)>,
) -> Result<()> {
    let tag = space.mesh.regions[t];
    let src = coeff.source(tag)?;
    if matches!(src, TensorSource::Void) {
        return Ok(());
    }
    let geo = space.geometry(t);
    let nodes = space.element(t);
    let nl = nodes.len();
    let willis = src.is_willis();
    let rule = rule_for(space.order, src.is_varying() || opts.body.is_some());
    let centroid = geo.point(&[1.0 / 3.0; 3]);
    let fixed = if src.is_varying() {
        None
    } else {
        src.willis_at(centroid)
    };
    let inertia = opts
        .inertia
        .as_ref()
        .map(|(rho, w2)| w2 * rho.get(&tag).copied().unwrap_or(0.0))
        .unwrap_or(0.0);

    let mut k = [[0.0; 12]; 12];
    let mut f = [0.0; 12];
    let mut phi = [0.0; 6];
    let mut g = [[0.0; 2]; 6];
    for (l, wq) in &rule {
        let w = wq * geo.area;
        let x = geo.point(l);
        geo.shape(space.order, l, &mut phi, &mut g);
        let wt = match fixed {
            Some(v) => v,
            None => src.willis_at(x).ok_or(Error::MissingRegion(tag))?,
        };
        if src.is_varying() && wt.c.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(x[0], x[1]));
        }
        let c = &wt.c.c;
        for b in 0..nl {
            for kk in 0..2 {
                // σ_ij = C_ij(kk)l ∂_l φ_b
                let mut sig = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let base = ((i * 2 + j) * 2 + kk) * 2;
                        sig[i][j] = c[base] * g[b][0] + c[base + 1] * g[b][1];
                    }
                }
                if willis {
                    for i in 0..2 {
                        for j in 0..2 {
                            sig[i][j] += wt.d.get(i, j, kk) * phi[b];
                        }
                    }
                }
                let col = 2 * b + kk;
                for a in 0..nl {
                    for i in 0..2 {
                        let mut v = sig[i][0] * g[a][0] + sig[i][1] * g[a][1];
                        if willis {
                            let s = wt.s.get(i, kk, 0) * g[b][0] + wt.s.get(i, kk, 1) * g[b][1];
                            v -= (s + wt.b[i][kk] * phi[b]) * phi[a];
                        }
                        if i == kk && inertia != 0.0 {
                            v -= inertia * phi[a] * phi[b];
                        }
                        k[2 * a + i][col] += w * v;
                    }
                }
            }
        }
        if let Some(body) = &opts.body {
            let fv = body(x);
            for a in 0..nl {
                f[2 * a] += w * fv[0] * phi[a];
                f[2 * a + 1] += w * fv[1] * phi[a];
            }
        }
    }
    if let Some(gauge) = opts.gauge.as_deref().filter(|g| g.elements[t]) {
        apply_gauge(gauge, nodes, &mut k, &mut f);
    }
    for a in 0..nl {
        for i in 0..2 {
            let row = 2 * nodes[a] + i;
            for b in 0..nl {
                for kk in 0..2 {
                    entries.push((row, 2 * nodes[b] + kk, k[2 * a + i][2 * b + kk]));
                }
            }
            if opts.body.is_some() {
                rhs.push((row, f[2 * a + i]));
            }
        }
    }
    Ok(())
}

/// `K ← Tᵀ K T`, `f ← Tᵀ f` with `T` block diagonal in the node gauges.
fn apply_gauge(gauge: &NodeGauge, nodes: &[usize], k: &mut [[f64; 12]; 12], f: &mut [f64; 12]) {
    for (a, n) in nodes.iter().enumerate() {
        let Some(gm) = gauge.nodes.get(n) else { continue };
        for row in k.iter_mut() {
            let (c0, c1) = (row[2 * a], row[2 * a + 1]);
            row[2 * a] = c0 * gm[0][0] + c1 * gm[1][0];
            row[2 * a + 1] = c0 * gm[0][1] + c1 * gm[1][1];
        }
        for c in 0..12 {
            let (r0, r1) = (k[2 * a][c], k[2 * a + 1][c]);
            k[2 * a][c] = gm[0][0] * r0 + gm[1][0] * r1;
            k[2 * a + 1][c] = gm[0][1] * r0 + gm[1][1] * r1;
        }
        let (f0, f1) = (f[2 * a], f[2 * a + 1]);
        f[2 * a] = gm[0][0] * f0 + gm[1][0] * f1;
        f[2 * a + 1] = gm[0][1] * f0 + gm[1][1] * f1;
    }
}

/// Adds `∫ g·w dσ` over edges tagged `tag` to `rhs`.
pub fn add_traction(space: &Space, g: &VectorFn, tag: u32, rhs: &mut [f64]) {
    for e in space.edges_with_tag(tag) {
        let (p, q) = space.edge_points(e);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let nn = if space.order == 1 { 2 } else { 3 };
        for (s, w) in gauss3() {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let gv = g(x);
            let sh = edge_shape(space.order, s);
            for a in 0..nn {
                let n = e.nodes[a];
                rhs[2 * n] += w * len * gv[0] * sh[a];
                rhs[2 * n + 1] += w * len * gv[1] * sh[a];
            }
        }
    }
}

/// `∫ Ψ_j·φ` for the three rigid modes over non-void elements.
pub fn rigid_moments(space: &Space, coeff: &CoefficientField) -> Result<[Vec<f64>; 3]> {
    let n = space.num_dofs();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let rule = quadrature::degree4();
    let mut phi = [0.0; 6];
    let mut g = [[0.0; 2]; 6];
    for t in 0..space.mesh.num_triangles() {
        if matches!(coeff.source(space.mesh.regions[t])?, TensorSource::Void) {
            continue;
        }
        let geo = space.geometry(t);
        for (l, wq) in &rule {
            let x = geo.point(l);
            geo.shape(space.order, l, &mut phi, &mut g);
            for (a, &node) in space.element(t).iter().enumerate() {
                for (j, v) in out.iter_mut().enumerate() {
                    let psi = super::rigid_mode(j, x);
                    v[2 * node] += wq * geo.area * psi[0] * phi[a];
                    v[2 * node + 1] += wq * geo.area * psi[1] * phi[a];
                }
            }
        }
    }
    Ok(out)
}
