//! Conforming triangulations of a disk with an embedded inclusion, optional
//! cloak annulus and layer interfaces.
//!
//! Every curved interface is replaced by an inscribed polygon whose edges are
//! constraint edges of a constrained Delaunay triangulation. The interior is
//! filled by inserting centroids of triangles that exceed the local target size
//! and then improving angles with Delaunay refinement.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use crate::error::{Error, Result};

/// Region tags carried by triangles.
pub mod region {
    pub const BACKGROUND: u32 = 0;
    pub const INCLUSION: u32 = 1;
    /// Inside the cloak's inner circle but outside the inclusion.
    pub const CORE: u32 = 2;
    /// Cloak layer `k` carries `LAYER + k`; an unlayered annulus is layer 0.
    pub const LAYER: u32 = 10;

    pub fn layer(k: usize) -> u32 {
        LAYER + k as u32
    }

    pub fn is_cloak(tag: u32) -> bool {
        tag >= LAYER
    }
}

/// Tags carried by boundary and interface edges.
pub mod boundary {
    pub const OUTER: u32 = 0;
    pub const INCLUSION: u32 = 1;
    pub const CLOAK_INNER: u32 = 2;
    pub const CLOAK_OUTER: u32 = 3;
    /// Interior layer interface `k` carries `LAYER + k`.
    pub const LAYER: u32 = 10;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Disk { r: f64 },
    /// Semi-axes along x₁ and x₂.
    Ellipse { a: f64, b: f64 },
    /// Side lengths along x₁ and x₂.
    Rectangle { a: f64, b: f64 },
}

impl Shape {
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { r } => PI * r * r,
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::Rectangle { a, b } => a * b,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Disk { r } => p[0].hypot(p[1]) < r,
            Shape::Ellipse { a, b } => (p[0] / a).powi(2) + (p[1] / b).powi(2) < 1.0,
            Shape::Rectangle { a, b } => p[0].abs() < 0.5 * a && p[1].abs() < 0.5 * b,
        }
    }

    /// Radius of the smallest centred disk containing the shape.
    pub fn outer_radius(&self) -> f64 {
        match *self {
            Shape::Disk { r } => r,
            Shape::Ellipse { a, b } => a.max(b),
            Shape::Rectangle { a, b } => 0.5 * a.hypot(b),
        }
    }

    /// Smallest geometric length scale.
    pub fn feature_length(&self) -> f64 {
        match *self {
            Shape::Disk { r } => r,
            Shape::Ellipse { a, b } => {
                let (lo, hi) = (a.min(b), a.max(b));
                lo.min(lo * lo / hi * 4.0)
            }
            Shape::Rectangle { a, b } => 0.5 * a.min(b),
        }
    }

    /// Approximate unsigned distance to the boundary, exact for disks and rectangles.
    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Shape::Disk { r } => (p[0].hypot(p[1]) - r).abs(),
            Shape::Ellipse { a, b } => {
                let q = ((p[0] / a).powi(2) + (p[1] / b).powi(2)).sqrt();
                if q == 0.0 {
                    return a.min(b);
                }
                let g = ((p[0] / (a * a)).powi(2) + (p[1] / (b * b)).powi(2)).sqrt() / q;
                ((q - 1.0) / g).abs()
            }
            Shape::Rectangle { a, b } => {
                let dx = p[0].abs() - 0.5 * a;
                let dy = p[1].abs() - 0.5 * b;
                if dx > 0.0 || dy > 0.0 {
                    dx.max(0.0).hypot(dy.max(0.0))
                } else {
                    -dx.max(dy)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Disk { r } => r > 0.0 && r.is_finite(),
            Shape::Ellipse { a, b } | Shape::Rectangle { a, b } => {
                a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Geometry(format!("degenerate inclusion {self:?}")))
        }
    }

    /// Closed polygon (counter-clockwise, last point not repeated).
    fn polygon(&self, h: f64, min_segments: usize) -> Vec<[f64; 2]> {
        match *self {
            Shape::Disk { r } => circle_polygon(r, h, min_segments),
            Shape::Ellipse { a, b } => ellipse_polygon(a, b, h, min_segments),
            Shape::Rectangle { a, b } => rectangle_polygon(a, b, h, min_segments),
        }
    }
}

fn circle_polygon(r: f64, h: f64, min_segments: usize) -> Vec<[f64; 2]> {
    let n = min_segments.max((2.0 * PI * r / h).ceil() as usize);
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// Places `n` points along a parametrized arc so that the count density
/// `ds / spacing(s)` is uniform. `speed(t)` is `|dx/dt|`, `t ∈ [t0, t1]`.
fn graded_parameters(
    t0: f64,
    t1: f64,
    min_count: usize,
    speed: impl Fn(f64) -> f64,
    spacing: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let fine = 4096;
    let dt = (t1 - t0) / fine as f64;
    let mut cum = Vec::with_capacity(fine + 1);
    cum.push(0.0);
    for k in 0..fine {
        let tm = t0 + (k as f64 + 0.5) * dt;
        let last = *cum.last().expect("non-empty");
        cum.push(last + speed(tm) * dt / spacing(tm));
    }
    let total = *cum.last().expect("non-empty");
    let n = min_count.max(total.ceil() as usize).max(1);
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let target = total * i as f64 / n as f64;
        while seg + 1 < fine && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let frac = if span > 0.0 { (target - cum[seg]) / span } else { 0.0 };
        out.push(t0 + (seg as f64 + frac) * dt);
    }
    out
}

fn ellipse_polygon(a: f64, b: f64, h: f64, min_segments: usize) -> Vec<[f64; 2]> {
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let per_turn = min_segments as f64;
    // curvature radius ρ = speed³/(ab); at least `min_segments` points per osculating circle
    let spacing = |t: f64| h.min(2.0 * PI * speed(t).powi(3) / (a * b) / per_turn);
    graded_parameters(0.0, 2.0 * PI, min_segments, speed, spacing)
        .into_iter()
        .map(|t| [a * t.cos(), b * t.sin()])
        .collect()
}

fn rectangle_polygon(a: f64, b: f64, h: f64, min_segments: usize) -> Vec<[f64; 2]> {
    let (ha, hb) = (0.5 * a, 0.5 * b);
    let corners = [[ha, -hb], [ha, hb], [-ha, hb], [-ha, -hb]];
    let perimeter = 2.0 * (a + b);
    let base = h.min(perimeter / min_segments as f64);
    let corner_h = 0.2 * base;
    let mut out = Vec::new();
    for k in 0..4 {
        let p = corners[k];
        let q = corners[(k + 1) % 4];
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let spacing = |s: f64| base.min(corner_h + 0.3 * s.min(len - s));
        let ts = graded_parameters(0.0, len, 1, |_| 1.0, spacing);
        for s in ts {
            let f = s / len;
            out.push([p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1])]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub outer_radius: f64,
    pub inclusion: Option<Shape>,
    /// `(r_in, r_out)` of the cloak annulus.
    pub cloak: Option<(f64, f64)>,
    /// Layer interfaces strictly inside the annulus, increasing.
    pub layer_radii: Vec<f64>,
    /// Far-field element size.
    pub h: f64,
    /// Element size on the inclusion boundary; defaults to `min(h, feature/8)`.
    pub h_inclusion: Option<f64>,
    /// Element size inside the cloak; defaults to `h`, capped by the layer thickness.
    pub h_cloak: Option<f64>,
    /// Growth rate of the element size away from refined features.
    pub grading: f64,
    pub min_segments: usize,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            outer_radius: 10.0,
            inclusion: None,
            cloak: None,
            layer_radii: Vec::new(),
            h: 0.5,
            h_inclusion: None,
            h_cloak: None,
            grading: 0.25,
            min_segments: 64,
        }
    }
}

impl GeometrySpec {
    pub fn disk(outer_radius: f64, h: f64) -> Self {
        GeometrySpec {
            outer_radius,
            h,
            ..Default::default()
        }
    }

    pub fn with_inclusion(mut self, shape: Shape) -> Self {
        self.inclusion = Some(shape);
        self
    }

    pub fn with_cloak(mut self, r_in: f64, r_out: f64) -> Self {
        self.cloak = Some((r_in, r_out));
        self
    }

    fn inclusion_matches_inner_circle(&self) -> bool {
        match (self.inclusion, self.cloak) {
            (Some(Shape::Disk { r }), Some((r_in, _))) => (r - r_in).abs() <= 1e-12 * r_in,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = |m: String| Err(Error::Geometry(m));
        if !(self.outer_radius > 0.0 && self.h > 0.0 && self.grading > 0.0) {
            return g("outer radius, h and grading must be positive".into());
        }
        if self.min_segments < 3 {
            return g("min_segments must be at least 3".into());
        }
        for v in [self.h_inclusion, self.h_cloak].into_iter().flatten() {
            if !(v > 0.0) {
                return g(format!("local size {v} must be positive"));
            }
        }
        let mut bound = self.outer_radius;
        if let Some((r_in, r_out)) = self.cloak {
            if !(0.0 < r_in && r_in < r_out && r_out < self.outer_radius) {
                return g(format!(
                    "cloak radii ({r_in}, {r_out}) must satisfy 0 < r_in < r_out < {}",
                    self.outer_radius
                ));
            }
            let mut prev = r_in;
            for &r in &self.layer_radii {
                if !(r > prev && r < r_out) {
                    return g(format!("layer radius {r} not strictly increasing inside the annulus"));
                }
                prev = r;
            }
            bound = r_in;
        } else if !self.layer_radii.is_empty() {
            return g("layer radii require a cloak annulus".into());
        }
        if let Some(s) = self.inclusion {
            s.validate()?;
            let fits = s.outer_radius() < bound
                || (self.inclusion_matches_inner_circle() && s.outer_radius() <= bound);
            if !fits {
                return g(format!("inclusion {s:?} does not fit strictly inside radius {bound}"));
            }
        }
        Ok(())
    }

    fn inclusion_h(&self) -> Option<f64> {
        self.inclusion.map(|s| {
            self.h_inclusion
                .unwrap_or_else(|| self.h.min(s.feature_length() / 8.0))
        })
    }

    fn cloak_h(&self) -> Option<f64> {
        self.cloak.map(|(r_in, r_out)| {
            let mut h = self.h_cloak.unwrap_or(self.h);
            if !self.layer_radii.is_empty() {
                let mut prev = r_in;
                for &r in self.layer_radii.iter().chain(std::iter::once(&r_out)) {
                    h = h.min(r - prev);
                    prev = r;
                }
            }
            h
        })
    }

    /// Target element size at `p`.
    pub fn size_at(&self, p: [f64; 2]) -> f64 {
        let mut h = self.h;
        if let (Some(s), Some(hi)) = (self.inclusion, self.inclusion_h()) {
            h = h.min(hi + self.grading * s.boundary_distance(p));
        }
        if let (Some((r_in, r_out)), Some(hc)) = (self.cloak, self.cloak_h()) {
            let r = p[0].hypot(p[1]);
            let d = if r < r_in {
                r_in - r
            } else if r > r_out {
                r - r_out
            } else {
                0.0
            };
            h = h.min(hc + self.grading * d);
        }
        h
    }

    /// Same geometry with all sizes divided by `factor` and polygon counts multiplied by it.
    pub fn refined(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.h /= factor;
        s.h_inclusion = self.inclusion_h().map(|v| v / factor);
        s.h_cloak = self.h_cloak.map(|v| v / factor);
        s.min_segments = (self.min_segments as f64 * factor).ceil() as usize;
        s
    }

    fn curves(&self) -> Vec<Curve> {
        let mut out = vec![Curve::new(
            circle_polygon(self.outer_radius, self.h, self.min_segments),
            boundary::OUTER,
        )];
        let merged = self.inclusion_matches_inner_circle();
        if let (Some(s), Some(hi)) = (self.inclusion, self.inclusion_h()) {
            let h = match self.cloak_h() {
                Some(hc) if merged => hi.min(hc),
                _ => hi,
            };
            out.push(Curve::new(s.polygon(h, self.min_segments), boundary::INCLUSION));
        }
        if let (Some((r_in, r_out)), Some(hc)) = (self.cloak, self.cloak_h()) {
            if !merged {
                out.push(Curve::new(
                    circle_polygon(r_in, hc, self.min_segments),
                    boundary::CLOAK_INNER,
                ));
            }
            for (k, &r) in self.layer_radii.iter().enumerate() {
                out.push(Curve::new(
                    circle_polygon(r, hc, self.min_segments),
                    boundary::LAYER + k as u32,
                ));
            }
            out.push(Curve::new(
                circle_polygon(r_out, hc, self.min_segments),
                boundary::CLOAK_OUTER,
            ));
        }
        out
    }

    fn classify(&self, p: [f64; 2], curves: &[Curve]) -> u32 {
        let inside = |tag: u32| {
            curves
                .iter()
                .find(|c| c.tag == tag)
                .map(|c| c.contains(p))
                .unwrap_or(false)
        };
        if self.inclusion.is_some() && inside(boundary::INCLUSION) {
            return region::INCLUSION;
        }
        if self.cloak.is_some() {
            let inner = if self.inclusion_matches_inner_circle() {
                boundary::INCLUSION
            } else {
                boundary::CLOAK_INNER
            };
            if inside(inner) {
                return if self.inclusion.is_some() {
                    region::CORE
                } else {
                    region::INCLUSION
                };
            }
            if inside(boundary::CLOAK_OUTER) {
                let k = (0..self.layer_radii.len())
                    .take_while(|&k| !inside(boundary::LAYER + k as u32))
                    .count();
                return region::layer(k);
            }
        }
        region::BACKGROUND
    }
}

struct Curve {
    pts: Vec<[f64; 2]>,
    tag: u32,
    r_lo: f64,
    r_hi: f64,
}

impl Curve {
    fn new(pts: Vec<[f64; 2]>, tag: u32) -> Self {
        let n = pts.len();
        let mut r_lo = f64::INFINITY;
        let mut r_hi = 0.0_f64;
        for k in 0..n {
            let (p, q) = (pts[k], pts[(k + 1) % n]);
            r_hi = r_hi.max(p[0].hypot(p[1]));
            r_lo = r_lo.min(segment_distance([0.0, 0.0], p, q));
        }
        Curve { pts, tag, r_lo, r_hi }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let r = p[0].hypot(p[1]);
        if r < self.r_lo {
            return true;
        }
        if r > self.r_hi {
            return false;
        }
        let n = self.pts.len();
        let mut inside = false;
        for k in 0..n {
            let (a, b) = (self.pts[k], self.pts[(k + 1) % n]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn on_curve(&self, p: [f64; 2], tol: f64) -> bool {
        let r = p[0].hypot(p[1]);
        if r < self.r_lo - tol || r > self.r_hi + tol {
            return false;
        }
        let n = self.pts.len();
        (0..n).any(|k| segment_distance(p, self.pts[k], self.pts[(k + 1) % n]) <= tol)
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedEdge {
    pub v: [usize; 2],
    pub tag: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<u32>,
    /// Outer boundary edges run counter-clockwise; interface edges run
    /// counter-clockwise about the origin.
    pub edges: Vec<TaggedEdge>,
    pub spec: Option<GeometrySpec>,
}

pub fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let la = (b[0] - c[0]).hypot(b[1] - c[1]);
    let lb = (a[0] - c[0]).hypot(a[1] - c[1]);
    let lc = (a[0] - b[0]).hypot(a[1] - b[1]);
    la * lb * lc / (4.0 * triangle_area(a, b, c).abs())
}

fn centroid(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

fn oversized(cdt: &Cdt, spec: &GeometrySpec) -> Vec<[f64; 2]> {
    cdt.inner_faces()
        .filter_map(|f| {
            let [a, b, c] = f.vertices().map(|v| {
                let p = v.position();
                [p.x, p.y]
            });
            let h = spec.size_at(centroid(a, b, c));
            // equilateral triangle of side h has area √3/4 h²
            (triangle_area(a, b, c).abs() > 0.4330127 * h * h).then(|| centroid(a, b, c))
        })
        .collect()
}

pub fn build_mesh(spec: &GeometrySpec) -> Result<Mesh> {
    spec.validate()?;
    let curves = spec.curves();
    let mut verts = Vec::new();
    let mut cons = Vec::new();
    for c in &curves {
        let base = verts.len();
        let n = c.pts.len();
        for p in &c.pts {
            verts.push(Point2::new(p[0], p[1]));
        }
        for k in 0..n {
            cons.push([base + k, base + (k + 1) % n]);
        }
    }
    let mut cdt = Cdt::bulk_load_cdt(verts, cons)
        .map_err(|e| Error::Triangulation(format!("{e:?}")))?;

    let quality = || {
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(25.0))
            .exclude_outer_faces(false)
            .with_max_additional_vertices(2_000_000)
    };
    let mut rounds = 0;
    loop {
        let pts = oversized(&cdt, spec);
        if pts.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > 80 {
            return Err(Error::Triangulation("size refinement did not converge".into()));
        }
        for p in pts {
            cdt.insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::Triangulation(format!("{e:?}")))?;
        }
        cdt.refine(quality());
    }
    cdt.refine(quality());
    mesh_from_cdt(&cdt, spec, &curves)
}

fn mesh_from_cdt(cdt: &Cdt, spec: &GeometrySpec, curves: &[Curve]) -> Result<Mesh> {
    let vertices: Vec<[f64; 2]> = cdt
        .vertices()
        .map(|v| {
            let p = v.position();
            [p.x, p.y]
        })
        .collect();
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    let mut regions = Vec::with_capacity(cdt.num_inner_faces());
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for f in cdt.inner_faces() {
        let mut t = f.vertices().map(|v| v.fix().index());
        let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        let area = triangle_area(a, b, c);
        if area < 0.0 {
            t.swap(1, 2);
        }
        if area.abs() <= 1e-14 * spec.h * spec.h * 1e-6 {
            return Err(Error::Triangulation("degenerate triangle".into()));
        }
        let id = triangles.len();
        for k in 0..3 {
            owner.insert((t[k], t[(k + 1) % 3]), id);
        }
        regions.push(spec.classify(centroid(a, b, c), curves));
        triangles.push(t);
    }

    let tol = 1e-9 * spec.outer_radius;
    let mut edges = Vec::new();
    for e in cdt.undirected_edges() {
        if !e.is_constraint_edge() {
            continue;
        }
        let [p, q] = e.vertices().map(|v| v.fix().index());
        let (a, b) = (vertices[p], vertices[q]);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let tag = curves
            .iter()
            .find(|c| c.on_curve(mid, tol))
            .map(|c| c.tag)
            .ok_or_else(|| Error::Triangulation(format!("constraint edge at {mid:?} on no curve")))?;
        let v = if tag == boundary::OUTER {
            // the domain lies to the left of (from, to)
            if owner.contains_key(&(p, q)) {
                [p, q]
            } else {
                [q, p]
            }
        } else if a[0] * b[1] - a[1] * b[0] >= 0.0 {
            [p, q]
        } else {
            [q, p]
        };
        edges.push(TaggedEdge { v, tag });
    }
    edges.sort_by_key(|e| (e.tag, e.v));
    Ok(Mesh {
        vertices,
        triangles,
        regions,
        edges,
        spec: Some(spec.clone()),
    })
}

/// Rebuilds at `h / factor`; meshes without a geometry description are split uniformly.
pub fn refine(mesh: &Mesh, factor: f64) -> Result<Mesh> {
    if !(factor > 1.0) {
        return Err(Error::Parameter(format!("refinement factor {factor} must exceed 1")));
    }
    match &mesh.spec {
        Some(spec) => build_mesh(&spec.refined(factor)),
        None => Ok(split_uniform(mesh)),
    }
}

/// Each triangle into four through its edge midpoints.
pub fn split_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut regions = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &r) in mesh.triangles.iter().zip(&mesh.regions) {
        let [a, b, c] = *t;
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        for tri in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
            triangles.push(tri);
            regions.push(r);
        }
    }
    let mut edges = Vec::with_capacity(2 * mesh.edges.len());
    for e in &mesh.edges {
        let m = midpoint(e.v[0], e.v[1], &mut vertices);
        edges.push(TaggedEdge {
            v: [e.v[0], m],
            tag: e.tag,
        });
        edges.push(TaggedEdge {
            v: [m, e.v[1]],
            tag: e.tag,
        });
    }
    Mesh {
        vertices,
        triangles,
        regions,
        edges,
        spec: None,
    }
}

impl Mesh {
    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                triangle_area(a, b, c)
            })
            .sum()
    }

    pub fn region_area(&self, tags: &[u32]) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| tags.contains(&self.regions[t]))
            .map(|t| {
                let [a, b, c] = self.corners(t);
                triangle_area(a, b, c)
            })
            .sum()
    }

    pub fn region_tags(&self) -> Vec<u32> {
        let mut v = self.regions.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn edges_with_tag(&self, tag: u32) -> impl Iterator<Item = &TaggedEdge> {
        self.edges.iter().filter(move |e| e.tag == tag)
    }

    pub fn max_circumradius(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                circumradius(a, b, c)
            })
            .fold(0.0, f64::max)
    }

    pub fn min_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                triangle_area(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Plain-text export; see [`Mesh::read_text`] for the layout.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# elastic-cloak mesh v1");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], r);
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.v[0], e.v[1], e.tag);
        }
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Reads the layout
    ///
    /// ```text
    /// # comment lines
    /// vertices N
    /// x y              (N lines)
    /// triangles M
    /// a b c region     (M lines, 0-based vertex ids)
    /// edges K
    /// a b tag          (K lines)
    /// ```
    pub fn read_text(reader: impl BufRead) -> Result<Mesh> {
        let mut lines = reader
            .lines()
            .map(|l| l.map_err(Error::from))
            .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#')));
        let mut next = || -> Result<String> {
            lines
                .next()
                .unwrap_or_else(|| Err(Error::Parse("unexpected end of mesh file".into())))
        };
        fn header(line: &str, key: &str) -> Result<usize> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Parse(format!("expected '{key}' section, got '{line}'")));
            }
            it.next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad count in '{line}'")))
        }
        fn nums<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
            let v: Vec<T> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number in '{line}'"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::Parse(format!("expected {n} fields in '{line}'")));
            }
            Ok(v)
        }
        let nv = header(&next()?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = nums(&next()?, 2)?;
            vertices.push([v[0], v[1]]);
        }
        let nt = header(&next()?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        let mut regions = Vec::with_capacity(nt);
        for _ in 0..nt {
            let v: Vec<usize> = nums(&next()?, 4)?;
            if v[..3].iter().any(|&i| i >= nv) {
                return Err(Error::Parse("triangle references missing vertex".into()));
            }
            triangles.push([v[0], v[1], v[2]]);
            regions.push(v[3] as u32);
        }
        let ne = header(&next()?, "edges")?;
        let mut edges = Vec::with_capacity(ne);
        for _ in 0..ne {
            let v: Vec<usize> = nums(&next()?, 3)?;
            if v[..2].iter().any(|&i| i >= nv) {
                return Err(Error::Parse("edge references missing vertex".into()));
            }
            edges.push(TaggedEdge {
                v: [v[0], v[1]],
                tag: v[2] as u32,
            });
        }
        Ok(Mesh {
            vertices,
            triangles,
            regions,
            edges,
            spec: None,
        })
    }

    /// Legacy ASCII VTK with a region tag per cell.
    pub fn write_vtk(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "elastic-cloak mesh")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:e} {:e} 0", v[0], v[1])?;
        }
        let n = self.triangles.len();
        writeln!(w, "CELLS {} {}", n, 4 * n)?;
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {n}")?;
        for _ in 0..n {
            writeln!(w, "5")?;
        }
        writeln!(w, "CELL_DATA {n}")?;
        writeln!(w, "SCALARS region int 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for r in &self.regions {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_disk_area() {
        let m = build_mesh(&GeometrySpec::disk(10.0, 1.0)).unwrap();
        assert!((m.area() - 100.0 * PI).abs() < 0.01 * 100.0 * PI);
        assert_eq!(m.region_tags(), vec![region::BACKGROUND]);
        assert!(m.edges.iter().all(|e| e.tag == boundary::OUTER));
        assert!(m.max_circumradius() <= 1.0);
    }

    #[test]
    fn ellipse_area() {
        let spec = GeometrySpec::disk(10.0, 1.0).with_inclusion(Shape::Ellipse { a: 2.0, b: 0.5 });
        let m = build_mesh(&spec).unwrap();
        let a = m.region_area(&[region::INCLUSION]);
        assert!((a - PI).abs() < 0.02 * PI, "{a}");
    }

    #[test]
    fn cloak_regions() {
        let spec = GeometrySpec::disk(10.0, 1.0)
            .with_inclusion(Shape::Disk { r: 2.0 })
            .with_cloak(2.0, 4.0);
        let m = build_mesh(&spec).unwrap();
        assert_eq!(
            m.region_tags(),
            vec![region::BACKGROUND, region::INCLUSION, region::LAYER]
        );
        assert!(m.edges_with_tag(boundary::INCLUSION).count() >= 64);
        assert!(m.edges_with_tag(boundary::CLOAK_OUTER).count() >= 64);
        assert_eq!(m.edges_with_tag(boundary::CLOAK_INNER).count(), 0);
    }

    #[test]
    fn rejects_inclusion_outside_cloak() {
        let spec = GeometrySpec::disk(10.0, 1.0)
            .with_inclusion(Shape::Disk { r: 3.0 })
            .with_cloak(2.0, 4.0);
        assert!(matches!(build_mesh(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn rectangle_corners_are_vertices() {
        let spec = GeometrySpec::disk(10.0, 1.0).with_inclusion(Shape::Rectangle { a: 2.0, b: 0.5 });
        let m = build_mesh(&spec).unwrap();
        for c in [[1.0, 0.25], [-1.0, 0.25], [-1.0, -0.25], [1.0, -0.25]] {
            assert!(m
                .vertices
                .iter()
                .any(|v| (v[0] - c[0]).abs() < 1e-14 && (v[1] - c[1]).abs() < 1e-14));
        }
    }

    #[test]
    fn text_round_trip() {
        let m = build_mesh(&GeometrySpec::disk(1.0, 0.3)).unwrap();
        let back = Mesh::read_text(m.to_text().as_bytes()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.regions, m.regions);
        assert_eq!(back.edges, m.edges);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(a, b);
        }
    }
}
