//! Lagrange P1/P2 spaces on a [`Mesh`].

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Boundary or interface edge with its nodes: two vertices and, for P2, the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeNodes {
    pub nodes: [usize; 3],
    pub tag: u32,
}

#[derive(Debug)]
pub struct Space {
    pub mesh: Arc<Mesh>,
    pub order: usize,
    /// Vertices first, then edge midpoints.
    pub nodes: Vec<[f64; 2]>,
    elems: Vec<usize>,
    pub edges: Vec<EdgeNodes>,
}

impl Space {
    pub fn new(mesh: Arc<Mesh>, order: usize) -> Result<Arc<Self>> {
        if order != 1 && order != 2 {
            return Err(Error::Parameter(format!("element order {order} not in {{1, 2}}")));
        }
        let mut nodes = mesh.vertices.clone();
        let nloc = if order == 1 { 3 } else { 6 };
        let mut elems = Vec::with_capacity(nloc * mesh.triangles.len());
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                nodes.len() - 1
            })
        };
        for t in &mesh.triangles {
            elems.extend_from_slice(t);
            if order == 2 {
                for k in 0..3 {
                    let m = midpoint(t[k], t[(k + 1) % 3], &mut nodes);
                    elems.push(m);
                }
            }
        }
        let edges = mesh
            .edges
            .iter()
            .map(|e| EdgeNodes {
                nodes: [
                    e.v[0],
                    e.v[1],
                    if order == 2 {
                        midpoint(e.v[0], e.v[1], &mut nodes)
                    } else {
                        usize::MAX
                    },
                ],
                tag: e.tag,
            })
            .collect();
        Ok(Arc::new(Space {
            mesh,
            order,
            nodes,
            elems,
            edges,
        }))
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.order == 1 {
            3
        } else {
            6
        }
    }

    pub fn element(&self, t: usize) -> &[usize] {
        let n = self.nodes_per_element();
        &self.elems[n * t..n * (t + 1)]
    }

    pub fn edges_with_tag(&self, tag: u32) -> impl Iterator<Item = &EdgeNodes> {
        self.edges.iter().filter(move |e| e.tag == tag)
    }

    /// Nodes on edges with `tag` (vertices and midpoints), sorted.
    pub fn nodes_on(&self, tag: u32) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .edges_with_tag(tag)
            .flat_map(|e| e.nodes.into_iter().filter(|&n| n != usize::MAX))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Nodes of all triangles whose region satisfies `pred`, sorted.
    pub fn nodes_in(&self, pred: impl Fn(u32) -> bool) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.mesh.triangles.len())
            .filter(|&t| pred(self.mesh.regions[t]))
            .flat_map(|t| self.element(t).to_vec())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn geometry(&self, t: usize) -> Geometry {
        Geometry::new(self.mesh.corners(t))
    }

    /// Edge nodes in 1D shape order: endpoints then midpoint.
    pub fn edge_points(&self, e: &EdgeNodes) -> ([f64; 2], [f64; 2]) {
        (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]])
    }
}

/// Affine triangle data: area and barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub corners: [[f64; 2]; 3],
    pub area: f64,
    pub grad_l: [[f64; 2]; 3],
}

impl Geometry {
    pub fn new(corners: [[f64; 2]; 3]) -> Self {
        let [a, b, c] = corners;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let grad_l = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        Geometry {
            corners,
            area: 0.5 * det,
            grad_l,
        }
    }

    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let c = &self.corners;
        [
            l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
            l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
        ]
    }

    /// Shape values and gradients at barycentric point `l`; writes `n` entries.
    pub fn shape(&self, order: usize, l: &[f64; 3], phi: &mut [f64; 6], grad: &mut [[f64; 2]; 6]) {
        let g = &self.grad_l;
        if order == 1 {
            phi[..3].copy_from_slice(l);
            grad[..3].copy_from_slice(g);
            return;
        }
        for k in 0..3 {
            phi[k] = l[k] * (2.0 * l[k] - 1.0);
            let s = 4.0 * l[k] - 1.0;
            grad[k] = [s * g[k][0], s * g[k][1]];
            let j = (k + 1) % 3;
            phi[3 + k] = 4.0 * l[k] * l[j];
            grad[3 + k] = [
                4.0 * (l[j] * g[k][0] + l[k] * g[j][0]),
                4.0 * (l[j] * g[k][1] + l[k] * g[j][1]),
            ];
        }
    }
}

/// 1D shape values on an edge at parameter `s ∈ [0, 1]`: endpoints then midpoint.
pub fn edge_shape(order: usize, s: f64) -> [f64; 3] {
    if order == 1 {
        [1.0 - s, s, 0.0]
    } else {
        [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)]
    }
}
