//! CSV and VTK export of displacement fields.

use std::io::Write;

use super::{edge_value, quadrature, strain_outputs, Field};
use crate::error::Result;

/// `node,x_m,y_m,u1_m,u2_m`
pub fn write_field_csv(field: &Field, w: &mut impl Write) -> Result<()> {
    writeln!(w, "node,x_m,y_m,u1_m,u2_m")?;
    for (n, p) in field.space.nodes.iter().enumerate() {
        let u = field.node(n);
        writeln!(w, "{n},{:e},{:e},{:e},{:e}", p[0], p[1], u[0], u[1])?;
    }
    Ok(())
}

/// `theta_rad,u1_m,u2_m` at the Gauss points of edges tagged `tag`, sorted by angle.
pub fn write_boundary_trace_csv(field: &Field, tag: u32, w: &mut impl Write) -> Result<()> {
    let mut rows = Vec::new();
    for e in field.space.edges_with_tag(tag) {
        let (p, q) = field.space.edge_points(e);
        for (s, _) in quadrature::gauss3() {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let u = edge_value(field, e, s);
            rows.push((x[1].atan2(x[0]), u));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    writeln!(w, "theta_rad,u1_m,u2_m")?;
    for (t, u) in rows {
        writeln!(w, "{t:e},{:e},{:e}", u[0], u[1])?;
    }
    Ok(())
}

/// Legacy ASCII unstructured grid: point displacements and per-cell mean strains.
/// P2 fields use quadratic triangles.
pub fn write_field_vtk(field: &Field, w: &mut impl Write) -> Result<()> {
    let space = &field.space;
    let nt = space.mesh.num_triangles();
    let nl = space.nodes_per_element();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "displacement field")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", space.num_nodes())?;
    for p in &space.nodes {
        writeln!(w, "{:e} {:e} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {nt} {}", nt * (nl + 1))?;
    for t in 0..nt {
        let ids: Vec<String> = space.element(t).iter().map(|n| n.to_string()).collect();
        writeln!(w, "{nl} {}", ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    let kind = if space.order == 1 { 5 } else { 22 };
    for _ in 0..nt {
        writeln!(w, "{kind}")?;
    }
    writeln!(w, "POINT_DATA {}", space.num_nodes())?;
    writeln!(w, "VECTORS displacement double")?;
    for n in 0..space.num_nodes() {
        let u = field.node(n);
        writeln!(w, "{:e} {:e} 0", u[0], u[1])?;
    }
    let samples = strain_outputs(field);
    let per = samples.len() / nt.max(1);
    writeln!(w, "CELL_DATA {nt}")?;
    for (name, pick) in [
        ("dilational_strain", 0usize),
        ("shear_strain", 1usize),
    ] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for chunk in samples.chunks(per.max(1)) {
            let m: f64 = chunk
                .iter()
                .map(|s| if pick == 0 { s.dilation } else { s.shear })
                .sum::<f64>()
                / chunk.len() as f64;
            writeln!(w, "{m:e}")?;
        }
    }
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for r in &space.mesh.regions {
        writeln!(w, "{r}")?;
    }
    Ok(())
}
