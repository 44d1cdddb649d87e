//! Legacy ASCII VTK (3.0) unstructured-grid output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{p0_project_cr, p0_project_rt, CrFunction, P0Function, RtField};
use crate::mesh::Triangulation;

#[derive(Debug, Clone, Copy)]
pub enum VtkField<'a> {
    /// Written as cell values `Π_h v` plus vertex values averaged over the
    /// adjacent elements (`<name>_points`).
    Cr(&'a str, &'a CrFunction),
    P0(&'a str, &'a P0Function),
    /// Written as the cell vectors `Π_h y`.
    Rt(&'a str, &'a RtField),
}

fn num(out: &mut String, x: f64) {
    // `{:?}` is the shortest representation that parses back exactly
    let _ = write!(out, "{x:?}");
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

/// Renders the mesh and fields as a VTK legacy document.
pub fn write_vtk(mesh: &Triangulation, fields: &[VtkField<'_>]) -> String {
    let dim = mesh.dim();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nrof-afem output\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.n_vertices());
    for p in mesh.vertices() {
        num(&mut out, p[0]);
        out.push(' ');
        num(&mut out, p[1]);
        out.push(' ');
        num(&mut out, p[2]);
        out.push('\n');
    }
    let ne = mesh.n_elements();
    let _ = writeln!(out, "CELLS {} {}", ne, ne * (dim + 2));
    for t in 0..ne {
        let _ = write!(out, "{}", dim + 1);
        for v in mesh.element_vertices(t) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    let cell_type = if dim == 2 { 5 } else { 10 };
    for _ in 0..ne {
        let _ = writeln!(out, "{cell_type}");
    }
    if fields.is_empty() {
        return out;
    }

    let _ = writeln!(out, "CELL_DATA {ne}");
    let scalars = |out: &mut String, name: &str, values: &[f64]| {
        let _ = writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", sanitize(name));
        for &v in values {
            num(out, v);
            out.push('\n');
        }
    };
    for field in fields {
        match *field {
            VtkField::P0(name, f) => scalars(&mut out, name, &f.values),
            VtkField::Cr(name, v) => scalars(&mut out, name, &p0_project_cr(mesh, v).values),
            VtkField::Rt(name, y) => {
                let _ = writeln!(out, "VECTORS {} double", sanitize(name));
                for m in p0_project_rt(mesh, y).values {
                    num(&mut out, m[0]);
                    out.push(' ');
                    num(&mut out, m[1]);
                    out.push(' ');
                    num(&mut out, m[2]);
                    out.push('\n');
                }
            }
        }
    }
    let cr: Vec<_> = fields
        .iter()
        .filter_map(|f| match *f {
            VtkField::Cr(name, v) => Some((name, v)),
            _ => None,
        })
        .collect();
    if !cr.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.n_vertices());
        for (name, v) in cr {
            let mut sum = vec![0.0; mesh.n_vertices()];
            let mut count = vec![0usize; mesh.n_vertices()];
            for t in 0..ne {
                let values = v.vertex_values(mesh, t);
                for (k, &p) in mesh.element_vertices(t).iter().enumerate() {
                    sum[p] += values[k];
                    count[p] += 1;
                }
            }
            let avg: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect();
            scalars(&mut out, &format!("{name}_points"), &avg);
        }
    }
    out
}

pub fn export_vtk(mesh: &Triangulation, fields: &[VtkField<'_>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_vtk(mesh, fields)).map_err(|e| Error::io(path, e))
}
