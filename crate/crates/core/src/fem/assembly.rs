use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::Triangulation;

use super::P0Function;

/// Exact local CR mass matrix `∫_T φ_i φ_j`; diagonal in 2D.
pub fn element_cr_mass(mesh: &Triangulation, t: usize) -> [[f64; 4]; 4] {
    let d = mesh.dim() as f64;
    let vol = mesh.volume(t);
    // (2 − d + δ_ij d²) / ((d + 1)(d + 2)); off-diagonals vanish in 2D
    let denom = (d + 1.0) * (d + 2.0);
    let mut m = [[0.0; 4]; 4];
    for i in 0..=mesh.dim() {
        for j in 0..=mesh.dim() {
            let delta = if i == j { d * d } else { 0.0 };
            m[i][j] = vol * (2.0 - d + delta) / denom;
        }
    }
    m
}

/// Local CR stiffness matrix `∫_T ∇φ_i · ∇φ_j` (unweighted).
pub fn element_stiffness(mesh: &Triangulation, t: usize) -> [[f64; 4]; 4] {
    let d = mesh.dim() as f64;
    let g = mesh.geometry(t);
    let mut k = [[0.0; 4]; 4];
    for i in 0..=mesh.dim() {
        for j in 0..=mesh.dim() {
            let gi = g.grad_lambda[i];
            let gj = g.grad_lambda[j];
            k[i][j] = g.volume * d * d * (gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2]);
        }
    }
    k
}

fn assemble(
    mesh: &Triangulation,
    mut local: impl FnMut(usize) -> Result<[[f64; 4]; 4]>,
) -> Result<SparseMatrix> {
    let n = mesh.n_sides();
    let nl = mesh.dim() + 1;
    let mut triplets = Vec::with_capacity(mesh.n_elements() * nl * nl);
    for t in 0..mesh.n_elements() {
        let m = local(t)?;
        let sides = mesh.element_sides(t);
        for i in 0..nl {
            for j in 0..nl {
                if m[i][j] != 0.0 {
                    triplets.push((sides[i], sides[j], m[i][j]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

pub fn assemble_cr_mass(mesh: &Triangulation) -> SparseMatrix {
    assemble(mesh, |t| Ok(element_cr_mass(mesh, t))).expect("local indices are in range")
}

/// `Σ_T w_T ∫_T ∇φ_S · ∇φ_S'`.
pub fn assemble_weighted_stiffness(mesh: &Triangulation, w: &P0Function) -> Result<SparseMatrix> {
    if w.values.len() != mesh.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_elements(),
            actual: w.values.len(),
        });
    }
    assemble(mesh, |t| {
        let wt = w.values[t];
        if !(wt >= 0.0) {
            return Err(Error::NegativeWeight { element: t, value: wt });
        }
        Ok(element_stiffness(mesh, t).map(|row| row.map(|x| wt * x)))
    })
}

/// `(Π_h φ_S, Π_h φ_S')`.
pub fn assemble_pi_mass(mesh: &Triangulation) -> SparseMatrix {
    let c = 1.0 / ((mesh.dim() + 1) * (mesh.dim() + 1)) as f64;
    assemble(mesh, |t| {
        let v = c * mesh.volume(t);
        Ok([[v; 4]; 4])
    })
    .expect("local indices are in range")
}
