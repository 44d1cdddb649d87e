//! Crouzeix–Raviart and Raviart–Thomas spaces of lowest order.
//!
//! A CR function stores its values at side barycenters; on element `T` its
//! local basis is `φ_i = 1 − d λ_i`. An RT field stores the normal
//! component on each side with respect to the canonical side normal; on
//! `T` its local basis is `ψ_i = |F_i| / (d |T|) (x − p_i)`.

mod assembly;
mod quadrature;

pub use assembly::{
    assemble_cr_mass, assemble_pi_mass, assemble_weighted_stiffness, element_cr_mass,
    element_stiffness,
};
pub use quadrature::{map_point, quad_l2_element, simplex_rule, SimplexRule};
pub(crate) use quadrature::integrate_with;

use crate::mesh::{BoundaryTag, Point, Triangulation};

#[derive(Debug, Clone, PartialEq)]
pub struct CrFunction {
    pub dofs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtField {
    pub dofs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P0Function {
    pub values: Vec<f64>,
}

/// Element-wise constant vectors; unused trailing components are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Vector {
    pub values: Vec<Point>,
}

impl CrFunction {
    pub fn zeros(mesh: &Triangulation) -> Self {
        Self { dofs: vec![0.0; mesh.n_sides()] }
    }

    /// Interpolation by evaluation at side barycenters.
    pub fn interpolate(mesh: &Triangulation, f: impl Fn(&Point) -> f64) -> Self {
        Self {
            dofs: (0..mesh.n_sides()).map(|s| f(&mesh.side_barycenter(s))).collect(),
        }
    }

    /// Dofs of element `t` in local face order.
    pub fn local(&self, mesh: &Triangulation, t: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, &s) in out.iter_mut().zip(mesh.element_sides(t)) {
            *o = self.dofs[s];
        }
        out
    }

    /// Value of the affine restriction to `t` at `x`.
    pub fn eval(&self, mesh: &Triangulation, t: usize, x: &Point) -> f64 {
        let d = mesh.dim() as f64;
        let g = mesh.geometry(t);
        let verts = mesh.element_vertices(t);
        let dofs = self.local(mesh, t);
        (0..=mesh.dim())
            .map(|i| dofs[i] * (1.0 - d * g.barycentric(i, &mesh.vertex(verts[i]), x)))
            .sum()
    }

    /// Values of the restriction to `t` at its vertices (local order).
    pub fn vertex_values(&self, mesh: &Triangulation, t: usize) -> [f64; 4] {
        let d = mesh.dim() as f64;
        let dofs = self.local(mesh, t);
        let total: f64 = dofs[..=mesh.dim()].iter().sum();
        let mut out = [0.0; 4];
        for k in 0..=mesh.dim() {
            out[k] = total - d * dofs[k];
        }
        out
    }
}

impl RtField {
    pub fn zeros(mesh: &Triangulation) -> Self {
        Self { dofs: vec![0.0; mesh.n_sides()] }
    }

    /// Interpolates a field by its normal component at side barycenters
    /// (exact for fields of the form `a + b x`).
    pub fn interpolate(mesh: &Triangulation, f: impl Fn(&Point) -> Point) -> Self {
        Self {
            dofs: (0..mesh.n_sides())
                .map(|s| dot3(&f(&mesh.side_barycenter(s)), &mesh.side_normal(s)))
                .collect(),
        }
    }

    /// Restriction to `t` as `a + b (x − x_T)`.
    pub fn element_affine(&self, mesh: &Triangulation, t: usize) -> (Point, f64) {
        let d = mesh.dim() as f64;
        let g = mesh.geometry(t);
        let xt = g.barycenter;
        let verts = mesh.element_vertices(t);
        let sides = mesh.element_sides(t);
        let mut a = [0.0; 3];
        let mut b = 0.0;
        for i in 0..=mesh.dim() {
            let c = mesh.flux_sign(t, i) * self.dofs[sides[i]] * g.face_area[i] / (d * g.volume);
            b += c;
            let p = mesh.vertex(verts[i]);
            for k in 0..3 {
                a[k] += c * (xt[k] - p[k]);
            }
        }
        (a, b)
    }

    pub fn eval(&self, mesh: &Triangulation, t: usize, x: &Point) -> Point {
        let (a, b) = self.element_affine(mesh, t);
        let xt = mesh.barycenter(t);
        [0, 1, 2].map(|k| a[k] + b * (x[k] - xt[k]))
    }

    /// Builds the field whose normal components on each side are the given
    /// per-element outward fluxes, averaged over the two neighbours.
    /// Returns the field and the largest interior mismatch.
    pub fn from_element_fluxes(mesh: &Triangulation, fluxes: &[[f64; 4]]) -> (Self, f64) {
        let mut dofs = vec![0.0; mesh.n_sides()];
        let mut mismatch: f64 = 0.0;
        for s in 0..mesh.n_sides() {
            let (t0, t1) = mesh.side_elements(s);
            let f0 = fluxes[t0][mesh.local_face(t0, s)];
            match t1 {
                Some(t1) => {
                    // outward for t1 is the negated canonical normal
                    let f1 = -fluxes[t1][mesh.local_face(t1, s)];
                    mismatch = mismatch.max((f0 - f1).abs());
                    dofs[s] = 0.5 * (f0 + f1);
                }
                None => dofs[s] = f0,
            }
        }
        (Self { dofs }, mismatch)
    }
}

/// Outward normal components of `a + b (x − x_T)` on the faces of `t`.
pub fn element_affine_fluxes(mesh: &Triangulation, t: usize, a: &Point, b: f64) -> [f64; 4] {
    let g = mesh.geometry(t);
    let xt = g.barycenter;
    let verts = mesh.element_vertices(t);
    let mut out = [0.0; 4];
    for i in 0..=mesh.dim() {
        let n = g.outward_normal(i);
        // any vertex of face i lies at the same normal distance
        let q = mesh.vertex(verts[(i + 1) % (mesh.dim() + 1)]);
        let offset: Point = [0, 1, 2].map(|k| q[k] - xt[k]);
        out[i] = dot3(a, &n) + b * dot3(&offset, &n);
    }
    out
}

pub(crate) fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &Point) -> f64 {
    dot3(a, a).sqrt()
}

pub fn cr_gradient(mesh: &Triangulation, v: &CrFunction) -> P0Vector {
    let d = mesh.dim() as f64;
    let values = (0..mesh.n_elements())
        .map(|t| {
            let g = mesh.geometry(t);
            let dofs = v.local(mesh, t);
            let mut grad = [0.0; 3];
            for i in 0..=mesh.dim() {
                for k in 0..3 {
                    grad[k] -= d * dofs[i] * g.grad_lambda[i][k];
                }
            }
            grad
        })
        .collect();
    P0Vector { values }
}

/// Element means of a CR function (the average of its face values).
pub fn p0_project_cr(mesh: &Triangulation, v: &CrFunction) -> P0Function {
    let n = (mesh.dim() + 1) as f64;
    P0Function {
        values: (0..mesh.n_elements())
            .map(|t| mesh.element_sides(t).iter().map(|&s| v.dofs[s]).sum::<f64>() / n)
            .collect(),
    }
}

/// Element means of an RT field (its value at the element barycenter).
pub fn p0_project_rt(mesh: &Triangulation, y: &RtField) -> P0Vector {
    P0Vector {
        values: (0..mesh.n_elements()).map(|t| y.element_affine(mesh, t).0).collect(),
    }
}

/// Element means of a callback by quadrature.
pub fn p0_project_fn(
    mesh: &Triangulation,
    f: impl Fn(&Point) -> f64,
    order: usize,
) -> crate::Result<P0Function> {
    let rule = simplex_rule(mesh.dim(), order)?;
    Ok(P0Function {
        values: (0..mesh.n_elements())
            .map(|t| integrate_with(mesh, t, &rule, &f) / mesh.volume(t))
            .collect(),
    })
}

pub fn rt_divergence(mesh: &Triangulation, y: &RtField) -> P0Function {
    P0Function {
        values: (0..mesh.n_elements())
            .map(|t| {
                let g = mesh.geometry(t);
                let sides = mesh.element_sides(t);
                (0..=mesh.dim())
                    .map(|i| mesh.flux_sign(t, i) * y.dofs[sides[i]] * g.face_area[i])
                    .sum::<f64>()
                    / g.volume
            })
            .collect(),
    }
}

/// `max |y|` over Ω, attained at element vertices.
pub fn rt_linf_norm(mesh: &Triangulation, y: &RtField) -> f64 {
    let mut max: f64 = 0.0;
    for t in 0..mesh.n_elements() {
        for &v in mesh.element_vertices(t) {
            max = max.max(norm3(&y.eval(mesh, t, &mesh.vertex(v))));
        }
    }
    max
}

/// Zeroes the dofs of every side that meets ∂Ω.
pub fn boundary_interpolant(mesh: &Triangulation, v: &CrFunction) -> CrFunction {
    let touching = mesh.sides_touching_boundary();
    CrFunction {
        dofs: v
            .dofs
            .iter()
            .zip(touching)
            .map(|(&x, t)| if t { 0.0 } else { x })
            .collect(),
    }
}

/// Sides carrying a homogeneous Dirichlet constraint.
pub fn dirichlet_sides(mesh: &Triangulation) -> Vec<bool> {
    mesh.boundary_tags().iter().map(|&t| t == BoundaryTag::Dirichlet).collect()
}

/// `∫_S |f|` for `f` affine on a segment with endpoint values `a`, `b`.
pub fn abs_integral_segment(len: f64, a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * len * (a.abs() + b.abs())
    } else {
        0.5 * len * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// `∫_S max(f, 0)` for `f` affine on a triangle with vertex values.
fn positive_part_triangle(area: f64, v: [f64; 3]) -> f64 {
    let mut v = v;
    v.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = v;
    if c >= 0.0 {
        area * (a + b + c) / 3.0
    } else if a <= 0.0 {
        0.0
    } else if b <= 0.0 {
        // one positive vertex: the positive region is a scaled copy
        area * a * a * a / (3.0 * (a - b) * (a - c))
    } else {
        // two positive vertices: ∫f⁺ = ∫f + ∫(−f)⁺
        area * (a + b + c) / 3.0 + area * c * c * c / (3.0 * (b - c) * (a - c)) * -1.0
    }
}

/// `∫_S |f|` for `f` affine on a triangle with vertex values `v`.
pub fn abs_integral_triangle(area: f64, v: [f64; 3]) -> f64 {
    positive_part_triangle(area, v) + positive_part_triangle(area, v.map(|x| -x))
}

/// Exact `∫_S |f|` of an affine function given at the side vertices.
pub fn abs_integral_side(dim: usize, measure: f64, values: &[f64]) -> f64 {
    if dim == 2 {
        abs_integral_segment(measure, values[0], values[1])
    } else {
        abs_integral_triangle(measure, [values[0], values[1], values[2]])
    }
}

/// Values of the restriction of `v` to `t` at the vertices of side `s`.
pub fn cr_side_trace(mesh: &Triangulation, v: &CrFunction, t: usize, s: usize) -> [f64; 3] {
    let vals = v.vertex_values(mesh, t);
    let verts = mesh.element_vertices(t);
    let mut out = [0.0; 3];
    for (o, sv) in out.iter_mut().zip(mesh.side_vertices(s)) {
        let k = verts.iter().position(|x| x == sv).expect("side vertex");
        *o = vals[k];
    }
    out
}

/// `∫_S |[v]|` per side: the jump on interior sides, the trace on
/// Dirichlet boundary sides when `include_dirichlet_boundary`, zero
/// otherwise.
pub fn cr_jump_l1_per_side(
    mesh: &Triangulation,
    v: &CrFunction,
    include_dirichlet_boundary: bool,
) -> Vec<f64> {
    let d = mesh.dim();
    (0..mesh.n_sides())
        .map(|s| {
            let (t0, t1) = mesh.side_elements(s);
            let mut vals = cr_side_trace(mesh, v, t0, s);
            match t1 {
                Some(t1) => {
                    let other = cr_side_trace(mesh, v, t1, s);
                    for k in 0..d {
                        vals[k] -= other[k];
                    }
                }
                None => {
                    if !(include_dirichlet_boundary
                        && mesh.boundary_tag(s) == BoundaryTag::Dirichlet)
                    {
                        return 0.0;
                    }
                }
            }
            abs_integral_side(d, mesh.side_measure(s), &vals[..d])
        })
        .collect()
}

pub fn cr_jump_l1(mesh: &Triangulation, v: &CrFunction, include_dirichlet_boundary: bool) -> f64 {
    cr_jump_l1_per_side(mesh, v, include_dirichlet_boundary).iter().sum()
}

/// `‖∇_h v‖_{L¹}`.
pub fn cr_gradient_l1(mesh: &Triangulation, v: &CrFunction) -> f64 {
    cr_gradient(mesh, v)
        .values
        .iter()
        .enumerate()
        .map(|(t, g)| mesh.volume(t) * norm3(g))
        .sum()
}

/// Total variation `‖∇_h v‖_{L¹} + ‖[v]‖_{L¹(S)}` of a CR function.
pub fn tv_cr(mesh: &Triangulation, v: &CrFunction, include_dirichlet_boundary: bool) -> f64 {
    cr_gradient_l1(mesh, v) + cr_jump_l1(mesh, v, include_dirichlet_boundary)
}

/// `Σ_T |T| a_T · b_T`.
pub fn p0_vector_inner(mesh: &Triangulation, a: &P0Vector, b: &P0Vector) -> f64 {
    (0..mesh.n_elements())
        .map(|t| mesh.volume(t) * dot3(&a.values[t], &b.values[t]))
        .sum()
}

/// `Σ_T |T| a_T b_T`.
pub fn p0_inner(mesh: &Triangulation, a: &P0Function, b: &P0Function) -> f64 {
    (0..mesh.n_elements())
        .map(|t| mesh.volume(t) * a.values[t] * b.values[t])
        .sum()
}
