//! Dual reconstruction, dual energies and the primal-dual error estimator.

use crate::bench::ExactSolution;
use crate::convex::BrokenRtField;
use crate::error::Result;
use crate::fem::{
    cr_gradient, cr_jump_l1_per_side, integrate_with, p0_project_cr, p0_project_rt,
    rt_divergence, rt_linf_norm, simplex_rule, tv_cr, CrFunction, P0Function, RtField,
};
use crate::mesh::{BoundaryTag, Point};
use crate::rof::{energy_reg, RofProblem};

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

/// Output of the Marini reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct MariniField {
    /// Element-wise field `w_T ∇u_T + (α (Π u − g_h)_T / d)(x − x_T)`.
    pub broken: BrokenRtField,
    /// Conforming field with side fluxes averaged between neighbours and
    /// Neumann boundary fluxes set to zero.
    pub field: RtField,
    /// Largest interior normal-flux disagreement before averaging.
    pub mismatch: f64,
}

pub fn marini_rof(problem: &RofProblem, u: &CrFunction) -> MariniField {
    let mesh = &problem.mesh;
    let d = mesh.dim() as f64;
    let grads = cr_gradient(mesh, u);
    let pi = p0_project_cr(mesh, u);
    let broken = BrokenRtField {
        constant: grads
            .values
            .iter()
            .enumerate()
            .map(|(t, g)| {
                let w = problem.regularization(t).weight(norm(g));
                g.map(|c| w * c)
            })
            .collect(),
        slope: (0..mesh.n_elements())
            .map(|t| problem.alpha * (pi.values[t] - problem.g_h.values[t]) / d)
            .collect(),
    };
    let (mut field, mismatch) = broken.to_rt(mesh);
    for s in 0..mesh.n_sides() {
        if mesh.boundary_tag(s) == BoundaryTag::Neumann {
            field.dofs[s] = 0.0;
        }
    }
    MariniField { broken, field, mismatch }
}

/// `z / max{1, ‖z‖_∞}`, together with `‖z‖_∞`.
pub fn scale_to_ball(problem: &RofProblem, z: &RtField) -> (RtField, f64) {
    let linf = rt_linf_norm(&problem.mesh, z);
    let scale = 1.0 / linf.max(1.0);
    (RtField { dofs: z.dofs.iter().map(|x| x * scale).collect() }, linf)
}

/// `−(1/2α)‖div y + α g_h‖² + (α/2)‖g_h‖²`.
fn dual_quadratic_part(problem: &RofProblem, div: &P0Function) -> f64 {
    let mesh = &problem.mesh;
    let a = problem.alpha;
    (0..mesh.n_elements())
        .map(|t| {
            let g = problem.g_h.values[t];
            let q = div.values[t] + a * g;
            mesh.volume(t) * (-q * q / (2.0 * a) + 0.5 * a * g * g)
        })
        .sum()
}

/// Regularized discrete dual energy; `−∞` if `|Π_h y| > 1 − ε` somewhere.
pub fn dual_energy_reg(problem: &RofProblem, y: &RtField) -> f64 {
    let mesh = &problem.mesh;
    let pi = p0_project_rt(mesh, y);
    let mut conj = 0.0;
    for t in 0..mesh.n_elements() {
        let c = problem.regularization(t).conjugate(norm(&pi.values[t]));
        if c == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        conj += mesh.volume(t) * c;
    }
    -conj + dual_quadratic_part(problem, &rt_divergence(mesh, y))
}

/// Unregularized discrete dual energy; `−∞` if `|Π_h y| > 1` somewhere.
pub fn dual_energy_unreg(problem: &RofProblem, y: &RtField) -> f64 {
    let mesh = &problem.mesh;
    let pi = p0_project_rt(mesh, y);
    if pi.values.iter().any(|p| norm(p) > 1.0) {
        return f64::NEG_INFINITY;
    }
    dual_quadratic_part(problem, &rt_divergence(mesh, y))
}

/// Which data enters the fidelity terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataChoice {
    /// The pointwise data if available, otherwise `g_h`.
    Exact,
    Projected,
}

fn data_at(problem: &RofProblem, choice: DataChoice, t: usize, x: &Point) -> f64 {
    match (&problem.g_exact, choice) {
        (Some(g), DataChoice::Exact) => g(x),
        _ => problem.g_h.values[t],
    }
}

fn data_order(problem: &RofProblem, choice: DataChoice) -> usize {
    match (&problem.g_exact, choice) {
        (Some(_), DataChoice::Exact) => problem.quad_order.max(2),
        _ => 2,
    }
}

/// `|D v|(Ω) + (α/2)‖v − g‖²` for a CR function, the jump part including
/// the trace on Dirichlet sides.
pub fn primal_energy_unreg(problem: &RofProblem, v: &CrFunction, choice: DataChoice) -> Result<f64> {
    let mesh = &problem.mesh;
    let rule = simplex_rule(mesh.dim(), data_order(problem, choice))?;
    let mut fid = 0.0;
    for t in 0..mesh.n_elements() {
        fid += integrate_with(mesh, t, &rule, |x| {
            let e = v.eval(mesh, t, x) - data_at(problem, choice, t, x);
            e * e
        });
    }
    Ok(tv_cr(mesh, v, true) + 0.5 * problem.alpha * fid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub eta_sq_global: f64,
    pub eta_sq_local: Vec<f64>,
    /// `‖∇_h v‖_{L¹} + ‖[v]‖_{L¹(S)}`.
    pub tv_term: f64,
    /// `(∇_h v, Π_h y)`.
    pub coupling_term: f64,
    /// `(1/2α)‖div y − α(v − g)‖²`.
    pub fidelity_term: f64,
    /// `max{0, ‖y‖_∞ − 1}`.
    pub admissibility_violation: f64,
}

/// Tolerance on `‖y‖_∞ − 1` below which `y` counts as admissible.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

/// The estimator `η²(v, y) = |D v|(Ω) − (∇_h v, Π_h y) + (1/2α)‖div y − α(v − g)‖²`
/// for `v` vanishing at Dirichlet side midpoints and `y` with vanishing
/// Neumann fluxes, with element contributions; interior jumps are shared
/// equally by the two neighbours.
pub fn eta_cr(problem: &RofProblem, v: &CrFunction, y: &RtField) -> Result<EstimatorReport> {
    eta_cr_with(problem, v, y, DataChoice::Exact)
}

pub fn eta_cr_with(
    problem: &RofProblem,
    v: &CrFunction,
    y: &RtField,
    choice: DataChoice,
) -> Result<EstimatorReport> {
    let mesh = &problem.mesh;
    let alpha = problem.alpha;
    let violation = (rt_linf_norm(mesh, y) - 1.0).max(0.0);
    let grads = cr_gradient(mesh, v);
    let pi_y = p0_project_rt(mesh, y);
    let div = rt_divergence(mesh, y);
    let jumps = cr_jump_l1_per_side(mesh, v, true);
    let rule = simplex_rule(mesh.dim(), data_order(problem, choice))?;
    let mut local = vec![0.0; mesh.n_elements()];
    let (mut tv, mut coupling, mut fidelity) = (0.0, 0.0, 0.0);
    for (s, &j) in jumps.iter().enumerate() {
        let (t0, t1) = mesh.side_elements(s);
        match t1 {
            Some(t1) => {
                local[t0] += 0.5 * j;
                local[t1] += 0.5 * j;
            }
            None => local[t0] += j,
        }
        tv += j;
    }
    for t in 0..mesh.n_elements() {
        let vol = mesh.volume(t);
        let g = grads.values[t];
        let grad_l1 = vol * norm(&g);
        let c = vol * dot(&g, &pi_y.values[t]);
        let f = integrate_with(mesh, t, &rule, |x| {
            let r = div.values[t] - alpha * (v.eval(mesh, t, x) - data_at(problem, choice, t, x));
            r * r
        }) / (2.0 * alpha);
        local[t] += grad_l1 - c + f;
        tv += grad_l1;
        coupling += c;
        fidelity += f;
    }
    let eta = if violation > ADMISSIBILITY_TOL {
        f64::INFINITY
    } else {
        tv - coupling + fidelity
    };
    Ok(EstimatorReport {
        eta_sq_global: eta,
        eta_sq_local: local,
        tv_term: tv,
        coupling_term: coupling,
        fidelity_term: fidelity,
        admissibility_violation: violation,
    })
}

/// `‖∇v‖_{L¹} − (∇v, y) + (1/2α)‖div y − α(v − g)‖²` for a smooth `v`, by
/// quadrature of the given order.
pub fn eta_w11(
    problem: &RofProblem,
    v: &dyn Fn(&Point) -> f64,
    grad_v: &dyn Fn(&Point) -> Point,
    y: &RtField,
    order: usize,
) -> Result<f64> {
    let mesh = &problem.mesh;
    let alpha = problem.alpha;
    let rule = simplex_rule(mesh.dim(), order)?;
    let div = rt_divergence(mesh, y);
    let mut total = 0.0;
    for t in 0..mesh.n_elements() {
        total += integrate_with(mesh, t, &rule, |x| {
            let g = grad_v(x);
            let r = div.values[t] - alpha * (v(x) - data_at(problem, DataChoice::Exact, t, x));
            norm(&g) - dot(&g, &y.eval(mesh, t, x)) + r * r / (2.0 * alpha)
        });
    }
    Ok(total)
}

/// `(α/2)‖v − u‖² + (1/2α)‖div y − div z‖²` against an exact solution.
pub fn rho_tilde(
    problem: &RofProblem,
    v: &CrFunction,
    y: &RtField,
    exact: &ExactSolution,
    order: usize,
) -> Result<f64> {
    let mesh = &problem.mesh;
    let alpha = problem.alpha;
    let rule = simplex_rule(mesh.dim(), order)?;
    let div = rt_divergence(mesh, y);
    let mut primal = 0.0;
    let mut dual = 0.0;
    for t in 0..mesh.n_elements() {
        primal += integrate_with(mesh, t, &rule, |x| (v.eval(mesh, t, x) - (exact.u)(x)).powi(2));
        dual += integrate_with(mesh, t, &rule, |x| (div.values[t] - (exact.div_z)(x)).powi(2));
    }
    Ok(0.5 * alpha * primal + dual / (2.0 * alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualReport {
    pub z_raw: RtField,
    pub z_broken: BrokenRtField,
    pub z_admissible: RtField,
    pub linf_raw: f64,
    pub flux_mismatch: f64,
    pub primal_energy: f64,
    pub dual_energy: f64,
    pub duality_gap: f64,
}

/// Marini reconstruction, scaling, and regularized energies at `u`.
pub fn dual_report(problem: &RofProblem, u: &CrFunction) -> DualReport {
    let marini = marini_rof(problem, u);
    let (z_admissible, linf_raw) = scale_to_ball(problem, &marini.field);
    let primal_energy = energy_reg(problem, u);
    let dual_energy = dual_energy_reg(problem, &marini.field);
    DualReport {
        z_raw: marini.field,
        z_broken: marini.broken,
        z_admissible,
        linf_raw,
        flux_mismatch: marini.mismatch,
        primal_energy,
        dual_energy,
        duality_gap: primal_energy - dual_energy,
    }
}
