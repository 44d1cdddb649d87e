//! The regularized discrete ROF energy and its semi-implicit L² gradient
//! flow.

use std::fmt;
use std::sync::Arc;

use crate::convex::Regularization;
use crate::error::{Error, Result};
use crate::fem::{
    cr_gradient, dirichlet_sides, element_cr_mass, element_stiffness, p0_project_cr, CrFunction,
    P0Function,
};
use crate::linalg::{cg_solve_from, dot, CgConfig, SparseCholesky, SparseMatrix};
use crate::mesh::{mesh_stats, Point, Triangulation};

/// A scalar field given pointwise.
pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Default polynomial order for quadrature of data terms.
pub const DEFAULT_QUAD_ORDER: usize = 3;

#[derive(Clone)]
pub struct RofProblem {
    pub mesh: Triangulation,
    pub alpha: f64,
    pub g_h: P0Function,
    pub g_exact: Option<ScalarFn>,
    /// Element-wise regularization parameter, each in `(0, 1)`.
    pub eps: P0Function,
    /// Quadrature order for terms involving `g_exact`.
    pub quad_order: usize,
}

impl fmt::Debug for RofProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RofProblem")
            .field("n_elements", &self.mesh.n_elements())
            .field("alpha", &self.alpha)
            .field("has_exact_g", &self.g_exact.is_some())
            .field("dirichlet", &self.dirichlet())
            .finish()
    }
}

impl RofProblem {
    pub fn new(mesh: Triangulation, alpha: f64, g_h: P0Function, eps: P0Function) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("α = {alpha} must be positive")));
        }
        for (name, field) in [("g_h", &g_h), ("ε", &eps)] {
            if field.values.len() != mesh.n_elements() {
                return Err(Error::DimensionMismatch {
                    expected: mesh.n_elements(),
                    actual: field.values.len(),
                });
            }
            if field.values.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite values")));
            }
        }
        if let Some(t) = eps.values.iter().position(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "ε = {} on element {t} not in (0, 1)",
                eps.values[t]
            )));
        }
        Ok(Self {
            mesh,
            alpha,
            g_h,
            g_exact: None,
            eps,
            quad_order: DEFAULT_QUAD_ORDER,
        })
    }

    /// Problem with constant ε and `g_h = Π_h g`.
    pub fn from_callback(mesh: Triangulation, alpha: f64, g: ScalarFn, eps: f64) -> Result<Self> {
        let g_h = crate::fem::p0_project_fn(&mesh, |x| g(x), 5)?;
        let eps = P0Function { values: vec![eps; mesh.n_elements()] };
        let mut p = Self::new(mesh, alpha, g_h, eps)?;
        p.g_exact = Some(g);
        Ok(p)
    }

    pub fn with_exact_g(mut self, g: ScalarFn) -> Self {
        self.g_exact = Some(g);
        self
    }

    /// Whether any boundary side carries a Dirichlet constraint.
    pub fn dirichlet(&self) -> bool {
        dirichlet_sides(&self.mesh).iter().any(|&d| d)
    }

    pub fn regularization(&self, t: usize) -> Regularization {
        Regularization::new(self.eps.values[t]).expect("ε validated on construction")
    }

    /// `b_g[S] = (g_h, Π_h φ_S)`.
    pub fn load_vector(&self) -> Vec<f64> {
        let mesh = &self.mesh;
        let c = 1.0 / (mesh.dim() + 1) as f64;
        let mut b = vec![0.0; mesh.n_sides()];
        for t in 0..mesh.n_elements() {
            let v = c * mesh.volume(t) * self.g_h.values[t];
            for &s in mesh.element_sides(t) {
                b[s] += v;
            }
        }
        b
    }

    /// `w_T = (1 − ε_T) / (|∇_h v|_T|² + ε_T²)^{1/2}`.
    pub fn weights(&self, v: &CrFunction) -> P0Function {
        let grads = cr_gradient(&self.mesh, v);
        P0Function {
            values: grads
                .values
                .iter()
                .enumerate()
                .map(|(t, g)| self.regularization(t).weight(norm(g)))
                .collect(),
        }
    }
}

fn norm(a: &Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// `Σ_T |T| f_ε(|∇_h v|) + (α/2) ‖Π_h v − g_h‖²`.
pub fn energy_reg(problem: &RofProblem, v: &CrFunction) -> f64 {
    let mesh = &problem.mesh;
    let grads = cr_gradient(mesh, v);
    let pi = p0_project_cr(mesh, v);
    (0..mesh.n_elements())
        .map(|t| {
            let diff = pi.values[t] - problem.g_h.values[t];
            mesh.volume(t)
                * (problem.regularization(t).value(norm(&grads.values[t]))
                    + 0.5 * problem.alpha * diff * diff)
        })
        .sum()
}

/// Solver for the linear system of each flow step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Sparse Cholesky with the symbolic analysis shared by all steps.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned CG warm-started from the previous iterate.
    Cg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub tau: f64,
    /// The flow stops once `‖r‖ ≤ stop_factor · h`.
    pub stop_factor: f64,
    /// Absolute residual target overriding `stop_factor · h`.
    pub tolerance: Option<f64>,
    pub max_steps: usize,
    pub solver: LinearSolver,
    /// Used when `solver` is [`LinearSolver::Cg`].
    pub cg: CgConfig,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            stop_factor: 1.0 / 20f64.sqrt(),
            tolerance: None,
            max_steps: 10_000,
            solver: LinearSolver::Cholesky,
            cg: CgConfig::default(),
        }
    }
}

impl FlowConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("τ = {} must be positive", self.tau)));
        }
        if !(self.stop_factor > 0.0) && self.tolerance.is_none() {
            return Err(Error::InvalidParameter("stopping factor must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Residual target on `mesh`.
    pub fn target(&self, mesh: &Triangulation) -> f64 {
        self.tolerance
            .unwrap_or_else(|| self.stop_factor * mesh_stats(mesh).avg_meshsize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub u: CrFunction,
    pub steps: usize,
    pub final_residual_norm: f64,
    /// `I(u⁰), I(u¹), …, I(u^L)`.
    pub energy_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    /// `τ Σ_k ‖d_τ u^k‖²`.
    pub dissipation: f64,
    /// Total CG iterations; zero with [`LinearSolver::Cholesky`].
    pub cg_iterations: usize,
}

/// Linear systems of the flow on one problem, with a fixed sparsity
/// pattern and precomputed scatter positions.
pub(crate) struct FlowSystem<'a> {
    problem: &'a RofProblem,
    tau: f64,
    matrix: SparseMatrix,
    /// `M/τ + α M_Π` with constrained rows and columns removed.
    base: Vec<f64>,
    scatter: Vec<[usize; 16]>,
    stiffness: Vec<[[f64; 4]; 4]>,
    mass: SparseMatrix,
    mass_diagonal: Option<Vec<f64>>,
    fixed: Vec<bool>,
    load: Vec<f64>,
    solver: LinearSolver,
    cg: CgConfig,
    factor: Option<SparseCholesky>,
    mass_factor: Option<SparseCholesky>,
}

impl<'a> FlowSystem<'a> {
    pub(crate) fn new(
        problem: &'a RofProblem,
        tau: f64,
        solver: LinearSolver,
        cg: CgConfig,
    ) -> Result<Self> {
        let mesh = &problem.mesh;
        let n = mesh.n_sides();
        let nl = mesh.dim() + 1;
        let fixed = dirichlet_sides(mesh);
        let mut triplets = Vec::with_capacity(mesh.n_elements() * nl * nl + n);
        for t in 0..mesh.n_elements() {
            let sides = mesh.element_sides(t);
            for &a in sides {
                for &b in sides {
                    triplets.push((a, b, 0.0));
                }
            }
        }
        let mut matrix = SparseMatrix::from_triplets(n, n, &triplets)?;
        let mut scatter = Vec::with_capacity(mesh.n_elements());
        for t in 0..mesh.n_elements() {
            let sides = mesh.element_sides(t);
            let mut pos = [usize::MAX; 16];
            for i in 0..nl {
                for j in 0..nl {
                    pos[4 * i + j] = matrix.position(sides[i], sides[j]).expect("pattern entry");
                }
            }
            scatter.push(pos);
        }
        let c_pi = problem.alpha / (nl * nl) as f64;
        let mut base = vec![0.0; matrix.nnz()];
        let mut mass_values = vec![0.0; matrix.nnz()];
        let mut stiffness = Vec::with_capacity(mesh.n_elements());
        for t in 0..mesh.n_elements() {
            let m = element_cr_mass(mesh, t);
            let sides = mesh.element_sides(t);
            let vol = mesh.volume(t);
            for i in 0..nl {
                for j in 0..nl {
                    if fixed[sides[i]] || fixed[sides[j]] {
                        continue;
                    }
                    let p = scatter[t][4 * i + j];
                    base[p] += m[i][j] / tau + c_pi * vol;
                    mass_values[p] += m[i][j];
                }
            }
            stiffness.push(element_stiffness(mesh, t));
        }
        for s in (0..n).filter(|&s| fixed[s]) {
            let p = matrix.position(s, s).expect("diagonal entry");
            base[p] = 1.0;
            mass_values[p] = 1.0;
        }
        matrix.values_mut().copy_from_slice(&base);
        let mut mass = matrix.clone();
        mass.values_mut().copy_from_slice(&mass_values);
        let mass_diagonal = mass.is_diagonal().then(|| mass.diagonal());
        let mass_factor = match (&mass_diagonal, solver) {
            (None, LinearSolver::Cholesky) => Some(SparseCholesky::new(&mass)?),
            _ => None,
        };
        let mut load = problem.load_vector();
        for s in 0..n {
            if fixed[s] {
                load[s] = 0.0;
            }
        }
        Ok(Self {
            problem,
            tau,
            matrix,
            base,
            scatter,
            stiffness,
            mass,
            mass_diagonal,
            fixed,
            load,
            solver,
            cg,
            factor: None,
            mass_factor,
        })
    }

    fn constrain(&self, v: &mut [f64]) {
        for (x, &f) in v.iter_mut().zip(&self.fixed) {
            if f {
                *x = 0.0;
            }
        }
    }

    /// One implicit step from `u_prev`; returns the new iterate and the CG
    /// iteration count.
    pub(crate) fn step(&mut self, u_prev: &CrFunction) -> Result<(CrFunction, usize)> {
        let mesh = &self.problem.mesh;
        let nl = mesh.dim() + 1;
        let w = self.problem.weights(u_prev);
        let values = self.matrix.values_mut();
        values.copy_from_slice(&self.base);
        for t in 0..mesh.n_elements() {
            let sides = mesh.element_sides(t);
            let wt = w.values[t];
            for i in 0..nl {
                if self.fixed[sides[i]] {
                    continue;
                }
                for j in 0..nl {
                    if self.fixed[sides[j]] {
                        continue;
                    }
                    values[self.scatter[t][4 * i + j]] += wt * self.stiffness[t][i][j];
                }
            }
        }
        let mut rhs = self.mass.spmv(&u_prev.dofs)?;
        for (r, l) in rhs.iter_mut().zip(&self.load) {
            *r = *r / self.tau + self.problem.alpha * l;
        }
        self.constrain(&mut rhs);
        match self.solver {
            LinearSolver::Cholesky => {
                match &mut self.factor {
                    Some(f) => f.refactor(&self.matrix)?,
                    None => self.factor = Some(SparseCholesky::new(&self.matrix)?),
                }
                let x = self.factor.as_ref().expect("factor").solve(&rhs)?;
                Ok((CrFunction { dofs: x }, 0))
            }
            LinearSolver::Cg => {
                let mut x0 = u_prev.dofs.clone();
                self.constrain(&mut x0);
                let sol = cg_solve_from(&self.matrix, &rhs, x0, &self.cg)?;
                Ok((CrFunction { dofs: sol.x }, sol.iterations))
            }
        }
    }

    /// Riesz representative `r` of the energy derivative at `u` and its
    /// L² norm.
    pub(crate) fn residual(&self, u: &CrFunction) -> Result<(CrFunction, f64)> {
        let problem = self.problem;
        let mesh = &problem.mesh;
        let d = mesh.dim() as f64;
        let nl = mesh.dim() + 1;
        let grads = cr_gradient(mesh, u);
        let pi = p0_project_cr(mesh, u);
        let mut rhs = vec![0.0; mesh.n_sides()];
        for t in 0..mesh.n_elements() {
            let g = mesh.geometry(t);
            let grad = grads.values[t];
            let wt = problem.regularization(t).weight(norm(&grad));
            let fid = problem.alpha * (pi.values[t] - problem.g_h.values[t]) / nl as f64;
            for (i, &s) in mesh.element_sides(t).iter().enumerate() {
                let gl = g.grad_lambda[i];
                let grad_phi_dot = -d * (gl[0] * grad[0] + gl[1] * grad[1] + gl[2] * grad[2]);
                rhs[s] += g.volume * (wt * grad_phi_dot + fid);
            }
        }
        self.constrain(&mut rhs);
        let r = match (&self.mass_diagonal, &self.mass_factor) {
            (Some(diag), _) => rhs.iter().zip(diag).map(|(a, m)| a / m).collect(),
            (None, Some(f)) => f.solve(&rhs)?,
            (None, None) => {
                let cfg = CgConfig { rel_tolerance: 1e-13, ..self.cg };
                cg_solve_from(&self.mass, &rhs, vec![0.0; rhs.len()], &cfg)?.x
            }
        };
        let norm_sq = dot(&r, &rhs).max(0.0);
        Ok((CrFunction { dofs: r }, norm_sq.sqrt()))
    }

    pub(crate) fn mass_norm_sq(&self, v: &[f64]) -> Result<f64> {
        self.mass.quadratic_form(v)
    }
}

/// One step of the flow from `u_prev`.
pub fn flow_step(problem: &RofProblem, cfg: &FlowConfig, u_prev: &CrFunction) -> Result<CrFunction> {
    cfg.validate()?;
    check_len(problem, u_prev)?;
    let mut sys = FlowSystem::new(problem, cfg.tau, cfg.solver, cfg.cg)?;
    Ok(sys.step(u_prev)?.0)
}

/// Residual `r` with `(r, v) = (w ∇_h u, ∇_h v) + α(Π_h u − g_h, Π_h v)` for
/// all admissible `v`, and `‖r‖_{L²}`.
pub fn flow_residual(problem: &RofProblem, u: &CrFunction) -> Result<(CrFunction, f64)> {
    check_len(problem, u)?;
    FlowSystem::new(problem, 1.0, LinearSolver::default(), CgConfig::default())?.residual(u)
}

fn check_len(problem: &RofProblem, u: &CrFunction) -> Result<()> {
    if u.dofs.len() != problem.mesh.n_sides() {
        return Err(Error::DimensionMismatch {
            expected: problem.mesh.n_sides(),
            actual: u.dofs.len(),
        });
    }
    Ok(())
}

/// Runs the flow from `u⁰ = 0` until the residual target is met.
pub fn solve_rof(problem: &RofProblem, cfg: &FlowConfig) -> Result<FlowResult> {
    solve_rof_from(problem, cfg, CrFunction::zeros(&problem.mesh))
}

/// Runs the flow from the given initial iterate.
pub fn solve_rof_from(problem: &RofProblem, cfg: &FlowConfig, u0: CrFunction) -> Result<FlowResult> {
    cfg.validate()?;
    check_len(problem, &u0)?;
    let target = cfg.target(&problem.mesh);
    let mut sys = FlowSystem::new(problem, cfg.tau, cfg.solver, cfg.cg)?;
    let mut u = u0;
    sys.constrain(&mut u.dofs);
    let mut energy_trace = vec![energy_reg(problem, &u)];
    let mut residual_trace = Vec::new();
    let mut dissipation = 0.0;
    let mut cg_iterations = 0;
    for step in 1..=cfg.max_steps {
        let (next, its) = sys.step(&u)?;
        cg_iterations += its;
        let diff: Vec<f64> = next.dofs.iter().zip(&u.dofs).map(|(a, b)| a - b).collect();
        dissipation += sys.mass_norm_sq(&diff)? / cfg.tau;
        u = next;
        energy_trace.push(energy_reg(problem, &u));
        let (_, res) = sys.residual(&u)?;
        residual_trace.push(res);
        if res <= target {
            return Ok(FlowResult {
                u,
                steps: step,
                final_residual_norm: res,
                energy_trace,
                residual_trace,
                dissipation,
                cg_iterations,
            });
        }
    }
    Err(Error::FlowNotConverged {
        steps: cfg.max_steps,
        residual: residual_trace.last().copied().unwrap_or(f64::NAN),
        target,
        energy_trace,
    })
}
