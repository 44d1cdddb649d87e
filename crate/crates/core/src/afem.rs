//! The adaptive loop Solve → Estimate → Mark → Refine.

use std::time::Instant;

use crate::bench::Benchmark;
use crate::error::{Error, Result};
use crate::estimator::{eta_cr, marini_rof, rho_tilde, scale_to_ball};
use crate::fem::{boundary_interpolant, norm3, p0_project_cr, p0_project_rt, CrFunction, P0Function, RtField};
use crate::mesh::{mesh_stats, refine_uniform_with_parents, rgb_refine_with_parents, Triangulation};
use crate::rof::{solve_rof, FlowConfig, RofProblem};

/// Bounds applied to every regularization parameter.
pub const EPS_MIN: f64 = 1e-14;
pub const EPS_MAX: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsStrategy {
    /// `ε_T = (α/d)|Π u_prev − g_h|_T h² + h³`.
    Local,
    /// `ε ≡ h²`.
    Global,
}

impl std::str::FromStr for EpsStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(EpsStrategy::Local),
            "global" => Ok(EpsStrategy::Global),
            _ => Err(Error::InvalidParameter(format!("unknown ε strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfemConfig {
    /// Bulk parameter in `(0, 1]`.
    pub theta: f64,
    pub eps_strategy: EpsStrategy,
    /// Stop once `η² ≤ eps_stop`.
    pub eps_stop: f64,
    /// Number of levels computed, counting the initial mesh.
    pub max_levels: usize,
    /// Stop before a level whose mesh would exceed this many vertices.
    pub max_vertices: Option<usize>,
    pub flow: FlowConfig,
    /// Refine every element instead of marking.
    pub uniform: bool,
    /// Quadrature order for the error quantity against exact solutions.
    pub rho_order: usize,
}

impl Default for AfemConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            eps_strategy: EpsStrategy::Global,
            eps_stop: 0.0,
            max_levels: 10,
            max_vertices: None,
            flow: FlowConfig::default(),
            uniform: false,
            rho_order: 5,
        }
    }
}

impl AfemConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidParameter(format!("θ = {} not in (0, 1]", self.theta)));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidParameter("at least one level is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AfemLevel {
    pub level: usize,
    /// Mesh, data and regularization of this level.
    pub problem: RofProblem,
    pub u: CrFunction,
    pub u_bar: CrFunction,
    pub z_raw: RtField,
    pub z_bar: RtField,
    pub eta_sq: f64,
    pub eta_sq_local: Vec<f64>,
    pub rho_tilde_sq: Option<f64>,
    pub n_vertices: usize,
    pub h: f64,
    pub flow_steps: usize,
    pub flow_residual: f64,
    /// `I(u⁰)` and `I(u^L)` of the gradient flow.
    pub flow_energy: (f64, f64),
    /// `τ Σ ‖d_τ u^k‖²`.
    pub flow_dissipation: f64,
    /// `‖z_raw‖_{L∞}` before scaling.
    pub linf_raw: f64,
    pub linf_zbar: f64,
    /// `max_T (|Π_h z|_T − (1 − ε_T))` of the element-wise Marini field.
    pub pi_margin_broken: f64,
    /// The same quantity for the conforming (averaged) field.
    pub pi_margin_raw: f64,
    pub flux_mismatch: f64,
    pub n_marked: usize,
    pub wall_time: f64,
}

impl AfemLevel {
    pub fn mesh(&self) -> &Triangulation {
        &self.problem.mesh
    }

    pub fn eps(&self) -> &P0Function {
        &self.problem.eps
    }
}

/// Levels computed so far and the error that ended the run early, if any.
#[derive(Debug)]
pub struct AfemRun {
    pub levels: Vec<AfemLevel>,
    pub failure: Option<Error>,
}

impl AfemRun {
    pub fn into_result(self) -> Result<Vec<AfemLevel>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.levels),
        }
    }
}

/// Smallest set `M` with `Σ_M η²_T ≥ θ² Σ η²_T`: the largest indicators
/// first, ties by element index. `θ = 1` returns every positive entry.
pub fn doerfler_mark(indicators: &[f64], theta: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indicators.len()).filter(|&t| indicators[t] > 0.0).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]).then(a.cmp(&b)));
    if theta >= 1.0 {
        order.sort_unstable();
        return order;
    }
    let total: f64 = order.iter().map(|&t| indicators[t]).sum();
    let target = theta * theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for t in order {
        if sum >= target {
            break;
        }
        sum += indicators[t];
        marked.push(t);
    }
    marked.sort_unstable();
    marked
}

/// Regularization on a new mesh. `pi_prev` is the element-wise mean of the
/// previous primal solution transferred to the new elements; the global
/// strategy ignores it. `h` is the average mesh size.
pub fn update_epsilon(
    strategy: EpsStrategy,
    mesh: &Triangulation,
    pi_prev: &P0Function,
    g_h: &P0Function,
    alpha: f64,
) -> P0Function {
    let h = mesh_stats(mesh).avg_meshsize;
    let d = mesh.dim();
    let values = (0..mesh.n_elements())
        .map(|t| epsilon_value(strategy, alpha, d, pi_prev.values[t] - g_h.values[t], h))
        .collect();
    P0Function { values }
}

/// One element's parameter for the data misfit `diff = Π u_prev − g_h`.
pub fn epsilon_value(strategy: EpsStrategy, alpha: f64, dim: usize, diff: f64, h: f64) -> f64 {
    let e = match strategy {
        EpsStrategy::Global => h * h,
        EpsStrategy::Local => alpha / dim as f64 * diff.abs() * h * h + h * h * h,
    };
    e.clamp(EPS_MIN, EPS_MAX)
}

/// Piecewise-constant prolongation along a parent map.
pub fn transfer_p0(coarse: &P0Function, parents: &[usize]) -> P0Function {
    P0Function { values: parents.iter().map(|&p| coarse.values[p]).collect() }
}

fn max_pi_margin(problem: &RofProblem, means: &[[f64; 3]]) -> f64 {
    means
        .iter()
        .enumerate()
        .map(|(t, m)| norm3(m) - (1.0 - problem.eps.values[t]))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn solve_level(
    bench: &Benchmark,
    cfg: &AfemConfig,
    level: usize,
    problem: RofProblem,
) -> Result<AfemLevel> {
    let start = Instant::now();
    let flow = solve_rof(&problem, &cfg.flow)?;
    let mesh = &problem.mesh;
    let u_bar = if problem.dirichlet() { boundary_interpolant(mesh, &flow.u) } else { flow.u.clone() };
    let marini = marini_rof(&problem, &flow.u);
    let (z_bar, linf_raw) = scale_to_ball(&problem, &marini.field);
    let report = eta_cr(&problem, &u_bar, &z_bar)?;
    let rho_tilde_sq = match &bench.exact {
        Some(exact) => Some(rho_tilde(&problem, &u_bar, &z_bar, exact, cfg.rho_order)?),
        None => None,
    };
    let pi_margin_broken = max_pi_margin(&problem, &marini.broken.mean().values);
    let pi_margin_raw = max_pi_margin(&problem, &p0_project_rt(mesh, &marini.field).values);
    let stats = mesh_stats(mesh);
    Ok(AfemLevel {
        level,
        u: flow.u,
        u_bar,
        linf_zbar: crate::fem::rt_linf_norm(mesh, &z_bar),
        z_raw: marini.field,
        z_bar,
        eta_sq: report.eta_sq_global,
        eta_sq_local: report.eta_sq_local,
        rho_tilde_sq,
        n_vertices: mesh.n_vertices(),
        h: stats.avg_meshsize,
        flow_steps: flow.steps,
        flow_residual: flow.final_residual_norm,
        flow_energy: (
            flow.energy_trace.first().copied().unwrap_or(f64::NAN),
            flow.energy_trace.last().copied().unwrap_or(f64::NAN),
        ),
        flow_dissipation: flow.dissipation,
        linf_raw,
        pi_margin_broken,
        pi_margin_raw,
        flux_mismatch: marini.mismatch,
        n_marked: 0,
        wall_time: start.elapsed().as_secs_f64(),
        problem,
    })
}

/// Runs the adaptive loop on `bench` starting from its initial mesh.
pub fn afem_run(bench: &Benchmark, cfg: &AfemConfig) -> AfemRun {
    afem_run_with(bench, cfg, bench.initial_mesh(), |_| {})
}

/// As [`afem_run`] with an explicit initial mesh and a callback invoked
/// after every completed level.
pub fn afem_run_with(
    bench: &Benchmark,
    cfg: &AfemConfig,
    initial_mesh: Result<Triangulation>,
    mut on_level: impl FnMut(&AfemLevel),
) -> AfemRun {
    let mut levels = Vec::new();
    let failure = (|| -> Result<()> {
        cfg.validate()?;
        let mut mesh = initial_mesh?;
        let mut pi_prev = P0Function { values: vec![0.0; mesh.n_elements()] };
        for level in 0..cfg.max_levels {
            let g_h = bench.project_data(&mesh)?;
            let eps = update_epsilon(cfg.eps_strategy, &mesh, &pi_prev, &g_h, bench.alpha);
            let problem =
                RofProblem::new(mesh, bench.alpha, g_h, eps)?.with_exact_g(bench.g.clone());
            let mut current = solve_level(bench, cfg, level, problem)?;
            let last = level + 1 == cfg.max_levels || current.eta_sq <= cfg.eps_stop;
            if last {
                on_level(&current);
                levels.push(current);
                break;
            }
            let refine_start = Instant::now();
            let (fine, parents) = if cfg.uniform {
                refine_uniform_with_parents(current.mesh())?
            } else {
                let indicators: Vec<f64> = current.eta_sq_local.iter().map(|e| e.max(0.0)).collect();
                let marked = doerfler_mark(&indicators, cfg.theta);
                current.n_marked = marked.len();
                rgb_refine_with_parents(current.mesh(), &marked)?
            };
            if cfg.uniform {
                current.n_marked = current.mesh().n_elements();
            }
            current.wall_time += refine_start.elapsed().as_secs_f64();
            let too_big = cfg.max_vertices.is_some_and(|m| fine.n_vertices() > m);
            let stalled = fine.n_vertices() == current.n_vertices;
            pi_prev = transfer_p0(&p0_project_cr(current.mesh(), &current.u), &parents);
            on_level(&current);
            levels.push(current);
            if too_big || stalled {
                break;
            }
            mesh = fine;
        }
        Ok(())
    })()
    .err();
    AfemRun { levels, failure }
}
