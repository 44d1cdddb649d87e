//! Acceptance suite: one PASS/FAIL line per criterion and a summary line.
//! With `ROF_ACCEPTANCE_STRICT=1` the test fails if any criterion fails.

mod common;

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;

use common::{duality_check, rng};
use rof_afem::afem::{afem_run, AfemConfig, AfemLevel};
use rof_afem::bench::{benchmark, fitted_rate, image_benchmark, pixel_l2_error_sq, synthetic_image};
use rof_afem::convex::{feps_conjugate, Regularization};
use rof_afem::estimator::{dual_energy_reg, dual_energy_unreg, dual_report, primal_energy_unreg, DataChoice};
use rof_afem::fem::{p0_project_cr, p0_project_rt, RtField};
use rof_afem::fem::P0Function;
use rof_afem::mesh::{uniform_triangulation, BoundaryCondition, BoxDomain};
use rof_afem::rof::{energy_reg, solve_rof, FlowConfig, RofProblem};

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(id: usize, pass: bool, detail: String) -> Self {
        Self { id, pass, detail }
    }
}

/// Levels of one loop run, or the error that stopped it.
struct Run {
    name: String,
    levels: Vec<AfemLevel>,
    failure: Option<String>,
    seconds: f64,
}

fn run(name: &str, cfg: AfemConfig) -> Run {
    let t = Instant::now();
    let b = if name == "image" { image_benchmark() } else { benchmark(name).unwrap() };
    let r = afem_run(&b, &cfg);
    Run {
        name: format!("{name}{}", if cfg.uniform { " (uniform)" } else { "" }),
        levels: r.levels,
        failure: r.failure.map(|e| e.to_string()),
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn adaptive(levels: usize) -> AfemConfig {
    AfemConfig { max_levels: levels, ..AfemConfig::default() }
}

fn uniform(levels: usize) -> AfemConfig {
    AfemConfig { max_levels: levels, uniform: true, ..AfemConfig::default() }
}

fn rate_last(levels: &[AfemLevel], k: usize, dim: usize) -> f64 {
    let tail = &levels[levels.len().saturating_sub(k)..];
    let n: Vec<usize> = tail.iter().map(|l| l.n_vertices).collect();
    let eta: Vec<f64> = tail.iter().map(|l| l.eta_sq.sqrt()).collect();
    fitted_rate(&n, &eta, dim)
}

fn rho_below_eta(levels: &[AfemLevel]) -> bool {
    levels.iter().all(|l| l.rho_tilde_sq.is_some_and(|r| r <= l.eta_sq))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let (mut weak, mut ibp, mut local, mut max_el) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, 0);
    let n = 40;
    for seed in 0..n {
        let c = duality_check(1000 + seed);
        weak = weak.max(-c.weak_gap);
        ibp = ibp.max(c.ibp_error);
        local = local.max(c.local_sum_error);
        max_el = max_el.max(c.n_elements);
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = weak <= 1e-10 && ibp <= 1e-11 && local <= 1e-10 && max_el <= 200 && secs < 10.0;
    Outcome::new(
        1,
        pass,
        format!(
            "{n} meshes (<= {max_el} elements): max dual-primal excess {weak:.2e}, ibp error {ibp:.2e}, \
             local sum error {local:.2e}, {secs:.2} s"
        ),
    )
}

fn criterion_2(stability: &mut Vec<f64>) -> Outcome {
    let t = Instant::now();
    let (mut gap, mut mismatch, mut residual, mut cases) = (0.0f64, 0.0f64, 0.0f64, 0);
    for n in [1, 2] {
        for (k, bc) in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann].into_iter().enumerate() {
            for seed in 0..3u64 {
                let mut r = rng(100 * n as u64 + 10 * k as u64 + seed);
                let mesh = uniform_triangulation(&BoxDomain::cube(2, -1.0, 1.0), n, bc).unwrap();
                let ne = mesh.n_elements();
                assert!(ne == 2 || ne == 8);
                let p = RofProblem::new(
                    mesh,
                    r.gen_range(1.0..20.0),
                    P0Function { values: (0..ne).map(|_| r.gen_range(-1.0..1.0)).collect() },
                    P0Function { values: (0..ne).map(|_| r.gen_range(0.01..0.5)).collect() },
                )
                .unwrap();
                let cfg = FlowConfig { tolerance: Some(1e-12), max_steps: usize::MAX, ..FlowConfig::default() };
                let res = solve_rof(&p, &cfg).unwrap();
                let e = &res.energy_trace;
                stability.push(e[e.len() - 1] + res.dissipation - e[0]);
                let rep = dual_report(&p, &res.u);
                residual = residual.max(res.final_residual_norm);
                gap = gap.max((rep.primal_energy - rep.dual_energy).abs());
                mismatch = mismatch.max(rep.flux_mismatch);
                cases += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = residual <= 1e-12 && gap <= 1e-8 && mismatch <= 1e-9 && secs < 30.0;
    Outcome::new(
        2,
        pass,
        format!("{cases} solves: |I - D| <= {gap:.2e}, flux mismatch <= {mismatch:.2e}, residual <= {residual:.2e}, {secs:.2} s"),
    )
}

/// `sup_t (s t − f_ε(t))` by golden-section search on the concave objective.
fn legendre_brute_force(reg: &Regularization, s: f64) -> f64 {
    let obj = |t: f64| s * t - reg.value(t);
    let (mut a, mut b) = (-1e3, 1e3);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if obj(c) < obj(d) {
            a = c;
        } else {
            b = d;
        }
    }
    obj(0.5 * (a + b))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut outside_ok = true;
    for eps in [0.5, 0.1, 1e-3] {
        let reg = Regularization::new(eps).unwrap();
        let bound = 1.0 - eps;
        for k in 0..50 {
            let s = bound * (-1.0 + 2.0 * (k as f64 + 0.5) / 50.0);
            worst = worst.max((feps_conjugate(&reg, s) - legendre_brute_force(&reg, s)).abs());
        }
        // outside the closed ball the supremum is unbounded
        outside_ok &= feps_conjugate(&reg, 1.01 * bound + 1e-3) == f64::INFINITY;
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        3,
        worst <= 1e-7 && outside_ok && secs < 5.0,
        format!("max deviation {worst:.2e} on 3 x 50 points, +inf outside the ball: {outside_ok}, {secs:.2} s"),
    )
}

/// `(f'(A)/A) b·(b − a) − f(B) + f(A) − ½ (f'(A)/A)|b − a|²` minimized over
/// random triples.
fn lemma_slack(samples: usize) -> f64 {
    let mut r = rng(53);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let d = if r.gen_bool(0.5) { 2 } else { 3 };
        let eps = r.gen_range(0.01..1.0);
        let reg = Regularization::new(eps).unwrap();
        let a: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let w = reg.weight(na);
        let b_dot_diff: f64 = b.iter().zip(&a).map(|(p, q)| p * (p - q)).sum();
        let diff_sq: f64 = b.iter().zip(&a).map(|(p, q)| (p - q) * (p - q)).sum();
        let slack = w * b_dot_diff - reg.value(nb) + reg.value(na) - 0.5 * w * diff_sq;
        worst = worst.min(slack);
    }
    worst
}

fn criterion_4(stability: &[f64]) -> Outcome {
    let t = Instant::now();
    let worst = stability.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slack = lemma_slack(100_000);
    let secs = t.elapsed().as_secs_f64();
    Outcome::new(
        4,
        worst <= 1e-9 && slack >= -1e-12,
        format!(
            "{} flow runs: max I(u^L) + dissipation - I(u^0) = {worst:.2e}; inequality slack min {slack:.2e} \
             on 1e5 triples ({secs:.2} s)",
            stability.len()
        ),
    )
}

fn failure_note(runs: &[&Run]) -> String {
    let mut s = String::new();
    for r in runs {
        if let Some(e) = &r.failure {
            let _ = write!(s, "; {} stopped: {e}", r.name);
        }
    }
    s
}

fn criterion_5(ad: &Run, un: &Run) -> Outcome {
    let ok_runs = ad.failure.is_none() && un.failure.is_none() && ad.levels.len() >= 11 && un.levels.len() >= 4;
    let rate_a = rate_last(&ad.levels, 5, 2);
    let rate_u = rate_last(&un.levels, 4, 2);
    let rho_ok = rho_below_eta(&ad.levels) && rho_below_eta(&un.levels);
    let last = ad.levels.last().unwrap();
    let mesh = last.mesh();
    let pi = p0_project_cr(mesh, &last.u);
    let (mut dev, mut count) = (0.0f64, 0);
    for t in 0..mesh.n_elements() {
        let x = mesh.barycenter(t);
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if (r - 0.5).abs() > 2.0 * last.h {
            let exact = if r < 0.5 { 0.6 } else { 0.0 };
            dev = dev.max((pi.values[t] - exact).abs());
            count += 1;
        }
    }
    let (a, b, c, d) = (rate_a >= 0.75, (0.35..=0.7).contains(&rate_u), rho_ok, count > 0 && dev <= 0.05);
    let mark = |p: bool| if p { "ok" } else { "FAIL" };
    let pass = ok_runs && a && b && c && d && last.n_vertices <= 100_000 && ad.seconds + un.seconds <= 600.0;
    Outcome::new(
        5,
        pass,
        format!(
            "(a) adaptive rate {rate_a:.3} over last 5 of {} levels [{}]; (b) uniform rate {rate_u:.3} [{}]; \
             (c) rho~^2 <= eta^2 [{}]; (d) max |Pi u - u| {dev:.3e} on {count} elements [{}]; N = {}, {:.1} s{}",
            ad.levels.len(),
            mark(a),
            mark(b),
            mark(c),
            mark(d),
            last.n_vertices,
            ad.seconds + un.seconds,
            failure_note(&[ad, un])
        ),
    )
}

fn criterion_6(runs: &[&Run]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for r in runs {
        let rate = rate_last(&r.levels, 5, 2);
        let rho = rho_below_eta(&r.levels);
        pass &= r.failure.is_none() && r.levels.len() >= 11 && rate >= 0.7 && rho && r.seconds <= 600.0;
        detail.push(format!("{}: rate {rate:.3}, rho~^2 <= eta^2 {rho}, {:.1} s", r.name, r.seconds));
    }
    Outcome::new(6, pass, format!("{}{}", detail.join("; "), failure_note(runs)))
}

fn criterion_7(ad: &Run, un: &Run) -> Outcome {
    let rate_a = rate_last(&ad.levels, 5, 2);
    let rate_u = rate_last(&un.levels, 4, 2);
    let rate_all = rate_last(&ad.levels, ad.levels.len(), 2);
    let pass = ad.failure.is_none()
        && un.failure.is_none()
        && (0.3..=0.6).contains(&rate_a)
        && rate_u <= rate_a - 0.05
        && ad.seconds + un.seconds <= 600.0;
    Outcome::new(
        7,
        pass,
        format!(
            "adaptive rate {rate_a:.3} (last 5 of {} levels; {rate_all:.3} over all), uniform rate {rate_u:.3} \
             (4 levels){}",
            ad.levels.len(),
            failure_note(&[ad, un])
        ),
    )
}

fn criterion_8(runs: &[&Run]) -> Outcome {
    let (mut linf, mut margin, mut n) = (0.0f64, f64::NEG_INFINITY, 0);
    for r in runs {
        for l in &r.levels {
            linf = linf.max(l.linf_zbar);
            margin = margin.max(l.pi_margin_broken);
            n += 1;
        }
    }
    Outcome::new(
        8,
        linf <= 1.0 + 1e-12 && margin <= 4.0 * f64::EPSILON,
        format!("{n} levels: max ||z_bar||_inf {linf:.15}, max |Pi z| - (1 - eps_T) {margin:.2e}"),
    )
}

fn criterion_9(ad: &Run, un: &Run) -> Outcome {
    let img = synthetic_image();
    let err = |l: &AfemLevel| pixel_l2_error_sq(l.mesh(), &l.u_bar, &img);
    let last = ad.levels.last().unwrap();
    let e_a = err(last);
    let uni: Vec<(f64, f64)> = un.levels.iter().map(|l| (l.n_vertices as f64, err(l))).collect();
    // vertices a uniform mesh needs for error e_a, interpolated in log-log;
    // below the finest uniform error the finest count is a lower bound
    let needed = if e_a <= uni.last().unwrap().1 {
        uni.last().unwrap().0
    } else if e_a >= uni[0].1 {
        uni[0].0
    } else {
        let k = uni.windows(2).position(|w| w[0].1 >= e_a && e_a >= w[1].1).unwrap();
        let ((n0, e0), (n1, e1)) = (uni[k], uni[k + 1]);
        let s = (e_a.ln() - e0.ln()) / (e1.ln() - e0.ln());
        (n0.ln() + s * (n1.ln() - n0.ln())).exp()
    };
    let ratio = last.n_vertices as f64 / needed;
    let table: Vec<String> = uni.iter().map(|(n, e)| format!("{n:.0}:{e:.2e}")).collect();
    let pass = ad.failure.is_none()
        && un.failure.is_none()
        && ad.levels.len() == 20
        && e_a <= 5e-3
        && ratio <= 0.6
        && ad.seconds + un.seconds <= 600.0;
    Outcome::new(
        9,
        pass,
        format!(
            "20 levels: ||u - g||^2 = {e_a:.3e} with {} vertices; uniform needs {needed:.0} \
             (ratio {ratio:.3}); uniform [{}]; {:.1} s{}",
            last.n_vertices,
            table.join(", "),
            ad.seconds + un.seconds,
            failure_note(&[ad, un])
        ),
    )
}

fn criterion_10(r: &Run) -> Outcome {
    let first = &r.levels[0];
    let decreasing = r.levels.windows(2).all(|w| w[1].eta_sq < w[0].eta_sq);
    let mut weak = f64::NEG_INFINITY;
    for l in &r.levels {
        let p = &l.problem;
        // regularized: scale z_raw into {|Pi y| <= 1 - eps_T}
        let pi = p0_project_rt(l.mesh(), &l.z_raw);
        let mut c: f64 = 1.0;
        for (t, v) in pi.values.iter().enumerate() {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 0.0 {
                c = c.min((1.0 - p.eps.values[t]) / n);
            }
        }
        let y = RtField { dofs: l.z_raw.dofs.iter().map(|x| c * x).collect() };
        weak = weak.max(dual_energy_reg(p, &y) - energy_reg(p, &l.u));
        let unreg = primal_energy_unreg(p, &l.u_bar, DataChoice::Projected).unwrap();
        weak = weak.max(dual_energy_unreg(p, &l.z_bar) - unreg);
    }
    let etas: Vec<String> = r.levels.iter().map(|l| format!("{:.4}", l.eta_sq.sqrt())).collect();
    let pass = r.failure.is_none()
        && first.mesh().n_elements() == 162
        && r.levels.len() == 3
        && decreasing
        && weak <= 1e-10
        && r.seconds <= 300.0;
    Outcome::new(
        10,
        pass,
        format!(
            "{} levels from {} tetrahedra: eta [{}], decreasing {decreasing}, max D - I {weak:.2e}, {:.1} s{}",
            r.levels.len(),
            first.mesh().n_elements(),
            etas.join(", "),
            r.seconds,
            failure_note(&[r])
        ),
    )
}

#[test]
fn acceptance() {
    let started = Instant::now();
    let jobs: Vec<(&str, AfemConfig)> = vec![
        ("one_disk_2d", adaptive(11)),
        ("one_disk_2d", uniform(4)),
        ("two_disks", adaptive(11)),
        ("cone", adaptive(11)),
        ("square", adaptive(11)),
        ("square", uniform(4)),
        ("image", adaptive(20)),
        ("image", uniform(6)),
        ("one_disk_3d", adaptive(3)),
    ];
    // sequential, so that per-run wall times are not inflated by contention
    let runs: Vec<Run> = jobs.into_iter().map(|(n, c)| run(n, c)).collect();
    let [disk, disk_u, two, cone, square, square_u, image, image_u, disk3] = &runs[..] else {
        unreachable!()
    };

    let mut stability: Vec<f64> = runs
        .iter()
        .flat_map(|r| &r.levels)
        .map(|l| l.flow_energy.1 + l.flow_dissipation - l.flow_energy.0)
        .collect();
    let c1 = criterion_1();
    let c2 = criterion_2(&mut stability);
    let outcomes = vec![
        c1,
        c2,
        criterion_3(),
        criterion_4(&stability),
        criterion_5(disk, disk_u),
        criterion_6(&[two, cone]),
        criterion_7(square, square_u),
        criterion_8(&runs.iter().collect::<Vec<_>>()),
        criterion_9(image, image_u),
        criterion_10(disk3),
    ];
    // written past the test harness's capture so the verdicts always
    // appear in the log
    let mut report = String::new();
    for o in &outcomes {
        let _ = writeln!(report, "criterion {}: {} {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    let _ = writeln!(
        report,
        "acceptance: {}/{} criteria pass; FAILED: {failed:?}; wall time {:.1} s",
        outcomes.len() - failed.len(),
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    {
        use std::io::Write as _;
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(report.as_bytes());
        let _ = out.flush();
    }
    if std::env::var_os("ROF_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        assert!(failed.is_empty(), "failed criteria: {failed:?}");
    }
}
