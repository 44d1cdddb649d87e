//! Gradient flow against a dense Newton minimizer written from scratch.

mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{dense_cholesky_solve, gradient_from_midpoints, rng, triangle_area};
use rof_afem::fem::{dirichlet_sides, CrFunction, P0Function};
use rof_afem::mesh::{uniform_triangulation, BoundaryCondition, BoxDomain, Triangulation};
use rof_afem::rof::{energy_reg, flow_residual, flow_step, solve_rof, FlowConfig, RofProblem};

/// Dense description of the regularized discrete energy on a 2D mesh.
struct Dense {
    free: Vec<usize>,
    /// Per element: area, local-to-free index map, the 2×3 gradient matrix.
    elements: Vec<(f64, [Option<usize>; 3], [[f64; 3]; 2])>,
    alpha: f64,
    g: Vec<f64>,
    eps: Vec<f64>,
}

impl Dense {
    fn new(p: &RofProblem) -> Self {
        let mesh = &p.mesh;
        let fixed = dirichlet_sides(mesh);
        let free: Vec<usize> = (0..mesh.n_sides()).filter(|&s| !fixed[s]).collect();
        let mut index = vec![None; mesh.n_sides()];
        for (k, &s) in free.iter().enumerate() {
            index[s] = Some(k);
        }
        let elements = (0..mesh.n_elements())
            .map(|t| {
                let sides = mesh.element_sides(t);
                let mut b = [[0.0; 3]; 2];
                for i in 0..3 {
                    let mut e = [0.0; 3];
                    e[i] = 1.0;
                    let g = gradient_from_midpoints(mesh, t, &e);
                    b[0][i] = g[0];
                    b[1][i] = g[1];
                }
                (triangle_area(mesh, t), [0, 1, 2].map(|i| index[sides[i]]), b)
            })
            .collect();
        Self { free, elements, alpha: p.alpha, g: p.g_h.values.clone(), eps: p.eps.values.clone() }
    }

    fn local(&self, x: &[f64], map: &[Option<usize>; 3]) -> [f64; 3] {
        map.map(|k| k.map_or(0.0, |k| x[k]))
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let mut e = 0.0;
        for (t, (area, map, b)) in self.elements.iter().enumerate() {
            let v = self.local(x, map);
            let gx = b[0][0] * v[0] + b[0][1] * v[1] + b[0][2] * v[2];
            let gy = b[1][0] * v[0] + b[1][1] * v[1] + b[1][2] * v[2];
            let eps = self.eps[t];
            let mean = (v[0] + v[1] + v[2]) / 3.0;
            e += area * (1.0 - eps) * (gx * gx + gy * gy + eps * eps).sqrt();
            e += 0.5 * self.alpha * area * (mean - self.g[t]).powi(2);
        }
        e
    }

    fn gradient_hessian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.free.len();
        let mut grad = vec![0.0; n];
        let mut hess = vec![vec![0.0; n]; n];
        for (t, (area, map, b)) in self.elements.iter().enumerate() {
            let v = self.local(x, map);
            let a = [
                b[0][0] * v[0] + b[0][1] * v[1] + b[0][2] * v[2],
                b[1][0] * v[0] + b[1][1] * v[1] + b[1][2] * v[2],
            ];
            let eps = self.eps[t];
            let big_a = (a[0] * a[0] + a[1] * a[1] + eps * eps).sqrt();
            let c = (1.0 - eps) / big_a;
            // Hessian of (1−ε)√(|a|²+ε²) in a
            let h = [
                [c - (1.0 - eps) * a[0] * a[0] / big_a.powi(3), -(1.0 - eps) * a[0] * a[1] / big_a.powi(3)],
                [-(1.0 - eps) * a[0] * a[1] / big_a.powi(3), c - (1.0 - eps) * a[1] * a[1] / big_a.powi(3)],
            ];
            let mean = (v[0] + v[1] + v[2]) / 3.0;
            for i in 0..3 {
                let Some(ki) = map[i] else { continue };
                grad[ki] += area * c * (a[0] * b[0][i] + a[1] * b[1][i]);
                grad[ki] += self.alpha * area * (mean - self.g[t]) / 3.0;
                for j in 0..3 {
                    let Some(kj) = map[j] else { continue };
                    let mut s = 0.0;
                    for p in 0..2 {
                        for q in 0..2 {
                            s += b[p][i] * h[p][q] * b[q][j];
                        }
                    }
                    hess[ki][kj] += area * s + self.alpha * area / 9.0;
                }
            }
        }
        (grad, hess)
    }

    /// Damped Newton iteration to machine precision.
    fn minimize(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.free.len()];
        for _ in 0..200 {
            let (g, h) = self.gradient_hessian(&x);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn < 1e-14 {
                break;
            }
            let d = dense_cholesky_solve(&h, &g);
            let e0 = self.energy(&x);
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - step * b).collect();
                // near the minimizer energy differences drown in rounding;
                // the gradient norm still decides
                let gt = self.gradient_hessian(&trial).0;
                let gtn = gt.iter().map(|v| v * v).sum::<f64>().sqrt();
                if self.energy(&trial) < e0 || gtn < gn || step < 1e-12 {
                    x = trial;
                    break;
                }
                step *= 0.5;
            }
        }
        x
    }

    fn to_cr(&self, x: &[f64], n_sides: usize) -> CrFunction {
        let mut dofs = vec![0.0; n_sides];
        for (k, &s) in self.free.iter().enumerate() {
            dofs[s] = x[k];
        }
        CrFunction { dofs }
    }
}

/// `‖v‖_{L²}` of a 2D CR function; the midpoint rule is exact for the
/// quadratic `v²`.
fn l2_norm(mesh: &Triangulation, v: &[f64]) -> f64 {
    (0..mesh.n_elements())
        .map(|t| {
            let s: f64 = mesh.element_sides(t).iter().map(|&s| v[s] * v[s]).sum();
            triangle_area(mesh, t) * s / 3.0
        })
        .sum::<f64>()
        .sqrt()
}

fn tiny_problem(seed: u64, n: usize, bc: BoundaryCondition) -> RofProblem {
    let mut r = rng(seed);
    let mesh = uniform_triangulation(&BoxDomain::cube(2, -1.0, 1.0), n, bc).unwrap();
    let ne = mesh.n_elements();
    RofProblem::new(
        mesh,
        r.gen_range(1.0..20.0),
        P0Function { values: (0..ne).map(|_| r.gen_range(-1.0..1.0)).collect() },
        P0Function { values: (0..ne).map(|_| r.gen_range(0.01..0.5)).collect() },
    )
    .unwrap()
}

fn bc_of(flag: bool) -> BoundaryCondition {
    if flag {
        BoundaryCondition::Dirichlet
    } else {
        BoundaryCondition::Neumann
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_vanishes_at_oracle_minimizer(seed in any::<u64>(), n in 1usize..=2, d in any::<bool>()) {
        let p = tiny_problem(seed, n, bc_of(d));
        let dense = Dense::new(&p);
        let x = dense.minimize();
        let u = dense.to_cr(&x, p.mesh.n_sides());
        prop_assert!((energy_reg(&p, &u) - dense.energy(&x)).abs() < 1e-12);
        let (_, res) = flow_residual(&p, &u).unwrap();
        prop_assert!(res <= 1e-9, "residual {} at the minimizer", res);
    }

    #[test]
    fn flow_iterate_is_within_twice_the_residual(seed in any::<u64>(), n in 1usize..=2, d in any::<bool>()) {
        let p = tiny_problem(seed, n, bc_of(d));
        let dense = Dense::new(&p);
        let u_star = dense.to_cr(&dense.minimize(), p.mesh.n_sides());
        let res = solve_rof(&p, &FlowConfig::default()).unwrap();
        prop_assert!(res.final_residual_norm <= FlowConfig::default().target(&p.mesh));
        let diff: Vec<f64> = res.u.dofs.iter().zip(&u_star.dofs).map(|(a, b)| a - b).collect();
        let err = l2_norm(&p.mesh, &diff);
        prop_assert!(err <= 2.0 * res.final_residual_norm, "{} > 2·{}", err, res.final_residual_norm);
        // strong stability
        let e = &res.energy_trace;
        prop_assert!(e[e.len() - 1] + res.dissipation <= e[0] + 1e-9);
    }

    #[test]
    fn one_step_matches_dense_linear_solve(seed in any::<u64>(), d in any::<bool>()) {
        let p = tiny_problem(seed, 1, bc_of(d));
        let dense = Dense::new(&p);
        let mut r = rng(seed ^ 3);
        let prev = dense.to_cr(
            &(0..dense.free.len()).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<_>>(),
            p.mesh.n_sides(),
        );
        let tau = r.gen_range(0.1..2.0);
        // (M/τ + K_w + α M_Π) u = M u_prev/τ + α (g, Π v)
        let n = dense.free.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        let xp: Vec<f64> = dense.free.iter().map(|&s| prev.dofs[s]).collect();
        for (t, (area, map, b)) in dense.elements.iter().enumerate() {
            let v = dense.local(&xp, map);
            let gx = b[0][0] * v[0] + b[0][1] * v[1] + b[0][2] * v[2];
            let gy = b[1][0] * v[0] + b[1][1] * v[1] + b[1][2] * v[2];
            let eps = dense.eps[t];
            let w = (1.0 - eps) / (gx * gx + gy * gy + eps * eps).sqrt();
            for i in 0..3 {
                let Some(ki) = map[i] else { continue };
                // CR mass is diagonal: |T|/3 per side
                a[ki][ki] += area / 3.0 / tau;
                rhs[ki] += area / 3.0 * v[i] / tau + dense.alpha * area * dense.g[t] / 3.0;
                for j in 0..3 {
                    let Some(kj) = map[j] else { continue };
                    a[ki][kj] += area * w * (b[0][i] * b[0][j] + b[1][i] * b[1][j])
                        + dense.alpha * area / 9.0;
                }
            }
        }
        let x = dense_cholesky_solve(&a, &rhs);
        let cfg = FlowConfig { tau, ..FlowConfig::default() };
        let u = flow_step(&p, &cfg, &prev).unwrap();
        for (k, &s) in dense.free.iter().enumerate() {
            prop_assert!((u.dofs[s] - x[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn one_disk_coarse_solve_meets_stopping_rule() {
    let b = rof_afem::bench::benchmark("one_disk_2d").unwrap();
    let mesh = b.initial_mesh().unwrap();
    let h = rof_afem::mesh::mesh_stats(&mesh).avg_meshsize;
    let n = mesh.n_elements();
    let p = b.problem(mesh, P0Function { values: vec![h * h; n] }).unwrap();
    let res = solve_rof(&p, &FlowConfig::default()).unwrap();
    assert!(res.final_residual_norm <= h / 20f64.sqrt());
    assert!(res.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}
