//! Independent oracles and random inputs shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rof_afem::fem::{dirichlet_sides, CrFunction, P0Function, RtField};
use rof_afem::mesh::{
    refine_uniform, rgb_refine, uniform_triangulation, BoundaryCondition, BoundaryTag, BoxDomain,
    Point, Triangulation,
};
use rof_afem::rof::RofProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Solves `A x = b` for symmetric positive definite `A` by a dense
/// Cholesky factorization.
pub fn dense_cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// A random 2D mesh with at most `max_elements` elements: a uniform grid
/// of a random box followed by a few rounds of randomly marked refinement.
pub fn random_mesh_2d(rng: &mut ChaCha8Rng, max_elements: usize) -> Triangulation {
    let x0 = rng.gen_range(-1.0..0.5);
    let y0 = rng.gen_range(-1.0..0.5);
    let domain = BoxDomain {
        dim: 2,
        lo: [x0, y0, 0.0],
        hi: [x0 + rng.gen_range(0.5..2.0), y0 + rng.gen_range(0.5..2.0), 0.0],
    };
    let bc = if rng.gen_bool(0.5) { BoundaryCondition::Dirichlet } else { BoundaryCondition::Neumann };
    let mut mesh = uniform_triangulation(&domain, rng.gen_range(1..=3), bc).unwrap();
    for _ in 0..rng.gen_range(0..5) {
        let p = rng.gen_range(0.05..0.5);
        let marked: Vec<usize> = (0..mesh.n_elements()).filter(|_| rng.gen_bool(p)).collect();
        let next = rgb_refine(&mesh, &marked).unwrap();
        if next.n_elements() > max_elements {
            break;
        }
        mesh = next;
    }
    mesh
}

/// A random 3D mesh: the six-tetrahedra cube, possibly refined once.
pub fn random_mesh_3d(rng: &mut ChaCha8Rng) -> Triangulation {
    let bc = if rng.gen_bool(0.5) { BoundaryCondition::Dirichlet } else { BoundaryCondition::Neumann };
    let mesh = uniform_triangulation(&BoxDomain::cube(3, -1.0, 1.0), 1, bc).unwrap();
    if rng.gen_bool(0.5) {
        refine_uniform(&mesh).unwrap()
    } else {
        mesh
    }
}

pub fn random_mesh(rng: &mut ChaCha8Rng, max_elements: usize) -> Triangulation {
    if rng.gen_bool(0.8) {
        random_mesh_2d(rng, max_elements)
    } else {
        random_mesh_3d(rng)
    }
}

/// Random CR function vanishing at Dirichlet side midpoints.
pub fn random_cr(rng: &mut ChaCha8Rng, mesh: &Triangulation, scale: f64) -> CrFunction {
    let fixed = dirichlet_sides(mesh);
    CrFunction {
        dofs: fixed
            .iter()
            .map(|&f| if f { 0.0 } else { rng.gen_range(-scale..scale) })
            .collect(),
    }
}

/// Random RT field with vanishing Neumann fluxes.
pub fn random_rt(rng: &mut ChaCha8Rng, mesh: &Triangulation, scale: f64) -> RtField {
    RtField {
        dofs: (0..mesh.n_sides())
            .map(|s| {
                if mesh.boundary_tag(s) == BoundaryTag::Neumann {
                    0.0
                } else {
                    rng.gen_range(-scale..scale)
                }
            })
            .collect(),
    }
}

pub fn random_problem(rng: &mut ChaCha8Rng, mesh: Triangulation) -> RofProblem {
    let n = mesh.n_elements();
    let alpha = rng.gen_range(0.5..50.0);
    let g = P0Function { values: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let eps = P0Function { values: (0..n).map(|_| rng.gen_range(1e-3..0.5)).collect() };
    RofProblem::new(mesh, alpha, g, eps).unwrap()
}

/// Gradient of the affine function on triangle `t` that takes the values
/// `vals` at the side midpoints, from the midpoint coordinates alone.
pub fn gradient_from_midpoints(mesh: &Triangulation, t: usize, vals: &[f64]) -> [f64; 2] {
    let sides = mesh.element_sides(t);
    let m: Vec<Point> = sides.iter().map(|&s| mesh.side_barycenter(s)).collect();
    let (a11, a12) = (m[1][0] - m[0][0], m[1][1] - m[0][1]);
    let (a21, a22) = (m[2][0] - m[0][0], m[2][1] - m[0][1]);
    let (b1, b2) = (vals[1] - vals[0], vals[2] - vals[0]);
    let det = a11 * a22 - a12 * a21;
    [(b1 * a22 - a12 * b2) / det, (a11 * b2 - b1 * a21) / det]
}

/// Triangle area from its vertices.
pub fn triangle_area(mesh: &Triangulation, t: usize) -> f64 {
    let v: Vec<Point> = mesh.element_vertices(t).iter().map(|&i| mesh.vertex(i)).collect();
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
        .abs()
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Halton point in `[0, 1)^dim` with bases 2, 3, 5.
pub fn halton(i: usize, dim: usize) -> Point {
    let radical = |mut n: usize, b: usize| {
        let (mut f, mut r) = (1.0, 0.0);
        while n > 0 {
            f /= b as f64;
            r += f * (n % b) as f64;
            n /= b;
        }
        r
    };
    let mut p = [0.0; 3];
    for (k, b) in [2, 3, 5].into_iter().enumerate().take(dim) {
        p[k] = radical(i + 1, b);
    }
    p
}

/// Residuals of the discrete duality identities on one random instance.
#[derive(Debug, Clone, Copy)]
pub struct DualityCheck {
    pub n_elements: usize,
    /// `energy_reg(v) − dual_energy_reg(y)`; must be non-negative.
    pub weak_gap: f64,
    /// `|(∇_h v, Π_h y) + (Π_h v, div y)|`.
    pub ibp_error: f64,
    /// `|Σ_T η²_T − η²|`.
    pub local_sum_error: f64,
    /// Smallest local estimator contribution for an admissible pair.
    pub min_local: f64,
}

pub fn duality_check(seed: u64) -> DualityCheck {
    use rof_afem::estimator::{dual_energy_reg, eta_cr_with, DataChoice};
    use rof_afem::fem::{
        cr_gradient, p0_inner, p0_project_cr, p0_project_rt, p0_vector_inner, rt_divergence,
        rt_linf_norm,
    };
    use rof_afem::rof::energy_reg;

    let mut r = rng(seed);
    let mesh = random_mesh(&mut r, 200);
    let problem = random_problem(&mut r, mesh);
    let mesh = &problem.mesh;
    let v = random_cr(&mut r, mesh, 2.0);
    let y = random_rt(&mut r, mesh, 2.0);

    let ibp = p0_vector_inner(mesh, &cr_gradient(mesh, &v), &p0_project_rt(mesh, &y))
        + p0_inner(mesh, &p0_project_cr(mesh, &v), &rt_divergence(mesh, &y));

    // scale y into {|Π_h y| ≤ 1 − ε_T}
    let pi = p0_project_rt(mesh, &y);
    let mut c = f64::INFINITY;
    for (t, p) in pi.values.iter().enumerate() {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if n > 0.0 {
            c = c.min((1.0 - problem.eps.values[t]) / n);
        }
    }
    let c = if c.is_finite() { c * r.gen_range(0.1..1.0) } else { 1.0 };
    let y_reg = RtField { dofs: y.dofs.iter().map(|x| x * c).collect() };
    let weak_gap = energy_reg(&problem, &v) - dual_energy_reg(&problem, &y_reg);

    let linf = rt_linf_norm(mesh, &y);
    let s = r.gen_range(0.1..1.0) / linf.max(1e-300);
    let y_adm = RtField { dofs: y.dofs.iter().map(|x| x * s).collect() };
    let report = eta_cr_with(&problem, &v, &y_adm, DataChoice::Projected).unwrap();
    let local_sum: f64 = report.eta_sq_local.iter().sum();
    DualityCheck {
        n_elements: mesh.n_elements(),
        weak_gap,
        ibp_error: ibp.abs(),
        local_sum_error: (local_sum - report.eta_sq_global).abs(),
        min_local: report.eta_sq_local.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}
