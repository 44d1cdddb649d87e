//! Benchmark problems with closed-form primal and dual solutions.

use std::fmt;
use std::sync::Arc;

use crate::mesh::{BoundaryCondition, BoxDomain, Point};
use crate::rof::ScalarFn;

pub type VectorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub z: VectorFn,
    pub div_z: ScalarFn,
    pub g: ScalarFn,
    pub alpha: f64,
    pub domain: BoxDomain,
    pub dirichlet: bool,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution")
            .field("alpha", &self.alpha)
            .field("domain", &self.domain)
            .field("dirichlet", &self.dirichlet)
            .finish_non_exhaustive()
    }
}

fn norm(x: &Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// `g = χ_{B_r(0)}` on `(−1, 1)^d` with `r = 1/2`, `α = 10`.
pub fn one_disk(dim: usize) -> ExactSolution {
    let r = 0.5;
    let alpha = 10.0;
    let d = dim as f64;
    let height = 1.0 - d / (alpha * r);
    let inside = move |x: &Point| norm(x) < r;
    ExactSolution {
        u: Arc::new(move |x| if inside(x) { height } else { 0.0 }),
        g: Arc::new(move |x| if inside(x) { 1.0 } else { 0.0 }),
        z: Arc::new(move |x| {
            let n = norm(x);
            // the exterior field r^{d-1} x / |x|^d is divergence free with
            // unit normal trace on the sphere
            let c = if n < r { -1.0 / r } else { -r.powi(dim as i32 - 1) / n.powi(dim as i32) };
            x.map(|xi| c * xi)
        }),
        div_z: Arc::new(move |x| if inside(x) { -d / r } else { 0.0 }),
        alpha,
        domain: BoxDomain::cube(dim, -1.0, 1.0),
        dirichlet: true,
    }
}

/// `g = χ_{B_r(r e₁)} − χ_{B_r(−r e₁)}` on `(−3/2, 3/2)²`.
pub fn two_disks() -> ExactSolution {
    let r = 0.5;
    let alpha = 10.0;
    let height = 1.0 - 2.0 / (alpha * r);
    // sign +1 selects the right disk (x₁ > 0), −1 the left one
    let side = |x: &Point| if x[0] > 0.0 { 1.0 } else { -1.0 };
    let shifted = move |x: &Point| {
        let c = side(x) * r;
        [x[0] - c, x[1], 0.0]
    };
    let inside = move |x: &Point| norm(&shifted(x)) < r;
    ExactSolution {
        u: Arc::new(move |x| if inside(x) { side(x) * height } else { 0.0 }),
        g: Arc::new(move |x| if inside(x) { side(x) } else { 0.0 }),
        z: Arc::new(move |x| {
            let y = shifted(x);
            let n = norm(&y);
            let c = if n < r { -1.0 / r } else { -r / (n * n) };
            y.map(|yi| side(x) * c * yi)
        }),
        div_z: Arc::new(move |x| if inside(x) { -side(x) * 2.0 / r } else { 0.0 }),
        alpha,
        domain: BoxDomain::cube(2, -1.5, 1.5),
        dirichlet: true,
    }
}

pub const CONE_T: f64 = 0.1;

/// Radii `(s, r)` of the cone: the plateau radius `s = √(3t)` and the
/// support radius `r`, the larger root of `r² − r + t = 0`, where the
/// primal solution vanishes continuously.
pub fn cone_radii(t: f64) -> (f64, f64) {
    ((3.0 * t).sqrt(), 0.5 * (1.0 + (1.0 - 4.0 * t).sqrt()))
}

/// Cone benchmark on `(−3/2, 3/2)²` with `α = 10`: a continuous primal
/// solution with a flat top, and data `g = u − div z / α`.
pub fn cone() -> ExactSolution {
    let t = CONE_T;
    let alpha = 10.0;
    let (s, r) = cone_radii(t);
    let u = move |x: &Point| {
        let n = norm(x);
        if n <= s {
            1.0 - (s * s + t) / s
        } else if n <= r {
            1.0 - (n * n + t) / n
        } else {
            0.0
        }
    };
    let div_z = move |x: &Point| {
        let n = norm(x);
        if n <= s {
            -2.0 / s
        } else if n <= r {
            -1.0 / n
        } else {
            0.0
        }
    };
    ExactSolution {
        u: Arc::new(u),
        g: Arc::new(move |x| u(x) - div_z(x) / alpha),
        z: Arc::new(move |x| {
            let n = norm(x);
            let c = if n <= s {
                -1.0 / s
            } else if n <= r {
                -1.0 / n
            } else {
                -r / (n * n)
            };
            x.map(|xi| c * xi)
        }),
        div_z: Arc::new(div_z),
        alpha,
        domain: BoxDomain::cube(2, -1.5, 1.5),
        dirichlet: true,
    }
}

impl ExactSolution {
    pub fn boundary_condition(&self) -> BoundaryCondition {
        if self.dirichlet {
            BoundaryCondition::Dirichlet
        } else {
            BoundaryCondition::Neumann
        }
    }
}
