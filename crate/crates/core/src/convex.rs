//! Convex densities, their Fenchel conjugates, and the element-wise
//! Marini reconstruction formulas linking discrete primal and dual
//! solutions.

use crate::error::{Error, Result};
use crate::fem::{element_affine_fluxes, CrFunction, P0Function, P0Vector, RtField};
use crate::mesh::{Point, Triangulation};

/// The smoothed modulus `f_ε(t) = (1 − ε) (t² + ε²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    eps: f64,
}

impl Regularization {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps < 1.0 {
            Ok(Self { eps })
        } else {
            Err(Error::InvalidParameter(format!("regularization ε = {eps} not in (0, 1)")))
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, t: f64) -> f64 {
        (1.0 - self.eps) * t.hypot(self.eps)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (1.0 - self.eps) * t / t.hypot(self.eps)
    }

    /// `f'_ε(t) / t`, evaluated without the removable singularity at 0.
    pub fn weight(&self, t: f64) -> f64 {
        (1.0 - self.eps) / t.hypot(self.eps)
    }

    /// `f*_ε(s)`; `+∞` outside `|s| ≤ 1 − ε`.
    pub fn conjugate(&self, s: f64) -> f64 {
        let bound = 1.0 - self.eps;
        if s.abs() > bound {
            f64::INFINITY
        } else {
            -self.eps * ((bound - s.abs()) * (bound + s.abs())).sqrt()
        }
    }

    /// `(f*_ε)'(s)` for `|s| < 1 − ε`.
    pub fn conjugate_derivative(&self, s: f64) -> Option<f64> {
        let bound = 1.0 - self.eps;
        if s.abs() >= bound {
            None
        } else {
            Some(self.eps * s / ((bound - s.abs()) * (bound + s.abs())).sqrt())
        }
    }
}

/// Value and derivative of `f_ε` at `t`.
pub fn feps_eval(reg: &Regularization, t: f64) -> (f64, f64) {
    (reg.value(t), reg.derivative(t))
}

pub fn feps_conjugate(reg: &Regularization, s: f64) -> f64 {
    reg.conjugate(s)
}

/// A `C¹` convex density `φ : R^d → R` with its conjugate.
pub trait SmoothDensity {
    fn value(&self, a: &Point) -> f64;
    fn gradient(&self, a: &Point) -> Point;
    /// `φ*(b)`, possibly `+∞`.
    fn conjugate_value(&self, b: &Point) -> f64;
    /// `Dφ*(b)` where it exists.
    fn conjugate_gradient(&self, b: &Point) -> Option<Point>;
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

fn scale(c: f64, a: &Point) -> Point {
    [c * a[0], c * a[1], c * a[2]]
}

/// `φ(a) = f_ε(|a|)`.
#[derive(Debug, Clone, Copy)]
pub struct RofRegularized(pub Regularization);

impl SmoothDensity for RofRegularized {
    fn value(&self, a: &Point) -> f64 {
        self.0.value(norm(a))
    }

    fn gradient(&self, a: &Point) -> Point {
        scale(self.0.weight(norm(a)), a)
    }

    fn conjugate_value(&self, b: &Point) -> f64 {
        self.0.conjugate(norm(b))
    }

    fn conjugate_gradient(&self, b: &Point) -> Option<Point> {
        let bound = 1.0 - self.0.eps;
        let s = norm(b);
        if s >= bound {
            return None;
        }
        Some(scale(self.0.eps / ((bound - s) * (bound + s)).sqrt(), b))
    }
}

/// `φ(a) = |a|^p / p` for `p > 1`.
#[derive(Debug, Clone, Copy)]
pub struct DirichletP {
    p: f64,
}

impl DirichletP {
    pub fn new(p: f64) -> Result<Self> {
        if p > 1.0 && p.is_finite() {
            Ok(Self { p })
        } else {
            Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")))
        }
    }

    fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

fn power_gradient(a: &Point, p: f64) -> Point {
    let n = norm(a);
    if n == 0.0 {
        [0.0; 3]
    } else {
        scale(n.powf(p - 2.0), a)
    }
}

impl SmoothDensity for DirichletP {
    fn value(&self, a: &Point) -> f64 {
        norm(a).powf(self.p) / self.p
    }

    fn gradient(&self, a: &Point) -> Point {
        power_gradient(a, self.p)
    }

    fn conjugate_value(&self, b: &Point) -> f64 {
        norm(b).powf(self.q()) / self.q()
    }

    fn conjugate_gradient(&self, b: &Point) -> Option<Point> {
        Some(power_gradient(b, self.q()))
    }
}

/// `φ(a) = |a|² / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic;

impl SmoothDensity for Quadratic {
    fn value(&self, a: &Point) -> f64 {
        0.5 * dot(a, a)
    }

    fn gradient(&self, a: &Point) -> Point {
        *a
    }

    fn conjugate_value(&self, b: &Point) -> f64 {
        0.5 * dot(b, b)
    }

    fn conjugate_gradient(&self, b: &Point) -> Option<Point> {
        Some(*b)
    }
}

/// `φ(a) − φ(b) − Dφ(b)·(a − b)`.
pub fn bregman_distance(density: &dyn SmoothDensity, a: &Point, b: &Point) -> f64 {
    let diff = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    density.value(a) - density.value(b) - dot(&density.gradient(b), &diff)
}

/// An element-wise RT0-shaped field `a_T + b_T (x − x_T)`, not necessarily
/// normal-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenRtField {
    pub constant: Vec<Point>,
    pub slope: Vec<f64>,
}

impl BrokenRtField {
    /// Outward normal components on the faces of each element.
    pub fn fluxes(&self, mesh: &Triangulation) -> Vec<[f64; 4]> {
        (0..mesh.n_elements())
            .map(|t| element_affine_fluxes(mesh, t, &self.constant[t], self.slope[t]))
            .collect()
    }

    /// Conforming field with side fluxes averaged between neighbours, and
    /// the largest interior disagreement before averaging.
    pub fn to_rt(&self, mesh: &Triangulation) -> (RtField, f64) {
        RtField::from_element_fluxes(mesh, &self.fluxes(mesh))
    }

    pub fn mean(&self) -> P0Vector {
        P0Vector { values: self.constant.clone() }
    }

    pub fn divergence(&self, dim: usize) -> P0Function {
        P0Function { values: self.slope.iter().map(|b| dim as f64 * b).collect() }
    }

    pub fn eval(&self, mesh: &Triangulation, t: usize, x: &Point) -> Point {
        let xt = mesh.barycenter(t);
        let (a, b) = (self.constant[t], self.slope[t]);
        [0, 1, 2].map(|k| a[k] + b * (x[k] - xt[k]))
    }
}

/// `z = Dφ(∇_h u) + (Dψ_h(·, Π_h u) / d)(x − Π_h x)` element-wise.
pub fn marini_forward(
    density: &dyn SmoothDensity,
    mesh: &Triangulation,
    grad_u: &P0Vector,
    dpsi: &P0Function,
) -> BrokenRtField {
    let d = mesh.dim() as f64;
    BrokenRtField {
        constant: grad_u.values.iter().map(|g| density.gradient(g)).collect(),
        slope: dpsi.values.iter().map(|v| v / d).collect(),
    }
}

/// `u = Dψ*_h(·, div z) + Dφ*(Π_h z)·(x − Π_h x)` element-wise, returned as
/// a CR function (side values averaged between neighbours) together with
/// the largest interior disagreement.
pub fn marini_inverse(
    density: &dyn SmoothDensity,
    mesh: &Triangulation,
    pi_z: &P0Vector,
    dpsi_star: &P0Function,
) -> Result<(CrFunction, f64)> {
    let grads: Vec<Point> = pi_z
        .values
        .iter()
        .enumerate()
        .map(|(t, b)| {
            density.conjugate_gradient(b).ok_or_else(|| {
                Error::InvalidParameter(format!("Dφ* undefined at Π z on element {t}"))
            })
        })
        .collect::<Result<_>>()?;
    let value = |t: usize, x: &Point| {
        let xt = mesh.barycenter(t);
        let g = grads[t];
        dpsi_star.values[t] + g[0] * (x[0] - xt[0]) + g[1] * (x[1] - xt[1]) + g[2] * (x[2] - xt[2])
    };
    let mut dofs = vec![0.0; mesh.n_sides()];
    let mut mismatch: f64 = 0.0;
    for (s, dof) in dofs.iter_mut().enumerate() {
        let xs = mesh.side_barycenter(s);
        let (t0, t1) = mesh.side_elements(s);
        let v0 = value(t0, &xs);
        *dof = match t1 {
            Some(t1) => {
                let v1 = value(t1, &xs);
                mismatch = mismatch.max((v0 - v1).abs());
                0.5 * (v0 + v1)
            }
            None => v0,
        };
    }
    Ok((CrFunction { dofs }, mismatch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{cr_gradient, p0_project_cr};
    use crate::mesh::{uniform_triangulation, BoundaryCondition, BoxDomain};

    #[test]
    fn feps_at_zero() {
        let reg = Regularization::new(0.1).unwrap();
        let (v, d) = feps_eval(&reg, 0.0);
        assert!((v - 0.09).abs() < 1e-15);
        assert_eq!(d, 0.0);
        assert!((reg.weight(0.0) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn feps_band() {
        for eps in [0.5, 0.1, 1e-3] {
            let reg = Regularization::new(eps).unwrap();
            for k in -200..=200 {
                let t = k as f64 * 0.05;
                let gap = reg.value(t) - t.abs();
                assert!(gap >= -eps * t.abs() - eps * eps - 1e-14);
                assert!(gap <= eps * (1.0 - t.abs()) + 1e-14);
            }
        }
    }

    #[test]
    fn derivative_saturates() {
        let reg = Regularization::new(0.5).unwrap();
        assert!((reg.derivative(1e6) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn conjugate_values() {
        let reg = Regularization::new(0.2).unwrap();
        assert!((reg.conjugate(0.0) + 0.16).abs() < 1e-15);
        assert_eq!(reg.conjugate(0.8), 0.0);
        assert_eq!(reg.conjugate(0.8 + 1e-12), f64::INFINITY);
        assert_eq!(reg.conjugate(-0.81), f64::INFINITY);
    }

    #[test]
    fn invalid_eps() {
        assert!(Regularization::new(0.0).is_err());
        assert!(Regularization::new(1.0).is_err());
        assert!(DirichletP::new(1.0).is_err());
    }

    #[test]
    fn bregman_of_quadratic_is_half_square() {
        let a = [1.0, -2.0, 0.0];
        let b = [0.5, 0.5, 0.0];
        let got = bregman_distance(&Quadratic, &a, &b);
        assert!((got - 0.5 * (0.25 + 6.25)).abs() < 1e-14);
        assert_eq!(bregman_distance(&Quadratic, &a, &a), 0.0);
    }

    #[test]
    fn zero_marini_field() {
        let mesh =
            uniform_triangulation(&BoxDomain::unit(2), 1, BoundaryCondition::Dirichlet).unwrap();
        let z = marini_forward(
            &Quadratic,
            &mesh,
            &P0Vector { values: vec![[0.0; 3]; 2] },
            &P0Function { values: vec![0.0; 2] },
        );
        let (rt, _) = z.to_rt(&mesh);
        assert!(rt.dofs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn inverse_of_constant_multiplier() {
        let mesh =
            uniform_triangulation(&BoxDomain::unit(2), 2, BoundaryCondition::Dirichlet).unwrap();
        let n = mesh.n_elements();
        let (u, mismatch) = marini_inverse(
            &Quadratic,
            &mesh,
            &P0Vector { values: vec![[0.0; 3]; n] },
            &P0Function { values: vec![1.5; n] },
        )
        .unwrap();
        assert_eq!(mismatch, 0.0);
        assert!(u.dofs.iter().all(|&x| x == 1.5));
    }

    #[test]
    fn forward_divergence_is_dpsi() {
        let mesh =
            uniform_triangulation(&BoxDomain::unit(2), 2, BoundaryCondition::Dirichlet).unwrap();
        let u = CrFunction::interpolate(&mesh, |x| x[0] * x[1]);
        let grad = cr_gradient(&mesh, &u);
        let dpsi = P0Function {
            values: (0..mesh.n_elements()).map(|t| t as f64 * 0.1 - 0.3).collect(),
        };
        let z = marini_forward(&Quadratic, &mesh, &grad, &dpsi);
        for (a, b) in z.divergence(2).values.iter().zip(&dpsi.values) {
            assert!((a - b).abs() < 1e-15);
        }
        // round trip through the inverse recovers u exactly
        let (back, _) = marini_inverse(&Quadratic, &mesh, &z.mean(), &p0_project_cr(&mesh, &u))
            .unwrap();
        for (a, b) in back.dofs.iter().zip(&u.dofs) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rof_density_conjugate_gradient_inverts_gradient() {
        let d = RofRegularized(Regularization::new(0.05).unwrap());
        let a = [0.7, -1.9, 0.0];
        let b = d.gradient(&a);
        let back = d.conjugate_gradient(&b).unwrap();
        for k in 0..3 {
            assert!((back[k] - a[k]).abs() < 1e-12);
        }
    }
}
