//! Grundmann–Möller rules on simplices.

use crate::error::{Error, Result};
use crate::mesh::{Point, Triangulation};

/// Quadrature rule in barycentric coordinates; weights sum to one (the
/// integral is `|T| Σ w f(x)`).
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

/// Rule on a `dim`-simplex exact for polynomials of degree `order`
/// (`1..=5`).
pub fn simplex_rule(dim: usize, order: usize) -> Result<SimplexRule> {
    let s = match order {
        1 => 0,
        2 | 3 => 1,
        4 | 5 => 2,
        _ => return Err(Error::UnsupportedQuadrature(order)),
    };
    let n = dim;
    let big_d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let nfact = factorial(n);
    for i in 0..=s {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let denom = (big_d + n - 2 * i) as f64;
        let w = sign * 0.25f64.powi(s as i32) * denom.powi(big_d as i32)
            / (factorial(i) * factorial(big_d + n - i))
            * nfact;
        for beta in compositions(s - i, n + 1) {
            let mut lambda = [0.0; 4];
            for (l, &b) in lambda.iter_mut().zip(&beta) {
                *l = (2 * b + 1) as f64 / denom;
            }
            points.push(lambda);
            weights.push(w);
        }
    }
    Ok(SimplexRule { points, weights })
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// All vectors of `parts` non-negative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Physical point with barycentric coordinates `lambda` in element `t`.
pub fn map_point(mesh: &Triangulation, t: usize, lambda: &[f64; 4]) -> Point {
    let mut x = [0.0; 3];
    for (i, &v) in mesh.element_vertices(t).iter().enumerate() {
        let p = mesh.vertex(v);
        for k in 0..3 {
            x[k] += lambda[i] * p[k];
        }
    }
    x
}

/// `∫_T f dx` with a rule of the given polynomial order.
pub fn quad_l2_element(
    mesh: &Triangulation,
    t: usize,
    f: impl Fn(&Point) -> f64,
    order: usize,
) -> Result<f64> {
    let rule = simplex_rule(mesh.dim(), order)?;
    Ok(integrate_with(mesh, t, &rule, f))
}

pub(crate) fn integrate_with(
    mesh: &Triangulation,
    t: usize,
    rule: &SimplexRule,
    f: impl Fn(&Point) -> f64,
) -> f64 {
    let sum: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(lambda, w)| w * f(&map_point(mesh, t, lambda)))
        .sum();
    mesh.volume(t) * sum
}
