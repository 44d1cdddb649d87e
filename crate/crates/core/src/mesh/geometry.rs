use super::Point;

/// Per-element geometric data, computed once per mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub volume: f64,
    pub barycenter: Point,
    /// Gradients of the barycentric coordinates, one per local vertex.
    pub grad_lambda: [Point; 4],
    /// Measure of the face opposite each local vertex.
    pub face_area: [f64; 4],
    pub diameter: f64,
    /// Diameter of the largest inscribed ball.
    pub inball_diameter: f64,
}

pub(crate) fn orientation(dim: usize, vertices: &[Point], element: &[usize; 4]) -> f64 {
    let p0 = vertices[element[0]];
    let e: Vec<Point> = (1..=dim).map(|k| sub(&vertices[element[k]], &p0)).collect();
    if dim == 2 {
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    } else {
        dot(&e[0], &cross(&e[1], &e[2]))
    }
}

impl ElementGeometry {
    pub(crate) fn new(dim: usize, vertices: &[Point], element: &[usize; 4]) -> Self {
        let nv = dim + 1;
        let p: Vec<Point> = element[..nv].iter().map(|&v| vertices[v]).collect();
        let e: Vec<Point> = (1..nv).map(|k| sub(&p[k], &p[0])).collect();
        let mut grad_lambda = [[0.0; 3]; 4];
        let det;
        let volume;
        if dim == 2 {
            det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
            grad_lambda[1] = [e[1][1] / det, -e[1][0] / det, 0.0];
            grad_lambda[2] = [-e[0][1] / det, e[0][0] / det, 0.0];
            volume = det / 2.0;
        } else {
            det = dot(&e[0], &cross(&e[1], &e[2]));
            grad_lambda[1] = cross(&e[1], &e[2]).map(|c| c / det);
            grad_lambda[2] = cross(&e[2], &e[0]).map(|c| c / det);
            grad_lambda[3] = cross(&e[0], &e[1]).map(|c| c / det);
            volume = det / 6.0;
        }
        let mut g0 = [0.0; 3];
        for g in &grad_lambda[1..nv] {
            for k in 0..3 {
                g0[k] -= g[k];
            }
        }
        grad_lambda[0] = g0;

        let mut barycenter = [0.0; 3];
        for q in &p {
            for k in 0..3 {
                barycenter[k] += q[k] / nv as f64;
            }
        }
        let mut face_area = [0.0; 4];
        for i in 0..nv {
            face_area[i] = dim as f64 * volume * norm(&grad_lambda[i]);
        }
        let mut diameter: f64 = 0.0;
        for i in 0..nv {
            for j in i + 1..nv {
                diameter = diameter.max(norm(&sub(&p[i], &p[j])));
            }
        }
        let surface: f64 = face_area[..nv].iter().sum();
        let inball_diameter = 2.0 * dim as f64 * volume / surface;
        Self {
            volume,
            barycenter,
            grad_lambda,
            face_area,
            diameter,
            inball_diameter,
        }
    }

    /// Outward unit normal of the face opposite local vertex `i`.
    pub fn outward_normal(&self, i: usize) -> Point {
        let g = self.grad_lambda[i];
        let n = norm(&g);
        g.map(|c| -c / n)
    }

    /// Barycentric coordinate `λ_i(x)`, given the position of vertex `i`.
    pub fn barycentric(&self, i: usize, vertex_i: &Point, x: &Point) -> f64 {
        1.0 + dot(&self.grad_lambda[i], &sub(x, vertex_i))
    }
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
