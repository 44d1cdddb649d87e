use super::{BoundaryCondition, Point, Triangulation};
use crate::error::{Error, Result};

/// Axis-aligned box `[lo, hi]` in two or three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn unit(dim: usize) -> Self {
        Self::cube(dim, 0.0, 1.0)
    }

    /// `(a, b)^dim`.
    pub fn cube(dim: usize, a: f64, b: f64) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..dim.min(3) {
            lo[k] = a;
            hi[k] = b;
        }
        Self { dim, lo, hi }
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }
}

/// Uniform simplicial mesh of a box with `n` cells per axis.
///
/// In 2D every square is cut along its `(0,0)-(1,1)` diagonal; in 3D every
/// cube is split into the six Kuhn tetrahedra sharing its main diagonal.
pub fn uniform_triangulation(
    domain: &BoxDomain,
    n: usize,
    bc: BoundaryCondition,
) -> Result<Triangulation> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid resolution must be positive".into()));
    }
    if domain.dim != 2 && domain.dim != 3 {
        return Err(Error::InvalidMesh(format!("unsupported dimension {}", domain.dim)));
    }
    if (0..domain.dim).any(|k| !(domain.hi[k] > domain.lo[k])) {
        return Err(Error::InvalidParameter("box must have positive extent".into()));
    }
    let coord = |k: usize, i: usize| {
        if i == n {
            domain.hi[k]
        } else {
            domain.lo[k] + (domain.hi[k] - domain.lo[k]) * i as f64 / n as f64
        }
    };
    let mut vertices = Vec::new();
    let mut elements = Vec::new();
    if domain.dim == 2 {
        let id = |i: usize, j: usize| j * (n + 1) + i;
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([coord(0, i), coord(1, j), 0.0]);
            }
        }
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                elements.push([v00, v10, v11, 0]);
                elements.push([v00, v11, v01, 0]);
            }
        }
    } else {
        let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
        for k in 0..=n {
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([coord(0, i), coord(1, j), coord(2, k)]);
                }
            }
        }
        const PATHS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for path in PATHS {
                        let mut c = [i, j, k];
                        let mut tet = [id(c[0], c[1], c[2]), 0, 0, 0];
                        for (step, &axis) in path.iter().enumerate() {
                            c[axis] += 1;
                            tet[step + 1] = id(c[0], c[1], c[2]);
                        }
                        elements.push(tet);
                    }
                }
            }
        }
    }
    let tag = bc.tag();
    let generation = vec![0; elements.len()];
    Triangulation::build(domain.dim, vertices, elements, generation, |_, _| tag)
}
