//! Benchmark registry, exact solutions, image data and result export.

mod csv;
mod exact;
mod image;
mod vtk;

use std::fmt;
use std::sync::Arc;

pub use self::csv::{
    fitted_rate, pairwise_rates, read_convergence_csv, write_convergence_csv, ConvergenceRow,
    CSV_HEADER,
};
pub use exact::{cone, cone_radii, one_disk, two_disks, ExactSolution, VectorFn, CONE_T};
pub use image::{
    image_to_problem, load_pgm, parse_pgm, pgm_bytes, pixel_l2_error_sq, rasterize, synthetic_image,
    write_pgm, ImageData,
    PixelSampler,
};
pub use vtk::{export_vtk, write_vtk, VtkField};

use crate::error::{Error, Result};
use crate::fem::{p0_project_fn, P0Function};
use crate::mesh::{uniform_triangulation, BoundaryCondition, BoxDomain, Point, Triangulation};
use crate::rof::{RofProblem, ScalarFn};

pub const BENCHMARK_NAMES: [&str; 6] =
    ["one_disk_2d", "one_disk_3d", "two_disks", "cone", "square", "image"];

/// Quadrature order used for `g_h = Π_h g`.
pub const DATA_PROJECTION_ORDER: usize = 5;

/// A problem definition that can be instantiated on any mesh of its domain.
#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub domain: BoxDomain,
    pub boundary: BoundaryCondition,
    pub alpha: f64,
    pub g: ScalarFn,
    pub exact: Option<ExactSolution>,
    /// Cells per axis of the initial uniform mesh.
    pub initial_subdivisions: usize,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("boundary", &self.boundary)
            .field("alpha", &self.alpha)
            .field("has_exact", &self.exact.is_some())
            .field("initial_subdivisions", &self.initial_subdivisions)
            .finish()
    }
}

impl Benchmark {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn initial_mesh(&self) -> Result<Triangulation> {
        uniform_triangulation(&self.domain, self.initial_subdivisions, self.boundary)
    }

    pub fn project_data(&self, mesh: &Triangulation) -> Result<P0Function> {
        let g = self.g.clone();
        p0_project_fn(mesh, move |x| g(x), DATA_PROJECTION_ORDER)
    }

    /// The problem on `mesh` with element-wise regularization `eps`.
    pub fn problem(&self, mesh: Triangulation, eps: P0Function) -> Result<RofProblem> {
        let g_h = self.project_data(&mesh)?;
        Ok(RofProblem::new(mesh, self.alpha, g_h, eps)?.with_exact_g(self.g.clone()))
    }

    fn from_exact(name: &str, exact: ExactSolution, initial_subdivisions: usize) -> Self {
        Self {
            name: name.to_string(),
            domain: exact.domain,
            boundary: exact.boundary_condition(),
            alpha: exact.alpha,
            g: exact.g.clone(),
            exact: Some(exact),
            initial_subdivisions,
        }
    }
}

/// `g = χ_{[−1/2, 1/2]²}` on `(−1, 1)²` with Neumann boundary and `α = 100`.
pub fn square() -> Benchmark {
    let r = 0.5;
    Benchmark {
        name: "square".into(),
        domain: BoxDomain::cube(2, -1.0, 1.0),
        boundary: BoundaryCondition::Neumann,
        alpha: 100.0,
        g: Arc::new(move |x: &Point| {
            if x[0].abs() < r && x[1].abs() < r {
                1.0
            } else {
                0.0
            }
        }),
        exact: None,
        initial_subdivisions: 4,
    }
}

/// Denoising of the synthetic test image on `(0, 1)²` with `α = 10⁴`.
pub fn image_benchmark() -> Benchmark {
    image_problem_benchmark("image", synthetic_image(), 1e4, 4)
}

/// Wraps an image as a Neumann problem on `(0, 1)²` with nearest-pixel data.
pub fn image_problem_benchmark(
    name: &str,
    img: ImageData,
    alpha: f64,
    initial_subdivisions: usize,
) -> Benchmark {
    let sampler = PixelSampler::new(img);
    Benchmark {
        name: name.into(),
        domain: BoxDomain::unit(2),
        boundary: BoundaryCondition::Neumann,
        alpha,
        g: Arc::new(move |x: &Point| sampler.sample(x)),
        exact: None,
        initial_subdivisions,
    }
}

pub fn benchmark(name: &str) -> Result<Benchmark> {
    Ok(match name {
        "one_disk_2d" => Benchmark::from_exact(name, one_disk(2), 4),
        "one_disk_3d" => Benchmark::from_exact(name, one_disk(3), 3),
        "two_disks" => Benchmark::from_exact(name, two_disks(), 4),
        "cone" => Benchmark::from_exact(name, cone(), 4),
        "square" => square(),
        "image" => image_benchmark(),
        _ => return Err(Error::UnknownBenchmark(name.to_string())),
    })
}
