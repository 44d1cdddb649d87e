//! Grayscale PGM images as piecewise-constant data on the unit square.
//!
//! Pixel `(i, j)` (column `i`, row `j` counted from the top) covers
//! `[i/w, (i+1)/w] × [1 − (j+1)/h, 1 − j/h]`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{CrFunction, P0Function};
use crate::mesh::{mesh_stats, uniform_triangulation, BoundaryCondition, BoxDomain, Point, Triangulation};
use crate::rof::RofProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageData {
    pub width: usize,
    pub height: usize,
    /// Row-major values in `[0, 1]`, first row at the top.
    pub pixels: Vec<f64>,
}

impl ImageData {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image must be non-empty".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: pixels.len() });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn pixel(&self, i: usize, j: usize) -> f64 {
        self.pixels[j * self.width + i]
    }

    /// Center of pixel `(i, j)` in `(0, 1)²`.
    pub fn pixel_center(&self, i: usize, j: usize) -> Point {
        [
            (i as f64 + 0.5) / self.width as f64,
            1.0 - (j as f64 + 0.5) / self.height as f64,
            0.0,
        ]
    }

    /// Pixel containing `x`, clamped to the image.
    pub fn pixel_at(&self, x: &Point) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clamp(x[0] * self.width as f64, self.width),
            clamp((1.0 - x[1]) * self.height as f64, self.height),
        )
    }
}

/// Nearest-pixel lookup, shareable between threads.
#[derive(Debug, Clone)]
pub struct PixelSampler {
    image: Arc<ImageData>,
}

impl PixelSampler {
    pub fn new(image: ImageData) -> Self {
        Self { image: Arc::new(image) }
    }

    pub fn image(&self) -> &ImageData {
        &self.image
    }

    pub fn sample(&self, x: &Point) -> f64 {
        let (i, j) = self.image.pixel_at(x);
        self.image.pixel(i, j)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Pgm { offset: self.pos, message: message.into() }
    }

    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn integer(&mut self, what: &str) -> Result<u64> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            self.pos = start;
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm { offset: start, message: format!("{what} out of range") })
    }
}

/// Parses a binary (P5) or ASCII (P2) graymap, normalizing by `maxval`.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageData> {
    let mut c = Cursor { bytes, pos: 0 };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(c.err("missing P2/P5 magic number")),
    };
    c.pos = 2;
    let width = c.integer("width")? as usize;
    let height = c.integer("height")? as usize;
    let header_end = c.pos;
    let maxval = c.integer("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Pgm { offset: header_end, message: "zero image dimension".into() });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(c.err(format!("maxval {maxval} not in 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| c.err("image dimensions overflow"))?;
    let max_f = maxval as f64;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
            return Err(c.err("expected a single whitespace byte after maxval"));
        }
        c.pos += 1;
        let depth = if maxval < 256 { 1 } else { 2 };
        let expected = n * depth;
        let available = bytes.len() - c.pos;
        if available < expected {
            return Err(c.err(format!(
                "truncated payload: expected {expected} bytes, found {available}"
            )));
        }
        for k in 0..n {
            let at = c.pos + k * depth;
            let v = if depth == 1 {
                bytes[at] as u64
            } else {
                ((bytes[at] as u64) << 8) | bytes[at + 1] as u64
            };
            if v > maxval {
                return Err(Error::Pgm { offset: at, message: format!("sample {v} exceeds maxval") });
            }
            pixels.push(v as f64 / max_f);
        }
    } else {
        for k in 0..n {
            let v = c.integer(&format!("sample {k} of {n}"))?;
            if v > maxval {
                return Err(c.err(format!("sample {v} exceeds maxval")));
            }
            pixels.push(v as f64 / max_f);
        }
    }
    Ok(ImageData { width, height, pixels })
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageData> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes)
}

/// Binary PGM with maxval 255.
pub fn pgm_bytes(img: &ImageData) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn write_pgm(img: &ImageData, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, pgm_bytes(img)).map_err(|e| Error::io(path, e))
}

/// A 256 × 256 piecewise-constant test image: a disk, a rectangle and a
/// triangle on a dark background, with gray levels that are exact
/// multiples of 1/255.
pub fn synthetic_image() -> ImageData {
    let n = 256;
    let level = |k: u8| k as f64 / 255.0;
    let mut pixels = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            let y = 1.0 - (j as f64 + 0.5) / n as f64;
            let v = if (x - 0.32).powi(2) + (y - 0.66).powi(2) < 0.2f64.powi(2) {
                level(230)
            } else if (0.56..0.88).contains(&x) && (0.14..0.46).contains(&y) {
                level(153)
            } else if y > 0.1 && x > 0.08 && x < 0.48 && y < 0.1 + 0.8 * (x - 0.08) && y < 0.1 + 0.8 * (0.48 - x) {
                level(102)
            } else {
                level(26)
            };
            pixels.push(v);
        }
    }
    ImageData { width: n, height: n, pixels }
}

/// Neumann problem on a uniform mesh of `(0, 1)²` with nearest-pixel data
/// and `ε = h²`.
pub fn image_to_problem(img: ImageData, alpha: f64, mesh_subdivisions: usize) -> Result<RofProblem> {
    let bench = super::image_problem_benchmark("image", img, alpha, mesh_subdivisions);
    let mesh = uniform_triangulation(&BoxDomain::unit(2), mesh_subdivisions, BoundaryCondition::Neumann)?;
    let h = mesh_stats(&mesh).avg_meshsize;
    let n = mesh.n_elements();
    bench.problem(mesh, P0Function { values: vec![h * h; n] })
}

/// Samples `v` at every pixel center of a `width × height` raster of
/// `(0, 1)²`; centers on shared element boundaries take the value of the
/// lowest-indexed element.
pub fn rasterize(mesh: &Triangulation, v: &CrFunction, width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; width * height];
    for t in 0..mesh.n_elements() {
        let verts = mesh.element_vertices(t);
        let pts: Vec<Point> = verts.iter().map(|&p| mesh.vertex(p)).collect();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &pts {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let i0 = ((lo[0] * width as f64 - 0.5).floor().max(0.0)) as usize;
        let i1 = ((hi[0] * width as f64 - 0.5).ceil().max(0.0) as usize).min(width - 1);
        let j0 = (((1.0 - hi[1]) * height as f64 - 0.5).floor().max(0.0)) as usize;
        let j1 = ((((1.0 - lo[1]) * height as f64) - 0.5).ceil().max(0.0) as usize).min(height - 1);
        let geo = mesh.geometry(t);
        let diam = geo.diameter;
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * width + i;
                if !out[k].is_nan() {
                    continue;
                }
                let x = [
                    (i as f64 + 0.5) / width as f64,
                    1.0 - (j as f64 + 0.5) / height as f64,
                    0.0,
                ];
                let inside = (0..3).all(|a| geo.barycentric(a, &pts[a], &x) >= -1e-12 * diam.max(1.0));
                if inside {
                    out[k] = v.eval(mesh, t, &x);
                }
            }
        }
    }
    out
}

/// `‖v − g‖²_{L²}` with `v` sampled at pixel centers and `g` the image.
pub fn pixel_l2_error_sq(mesh: &Triangulation, v: &CrFunction, img: &ImageData) -> f64 {
    let raster = rasterize(mesh, v, img.width, img.height);
    let area = 1.0 / (img.width * img.height) as f64;
    raster
        .iter()
        .zip(&img.pixels)
        .map(|(u, g)| (u - g).powi(2))
        .sum::<f64>()
        * area
}
