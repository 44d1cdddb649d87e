//! Conforming simplicial triangulations in two and three dimensions.
//!
//! Local face `i` of an element is the face opposite its local vertex `i`.
//! Sides are stored with sorted vertex indices; the canonical normal of an
//! interior side points out of the lower-indexed adjacent element, and out
//! of the domain on boundary sides.

mod geometry;
mod refine;
mod uniform;

use std::collections::HashMap;

pub use geometry::ElementGeometry;
pub use refine::{
    refine_uniform, refine_uniform_with_parents, rgb_refine, rgb_refine_with_parents,
};
pub use uniform::{uniform_triangulation, BoxDomain};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// Sentinel for the missing second neighbour of a boundary side.
pub const NO_ELEMENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Neumann,
}

/// Boundary condition imposed on the whole of ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn tag(self) -> BoundaryTag {
        match self {
            BoundaryCondition::Dirichlet => BoundaryTag::Dirichlet,
            BoundaryCondition::Neumann => BoundaryTag::Neumann,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    vertices: Vec<Point>,
    elements: Vec<[usize; 4]>,
    sides: Vec<[usize; 3]>,
    element_sides: Vec<[usize; 4]>,
    side_elements: Vec<[usize; 2]>,
    boundary_tag: Vec<BoundaryTag>,
    generation: Vec<u32>,
    geometry: Vec<ElementGeometry>,
}

/// Side connectivity derived from an element list.
#[derive(Debug, Clone, PartialEq)]
pub struct SideTables {
    pub sides: Vec<[usize; 3]>,
    pub element_sides: Vec<[usize; 4]>,
    pub side_elements: Vec<[usize; 2]>,
}

/// Collects the faces of all elements, merging duplicates.
///
/// Each side key lists its `dim` vertices in increasing order; unused
/// trailing slots are zero.
pub fn extract_sides(dim: usize, elements: &[[usize; 4]]) -> Result<SideTables> {
    let nv = dim + 1;
    let mut lookup: HashMap<[usize; 3], usize> = HashMap::with_capacity(elements.len() * nv);
    let mut sides = Vec::new();
    let mut side_elements: Vec<[usize; 2]> = Vec::new();
    let mut element_sides = Vec::with_capacity(elements.len());
    for (t, element) in elements.iter().enumerate() {
        let mut local = [NO_ELEMENT; 4];
        for (i, slot) in local.iter_mut().enumerate().take(nv) {
            let key = face_key(dim, element, i);
            let s = *lookup.entry(key).or_insert_with(|| {
                sides.push(key);
                side_elements.push([NO_ELEMENT, NO_ELEMENT]);
                sides.len() - 1
            });
            let adjacent = &mut side_elements[s];
            if adjacent[0] == NO_ELEMENT {
                adjacent[0] = t;
            } else if adjacent[1] == NO_ELEMENT {
                adjacent[1] = t;
            } else {
                return Err(Error::NonManifold(key[..dim].to_vec()));
            }
            *slot = s;
        }
        element_sides.push(local);
    }
    Ok(SideTables {
        sides,
        element_sides,
        side_elements,
    })
}

fn face_key(dim: usize, element: &[usize; 4], opposite: usize) -> [usize; 3] {
    let mut key = [0usize; 3];
    let mut k = 0;
    for (j, &v) in element.iter().enumerate().take(dim + 1) {
        if j != opposite {
            key[k] = v;
            k += 1;
        }
    }
    key[..dim].sort_unstable();
    key
}

impl Triangulation {
    /// Builds a mesh, re-orienting elements to positive volume and tagging
    /// each boundary side with `boundary(side_vertices)`.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        elements: Vec<[usize; 4]>,
        boundary: impl Fn(&[Point]) -> BoundaryTag,
    ) -> Result<Self> {
        let generation = vec![0; elements.len()];
        Self::build(dim, vertices, elements, generation, |mesh, s| {
            let pts: Vec<Point> = mesh.side_vertices_of(s).iter().map(|&v| mesh.vertices[v]).collect();
            boundary(&pts)
        })
    }

    pub(crate) fn build(
        dim: usize,
        vertices: Vec<Point>,
        mut elements: Vec<[usize; 4]>,
        generation: Vec<u32>,
        mut tag_boundary: impl FnMut(&Triangulation, usize) -> BoundaryTag,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        if elements.is_empty() {
            return Err(Error::InvalidMesh("no elements".into()));
        }
        let nv = dim + 1;
        for (t, element) in elements.iter_mut().enumerate() {
            if element[..nv].iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "element {t} references a missing vertex"
                )));
            }
            if dim == 2 {
                element[3] = 0;
            }
            let det = geometry::orientation(dim, &vertices, element);
            if det == 0.0 || !det.is_finite() {
                return Err(Error::InvalidMesh(format!("element {t} is degenerate")));
            }
            if det < 0.0 {
                element.swap(1, 2);
            }
        }
        let tables = extract_sides(dim, &elements)?;
        let geometry = elements
            .iter()
            .map(|e| ElementGeometry::new(dim, &vertices, e))
            .collect();
        let mut mesh = Triangulation {
            dim,
            vertices,
            elements,
            sides: tables.sides,
            element_sides: tables.element_sides,
            side_elements: tables.side_elements,
            boundary_tag: Vec::new(),
            generation,
            geometry,
        };
        let tags = (0..mesh.sides.len())
            .map(|s| {
                if mesh.side_elements[s][1] == NO_ELEMENT {
                    let tag = tag_boundary(&mesh, s);
                    if tag == BoundaryTag::Interior {
                        BoundaryTag::Neumann
                    } else {
                        tag
                    }
                } else {
                    BoundaryTag::Interior
                }
            })
            .collect();
        mesh.boundary_tag = tags;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_sides(&self) -> usize {
        self.sides.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn element_vertices(&self, t: usize) -> &[usize] {
        &self.elements[t][..self.dim + 1]
    }

    /// Side indices of element `t`, ordered by the opposite local vertex.
    pub fn element_sides(&self, t: usize) -> &[usize] {
        &self.element_sides[t][..self.dim + 1]
    }

    pub fn side_vertices(&self, s: usize) -> &[usize] {
        self.side_vertices_of(s)
    }

    fn side_vertices_of(&self, s: usize) -> &[usize] {
        &self.sides[s][..self.dim]
    }

    /// Adjacent elements of side `s`; the second is `None` on the boundary.
    pub fn side_elements(&self, s: usize) -> (usize, Option<usize>) {
        let [a, b] = self.side_elements[s];
        (a, (b != NO_ELEMENT).then_some(b))
    }

    pub fn is_boundary_side(&self, s: usize) -> bool {
        self.side_elements[s][1] == NO_ELEMENT
    }

    pub fn boundary_tag(&self, s: usize) -> BoundaryTag {
        self.boundary_tag[s]
    }

    pub fn boundary_tags(&self) -> &[BoundaryTag] {
        &self.boundary_tag
    }

    pub fn generation(&self, t: usize) -> u32 {
        self.generation[t]
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.geometry[t].volume
    }

    pub fn barycenter(&self, t: usize) -> Point {
        self.geometry[t].barycenter
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn side_barycenter(&self, s: usize) -> Point {
        let verts = self.side_vertices_of(s);
        let mut x = [0.0; 3];
        for &v in verts {
            for k in 0..3 {
                x[k] += self.vertices[v][k];
            }
        }
        x.map(|c| c / verts.len() as f64)
    }

    /// Length (2D) or area (3D) of side `s`.
    pub fn side_measure(&self, s: usize) -> f64 {
        let (t, _) = self.side_elements(s);
        let local = self.local_face(t, s);
        self.geometry[t].face_area[local]
    }

    /// Local face index of side `s` within element `t`.
    pub fn local_face(&self, t: usize, s: usize) -> usize {
        self.element_sides(t)
            .iter()
            .position(|&x| x == s)
            .expect("side does not belong to element")
    }

    /// `+1` if the canonical normal of local face `i` of `t` is outward for `t`.
    pub fn flux_sign(&self, t: usize, i: usize) -> f64 {
        let s = self.element_sides[t][i];
        if self.side_elements[s][0] == t {
            1.0
        } else {
            -1.0
        }
    }

    /// Canonical unit normal of side `s`.
    pub fn side_normal(&self, s: usize) -> Point {
        let t = self.side_elements[s][0];
        let i = self.local_face(t, s);
        self.geometry[t].outward_normal(i)
    }

    /// Sides having at least one vertex on ∂Ω (`S ∩ ∂Ω ≠ ∅`).
    pub fn sides_touching_boundary(&self) -> Vec<bool> {
        let mut on_boundary = vec![false; self.vertices.len()];
        for s in 0..self.sides.len() {
            if self.is_boundary_side(s) {
                for &v in self.side_vertices_of(s) {
                    on_boundary[v] = true;
                }
            }
        }
        (0..self.sides.len())
            .map(|s| self.side_vertices_of(s).iter().any(|&v| on_boundary[v]))
            .collect()
    }

    /// Checks conformity: every side is a face of each adjacent element,
    /// interior sides have two neighbours, and all volumes are positive.
    pub fn check_conformity(&self) -> Result<()> {
        let rebuilt = extract_sides(self.dim, &self.elements)?;
        if rebuilt.sides.len() != self.sides.len() {
            return Err(Error::InvalidMesh("side table out of date".into()));
        }
        for t in 0..self.n_elements() {
            if !(self.geometry[t].volume > 0.0) {
                return Err(Error::InvalidMesh(format!("element {t} has non-positive volume")));
            }
        }
        for s in 0..self.sides.len() {
            let [a, b] = self.side_elements[s];
            for t in [a, b] {
                if t == NO_ELEMENT {
                    continue;
                }
                let verts = self.element_vertices(t);
                if !self.side_vertices_of(s).iter().all(|v| verts.contains(v)) {
                    return Err(Error::InvalidMesh(format!(
                        "side {s} is not a face of element {t}"
                    )));
                }
            }
        }
        // hanging vertices: a vertex lying inside a boundary side would
        // make the boundary surface area exceed that of the domain hull
        let mut boundary_measure = 0.0;
        for s in 0..self.sides.len() {
            if self.is_boundary_side(s) {
                boundary_measure += self.side_measure(s);
            }
        }
        let (lo, hi) = self.bounding_box();
        if self.is_box_domain() {
            let hull = box_surface(self.dim, lo, hi);
            if (boundary_measure - hull).abs() > 1e-9 * hull.max(1.0) {
                return Err(Error::InvalidMesh(format!(
                    "boundary measure {boundary_measure} differs from box surface {hull}: hanging vertex"
                )));
            }
        }
        Ok(())
    }

    fn is_box_domain(&self) -> bool {
        let (lo, hi) = self.bounding_box();
        let vol: f64 = (0..self.dim).map(|k| hi[k] - lo[k]).product();
        (self.total_volume() - vol).abs() <= 1e-10 * vol
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in self.dim..3 {
            lo[k] = 0.0;
            hi[k] = 0.0;
        }
        (lo, hi)
    }

    /// Element containing `x` (closest barycentric fit), by linear search
    /// from a hint and then over all elements.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let tol = -1e-12;
        (0..self.n_elements()).find(|&t| {
            let g = &self.geometry[t];
            let verts = self.element_vertices(t);
            (0..=self.dim).all(|i| g.barycentric(i, &self.vertices[verts[i]], x) >= tol)
        })
    }
}

fn box_surface(dim: usize, lo: Point, hi: Point) -> f64 {
    let e: Vec<f64> = (0..dim).map(|k| hi[k] - lo[k]).collect();
    if dim == 2 {
        2.0 * (e[0] + e[1])
    } else {
        2.0 * (e[0] * e[1] + e[1] * e[2] + e[0] * e[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    /// Average element diameter `h`.
    pub avg_meshsize: f64,
    pub per_element_diameter: Vec<f64>,
    /// `max h_T / ρ_T` with `ρ_T` the inscribed-ball diameter.
    pub chunkiness: f64,
    pub n_vertices: usize,
}

pub fn mesh_stats(mesh: &Triangulation) -> MeshStats {
    let per_element_diameter: Vec<f64> = mesh.geometry.iter().map(|g| g.diameter).collect();
    let avg_meshsize = per_element_diameter.iter().sum::<f64>() / mesh.n_elements() as f64;
    let chunkiness = mesh
        .geometry
        .iter()
        .map(|g| g.diameter / g.inball_diameter)
        .fold(0.0, f64::max);
    MeshStats {
        avg_meshsize,
        per_element_diameter,
        chunkiness,
        n_vertices: mesh.n_vertices(),
    }
}
