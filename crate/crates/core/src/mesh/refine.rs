use std::collections::HashMap;

use super::{BoundaryTag, Point, Triangulation};
use crate::error::Result;

/// Red-green-blue refinement of a 2D mesh.
///
/// Each element's reference edge is its longest edge. Marked elements get
/// all three edges bisected; the closure then forces the reference edge of
/// every element with a bisected edge, and each element is split by the
/// green, blue or red pattern matching its bisected edges.
///
/// In 3D every call with a non-empty marking refines uniformly.
pub fn rgb_refine(mesh: &Triangulation, marked: &[usize]) -> Result<Triangulation> {
    Ok(rgb_refine_with_parents(mesh, marked)?.0)
}

/// As [`rgb_refine`], also returning the parent element of every new
/// element.
pub fn rgb_refine_with_parents(
    mesh: &Triangulation,
    marked: &[usize],
) -> Result<(Triangulation, Vec<usize>)> {
    if marked.is_empty() {
        return Ok((mesh.clone(), (0..mesh.n_elements()).collect()));
    }
    if mesh.dim() == 3 {
        return refine_uniform_with_parents(mesh);
    }
    let ref_edge: Vec<usize> = (0..mesh.n_elements()).map(|t| reference_face(mesh, t)).collect();
    let mut edge_marked = vec![false; mesh.n_sides()];
    for &t in marked {
        for &s in mesh.element_sides(t) {
            edge_marked[s] = true;
        }
    }
    // closure: a bisected edge forces the reference edge of both neighbours
    let mut queue: Vec<usize> = (0..mesh.n_sides()).filter(|&s| edge_marked[s]).collect();
    while let Some(s) = queue.pop() {
        let (a, b) = mesh.side_elements(s);
        for t in std::iter::once(a).chain(b) {
            let r = mesh.element_sides(t)[ref_edge[t]];
            if !edge_marked[r] {
                edge_marked[r] = true;
                queue.push(r);
            }
        }
    }

    let mut builder = Builder::new(mesh);
    let mut midpoint = vec![usize::MAX; mesh.n_sides()];
    for s in 0..mesh.n_sides() {
        if edge_marked[s] {
            let v = mesh.side_vertices(s);
            midpoint[s] = builder.midpoint(v[0], v[1]);
        }
    }
    for t in 0..mesh.n_elements() {
        let verts = mesh.element_vertices(t);
        let sides = mesh.element_sides(t);
        let gen = mesh.generation(t);
        builder.current = t;
        let r = ref_edge[t];
        let c = verts[r];
        let a = verts[(r + 1) % 3];
        let b = verts[(r + 2) % 3];
        let ab = sides[r];
        let bc = sides[(r + 1) % 3];
        let ca = sides[(r + 2) % 3];
        if !edge_marked[ab] {
            builder.push([verts[0], verts[1], verts[2]], gen);
            continue;
        }
        let m = midpoint[ab];
        match (edge_marked[ca], edge_marked[bc]) {
            (false, false) => {
                builder.push([c, a, m], gen + 1);
                builder.push([c, m, b], gen + 1);
            }
            (true, false) => {
                let mb = midpoint[ca];
                builder.push([c, mb, m], gen + 1);
                builder.push([mb, a, m], gen + 1);
                builder.push([c, m, b], gen + 1);
            }
            (false, true) => {
                let ma = midpoint[bc];
                builder.push([c, a, m], gen + 1);
                builder.push([c, m, ma], gen + 1);
                builder.push([ma, m, b], gen + 1);
            }
            (true, true) => {
                let mb = midpoint[ca];
                let ma = midpoint[bc];
                builder.push([c, mb, ma], gen + 1);
                builder.push([mb, a, m], gen + 1);
                builder.push([ma, m, b], gen + 1);
                builder.push([m, ma, mb], gen + 1);
            }
        }
    }
    builder.finish()
}

/// Uniform refinement: red refinement in 2D, Bey's eight-tetrahedra
/// subdivision (interior diagonal between the midpoints of edges 02 and
/// 13) in 3D.
pub fn refine_uniform(mesh: &Triangulation) -> Result<Triangulation> {
    Ok(refine_uniform_with_parents(mesh)?.0)
}

pub fn refine_uniform_with_parents(mesh: &Triangulation) -> Result<(Triangulation, Vec<usize>)> {
    if mesh.dim() == 2 {
        let all: Vec<usize> = (0..mesh.n_elements()).collect();
        return rgb_refine_with_parents(mesh, &all);
    }
    let mut builder = Builder::new(mesh);
    for t in 0..mesh.n_elements() {
        let x = mesh.element_vertices(t);
        let gen = mesh.generation(t) + 1;
        let mut m = [[0usize; 4]; 4];
        for i in 0..4 {
            for j in i + 1..4 {
                m[i][j] = builder.midpoint(x[i], x[j]);
                m[j][i] = m[i][j];
            }
        }
        let children = [
            [x[0], m[0][1], m[0][2], m[0][3]],
            [m[0][1], x[1], m[1][2], m[1][3]],
            [m[0][2], m[1][2], x[2], m[2][3]],
            [m[0][3], m[1][3], m[2][3], x[3]],
            [m[0][1], m[0][2], m[0][3], m[1][3]],
            [m[0][1], m[0][2], m[1][2], m[1][3]],
            [m[0][2], m[0][3], m[1][3], m[2][3]],
            [m[0][2], m[1][2], m[1][3], m[2][3]],
        ];
        for child in children {
            builder.elements.push(child);
            builder.generation.push(gen);
            builder.parents.push(t);
        }
    }
    builder.finish()
}

/// Local index of the longest face (edge) of a triangle; ties go to the
/// lower global side index so neighbours agree.
fn reference_face(mesh: &Triangulation, t: usize) -> usize {
    let sides = mesh.element_sides(t);
    let g = mesh.geometry(t);
    let mut best = 0;
    for i in 1..3 {
        let (li, lb) = (g.face_area[i], g.face_area[best]);
        let tol = 1e-12 * lb;
        if li > lb + tol || ((li - lb).abs() <= tol && sides[i] < sides[best]) {
            best = i;
        }
    }
    best
}

struct Builder<'a> {
    parent: &'a Triangulation,
    vertices: Vec<Point>,
    /// Parent vertices spanning each new vertex (equal for old vertices).
    origin: Vec<[usize; 2]>,
    midpoints: HashMap<[usize; 2], usize>,
    elements: Vec<[usize; 4]>,
    generation: Vec<u32>,
    parents: Vec<usize>,
    current: usize,
}

impl<'a> Builder<'a> {
    fn new(parent: &'a Triangulation) -> Self {
        let n = parent.n_vertices();
        Self {
            parent,
            vertices: parent.vertices().to_vec(),
            origin: (0..n).map(|v| [v, v]).collect(),
            midpoints: HashMap::new(),
            elements: Vec::new(),
            generation: Vec::new(),
            parents: Vec::new(),
            current: 0,
        }
    }

    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = if a < b { [a, b] } else { [b, a] };
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        self.vertices
            .push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.5 * (pa[2] + pb[2])]);
        self.origin.push(key);
        let m = self.vertices.len() - 1;
        self.midpoints.insert(key, m);
        m
    }

    fn push(&mut self, tri: [usize; 3], generation: u32) {
        self.elements.push([tri[0], tri[1], tri[2], 0]);
        self.generation.push(generation);
        self.parents.push(self.current);
    }

    fn finish(self) -> Result<(Triangulation, Vec<usize>)> {
        let parent = self.parent;
        let dim = parent.dim();
        let mut parent_tags: HashMap<[usize; 3], BoundaryTag> = HashMap::new();
        for s in 0..parent.n_sides() {
            if parent.is_boundary_side(s) {
                let mut key = [0; 3];
                key[..dim].copy_from_slice(parent.side_vertices(s));
                parent_tags.insert(key, parent.boundary_tag(s));
            }
        }
        let origin = self.origin;
        let parents = self.parents;
        let mesh = Triangulation::build(dim, self.vertices, self.elements, self.generation, |mesh, s| {
            let mut span: Vec<usize> = mesh
                .side_vertices(s)
                .iter()
                .flat_map(|&v| origin[v])
                .collect();
            span.sort_unstable();
            span.dedup();
            let mut key = [0; 3];
            if span.len() == dim {
                key[..dim].copy_from_slice(&span);
                if let Some(&tag) = parent_tags.get(&key) {
                    return tag;
                }
            }
            // a boundary side always lies in a parent boundary side; fall
            // back to the tag of any parent boundary side containing it
            parent_tags
                .iter()
                .find(|(k, _)| span.iter().all(|v| k[..dim].contains(v)))
                .map(|(_, &t)| t)
                .unwrap_or(BoundaryTag::Neumann)
        })?;
        Ok((mesh, parents))
    }
}
