//! Uniform parametric meshes on multi-patch surfaces.
//!
//! Every patch is split into `2^m × 2^m` cells. Cell corners are numbered
//! globally so that coincident corners on different patches share an id;
//! the number of shared corners decides the quadrature regime of a pair.

use crate::geometry::SurfaceGeometry;

/// Minimal union-find with path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root for reproducible numbering
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Patch-local grid index of the `i`-th point along `edge` on an `n × n`
/// grid (`i` runs along the edge parameter).
pub(crate) fn edge_grid_index(edge: usize, i: usize, n: usize) -> (usize, usize) {
    match edge {
        0 => (i, 0),
        1 => (n - 1, i),
        2 => (i, n - 1),
        3 => (0, i),
        _ => unreachable!(),
    }
}

/// Glues `n × n` per-patch grids along all interfaces and returns the
/// renumbered global ids (first appearance order) and their count.
pub(crate) fn glue_grids(geometry: &SurfaceGeometry, n: usize) -> (Vec<usize>, usize) {
    let np = geometry.num_patches();
    let mut uf = UnionFind::new(np * n * n);
    let flat = |patch: usize, (a, b): (usize, usize)| patch * n * n + a * n + b;
    for f in geometry.interfaces() {
        for i in 0..n {
            let j = if f.reversed { n - 1 - i } else { i };
            uf.union(
                flat(f.a.0, edge_grid_index(f.a.1, i, n)),
                flat(f.b.0, edge_grid_index(f.b.1, j, n)),
            );
        }
    }
    let mut ids = vec![usize::MAX; np * n * n];
    let mut root_id = vec![usize::MAX; np * n * n];
    let mut count = 0;
    for (k, id) in ids.iter_mut().enumerate() {
        let r = uf.find(k);
        if root_id[r] == usize::MAX {
            root_id[r] = count;
            count += 1;
        }
        *id = root_id[r];
    }
    (ids, count)
}

/// One parametric cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub patch: usize,
    pub c1: usize,
    pub c2: usize,
    /// global corner ids, counterclockwise from the cell origin
    pub corners: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    level: u32,
    cells: usize,
    elements: Vec<Element>,
    num_nodes: usize,
}

impl Mesh {
    pub fn new(geometry: &SurfaceGeometry, level: u32) -> Self {
        let cells = 1usize << level;
        let n = cells + 1;
        let (ids, num_nodes) = glue_grids(geometry, n);
        let mut elements = Vec::with_capacity(geometry.num_patches() * cells * cells);
        for patch in 0..geometry.num_patches() {
            let node = |a: usize, b: usize| ids[patch * n * n + a * n + b];
            for c1 in 0..cells {
                for c2 in 0..cells {
                    elements.push(Element {
                        patch,
                        c1,
                        c2,
                        corners: [node(c1, c2), node(c1 + 1, c2), node(c1 + 1, c2 + 1), node(c1, c2 + 1)],
                    });
                }
            }
        }
        Self {
            level,
            cells,
            elements,
            num_nodes,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per patch direction, `2^m`.
    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    /// Parametric cell width `2^{-m}`.
    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_index(&self, patch: usize, c1: usize, c2: usize) -> usize {
        (patch * self.cells + c1) * self.cells + c2
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Patch parameter of cell-local coordinates.
    pub fn to_patch(&self, e: &Element, s: [f64; 2]) -> (f64, f64) {
        let h = self.h();
        ((e.c1 as f64 + s[0]) * h, (e.c2 as f64 + s[1]) * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{builtin_sphere, builtin_torus};

    #[test]
    fn node_counts_match_euler_characteristic() {
        // torus: V - E + F = 0, sphere: 2
        for (geo, chi) in [(builtin_torus(), 0i64), (builtin_sphere(), 2)] {
            for m in 0..3 {
                let mesh = Mesh::new(&geo, m);
                let f = mesh.num_elements() as i64;
                let e = 2 * f; // every quad has 4 edges, each shared by 2
                assert_eq!(mesh.num_nodes() as i64 - e + f, chi);
            }
        }
    }

    #[test]
    fn glued_corners_coincide() {
        let geo = builtin_sphere();
        let mesh = Mesh::new(&geo, 1);
        let mut pos = vec![None; mesh.num_nodes()];
        for e in mesh.elements() {
            for (k, &(a, b)) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].iter().enumerate() {
                let (x, y) = mesh.to_patch(e, [a, b]);
                let p = geo.eval(e.patch, x, y).point;
                match pos[e.corners[k]] {
                    None => pos[e.corners[k]] = Some(p),
                    Some(q) => assert!((p - q).norm() < 1e-12),
                }
            }
        }
    }
}
