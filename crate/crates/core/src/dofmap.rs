//! Global numbering of the spline spaces `S²_{p,m}(Γ)` (patchwise,
//! discontinuous across interfaces) and `S⁰_{p,m}(Γ)` (globally continuous).

use crate::geometry::SurfaceGeometry;
use crate::mesh::{edge_grid_index, Element, Mesh, UnionFind};
use crate::spline::KnotVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DofError {
    #[error("continuous spaces need degree at least 1")]
    ContinuousDegreeZero,
    #[error("degree {0} exceeds the supported maximum of 15")]
    DegreeTooHigh(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Continuity {
    Discontinuous,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    continuity: Continuity,
    degree: usize,
    mesh: Mesh,
    knots: KnotVector,
    num_patches: usize,
    /// `local_to_global[patch * k² + i1 * k + i2]`
    local_to_global: Vec<usize>,
    num_dofs: usize,
}

impl DofMap {
    pub fn new(
        geometry: &SurfaceGeometry,
        degree: usize,
        level: u32,
        continuity: Continuity,
    ) -> Result<Self, DofError> {
        if degree > 15 {
            return Err(DofError::DegreeTooHigh(degree));
        }
        let mesh = Mesh::new(geometry, level);
        let knots = KnotVector::open_uniform(degree, level);
        let k = knots.num_basis();
        let np = geometry.num_patches();
        let (local_to_global, num_dofs) = match continuity {
            Continuity::Discontinuous => ((0..np * k * k).collect(), np * k * k),
            Continuity::Continuous => {
                if degree == 0 {
                    return Err(DofError::ContinuousDegreeZero);
                }
                glue(geometry, k)
            }
        };
        Ok(Self {
            continuity,
            degree,
            mesh,
            knots,
            num_patches: np,
            local_to_global,
            num_dofs,
        })
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn level(&self) -> u32 {
        self.mesh.level()
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn num_patches(&self) -> usize {
        self.num_patches
    }

    /// Basis functions per patch direction, `2^m + p`.
    pub fn basis_per_side(&self) -> usize {
        self.knots.num_basis()
    }

    /// Local basis functions per element, `(p + 1)²`.
    pub fn local_size(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    pub fn global(&self, patch: usize, i1: usize, i2: usize) -> usize {
        let k = self.basis_per_side();
        self.local_to_global[(patch * k + i1) * k + i2]
    }

    /// Global indices of the local basis of `e`, ordered `j1 * (p+1) + j2`.
    pub fn element_dofs(&self, e: &Element, out: &mut Vec<usize>) {
        out.clear();
        let p = self.degree;
        for j1 in 0..=p {
            for j2 in 0..=p {
                out.push(self.global(e.patch, e.c1 + j1, e.c2 + j2));
            }
        }
    }

    /// Values and parametric gradients (with respect to the patch
    /// parameter) of the local basis at cell-local coordinates `s`.
    pub fn element_basis(&self, e: &Element, s: [f64; 2], vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let p = self.degree;
        let (x, y) = self.mesh.to_patch(e, s);
        let mut b1 = [0.0; 16];
        let mut d1 = [0.0; 16];
        let mut b2 = [0.0; 16];
        let mut d2 = [0.0; 16];
        self.knots.eval_in_span(e.c1 + p, x, &mut b1, &mut d1);
        self.knots.eval_in_span(e.c2 + p, y, &mut b2, &mut d2);
        for j1 in 0..=p {
            for j2 in 0..=p {
                let a = j1 * (p + 1) + j2;
                vals[a] = b1[j1] * b2[j2];
                grads[a] = [d1[j1] * b2[j2], b1[j1] * d2[j2]];
            }
        }
    }
}

fn glue(geometry: &SurfaceGeometry, k: usize) -> (Vec<usize>, usize) {
    // the open basis restricted to an edge is the univariate basis along it
    let np = geometry.num_patches();
    let mut uf = UnionFind::new(np * k * k);
    let flat = |patch: usize, (a, b): (usize, usize)| (patch * k + a) * k + b;
    for f in geometry.interfaces() {
        for i in 0..k {
            let j = if f.reversed { k - 1 - i } else { i };
            uf.union(
                flat(f.a.0, edge_grid_index(f.a.1, i, k)),
                flat(f.b.0, edge_grid_index(f.b.1, j, k)),
            );
        }
    }
    let mut root_id = vec![usize::MAX; np * k * k];
    let mut ids = vec![0; np * k * k];
    let mut count = 0;
    for (idx, id) in ids.iter_mut().enumerate() {
        let r = uf.find(idx);
        if root_id[r] == usize::MAX {
            root_id[r] = count;
            count += 1;
        }
        *id = root_id[r];
    }
    (ids, count)
}
