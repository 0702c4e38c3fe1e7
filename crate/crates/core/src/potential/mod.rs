//! Layer potentials and far-field patterns of spline densities.
//!
//! Densities are integrated with tensor Gauss rules per element, so the
//! potentials are accurate away from the surface only; points within one
//! element diameter of `Γ` are flagged.

mod clustered;

pub use clustered::{ClusterParams, ClusteredPotential};

use crate::dofmap::DofMap;
use crate::geometry::{SurfaceGeometry, Vec3};
use crate::kernels::{green_r, C64, FOUR_PI_INV};
use crate::quadrature::gauss_rule;
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    /// `∫ G(x, y) ρ(y) ds_y`
    SingleLayer,
    /// `∫ ∂G/∂n_y (x, y) μ(y) ds_y`
    DoubleLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Direct,
    Clustered,
}

/// Quadrature points of a density: positions, normals and
/// `weight · surface measure · density value`.
#[derive(Debug, Clone)]
pub struct SourceSet {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub weights: Vec<C64>,
}

impl SourceSet {
    /// Samples the density `Σ c_i φ_i` at `q × q` Gauss points per element.
    pub fn new(geometry: &SurfaceGeometry, dofs: &DofMap, coeffs: &[C64], q: usize) -> Self {
        assert_eq!(coeffs.len(), dofs.num_dofs(), "coefficient vector length");
        let rule = gauss_rule(q).expect("valid order");
        let mesh = dofs.mesh();
        let nb = dofs.local_size();
        let h2 = mesh.h() * mesh.h();
        let n = mesh.num_elements() * q * q;
        let mut out = Self {
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        };
        let mut idx = Vec::new();
        let mut vals = vec![0.0; nb];
        let mut grads = vec![[0.0; 2]; nb];
        for e in mesh.elements() {
            dofs.element_dofs(e, &mut idx);
            for (s1, w1) in rule.iter() {
                for (s2, w2) in rule.iter() {
                    let (x, y) = mesh.to_patch(e, [s1, s2]);
                    let g = geometry.eval(e.patch, x, y);
                    dofs.element_basis(e, [s1, s2], &mut vals, &mut grads);
                    let rho: C64 = idx.iter().zip(&vals).map(|(&i, &v)| coeffs[i] * v).sum();
                    out.points.push(g.point);
                    out.normals.push(g.normal);
                    out.weights.push(rho * (w1 * w2 * h2 * g.measure));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Kernel of the layer potential for a single source point.
#[inline]
pub(crate) fn layer_kernel(kind: LayerKind, kappa: f64, x: &Vec3, y: &Vec3, ny: &Vec3) -> C64 {
    let d = x - y;
    let r = d.norm();
    let g = green_r(kappa, r);
    match kind {
        LayerKind::SingleLayer => g,
        // (iκr − 1)/r² (y − x)·n_y G
        LayerKind::DoubleLayer => g * C64::new(-1.0, kappa * r) * (-d.dot(ny) / (r * r)),
    }
}

/// Potential at `targets` by summing over all source points.
pub fn potential_direct(kind: LayerKind, kappa: f64, sources: &SourceSet, targets: &[Vec3]) -> Vec<C64> {
    targets
        .par_iter()
        .map(|x| {
            let mut acc = C64::new(0.0, 0.0);
            for ((y, ny), w) in sources.points.iter().zip(&sources.normals).zip(&sources.weights) {
                acc += layer_kernel(kind, kappa, x, y, ny) * w;
            }
            acc
        })
        .collect()
}

/// Far-field pattern `u_∞(x̂)` of the potential, with
/// `potential(r x̂) ≈ e^{iκr}/r · u_∞(x̂)`.
pub fn far_field(kind: LayerKind, kappa: f64, sources: &SourceSet, directions: &[Vec3]) -> Vec<C64> {
    directions
        .par_iter()
        .map(|xhat| {
            let mut acc = C64::new(0.0, 0.0);
            for ((y, ny), w) in sources.points.iter().zip(&sources.normals).zip(&sources.weights) {
                let e = C64::from_polar(FOUR_PI_INV, -kappa * xhat.dot(y));
                acc += match kind {
                    LayerKind::SingleLayer => e * w,
                    LayerKind::DoubleLayer => e * C64::new(0.0, -kappa * xhat.dot(ny)) * w,
                };
            }
            acc
        })
        .collect()
}

/// Flags targets closer to `Γ` than one element diameter (measured to the
/// nearest element centre, minus its radius).
pub fn near_surface_flags(geometry: &SurfaceGeometry, dofs: &DofMap, targets: &[Vec3]) -> Vec<bool> {
    let mesh = dofs.mesh();
    let mut centers = Vec::with_capacity(mesh.num_elements());
    let mut diam: f64 = 0.0;
    for e in mesh.elements() {
        let at = |s: [f64; 2]| {
            let (x, y) = mesh.to_patch(e, s);
            geometry.eval(e.patch, x, y).point
        };
        let c = at([0.5, 0.5]);
        let r = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
            .iter()
            .map(|&s| (at(s) - c).norm())
            .fold(0.0, f64::max);
        diam = diam.max(2.0 * r);
        centers.push((c, r));
    }
    // hash grid with cell size ≥ search radius
    let cell = (2.0 * diam).max(1e-12);
    let key = |p: &Vec3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, (c, _)) in centers.iter().enumerate() {
        grid.entry(key(c)).or_default().push(i);
    }
    targets
        .iter()
        .map(|x| {
            let (a, b, c) = key(x);
            for da in -1..=1 {
                for db in -1..=1 {
                    for dc in -1..=1 {
                        if let Some(list) = grid.get(&(a + da, b + db, c + dc)) {
                            for &i in list {
                                let (ctr, r) = centers[i];
                                if (x - ctr).norm() - r < diam {
                                    return true;
                                }
                            }
                        }
                    }
                }
            }
            false
        })
        .collect()
}

/// `n` nearly uniform points on the sphere of radius `r` about the origin
/// (golden-angle spiral).
pub fn fibonacci_sphere(n: usize, r: f64) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Vec3::new(s * t.cos(), s * t.sin(), z) * r
        })
        .collect()
}

/// Tensor grid in cylindrical coordinates around the z axis: `nr` radii in
/// `(0, radius]`, `nt` angles, `nz` heights spanning `[z0, z1]`.
pub fn cylinder_grid(radius: f64, z0: f64, z1: f64, nr: usize, nt: usize, nz: usize) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(nr * nt * nz);
    for k in 0..nz {
        let z = if nz == 1 { 0.5 * (z0 + z1) } else { z0 + (z1 - z0) * k as f64 / (nz - 1) as f64 };
        for i in 1..=nr {
            let r = radius * i as f64 / nr as f64;
            for j in 0..nt {
                let t = 2.0 * std::f64::consts::PI * j as f64 / nt as f64;
                out.push(Vec3::new(r * t.cos(), r * t.sin(), z));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofmap::Continuity;
    use crate::geometry::{builtin_sphere, builtin_torus};

    #[test]
    fn zero_density_gives_zero_field() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, Continuity::Discontinuous).unwrap();
        let src = SourceSet::new(&torus, &dofs, &vec![C64::new(0.0, 0.0); dofs.num_dofs()], 3);
        let u = potential_direct(LayerKind::DoubleLayer, 2.0, &src, &[Vec3::new(5.0, 0.0, 0.0)]);
        assert_eq!(u[0], C64::new(0.0, 0.0));
    }

    /// Gauss' law: the double layer of a constant density is −1 inside and
    /// 0 outside (normals point outward).
    #[test]
    fn double_layer_of_constant() {
        let sphere = builtin_sphere();
        let dofs = DofMap::new(&sphere, 1, 2, Continuity::Continuous).unwrap();
        let src = SourceSet::new(&sphere, &dofs, &vec![C64::new(1.0, 0.0); dofs.num_dofs()], 6);
        let u = potential_direct(LayerKind::DoubleLayer, 1e-12, &src, &[Vec3::zeros(), Vec3::new(0.0, 3.0, 1.0)]);
        assert!((u[0] + 1.0).norm() < 1e-10, "{}", u[0]);
        assert!(u[1].norm() < 1e-10);
    }

    #[test]
    fn far_field_is_the_limit_of_the_potential() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, Continuity::Discontinuous).unwrap();
        let coeffs: Vec<C64> = (0..dofs.num_dofs()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let src = SourceSet::new(&torus, &dofs, &coeffs, 4);
        let kappa = 1.5;
        let xhat = Vec3::new(0.2, 0.5, -0.7).normalize();
        for kind in [LayerKind::SingleLayer, LayerKind::DoubleLayer] {
            let ff = far_field(kind, kappa, &src, &[xhat])[0];
            let r = 1e4 * torus.diameter();
            let u = potential_direct(kind, kappa, &src, &[xhat * r])[0] * C64::from_polar(r, -kappa * r);
            assert!((u - ff).norm() < 5e-3 * ff.norm(), "{kind:?}: {u} vs {ff}");
        }
    }

    #[test]
    fn flags_points_near_the_surface() {
        let sphere = builtin_sphere();
        let dofs = DofMap::new(&sphere, 1, 2, Continuity::Discontinuous).unwrap();
        let flags = near_surface_flags(&sphere, &dofs, &[Vec3::new(0.0, 0.0, 1.01), Vec3::new(0.0, 0.0, 5.0)]);
        assert_eq!(flags, vec![true, false]);
    }
}
