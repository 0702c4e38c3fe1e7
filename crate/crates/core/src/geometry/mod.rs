//! Multi-patch NURBS boundary representations.
//!
//! A closed surface `Γ` is the union of patches `F_j([0,1]²)`. Each patch
//! edge must coincide, as a parametrized curve and possibly reversed, with
//! exactly one edge of another patch. Patch parametrizations must induce
//! outward normals through `∂₁F × ∂₂F`.

mod builtin;
mod conformity;
mod io;

pub use builtin::{builtin_sphere, builtin_torus, flat_square, torus_grid};
pub use conformity::{ConformityReport, Interface, InterfaceCheck};
pub use io::{load_geometry, parse_geometry, parse_patches, save_geometry, write_geometry, write_patches};

use crate::spline::{KnotVector, SplineError};
use nalgebra::{Matrix2, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("patch {patch}: control net has {got} points, knot vectors need {expected}")]
    ControlNetMismatch {
        patch: usize,
        expected: usize,
        got: usize,
    },
    #[error("patch {patch}: nonpositive weight {weight}")]
    NonPositiveWeight { patch: usize, weight: f64 },
    #[error("surface not closed: {0} unmatched patch edges")]
    SurfaceNotClosed(usize),
    #[error("non-conforming interface between patches {0} and {1} (mismatch {2:e})")]
    NonConforming(usize, usize, f64),
    #[error("patch {0} is inward oriented")]
    InwardOrientation(usize),
    #[error("patch {0} is degenerate (vanishing surface measure)")]
    Degenerate(usize),
    #[error("invalid knot vector: {0}")]
    Knots(#[from] SplineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Point, tangents, unit normal and surface measure at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryData {
    pub point: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    pub normal: Vec3,
    /// `‖∂₁F × ∂₂F‖`
    pub measure: f64,
}

/// A rational tensor-product patch `F: [0,1]² → ℝ³`.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsPatch {
    knots1: KnotVector,
    knots2: KnotVector,
    /// row-major, `j2` fastest
    control: Vec<Vec3>,
    weights: Vec<f64>,
}

impl NurbsPatch {
    /// Builds a patch; `patch` is only used to label errors.
    pub fn new(
        knots1: KnotVector,
        knots2: KnotVector,
        control: Vec<Vec3>,
        weights: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        Self::new_labeled(0, knots1, knots2, control, weights)
    }

    pub(crate) fn new_labeled(
        patch: usize,
        knots1: KnotVector,
        knots2: KnotVector,
        control: Vec<Vec3>,
        weights: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let expected = knots1.num_basis() * knots2.num_basis();
        if control.len() != expected || weights.len() != expected {
            return Err(GeometryError::ControlNetMismatch {
                patch,
                expected,
                got: control.len().min(weights.len()),
            });
        }
        if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(GeometryError::NonPositiveWeight { patch, weight: w });
        }
        Ok(Self {
            knots1,
            knots2,
            control,
            weights,
        })
    }

    pub fn knots1(&self) -> &KnotVector {
        &self.knots1
    }

    pub fn knots2(&self) -> &KnotVector {
        &self.knots2
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.knots1.degree(), self.knots2.degree())
    }

    pub fn control(&self) -> &[Vec3] {
        &self.control
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn translated(&self, shift: Vec3) -> Self {
        let mut out = self.clone();
        out.control.iter_mut().for_each(|c| *c += shift);
        out
    }

    pub fn transformed(&self, rot: &nalgebra::Matrix3<f64>) -> Self {
        let mut out = self.clone();
        out.control.iter_mut().for_each(|c| *c = rot * *c);
        out
    }

    /// Point only.
    pub fn point(&self, x: f64, y: f64) -> Vec3 {
        self.eval(x, y).point
    }

    /// Exact rational evaluation with first derivatives (quotient rule).
    /// Arguments are clamped to `[0, 1]`.
    pub fn eval(&self, x: f64, y: f64) -> GeometryData {
        let x = x.clamp(0.0, 1.0);
        let y = y.clamp(0.0, 1.0);
        let (p1, p2) = self.degrees();
        let k2 = self.knots2.num_basis();
        let s1 = self.knots1.find_span(x);
        let s2 = self.knots2.find_span(y);
        let mut b1 = [0.0; 16];
        let mut db1 = [0.0; 16];
        let mut b2 = [0.0; 16];
        let mut db2 = [0.0; 16];
        self.knots1.eval_in_span(s1, x, &mut b1, &mut db1);
        self.knots2.eval_in_span(s2, y, &mut b2, &mut db2);
        let (f1, f2) = (s1 - p1, s2 - p2);
        let mut a = Vec3::zeros();
        let mut a1 = Vec3::zeros();
        let mut a2 = Vec3::zeros();
        let (mut w, mut w1, mut w2) = (0.0, 0.0, 0.0);
        for i in 0..=p1 {
            for j in 0..=p2 {
                let idx = (f1 + i) * k2 + f2 + j;
                let wt = self.weights[idx];
                let c = self.control[idx];
                let n = b1[i] * b2[j] * wt;
                let n1 = db1[i] * b2[j] * wt;
                let n2 = b1[i] * db2[j] * wt;
                w += n;
                w1 += n1;
                w2 += n2;
                a += c * n;
                a1 += c * n1;
                a2 += c * n2;
            }
        }
        let point = a / w;
        let d1 = (a1 - point * w1) / w;
        let d2 = (a2 - point * w2) / w;
        let cross = d1.cross(&d2);
        let measure = cross.norm();
        let normal = if measure > 0.0 { cross / measure } else { cross };
        GeometryData {
            point,
            d1,
            d2,
            normal,
            measure,
        }
    }
}

/// `K[k,l] = ⟨∂_k F_j(x̂), ∂_l F_i(ŷ)⟩`.
pub fn first_fundamental_cross(gx: &GeometryData, gy: &GeometryData) -> Matrix2<f64> {
    Matrix2::new(
        gx.d1.dot(&gy.d1),
        gx.d1.dot(&gy.d2),
        gx.d2.dot(&gy.d1),
        gx.d2.dot(&gy.d2),
    )
}

/// Patch edges: 0 is `y = 0`, 1 is `x = 1`, 2 is `y = 1`, 3 is `x = 0`.
/// Each edge is parametrized by `t ∈ [0,1]` along the increasing free
/// coordinate.
pub fn edge_param(edge: usize, t: f64) -> (f64, f64) {
    match edge {
        0 => (t, 0.0),
        1 => (1.0, t),
        2 => (t, 1.0),
        3 => (0.0, t),
        _ => panic!("edge index {edge} out of range"),
    }
}

/// A validated closed multi-patch surface.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    patches: Vec<NurbsPatch>,
    interfaces: Vec<Interface>,
    /// `edge_partner[4 * patch + edge] = (patch, edge, reversed)`
    edge_partner: Vec<(usize, usize, bool)>,
}

impl SurfaceGeometry {
    /// Validates closedness, conformity, orientation and nondegeneracy.
    pub fn new(patches: Vec<NurbsPatch>) -> Result<Self, GeometryError> {
        for (j, patch) in patches.iter().enumerate() {
            conformity::check_nondegenerate(j, patch)?;
        }
        let report = ConformityReport::compute(&patches);
        if report.unmatched_edges > 0 {
            return Err(GeometryError::SurfaceNotClosed(report.unmatched_edges));
        }
        if let Some(bad) = report.interfaces.iter().find(|c| !c.passes()) {
            return Err(GeometryError::NonConforming(
                bad.interface.a.0,
                bad.interface.b.0,
                bad.mismatch,
            ));
        }
        let interfaces: Vec<Interface> = report.interfaces.iter().map(|c| c.interface).collect();
        conformity::check_orientation(&patches, &interfaces)?;
        let mut edge_partner = vec![(usize::MAX, 0, false); 4 * patches.len()];
        for f in &interfaces {
            edge_partner[4 * f.a.0 + f.a.1] = (f.b.0, f.b.1, f.reversed);
            edge_partner[4 * f.b.0 + f.b.1] = (f.a.0, f.a.1, f.reversed);
        }
        Ok(Self {
            patches,
            interfaces,
            edge_partner,
        })
    }

    pub fn patches(&self) -> &[NurbsPatch] {
        &self.patches
    }

    pub fn num_patches(&self) -> usize {
        self.patches.len()
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    /// The edge glued to `(patch, edge)` and whether its parameter runs
    /// in the opposite direction.
    pub fn edge_partner(&self, patch: usize, edge: usize) -> (usize, usize, bool) {
        self.edge_partner[4 * patch + edge]
    }

    pub fn eval(&self, patch: usize, x: f64, y: f64) -> GeometryData {
        self.patches[patch].eval(x, y)
    }

    /// Axis-aligned bounding box of the control nets (contains `Γ`).
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for c in self.patches.iter().flat_map(|p| p.control.iter()) {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Surface area by tensor Gauss quadrature on `cells²` cells per patch.
    pub fn area(&self, cells: usize, order: usize) -> f64 {
        let rule = crate::quadrature::gauss_rule(order).expect("valid order");
        let h = 1.0 / cells as f64;
        let mut total = 0.0;
        for patch in &self.patches {
            for c1 in 0..cells {
                for c2 in 0..cells {
                    for (x, wx) in rule.iter() {
                        for (y, wy) in rule.iter() {
                            let g = patch.eval((c1 as f64 + x) * h, (c2 as f64 + y) * h);
                            total += wx * wy * h * h * g.measure;
                        }
                    }
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_patch_geometry() {
        let patch = flat_square();
        for &(x, y) in &[(0.1, 0.2), (0.5, 0.5), (1.0, 0.0)] {
            let g = patch.eval(x, y);
            assert!((g.point - Vec3::new(x, y, 0.0)).norm() < 1e-15);
            assert!((g.measure - 1.0).abs() < 1e-15);
            assert!((g.normal - Vec3::z()).norm() < 1e-15);
            let k = first_fundamental_cross(&g, &patch.eval(0.3, 0.9));
            assert!((k - Matrix2::identity()).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_invalid_patches() {
        let kv = KnotVector::open_uniform(1, 0);
        let ctrl = vec![Vec3::zeros(); 4];
        let err = NurbsPatch::new(kv.clone(), kv.clone(), ctrl.clone(), vec![1.0, 0.0, 1.0, 1.0])
            .unwrap_err();
        assert!(err.to_string().contains("nonpositive weight"));
        let err = NurbsPatch::new(kv.clone(), kv, ctrl[..3].to_vec(), vec![1.0; 3]).unwrap_err();
        assert!(matches!(err, GeometryError::ControlNetMismatch { .. }));
    }

    #[test]
    fn torus_first_fundamental_form_is_metric() {
        let torus = builtin_torus();
        for (j, &(x, y)) in [(0.2, 0.7), (0.9, 0.1), (0.5, 0.5)].iter().enumerate() {
            let g = torus.eval(j * 5, x, y);
            let k = first_fundamental_cross(&g, &g);
            assert!((k[(0, 1)] - k[(1, 0)]).abs() < 1e-14);
            assert!((k.determinant() - g.measure * g.measure).abs() < 1e-10);
        }
    }
}
