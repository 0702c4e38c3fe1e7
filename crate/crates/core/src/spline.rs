//! Univariate and tensor-product B-spline spaces on `[0, 1]`.
//!
//! Knot vectors are `p`-open: the first and last `p + 1` knots sit at 0 and 1.
//! Basis functions are right-continuous at interior knots, and the last basis
//! function evaluates to 1 at `x = 1`, so the basis is a partition of unity on
//! the closed interval.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("knot vector is not non-decreasing")]
    NotSorted,
    #[error("knot vector is not {0}-open on [0, 1]")]
    NotOpen(usize),
    #[error("knot vector of degree {degree} needs at least {needed} knots, got {got}")]
    TooShort {
        degree: usize,
        needed: usize,
        got: usize,
    },
    #[error("evaluation point {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("degree-0 space has no derivative space")]
    NoDerivativeSpace,
}

/// A `p`-open knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self, SplineError> {
        let needed = 2 * (degree + 1);
        if knots.len() < needed {
            return Err(SplineError::TooShort {
                degree,
                needed,
                got: knots.len(),
            });
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(SplineError::NotSorted);
        }
        let n = knots.len();
        let open_left = knots[..=degree].iter().all(|&k| k == 0.0);
        let open_right = knots[n - degree - 1..].iter().all(|&k| k == 1.0);
        if !open_left || !open_right {
            return Err(SplineError::NotOpen(degree));
        }
        Ok(Self { knots, degree })
    }

    /// The uniformly refined knot vector of level `m`: `p + 1` zeros,
    /// the interior knots `i / 2^m`, and `p + 1` ones.
    pub fn open_uniform(degree: usize, level: u32) -> Self {
        let cells = 1usize << level;
        let mut knots = Vec::with_capacity(cells + 2 * degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree + 1));
        knots.extend((1..cells).map(|i| i as f64 / cells as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { knots, degree }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions `k = #knots - p - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values, i.e. the element boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Maximal distance between neighbouring knots.
    pub fn mesh_size(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Largest ratio between consecutive nonzero knot gaps (either order).
    pub fn quasi_uniformity(&self) -> f64 {
        let gaps: Vec<f64> = self
            .knots
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|&g| g > 0.0)
            .collect();
        gaps.windows(2)
            .map(|g| (g[0] / g[1]).max(g[1] / g[0]))
            .fold(1.0, f64::max)
    }

    /// Index `s` of the knot span `[ξ_s, ξ_{s+1})` containing `x`, with the
    /// last nonempty span closed at 1.
    pub fn find_span(&self, x: f64) -> usize {
        let p = self.degree;
        let k = self.num_basis();
        if x >= self.knots[k] {
            return k - 1;
        }
        // knots[p] = 0 <= x < knots[k] = 1
        let (mut lo, mut hi) = (p, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if x < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    fn check_domain(x: f64) -> Result<(), SplineError> {
        if (0.0..=1.0).contains(&x) {
            Ok(())
        } else {
            Err(SplineError::OutOfDomain(x))
        }
    }

    /// The `p + 1` basis values (`deriv = 0`) or first derivatives
    /// (`deriv = 1`) that may be nonzero at `x`, and the index of the first.
    pub fn eval_basis(&self, x: f64, deriv: usize) -> Result<(usize, Vec<f64>), SplineError> {
        Self::check_domain(x)?;
        let span = self.find_span(x);
        let mut vals = vec![0.0; self.degree + 1];
        let mut ders = vec![0.0; self.degree + 1];
        self.eval_in_span(span, x, &mut vals, &mut ders);
        let first = span - self.degree;
        Ok(if deriv == 0 { (first, vals) } else { (first, ders) })
    }

    /// Values and first derivatives of the `p + 1` functions supported on
    /// span `span`, evaluated at `x` (which need not lie inside the span;
    /// callers integrating over an element pass the element's span).
    pub fn eval_in_span(&self, span: usize, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        let p = self.degree;
        let t = &self.knots;
        debug_assert!(vals.len() > p && ders.len() > p);
        vals[0] = 1.0;
        ders[..=p].iter_mut().for_each(|d| *d = 0.0);
        if p == 0 {
            return;
        }
        let mut left = [0.0f64; 16];
        let mut right = [0.0f64; 16];
        assert!(p < 16, "degree {p} unsupported");
        // triangular scheme; after degree p-1 we keep a copy for derivatives
        let mut lower = [0.0f64; 16];
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            if j == p {
                lower[..p].copy_from_slice(&vals[..p]);
            }
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { vals[r] / denom } else { 0.0 };
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        // derivative of degree-p functions from the degree-(p-1) values
        let pf = p as f64;
        for r in 0..=p {
            let i = span - p + r;
            let mut d = 0.0;
            if r > 0 {
                let denom = t[i + p] - t[i];
                if denom != 0.0 {
                    d += pf * lower[r - 1] / denom;
                }
            }
            if r < p {
                let denom = t[i + p + 1] - t[i + 1];
                if denom != 0.0 {
                    d -= pf * lower[r] / denom;
                }
            }
            ders[r] = d;
        }
    }

    /// `Ξ'`: the knot vector without its first and last knot (degree `p - 1`).
    pub fn truncated(&self) -> Result<Self, SplineError> {
        if self.degree == 0 {
            return Err(SplineError::NoDerivativeSpace);
        }
        let n = self.knots.len();
        Ok(Self {
            knots: self.knots[1..n - 1].to_vec(),
            degree: self.degree - 1,
        })
    }

    /// Coefficients of `f'` in `S_{p-1}(Ξ')` for `f = Σ c_j b_j^p`.
    pub fn derivative_coefficients(&self, coeffs: &[f64]) -> Result<Vec<f64>, SplineError> {
        if self.degree == 0 {
            return Err(SplineError::NoDerivativeSpace);
        }
        let p = self.degree;
        let t = &self.knots;
        assert_eq!(coeffs.len(), self.num_basis());
        Ok((0..self.num_basis() - 1)
            .map(|j| {
                let denom = t[j + p + 1] - t[j + 1];
                if denom == 0.0 {
                    0.0
                } else {
                    p as f64 * (coeffs[j + 1] - coeffs[j]) / denom
                }
            })
            .collect())
    }
}

/// Tensor product space `S_{p1,p2}(Ξ1, Ξ2)`; functions are indexed
/// row-major, `index = j1 * k2 + j2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSplineSpace {
    pub u: KnotVector,
    pub v: KnotVector,
}

impl TensorSplineSpace {
    pub fn new(u: KnotVector, v: KnotVector) -> Self {
        Self { u, v }
    }

    /// `S_{p,p}(Ξ_{p,m}, Ξ_{p,m})`.
    pub fn uniform(degree: usize, level: u32) -> Self {
        let kv = KnotVector::open_uniform(degree, level);
        Self { u: kv.clone(), v: kv }
    }

    pub fn dim(&self) -> usize {
        self.u.num_basis() * self.v.num_basis()
    }

    /// Nonzero tensor basis values at `(x, y)` as `(global index, value)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<Vec<(usize, f64)>, SplineError> {
        let (fu, bu) = self.u.eval_basis(x, 0)?;
        let (fv, bv) = self.v.eval_basis(y, 0)?;
        let k2 = self.v.num_basis();
        let mut out = Vec::with_capacity(bu.len() * bv.len());
        for (a, &va) in bu.iter().enumerate() {
            for (b, &vb) in bv.iter().enumerate() {
                out.push(((fu + a) * k2 + fv + b, va * vb));
            }
        }
        Ok(out)
    }

    /// Evaluate `Σ c_i φ_i` at `(x, y)`.
    pub fn eval_function(&self, coeffs: &[f64], x: f64, y: f64) -> Result<f64, SplineError> {
        Ok(self
            .eval(x, y)?
            .into_iter()
            .map(|(i, v)| coeffs[i] * v)
            .sum())
    }

    /// The spaces housing `∂₁` and `∂₂` of this space:
    /// `S_{p1-1,p2}(Ξ1', Ξ2)` and `S_{p1,p2-1}(Ξ1, Ξ2')`.
    pub fn derivative_spaces(&self) -> Result<(Self, Self), SplineError> {
        Ok((
            Self::new(self.u.truncated()?, self.v.clone()),
            Self::new(self.u.clone(), self.v.truncated()?),
        ))
    }

    /// Coefficients of `∂₁f` in the first derivative space.
    pub fn d1_coefficients(&self, coeffs: &[f64]) -> Result<Vec<f64>, SplineError> {
        let (k1, k2) = (self.u.num_basis(), self.v.num_basis());
        let mut out = vec![0.0; (k1 - 1) * k2];
        for j2 in 0..k2 {
            let column: Vec<f64> = (0..k1).map(|j1| coeffs[j1 * k2 + j2]).collect();
            for (j1, d) in self.u.derivative_coefficients(&column)?.into_iter().enumerate() {
                out[j1 * k2 + j2] = d;
            }
        }
        Ok(out)
    }

    /// Coefficients of `∂₂f` in the second derivative space.
    pub fn d2_coefficients(&self, coeffs: &[f64]) -> Result<Vec<f64>, SplineError> {
        let (k1, k2) = (self.u.num_basis(), self.v.num_basis());
        let mut out = Vec::with_capacity(k1 * (k2 - 1));
        for j1 in 0..k1 {
            out.extend(
                self.v
                    .derivative_coefficients(&coeffs[j1 * k2..(j1 + 1) * k2])?,
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_knot_vectors() {
        let kv = KnotVector::open_uniform(1, 0);
        assert_eq!(kv.knots(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(kv.num_basis(), 2);
        let kv = KnotVector::open_uniform(2, 1);
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(kv.num_basis(), 4);
        let kv = KnotVector::open_uniform(3, 3);
        assert_eq!(kv.num_basis(), 11);
        let interior: Vec<f64> = kv.knots()[4..11].to_vec();
        assert_eq!(interior, (1..8).map(|i| i as f64 / 8.0).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_knots() {
        assert_eq!(
            KnotVector::new(vec![0.0, 0.5, 0.2, 1.0], 0),
            Err(SplineError::NotSorted)
        );
        assert_eq!(
            KnotVector::new(vec![0.0, 0.1, 1.0, 1.0], 1),
            Err(SplineError::NotOpen(1))
        );
        assert!(matches!(
            KnotVector::new(vec![0.0, 1.0], 1),
            Err(SplineError::TooShort { .. })
        ));
    }

    #[test]
    fn piecewise_constant_basis() {
        let kv = KnotVector::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 0).unwrap();
        let (first, vals) = kv.eval_basis(0.5, 0).unwrap();
        assert_eq!((first, vals), (1, vec![1.0]));
        // right continuity and closure at 1
        assert_eq!(kv.eval_basis(1.0 / 3.0, 0).unwrap().0, 1);
        assert_eq!(kv.eval_basis(1.0, 0).unwrap().0, 2);
    }

    #[test]
    fn endpoint_interpolation() {
        let kv = KnotVector::open_uniform(2, 2);
        let (first, vals) = kv.eval_basis(0.0, 0).unwrap();
        assert_eq!(first, 0);
        assert_eq!(vals, vec![1.0, 0.0, 0.0]);
        let (first, vals) = kv.eval_basis(1.0, 0).unwrap();
        assert_eq!(first + 2, kv.num_basis() - 1);
        assert_eq!(vals[2], 1.0);
    }

    #[test]
    fn partition_of_unity_and_derivative_sum() {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0], 1).unwrap();
        let (_, vals) = kv.eval_basis(0.4, 0).unwrap();
        assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let kv = KnotVector::open_uniform(2, 2);
        let (_, ders) = kv.eval_basis(0.3, 1).unwrap();
        assert!(ders.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn out_of_domain() {
        let kv = KnotVector::open_uniform(2, 1);
        assert_eq!(kv.eval_basis(1.5, 0), Err(SplineError::OutOfDomain(1.5)));
        assert!(kv.eval_basis(-1e-3, 0).is_err());
    }

    #[test]
    fn derivative_space_shape() {
        let s = TensorSplineSpace::uniform(2, 1);
        let (d1, d2) = s.derivative_spaces().unwrap();
        assert_eq!(d1.u.knots(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(d1.u.degree(), 1);
        assert_eq!(d1.v.degree(), 2);
        assert_eq!(d2.u.degree(), 2);
        assert_eq!(d2.v.degree(), 1);
        for (p, m) in [(1usize, 0u32), (2, 1), (3, 3), (4, 2)] {
            let s = TensorSplineSpace::uniform(p, m);
            let (d1, _) = s.derivative_spaces().unwrap();
            let n = (1usize << m) + p;
            assert_eq!(d1.dim(), (n - 1) * n);
        }
        assert_eq!(
            TensorSplineSpace::uniform(0, 2).derivative_spaces(),
            Err(SplineError::NoDerivativeSpace)
        );
    }

    #[test]
    fn mesh_size_and_quasi_uniformity() {
        let kv = KnotVector::open_uniform(2, 3);
        assert_eq!(kv.mesh_size(), 0.125);
        assert_eq!(kv.quasi_uniformity(), 1.0);
        let kv = KnotVector::new(vec![0.0, 0.0, 0.25, 1.0, 1.0], 1).unwrap();
        assert_eq!(kv.quasi_uniformity(), 3.0);
    }
}
