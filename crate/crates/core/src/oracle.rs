//! Reference solutions for the unit sphere: spherical Bessel functions,
//! Mie series, operator eigenvalues and the optical theorem.

use crate::geometry::Vec3;
use crate::kernels::C64;
use crate::quadrature::gauss_rule;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("series truncation {order} too small: tail term {tail:e}")]
    Truncation { order: usize, tail: f64 },
    #[error("symbol quadrature did not converge (difference {0:e})")]
    NoConvergence(f64),
}

/// `j_0(x) … j_L(x)`: normalized downward recurrence, or upward
/// recurrence when `x ≥ L` (where it is stable).
pub fn spherical_bessel_j(lmax: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; lmax + 1];
        out[0] = 1.0;
        return out;
    }
    if x >= lmax.max(1) as f64 {
        let (s, c) = x.sin_cos();
        let mut j = vec![s / x, s / (x * x) - c / x];
        for l in 1..lmax {
            let next = (2 * l + 1) as f64 / x * j[l] - j[l - 1];
            j.push(next);
        }
        j.truncate(lmax + 1);
        return j;
    }
    let start = lmax + 30 + (x.abs() as usize);
    let mut f = vec![0.0; start + 2];
    f[start + 1] = 0.0;
    f[start] = 1e-300;
    for l in (1..=start).rev() {
        f[l - 1] = (2 * l + 1) as f64 / x * f[l] - f[l + 1];
        if f[l - 1].abs() > 1e250 {
            // rescale to avoid overflow; only ratios matter
            for v in f[l - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() { j0 / f[0] } else { j1 / f[1] };
    f.truncate(lmax + 1);
    f.iter_mut().for_each(|v| *v *= scale);
    f
}

/// `y_0(x) … y_L(x)` by upward recurrence.
pub fn spherical_bessel_y(lmax: usize, x: f64) -> Result<Vec<f64>, OracleError> {
    if x <= 0.0 {
        return Err(OracleError::NonPositiveArgument(x));
    }
    let (s, c) = x.sin_cos();
    let mut y = Vec::with_capacity(lmax + 1);
    y.push(-c / x);
    if lmax >= 1 {
        y.push(-c / (x * x) - s / x);
    }
    for l in 1..lmax {
        let next = (2 * l + 1) as f64 / x * y[l] - y[l - 1];
        y.push(next);
    }
    Ok(y)
}

/// `h⁽¹⁾_l = j_l + i y_l` for `l = 0 … L`.
pub fn spherical_hankel1(lmax: usize, x: f64) -> Result<Vec<C64>, OracleError> {
    let y = spherical_bessel_y(lmax, x)?;
    let j = spherical_bessel_j(lmax, x);
    Ok(j.iter().zip(&y).map(|(&a, &b)| C64::new(a, b)).collect())
}

/// Derivatives from `f_l' = f_{l-1} − (l+1)/x f_l` and `f_0' = −f_1`; the
/// input must contain one order more than the output.
pub fn spherical_derivative<T>(f: &[T], x: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
{
    let lmax = f.len() - 2;
    (0..=lmax)
        .map(|l| if l == 0 { -f[1] } else { f[l - 1] - f[l] * ((l + 1) as f64 / x) })
        .collect()
}

/// `P_0(t) … P_L(t)`.
pub fn legendre_p(lmax: usize, t: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax >= 1 {
        p.push(t);
    }
    for l in 1..lmax {
        let next = ((2 * l + 1) as f64 * t * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
        p.push(next);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SphereProblem {
    Soft,
    Hard,
}

/// Plane wave `e^{iκ⟨d,x⟩}` scattered by the sphere of radius `R` centred
/// at the origin: `u_s = Σ (2l+1) iˡ a_l h_l(κr) P_l(cos θ)`.
#[derive(Debug, Clone)]
pub struct MieSeries {
    kappa: f64,
    radius: f64,
    direction: Vec3,
    coeffs: Vec<C64>,
}

impl MieSeries {
    pub fn new(problem: SphereProblem, kappa: f64, radius: f64, direction: Vec3) -> Result<Self, OracleError> {
        let order = (kappa * radius).ceil() as usize + 20;
        Self::with_order(problem, kappa, radius, direction, order)
    }

    pub fn with_order(
        problem: SphereProblem,
        kappa: f64,
        radius: f64,
        direction: Vec3,
        order: usize,
    ) -> Result<Self, OracleError> {
        let x = kappa * radius;
        if x <= 0.0 {
            return Err(OracleError::NonPositiveArgument(x));
        }
        let j = spherical_bessel_j(order + 1, x);
        let h = spherical_hankel1(order + 1, x)?;
        let coeffs: Vec<C64> = match problem {
            SphereProblem::Soft => (0..=order).map(|l| -C64::new(j[l], 0.0) / h[l]).collect(),
            SphereProblem::Hard => {
                let dj = spherical_derivative(&j, x);
                let dh = spherical_derivative(&h, x);
                (0..=order).map(|l| -C64::new(dj[l], 0.0) / dh[l]).collect()
            }
        };
        let tail = (2 * order + 1) as f64 * coeffs[order].norm();
        if (order as f64) < x + 20.0 || tail > 1e-12 {
            return Err(OracleError::Truncation { order, tail });
        }
        Ok(Self {
            kappa,
            radius,
            direction: direction.normalize(),
            coeffs,
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    /// Scattered field at a point outside the sphere.
    pub fn scattered(&self, x: &Vec3) -> Result<C64, OracleError> {
        let r = x.norm();
        if r < self.radius {
            return Err(OracleError::NonPositiveArgument(r - self.radius));
        }
        let l = self.order();
        let h = spherical_hankel1(l, self.kappa * r)?;
        let p = legendre_p(l, (x.dot(&self.direction) / r).clamp(-1.0, 1.0));
        let mut il = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        for k in 0..=l {
            sum += il * self.coeffs[k] * h[k] * ((2 * k + 1) as f64 * p[k]);
            il *= C64::new(0.0, 1.0);
        }
        Ok(sum)
    }

    /// `u_∞(x̂)` with `u_s(r x̂) ≈ e^{iκr}/r · u_∞(x̂)`.
    pub fn far_field(&self, xhat: &Vec3) -> C64 {
        let p = legendre_p(self.order(), (xhat.dot(&self.direction) / xhat.norm()).clamp(-1.0, 1.0));
        let sum: C64 = (0..=self.order()).map(|l| self.coeffs[l] * ((2 * l + 1) as f64 * p[l])).sum();
        sum * C64::new(0.0, -1.0 / self.kappa)
    }

    /// Far field as a function of the angle to the incidence direction.
    pub fn far_field_angle(&self, theta: f64) -> C64 {
        let p = legendre_p(self.order(), theta.cos());
        let sum: C64 = (0..=self.order()).map(|l| self.coeffs[l] * ((2 * l + 1) as f64 * p[l])).sum();
        sum * C64::new(0.0, -1.0 / self.kappa)
    }
}

/// Product Gauss grid on the unit sphere: Gauss–Legendre in `cos θ`,
/// trapezoidal in `φ`.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub directions: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let rule = gauss_rule(n_theta).expect("valid order");
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (s, w) in rule.iter() {
            let z = 2.0 * s - 1.0;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                directions.push(Vec3::new(rho * phi.cos(), rho * phi.sin(), z));
                weights.push(2.0 * w * 2.0 * PI / n_phi as f64);
            }
        }
        Self { directions, weights }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// `|Im u_∞(d) − κ/(4π) ∫|u_∞|²| / max(1, |u_∞(d)|)`.
pub fn optical_theorem_defect(samples: &[C64], grid: &SphereGrid, forward: C64, kappa: f64) -> f64 {
    let power: Vec<f64> = samples.iter().map(|v| v.norm_sqr()).collect();
    let cross = kappa / (4.0 * PI) * grid.integrate(&power);
    (forward.im - cross).abs() / forward.norm().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    SingleLayer,
    DoubleLayer,
    /// regularized hypersingular operator, as assembled
    Hypersingular,
}

/// Eigenvalue on degree-`l` spherical harmonics of the operator on the
/// unit sphere, by Funk–Hecke reduction to a 1D integral over the chord
/// length `r ∈ [0, 2]` (`t = 1 − r²/2` is the cosine of the angle). The
/// integrands are smooth in `r`; the result is checked by comparing two
/// Gauss orders.
pub fn sphere_operator_symbol(kind: SymbolKind, l: usize, kappa: f64) -> Result<C64, OracleError> {
    let eval = |n: usize| {
        let rule = gauss_rule(n).expect("valid order");
        let mut sum = C64::new(0.0, 0.0);
        for (s, w) in rule.iter() {
            let r = 2.0 * s;
            let t = 1.0 - 0.5 * r * r;
            let p = legendre_p(l, t)[l];
            let e = C64::from_polar(1.0, kappa * r) * (2.0 * w);
            sum += match kind {
                // ½ ∫ e^{iκr} P_l dr
                SymbolKind::SingleLayer => e * (0.5 * p),
                // ¼ ∫ e^{iκr} (iκr − 1) P_l dr
                SymbolKind::DoubleLayer => e * C64::new(-1.0, kappa * r) * (0.25 * p),
                // l(l+1) V_l − κ² ½ ∫ e^{iκr} t P_l dr
                SymbolKind::Hypersingular => {
                    e * (0.5 * p * (l * (l + 1)) as f64) - e * (0.5 * kappa * kappa * t * p)
                }
            };
        }
        sum
    };
    let (a, b) = (eval(48), eval(64));
    if (a - b).norm() > 1e-10 * b.norm().max(1e-3) {
        return Err(OracleError::NoConvergence((a - b).norm()));
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((spherical_bessel_j(3, 1.0)[0] - 0.8414709848078965).abs() < 1e-15);
        let h = spherical_hankel1(2, PI).unwrap();
        assert!((h[0] - C64::new(0.0, 1.0 / PI)).norm() < 1e-16);
        assert!((legendre_p(2, 0.5)[2] + 0.125).abs() < 1e-16);
        // j_0 vanishes at π; normalization switches to j_1
        let j = spherical_bessel_j(5, PI);
        assert!(j[0].abs() < 1e-16);
        assert!((j[1] - 1.0 / PI).abs() < 1e-15);
        assert!(spherical_bessel_y(2, 0.0).is_err());
    }

    #[test]
    fn wronskian() {
        for x in [0.5, 1.0, 5.0] {
            let j = spherical_bessel_j(21, x);
            let y = spherical_bessel_y(21, x).unwrap();
            let (dj, dy) = (spherical_derivative(&j, x), spherical_derivative(&y, x));
            for l in 0..=20 {
                let w = j[l] * dy[l] - dj[l] * y[l];
                assert!((w * x * x - 1.0).abs() < 1e-12, "l={l} x={x}: {w}");
            }
        }
    }

    #[test]
    fn mie_optical_theorem_and_far_field_limit() {
        for problem in [SphereProblem::Soft, SphereProblem::Hard] {
            for kappa in [1.0, PI, 2.5] {
                let mie = MieSeries::new(problem, kappa, 1.0, Vec3::x()).unwrap();
                let grid = SphereGrid::new(40, 64);
                let ff: Vec<C64> = grid.directions.iter().map(|x| mie.far_field(x)).collect();
                let defect = optical_theorem_defect(&ff, &grid, mie.far_field(&Vec3::x()), kappa);
                assert!(defect < 1e-12, "{problem:?} κ={kappa}: {defect}");
                // r e^{−iκr} u_s(r x̂) → u_∞(x̂)
                let xhat = Vec3::new(0.3, -0.4, 0.5).normalize();
                let r = 1e5;
                let near = mie.scattered(&(xhat * r)).unwrap() * C64::from_polar(r, -kappa * r);
                let far = mie.far_field(&xhat);
                assert!((near - far).norm() < 1e-3 * far.norm(), "{near} vs {far}");
                // truncation
                let longer = MieSeries::with_order(problem, kappa, 1.0, Vec3::x(), 2 * mie.order()).unwrap();
                assert!((longer.far_field(&xhat) - far).norm() < 1e-12);
            }
        }
        assert!(MieSeries::with_order(SphereProblem::Soft, 1.0, 1.0, Vec3::x(), 5).is_err());
    }

    #[test]
    fn reciprocity() {
        let mie = MieSeries::new(SphereProblem::Hard, 2.0, 1.0, Vec3::z()).unwrap();
        let back = MieSeries::new(SphereProblem::Hard, 2.0, 1.0, -Vec3::z()).unwrap();
        assert!((mie.far_field(&-Vec3::z()) - back.far_field(&Vec3::z())).norm() < 1e-14);
    }

    #[test]
    fn symbols_match_bessel_products() {
        for kappa in [0.5, 1.0, 3.0] {
            let j = spherical_bessel_j(6, kappa);
            let h = spherical_hankel1(6, kappa).unwrap();
            let (dj, dh) = (spherical_derivative(&j, kappa), spherical_derivative(&h, kappa));
            let i = C64::new(0.0, 1.0);
            for l in 0..=4 {
                let v = sphere_operator_symbol(SymbolKind::SingleLayer, l, kappa).unwrap();
                assert!((v - i * kappa * j[l] * h[l]).norm() < 1e-12, "V l={l}");
                let w = sphere_operator_symbol(SymbolKind::Hypersingular, l, kappa).unwrap();
                assert!((w + i * kappa.powi(3) * dj[l] * dh[l]).norm() < 1e-11, "W l={l}");
                // ½ − K has symbol −iκ² j_l h_l'
                let k = sphere_operator_symbol(SymbolKind::DoubleLayer, l, kappa).unwrap();
                let lhs = C64::new(0.5, 0.0) - k;
                assert!((lhs + i * kappa * kappa * j[l] * dh[l]).norm() < 1e-11, "K l={l}");
            }
        }
        // static limits
        let v0 = sphere_operator_symbol(SymbolKind::SingleLayer, 0, 1e-9).unwrap();
        assert!((v0 - 1.0).norm() < 1e-8);
        let k0 = sphere_operator_symbol(SymbolKind::DoubleLayer, 0, 1e-9).unwrap();
        assert!((k0 + 0.5).norm() < 1e-8);
        // conjugation under κ ↦ −κ
        let a = sphere_operator_symbol(SymbolKind::SingleLayer, 2, 1.5).unwrap();
        let b = sphere_operator_symbol(SymbolKind::SingleLayer, 2, -1.5).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn zero_far_field_has_no_defect() {
        let grid = SphereGrid::new(4, 4);
        let zeros = vec![C64::new(0.0, 0.0); grid.directions.len()];
        assert_eq!(optical_theorem_defect(&zeros, &grid, C64::new(0.0, 0.0), 1.0), 0.0);
    }
}
