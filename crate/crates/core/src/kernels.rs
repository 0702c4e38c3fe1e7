//! Helmholtz fundamental solution and the boundary-operator kernels.

use crate::geometry::{GeometryData, Vec3};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

pub type C64 = Complex64;

pub const FOUR_PI_INV: f64 = 1.0 / (4.0 * PI);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel evaluated at coincident points (r = {0:e})")]
    Singular(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    SingleLayer,
    /// `∂G/∂n_y`
    DoubleLayer,
    /// `∂G/∂n_x`
    AdjointDoubleLayer,
    /// plain `G`, paired with surface curls
    HypersingularCurlPart,
    /// `−κ² ⟨n_x, n_y⟩ G`
    HypersingularMassPart,
}

/// Points closer than this (relative to `max(|x|, |y|, 1)`) are treated as
/// coincident.
const COINCIDENT: f64 = 1e-14;

fn check_distance(x: &Vec3, y: &Vec3) -> Result<f64, KernelError> {
    let r = (x - y).norm();
    let scale = x.norm().max(y.norm()).max(1.0);
    if r <= COINCIDENT * scale {
        return Err(KernelError::Singular(r));
    }
    Ok(r)
}

/// `e^{iκr} / (4πr)` for `r > 0`, without checks.
#[inline]
pub fn green_r(kappa: f64, r: f64) -> C64 {
    let (s, c) = (kappa * r).sin_cos();
    C64::new(c, s) * (FOUR_PI_INV / r)
}

pub fn green(kappa: f64, x: &Vec3, y: &Vec3) -> Result<C64, KernelError> {
    Ok(green_r(kappa, check_distance(x, y)?))
}

/// `∇_y G(x, y) = (iκ − 1/r) G (y − x)/r`.
pub fn green_grad_y(kappa: f64, x: &Vec3, y: &Vec3) -> Result<[C64; 3], KernelError> {
    let r = check_distance(x, y)?;
    let f = green_r(kappa, r) * C64::new(-1.0 / r, kappa) / r;
    let d = y - x;
    Ok([f * d.x, f * d.y, f * d.z])
}

/// Kernel value for points `x` (test side) and `y` (trial side), without the
/// coincidence check; `r` must be positive.
#[inline]
pub fn kernel_unchecked(kind: KernelKind, kappa: f64, gx: &GeometryData, gy: &GeometryData) -> C64 {
    let d = gx.point - gy.point;
    let r = d.norm();
    let g = green_r(kappa, r);
    match kind {
        KernelKind::SingleLayer | KernelKind::HypersingularCurlPart => g,
        // (iκr − 1)/r² · (y − x)·n_y
        KernelKind::DoubleLayer => g * C64::new(-1.0, kappa * r) * (-d.dot(&gy.normal) / (r * r)),
        KernelKind::AdjointDoubleLayer => g * C64::new(-1.0, kappa * r) * (d.dot(&gx.normal) / (r * r)),
        KernelKind::HypersingularMassPart => g * (-kappa * kappa * gx.normal.dot(&gy.normal)),
    }
}

pub fn kernel_eval(
    kind: KernelKind,
    kappa: f64,
    gx: &GeometryData,
    gy: &GeometryData,
) -> Result<C64, KernelError> {
    check_distance(&gx.point, &gy.point)?;
    Ok(kernel_unchecked(kind, kappa, gx, gy))
}

/// Kernel transported to the parameter domain: includes both surface
/// measures except for the curl part, whose measures are absorbed by the
/// curl pairing.
pub fn pullback_kernel(
    kind: KernelKind,
    kappa: f64,
    gx: &GeometryData,
    gy: &GeometryData,
) -> Result<C64, KernelError> {
    let k = kernel_eval(kind, kappa, gx, gy)?;
    Ok(match kind {
        KernelKind::HypersingularCurlPart => k,
        _ => k * gx.measure * gy.measure,
    })
}

/// Dirichlet and Neumann traces of `e^{iκ⟨d, x⟩}`.
pub fn plane_wave_traces(kappa: f64, d: &Vec3, g: &GeometryData) -> (C64, C64) {
    debug_assert!((d.norm() - 1.0).abs() < 1e-12, "direction must be a unit vector");
    let u = C64::from_polar(1.0, kappa * d.dot(&g.point));
    (u, u * C64::new(0.0, kappa * d.dot(&g.normal)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(point: Vec3, normal: Vec3) -> GeometryData {
        GeometryData {
            point,
            d1: Vec3::zeros(),
            d2: Vec3::zeros(),
            normal,
            measure: 1.0,
        }
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            .normalize()
    }

    #[test]
    fn green_values() {
        let (o, e) = (Vec3::zeros(), Vec3::x());
        assert!((green(1e-12, &o, &e).unwrap().re - FOUR_PI_INV).abs() < 1e-12);
        let g = green(PI, &o, &e).unwrap();
        assert!((g.re + FOUR_PI_INV).abs() < 1e-15 && g.im.abs() < 1e-15);
        assert!(green(1.0, &o, &o).is_err());
        for r in [10.0, 100.0, 1000.0] {
            let g = green(2.0, &o, &(e * r)).unwrap();
            assert!(((g * r).norm() - FOUR_PI_INV).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x = random_unit(&mut rng) * 2.0;
            let y = random_unit(&mut rng);
            let (nx, ny) = (random_unit(&mut rng), random_unit(&mut rng));
            assert_eq!(green(1.3, &x, &y).unwrap(), green(1.3, &y, &x).unwrap());
            let dl = kernel_eval(KernelKind::DoubleLayer, 1.3, &data(x, nx), &data(y, ny)).unwrap();
            let adl =
                kernel_eval(KernelKind::AdjointDoubleLayer, 1.3, &data(y, ny), &data(x, nx)).unwrap();
            assert!((dl - adl).norm() < 1e-14 * dl.norm().max(1.0));
            for kind in [KernelKind::SingleLayer, KernelKind::DoubleLayer, KernelKind::HypersingularMassPart] {
                let a = kernel_eval(kind, 1.3, &data(x, nx), &data(y, ny)).unwrap();
                let b = kernel_eval(kind, -1.3, &data(x, nx), &data(y, ny)).unwrap();
                assert!((a - b.conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kappa = 2.5;
        for _ in 0..100 {
            let x = random_unit(&mut rng) * 1.5;
            let y = random_unit(&mut rng) * 0.5;
            let grad = green_grad_y(kappa, &x, &y).unwrap();
            let h = 1e-6;
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                let fd = (green(kappa, &x, &(y + e)).unwrap() - green(kappa, &x, &(y - e)).unwrap())
                    / (2.0 * h);
                assert!((fd - grad[k]).norm() < 1e-7 * grad.iter().map(|g| g.norm()).fold(0.0, f64::max));
            }
            // double layer is the gradient along n_y
            let ny = random_unit(&mut rng);
            let dl = kernel_eval(KernelKind::DoubleLayer, kappa, &data(x, Vec3::z()), &data(y, ny)).unwrap();
            let dir = grad[0] * ny.x + grad[1] * ny.y + grad[2] * ny.z;
            assert!((dl - dir).norm() < 1e-12 * dl.norm().max(1e-3));
        }
    }

    #[test]
    fn double_layer_vanishes_for_tangential_normal() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::zeros();
        let k = kernel_eval(KernelKind::DoubleLayer, 2.0, &data(x, Vec3::z()), &data(y, Vec3::y())).unwrap();
        assert!(k.norm() < 1e-15);
    }

    #[test]
    fn helmholtz_equation() {
        let kappa = 2.0;
        let y = Vec3::zeros();
        let h = 1e-3;
        for x in [Vec3::new(0.6, 0.1, 0.0), Vec3::new(1.0, -1.0, 0.5), Vec3::new(0.0, 0.0, 3.0)] {
            let mut lap = -6.0 * green(kappa, &x, &y).unwrap();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                lap += green(kappa, &(x + e), &y).unwrap() + green(kappa, &(x - e), &y).unwrap();
            }
            let g = green(kappa, &x, &y).unwrap();
            let res = lap / (h * h) + g * kappa * kappa;
            assert!(res.norm() < 1e-4 * (g * kappa * kappa).norm());
        }
    }

    #[test]
    fn traces() {
        let d = Vec3::x();
        let (u, du) = plane_wave_traces(3.0, &d, &data(Vec3::zeros(), Vec3::y()));
        assert_eq!(u, C64::new(1.0, 0.0));
        assert_eq!(du, C64::new(0.0, 0.0));
        let (u, _) = plane_wave_traces(3.0, &d, &data(Vec3::new(0.3, 2.0, 1.0), Vec3::y()));
        assert!((u.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pullback_measures() {
        let mut gx = data(Vec3::zeros(), Vec3::z());
        let mut gy = data(Vec3::x(), Vec3::z());
        gx.measure = 2.0;
        gy.measure = 0.5;
        let v = pullback_kernel(KernelKind::SingleLayer, 1.0, &gx, &gy).unwrap();
        let c = pullback_kernel(KernelKind::HypersingularCurlPart, 1.0, &gx, &gy).unwrap();
        assert!((v - c).norm() < 1e-16);
        gx.measure = 3.0;
        let v = pullback_kernel(KernelKind::SingleLayer, 1.0, &gx, &gy).unwrap();
        assert!((v - c * 1.5).norm() < 1e-16);
    }
}
