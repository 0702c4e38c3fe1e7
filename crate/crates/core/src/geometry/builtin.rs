use super::{NurbsPatch, SurfaceGeometry, Vec3};
use crate::spline::KnotVector;
use nalgebra::Matrix3;
use std::f64::consts::PI;

/// Rational quadratic arc of the unit circle from angle `a` to `b`
/// (`b - a < π`): control points and weights.
fn unit_arc(a: f64, b: f64) -> [(f64, f64, f64); 3] {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    [
        (a.cos(), a.sin(), 1.0),
        (mid.cos() / half.cos(), mid.sin() / half.cos(), half.cos()),
        (b.cos(), b.sin(), 1.0),
    ]
}

fn bezier_knots(degree: usize) -> KnotVector {
    KnotVector::open_uniform(degree, 0)
}

/// Torus with major radius `major` and minor radius `minor`, split into
/// `n_major × n_minor` exact rational biquadratic patches.
///
/// The first parameter runs along the major circle, the second along the
/// minor circle, which orients `∂₁F × ∂₂F` outward.
pub fn torus_grid(n_major: usize, n_minor: usize, major: f64, minor: f64) -> SurfaceGeometry {
    assert!(n_major >= 3 && n_minor >= 3, "need at least three arcs per circle");
    let mut patches = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        let big = unit_arc(
            2.0 * PI * i as f64 / n_major as f64,
            2.0 * PI * (i + 1) as f64 / n_major as f64,
        );
        for j in 0..n_minor {
            let small = unit_arc(
                2.0 * PI * j as f64 / n_minor as f64,
                2.0 * PI * (j + 1) as f64 / n_minor as f64,
            );
            let mut control = Vec::with_capacity(9);
            let mut weights = Vec::with_capacity(9);
            for &(cx, cy, wa) in &big {
                for &(px, pz, wb) in &small {
                    let rho = major + minor * px;
                    control.push(Vec3::new(rho * cx, rho * cy, minor * pz));
                    weights.push(wa * wb);
                }
            }
            patches.push(
                NurbsPatch::new(bezier_knots(2), bezier_knots(2), control, weights)
                    .expect("torus patch is valid"),
            );
        }
    }
    SurfaceGeometry::new(patches).expect("torus is a closed conforming surface")
}

/// The 16-patch torus with major radius 2 and minor radius 0.5.
pub fn builtin_torus() -> SurfaceGeometry {
    torus_grid(4, 4, 2.0, 0.5)
}

/// Binomial-weighted product of two biquadratic Bernstein coefficient grids.
fn bernstein_product(f: &[[f64; 3]; 3], g: &[[f64; 3]; 3]) -> [[f64; 5]; 5] {
    const C2: [f64; 3] = [1.0, 2.0, 1.0];
    const C4: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
    let mut out = [[0.0; 5]; 5];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    out[i + k][j + l] += f[i][j] * g[k][l] * C2[i] * C2[j] * C2[k] * C2[l];
                }
            }
        }
    }
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v /= C4[i] * C4[j];
        }
    }
    out
}

/// One face of the six-patch sphere: the cube face around the north pole.
///
/// In the stereographic plane (projection from the south pole) the face is
/// bounded by four circular arcs, images of the great circles `x = ±z`,
/// `y = ±z`. A rational biquadratic patch reproduces those arcs exactly;
/// composing with the inverse stereographic map gives a rational patch of
/// degree (4, 4) on the unit sphere.
fn sphere_cap_patch() -> NurbsPatch {
    let a = 0.5 * (3f64.sqrt() - 1.0); // image of the cube vertex
    let c = (PI / 12.0).cos(); // half opening angle of each arc is 15°
    let m = -1.0 + 2f64.sqrt() / c; // tangent intersection on the axis
    let pts = [
        [(-a, -a), (-m, 0.0), (-a, a)],
        [(0.0, -m), (0.0, 0.0), (0.0, m)],
        [(a, -a), (m, 0.0), (a, a)],
    ];
    let wts = [[1.0, c, 1.0], [c, c * c, c], [1.0, c, 1.0]];
    let mut hu = [[0.0; 3]; 3];
    let mut hv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            hu[i][j] = wts[i][j] * pts[i][j].0;
            hv[i][j] = wts[i][j] * pts[i][j].1;
        }
    }
    let uw = bernstein_product(&hu, &wts);
    let vw = bernstein_product(&hv, &wts);
    let ww = bernstein_product(&wts, &wts);
    let uu = bernstein_product(&hu, &hu);
    let vv = bernstein_product(&hv, &hv);
    let mut control = Vec::with_capacity(25);
    let mut weights = Vec::with_capacity(25);
    for i in 0..5 {
        for j in 0..5 {
            let d = ww[i][j] + uu[i][j] + vv[i][j];
            let x = 2.0 * uw[i][j];
            let y = 2.0 * vw[i][j];
            let z = ww[i][j] - uu[i][j] - vv[i][j];
            control.push(Vec3::new(x / d, y / d, z / d));
            weights.push(d);
        }
    }
    NurbsPatch::new(bezier_knots(4), bezier_knots(4), control, weights)
        .expect("sphere patch is valid")
}

/// Exact six-patch rational parametrization of the unit sphere.
pub fn builtin_sphere() -> SurfaceGeometry {
    let cap = sphere_cap_patch();
    let rotations = [
        Matrix3::identity(),
        Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0),
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0),
        Matrix3::new(0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0),
        Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0),
        Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
    ];
    let patches = rotations.iter().map(|r| cap.transformed(r)).collect();
    SurfaceGeometry::new(patches).expect("sphere is a closed conforming surface")
}

/// The unit square in the `z = 0` plane as a bilinear patch.
pub fn flat_square() -> NurbsPatch {
    let control = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
    ];
    NurbsPatch::new(bezier_knots(1), bezier_knots(1), control, vec![1.0; 4])
        .expect("flat patch is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_points_lie_on_torus() {
        let torus = builtin_torus();
        assert_eq!(torus.num_patches(), 16);
        for j in 0..16 {
            for a in 0..=10 {
                for b in 0..=10 {
                    let p = torus.eval(j, a as f64 / 10.0, b as f64 / 10.0).point;
                    let ring = (p.x * p.x + p.y * p.y).sqrt() - 2.0;
                    assert!((ring * ring + p.z * p.z - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sphere_patches_lie_on_sphere() {
        let sphere = builtin_sphere();
        assert_eq!(sphere.num_patches(), 6);
        for j in 0..6 {
            for a in 0..50 {
                for b in 0..50 {
                    let g = sphere.eval(j, a as f64 / 49.0, b as f64 / 49.0);
                    assert!((g.point.norm() - 1.0).abs() < 1e-12);
                    assert!(g.normal.dot(&g.point) > 0.99);
                }
            }
        }
    }

    #[test]
    fn sphere_weights_positive() {
        for p in builtin_sphere().patches() {
            assert!(p.weights().iter().all(|&w| w > 0.0));
        }
    }
}
