use igabem::geometry::{
    builtin_sphere, builtin_torus, first_fundamental_cross, parse_geometry, write_geometry, ConformityReport,
    SurfaceGeometry, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))).collect()
}

#[test]
fn conformity_of_builtins() {
    let torus = ConformityReport::compute(builtin_torus().patches());
    assert!(torus.passes());
    assert_eq!(torus.interfaces.len(), 32);
    let sphere = ConformityReport::compute(builtin_sphere().patches());
    assert!(sphere.passes());
    assert_eq!(sphere.interfaces.len(), 12);
}

#[test]
fn shifted_patch_breaks_four_interfaces() {
    let mut patches = builtin_torus().patches().to_vec();
    patches[5] = patches[5].translated(Vec3::new(1e-3, 0.0, 0.0));
    let report = ConformityReport::compute(&patches);
    assert!(!report.passes());
    assert_eq!(report.failures(), 4);
    assert!(SurfaceGeometry::new(patches).is_err());
}

#[test]
fn tangents_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    for geometry in [builtin_torus(), builtin_sphere()] {
        for patch in geometry.patches() {
            for (x, y) in random_params(&mut rng, 1000) {
                // one-sided near the boundary of the parameter square
                let (x, y) = (x.clamp(h, 1.0 - h), y.clamp(h, 1.0 - h));
                let g = patch.eval(x, y);
                let d1 = (patch.point(x + h, y) - patch.point(x - h, y)) / (2.0 * h);
                let d2 = (patch.point(x, y + h) - patch.point(x, y - h)) / (2.0 * h);
                assert!((d1 - g.d1).norm() < 1e-6, "{:e}", (d1 - g.d1).norm());
                assert!((d2 - g.d2).norm() < 1e-6, "{:e}", (d2 - g.d2).norm());
                assert!((g.normal.norm() - 1.0).abs() < 1e-13);
                assert!(g.normal.dot(&g.d1).abs() < 1e-12 && g.normal.dot(&g.d2).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn normals_point_outward() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for patch in builtin_sphere().patches() {
        for (x, y) in random_params(&mut rng, 200) {
            let g = patch.eval(x, y);
            assert!(g.normal.dot(&g.point) > 0.0);
        }
    }
    for patch in builtin_torus().patches() {
        for (x, y) in random_params(&mut rng, 200) {
            let g = patch.eval(x, y);
            let ring = Vec3::new(g.point.x, g.point.y, 0.0).normalize() * 2.0;
            assert!(g.normal.dot(&(g.point - ring)) > 0.0);
        }
    }
}

#[test]
fn save_load_round_trip() {
    let torus = builtin_torus();
    let text = write_geometry(&torus);
    let loaded = parse_geometry(&text).unwrap();
    assert_eq!(write_geometry(&loaded), text);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (k, (x, y)) in random_params(&mut rng, 100).into_iter().enumerate() {
        let j = k % torus.num_patches();
        let (a, b) = (torus.eval(j, x, y), loaded.eval(j, x, y));
        assert!((a.point - b.point).norm() <= 1e-15 && (a.normal - b.normal).norm() <= 1e-15);
    }
}

#[test]
fn areas() {
    assert!((builtin_sphere().area(8, 12) - 4.0 * PI).abs() < 1e-8);
    assert!((builtin_torus().area(8, 12) - 4.0 * PI * PI).abs() < 1e-8);
}

/// `⟨∂_k F_j(x), ∂_l F_i(y)⟩` is the mixed second derivative of
/// `⟨F_j(x), F_i(y)⟩`.
#[test]
fn cross_fundamental_tensor() {
    let sphere = builtin_sphere();
    let (pj, pi) = (&sphere.patches()[0], &sphere.patches()[3]);
    let h = 1e-4;
    for (x, y) in [((0.3, 0.6), (0.7, 0.2)), ((0.5, 0.5), (0.1, 0.9))] {
        let k = first_fundamental_cross(&pj.eval(x.0, x.1), &pi.eval(y.0, y.1));
        let f = |a: (f64, f64), b: (f64, f64)| pj.point(a.0, a.1).dot(&pi.point(b.0, b.1));
        let shift = |p: (f64, f64), dir: usize, s: f64| if dir == 0 { (p.0 + s, p.1) } else { (p.0, p.1 + s) };
        for r in 0..2 {
            for c in 0..2 {
                let fd = (f(shift(x, r, h), shift(y, c, h)) - f(shift(x, r, h), shift(y, c, -h))
                    - f(shift(x, r, -h), shift(y, c, h))
                    + f(shift(x, r, -h), shift(y, c, -h)))
                    / (4.0 * h * h);
                assert!((fd - k[(r, c)]).abs() < 1e-6, "{r}{c}: {fd} vs {}", k[(r, c)]);
            }
        }
    }
}
