//! Oracle values against tables computed independently in arbitrary
//! precision (`golden/generate.py`).

use igabem::geometry::Vec3;
use igabem::oracle::{
    legendre_p, sphere_operator_symbol, spherical_bessel_j, spherical_bessel_y, MieSeries, SphereProblem, SymbolKind,
};
use std::collections::HashMap;

struct Entry {
    name: String,
    params: HashMap<String, f64>,
    value: f64,
}

fn load(file: &str) -> Vec<Entry> {
    let path = format!("{}/golden/{file}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let params = fields[1..fields.len() - 1]
                .iter()
                .map(|kv| {
                    let (k, v) = kv.split_once('=').unwrap();
                    (k.to_string(), v.parse().unwrap())
                })
                .collect();
            Entry {
                name: fields[0].to_string(),
                params,
                value: fields[fields.len() - 1].parse().unwrap(),
            }
        })
        .collect()
}

fn close(ours: f64, exact: f64, rel: f64) -> bool {
    (ours - exact).abs() <= rel * exact.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn special_functions() {
    let entries = load("special_functions.txt");
    assert_eq!(entries.len(), 30);
    for e in &entries {
        let l = e.params["l"] as usize;
        let ours = match e.name.as_str() {
            "spherical_bessel_j" => spherical_bessel_j(l, e.params["x"])[l],
            "spherical_bessel_y" => spherical_bessel_y(l, e.params["x"]).unwrap()[l],
            "legendre_p" => legendre_p(l, e.params["t"])[l],
            other => panic!("unexpected entry {other}"),
        };
        assert!(close(ours, e.value, 1e-13), "{} {:?}: {ours:e} vs {:e}", e.name, e.params, e.value);
    }
}

#[test]
fn soft_sphere_far_field() {
    let mie = MieSeries::new(SphereProblem::Soft, 1.0, 1.0, Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let entries = load("mie_soft_k1.txt");
    assert_eq!(entries.len(), 3 * 19);
    for e in &entries {
        let u = mie.far_field_angle(e.params["theta"].to_radians());
        let ours = match e.name.as_str() {
            "mie_soft_far_field_re" => u.re,
            "mie_soft_far_field_im" => u.im,
            "mie_soft_far_field_abs" => u.norm(),
            other => panic!("unexpected entry {other}"),
        };
        assert!((ours - e.value).abs() < 1e-13, "{} {:?}: {ours} vs {}", e.name, e.params, e.value);
    }
}

#[test]
fn single_layer_symbol() {
    let entries = load("symbols.txt");
    let v = sphere_operator_symbol(SymbolKind::SingleLayer, 1, 1.0).unwrap();
    for e in &entries {
        let ours = if e.name.ends_with("_re") { v.re } else { v.im };
        assert!((ours - e.value).abs() < 1e-6, "{}: {ours} vs {}", e.name, e.value);
    }
}
