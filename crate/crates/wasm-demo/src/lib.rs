//! Three operations behind `www/index.html`: plotting a uniform B-spline
//! basis, solving scattering by the unit sphere and comparing the far field
//! with the Mie series, and sampling the total field on a plane.
//!
//! The plain functions are what the native tests call; the exported
//! wrappers only convert errors for JavaScript.

use igabem::assembly::ProblemKind;
use igabem::geometry::{builtin_sphere, Vec3};
use igabem::kernels::C64;
use igabem::oracle::{MieSeries, SphereProblem};
use igabem::scattering::{solve, ScatteringProblem, Solution};
use igabem::spline::KnotVector;
use wasm_bindgen::prelude::*;

const SHELL: f64 = 1.05;

/// Values of every basis function of the open uniform knot vector with
/// `2^level` elements, row by row, at `samples` equispaced points of
/// `[0, 1]`.
pub fn basis_table(degree: usize, level: u32, samples: usize) -> Result<Vec<f64>, String> {
    if degree > 6 || level > 5 || !(2..=2000).contains(&samples) {
        return Err("degree ≤ 6, level ≤ 5 and 2..=2000 samples".into());
    }
    let knots = KnotVector::open_uniform(degree, level);
    let n = knots.num_basis();
    let mut out = vec![0.0; n * samples];
    for s in 0..samples {
        let x = s as f64 / (samples - 1) as f64;
        let (first, vals) = knots.eval_basis(x, 0).map_err(|e| e.to_string())?;
        for (k, v) in vals.into_iter().enumerate() {
            out[(first + k) * samples + s] = v;
        }
    }
    Ok(out)
}

pub struct SphereRun {
    solution: Solution,
    mie: MieSeries,
}

impl SphereRun {
    pub fn new(hard: bool, kappa: f64, degree: usize, level: u32) -> Result<Self, String> {
        if !(kappa > 0.0 && kappa <= 8.0) || degree > 3 || level > 2 || (hard && degree == 0) {
            return Err("0 < κ ≤ 8, p ≤ 3 (p ≥ 1 when sound-hard), m ≤ 2".into());
        }
        let (problem, kind) = if hard {
            (ProblemKind::SoundHard, SphereProblem::Hard)
        } else {
            (ProblemKind::SoundSoft, SphereProblem::Soft)
        };
        let sp = ScatteringProblem::new(problem, kappa, degree, level);
        let mie = MieSeries::new(kind, kappa, 1.0, sp.direction).map_err(|e| e.to_string())?;
        let solution = solve(&sp, &builtin_sphere()).map_err(|e| e.to_string())?;
        Ok(Self { solution, mie })
    }

    pub fn dofs(&self) -> usize {
        self.solution.dofs.num_dofs()
    }

    pub fn iterations(&self) -> usize {
        self.solution.gmres.iterations
    }

    /// `|u_∞|` of the solver then of the Mie series at `n` angles in
    /// `[0, π]` from the incident direction.
    pub fn far_field(&self, n: usize) -> Vec<f64> {
        let dirs: Vec<Vec3> = (0..n)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / (n.max(2) - 1) as f64;
                Vec3::new(t.sin(), 0.0, t.cos())
            })
            .collect();
        let mut out: Vec<f64> = self.solution.far_field(&dirs).iter().map(|v| v.norm()).collect();
        out.extend(dirs.iter().map(|d| self.mie.far_field(d).norm()));
        out
    }

    /// Real part of the total field on an `n × n` grid of the xz plane,
    /// `[-half, half]²`, row by row from the top. Points inside radius
    /// `SHELL` are NaN.
    pub fn slice(&self, half: f64, n: usize) -> Vec<f64> {
        let pts: Vec<Vec3> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let c = |t: usize| -half + 2.0 * half * t as f64 / (n.max(2) - 1) as f64;
                Vec3::new(c(j), 0.0, -c(i))
            })
            .collect();
        // a dense source rule instead of masking one element width around
        // the sphere; only a thin shell stays blank
        let outside: Vec<Vec3> = pts.iter().copied().filter(|x| x.norm() >= SHELL).collect();
        let mut us = self.solution.scattered_field_with_order(&outside, 12).into_iter();
        let kappa = self.solution.problem.kappa;
        let d = self.solution.problem.direction;
        pts.iter()
            .map(|x| {
                if x.norm() < SHELL {
                    return f64::NAN;
                }
                (us.next().expect("one value per outside point") + C64::new(0.0, kappa * d.dot(x)).exp()).re
            })
            .collect()
    }
}

#[wasm_bindgen(js_name = basisTable)]
pub fn basis_table_js(degree: usize, level: u32, samples: usize) -> Result<Vec<f64>, JsError> {
    basis_table(degree, level, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = SphereRun)]
pub struct SphereRunJs(SphereRun);

#[wasm_bindgen(js_class = SphereRun)]
impl SphereRunJs {
    #[wasm_bindgen(constructor)]
    pub fn new(hard: bool, kappa: f64, degree: usize, level: u32) -> Result<SphereRunJs, JsError> {
        SphereRun::new(hard, kappa, degree, level).map(SphereRunJs).map_err(|e| JsError::new(&e))
    }

    pub fn dofs(&self) -> usize {
        self.0.dofs()
    }

    pub fn iterations(&self) -> usize {
        self.0.iterations()
    }

    #[wasm_bindgen(js_name = farField)]
    pub fn far_field(&self, n: usize) -> Vec<f64> {
        self.0.far_field(n)
    }

    pub fn slice(&self, half: f64, n: usize) -> Vec<f64> {
        self.0.slice(half, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_rows_sum_to_one() {
        let samples = 41;
        let t = basis_table(2, 2, samples).unwrap();
        assert_eq!(t.len(), 6 * samples);
        for s in 0..samples {
            let sum: f64 = (0..6).map(|b| t[b * samples + s]).sum();
            assert!((sum - 1.0).abs() < 1e-13);
        }
        assert!(basis_table(9, 2, 10).is_err());
    }

    #[test]
    fn sphere_far_field_tracks_mie() {
        let run = SphereRun::new(false, 1.0, 1, 1).unwrap();
        let ff = run.far_field(19);
        let (bem, mie) = ff.split_at(19);
        let scale = mie.iter().cloned().fold(0.0, f64::max);
        let err = bem.iter().zip(mie).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2e-2 * scale, "{err}");
        assert!(SphereRun::new(true, 1.0, 0, 1).is_err());
    }

    #[test]
    fn slice_masks_the_obstacle() {
        let run = SphereRun::new(false, 1.0, 0, 0).unwrap();
        let s = run.slice(3.0, 21);
        assert!(s[10 * 21 + 10].is_nan());
        assert!(s[0].is_finite());
        assert_eq!(s.iter().filter(|v| v.is_nan()).count(), 37);
    }

    #[test]
    fn slice_matches_mie_near_the_sphere() {
        let run = SphereRun::new(false, 1.0, 2, 2).unwrap();
        // row 10 of 21 is z = 0; column 14 is x = 1.2
        let s = run.slice(3.0, 21);
        let x = Vec3::new(1.2, 0.0, 0.0);
        let exact = run.mie.scattered(&x).unwrap() + C64::new(0.0, x.z).exp();
        assert!((s[10 * 21 + 14] - exact.re).abs() < 1e-3, "{} vs {}", s[10 * 21 + 14], exact.re);
    }
}
