use crate::config::{EvalArg, PointSpec, RunConfig};
use crate::table::{num, write_all, Table};
use crate::CliError;
use igabem::assembly::ProblemKind;
use igabem::dofmap::{Continuity, DofMap};
use igabem::geometry::{ConformityReport, SurfaceGeometry, Vec3};
use igabem::kernels::C64;
use igabem::oracle::{MieSeries, SphereProblem};
use igabem::potential::{cylinder_grid, fibonacci_sphere, EvalMode};
use igabem::scattering::{self, Compression, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Least-squares slope of `log2(error)` against the level.
pub fn log2_slope(points: &[(u32, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, e)| *e > 0.0).map(|&(m, e)| (m as f64, e.log2())).collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn read_points(path: &Path) -> Result<Vec<Vec3>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let xyz: Result<Vec<f64>, _> = rec.iter().take(3).map(str::parse).collect();
        match xyz {
            Ok(v) if v.len() == 3 => out.push(Vec3::new(v[0], v[1], v[2])),
            // a header line
            Err(_) if i == 0 => {}
            _ => return Err(CliError::Config(format!("{}: bad point on row {}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

/// Evaluation points for `solve` and `convergence`, by default 100 points
/// on the sphere of radius 5.
fn eval_points(cfg: &RunConfig) -> Result<Vec<Vec3>, CliError> {
    match &cfg.points {
        None => Ok(fibonacci_sphere(100, 5.0)),
        Some(PointSpec::Sphere { radius, count }) => Ok(fibonacci_sphere(*count, *radius)),
        Some(PointSpec::Grid { radius, z0, z1, nr, nt, nz }) => Ok(cylinder_grid(*radius, *z0, *z1, *nr, *nt, *nz)),
        Some(PointSpec::File(path)) => read_points(path),
        Some(PointSpec::Cloud { .. }) => {
            Err(CliError::Config("cloud points are only used by potential-bench".into()))
        }
    }
}

fn mie(cfg: &RunConfig) -> Result<MieSeries, CliError> {
    let kind = match cfg.problem {
        ProblemKind::SoundSoft => SphereProblem::Soft,
        ProblemKind::SoundHard => SphereProblem::Hard,
    };
    MieSeries::new(kind, cfg.kappa, 1.0, cfg.direction).map_err(|e| CliError::Config(e.to_string()))
}

fn eval_mode(cfg: &RunConfig) -> EvalMode {
    match cfg.eval {
        EvalArg::Direct => EvalMode::Direct,
        EvalArg::Clustered => EvalMode::Clustered,
    }
}

/// Solves `repeat` times and keeps the last solution with median timings.
fn timed_solve(cfg: &RunConfig, geometry: &SurfaceGeometry, p: usize, m: u32) -> Result<(Solution, f64, f64), CliError> {
    let sp = cfg.problem(p, m);
    let (mut ta, mut ts) = (Vec::new(), Vec::new());
    let mut last = None;
    for _ in 0..cfg.repeat {
        let sol = scattering::solve(&sp, geometry)?;
        ta.push(sol.timings.assembly.as_secs_f64());
        ts.push(sol.timings.solve.as_secs_f64());
        last = Some(sol);
    }
    Ok((last.expect("repeat >= 1"), median(ta), median(ts)))
}

pub fn solve(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let geometry = cfg.geometry()?;
    let points = eval_points(cfg)?;
    let (sol, ta, ts) = timed_solve(cfg, &geometry, cfg.p, cfg.m)?;
    let u = sol.scattered_field(&points, eval_mode(cfg), cfg.cluster);
    let near = sol.near_surface(&points);
    let comment = cfg.describe(name);

    let mut coeffs = Table::new("coefficients.csv", &comment, &["dof", "re", "im"]);
    for (i, c) in sol.coeffs.iter().enumerate() {
        coeffs.row(vec![i.to_string(), num(c.re), num(c.im)]);
    }
    let mut field = Table::new("field.csv", &comment, &["x", "y", "z", "re", "im", "near_surface"]);
    for ((x, v), n) in points.iter().zip(&u).zip(&near) {
        field.row(vec![num(x.x), num(x.y), num(x.z), num(v.re), num(v.im), (*n as u8).to_string()]);
    }
    let far_error = if cfg.is_builtin_sphere() {
        let mie = mie(cfg)?;
        let dirs = fibonacci_sphere(100, 1.0);
        let exact: Vec<C64> = dirs.iter().map(|d| mie.far_field(d)).collect();
        max_abs_diff(&sol.far_field(&dirs), &exact) / max_abs(&exact)
    } else {
        f64::NAN
    };
    let mut metrics = Table::new(
        "metrics.csv",
        &comment,
        &["dofs", "assembly_s", "solve_s", "iterations", "residual", "status", "near_surface_points", "far_field_error"],
    );
    metrics.row(vec![
        sol.dofs.num_dofs().to_string(),
        num(ta),
        num(ts),
        sol.gmres.iterations.to_string(),
        num(sol.gmres.residual),
        format!("{:?}", sol.gmres.status),
        near.iter().filter(|&&n| n).count().to_string(),
        num(far_error),
    ]);
    write_all(&cfg.out, &[coeffs, field, metrics])?;
    println!(
        "dofs {} iterations {} residual {:.3e} assembly {ta:.2}s solve {ts:.2}s",
        sol.dofs.num_dofs(),
        sol.gmres.iterations,
        sol.gmres.residual
    );
    if far_error.is_finite() {
        println!("far-field error against the Mie series {far_error:.3e}");
    }
    Ok(())
}

pub fn convergence(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let geometry = cfg.geometry()?;
    let points = eval_points(cfg)?;
    let oracle = if cfg.is_builtin_sphere() {
        let mie = mie(cfg)?;
        let exact = points.iter().map(|x| mie.scattered(x)).collect::<Result<Vec<_>, _>>();
        Some(exact.map_err(|e| CliError::Config(e.to_string()))?)
    } else {
        None
    };
    let mut table = Table::new("convergence.csv", &cfg.describe(name), &["p", "m", "dofs", "linf_error", "time_s"]);
    for p in cfg.p..=cfg.p_max {
        let mut rows = Vec::new();
        for m in cfg.m..=cfg.m_max {
            let t = Instant::now();
            let sol = scattering::solve(&cfg.problem(p, m), &geometry)?;
            let u = sol.scattered_field(&points, eval_mode(cfg), cfg.cluster);
            rows.push((m, sol.dofs.num_dofs(), u, t.elapsed().as_secs_f64()));
        }
        // without an oracle the finest level is the reference
        let reference = oracle.clone().unwrap_or_else(|| rows.last().expect("nonempty").2.clone());
        let mut errors = Vec::new();
        for (m, dofs, u, time) in &rows {
            let err = if oracle.is_none() && *m == cfg.m_max { f64::NAN } else { max_abs_diff(u, &reference) };
            if err.is_finite() {
                errors.push((*m, err));
            }
            table.row(vec![p.to_string(), m.to_string(), dofs.to_string(), num(err), num(*time)]);
            println!("p {p} m {m} dofs {dofs} error {err:.3e} time {time:.1}s");
        }
        if errors.len() >= 2 {
            let slope = log2_slope(&errors);
            println!("p {p} fitted log2 slope {slope:.2}");
            table.note(format!("p={p} fitted_log2_slope={}", num(slope)));
        }
    }
    write_all(&cfg.out, &[table])
}

pub fn scaling(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let geometry = cfg.geometry()?;
    let compressed = matches!(cfg.compression, Compression::H2(_));
    let mut table = Table::new(
        "scaling.csv",
        &cfg.describe(name),
        &["m", "dofs", "assembly_s", "solve_s", "total_s", "ratio", "check"],
    );
    let mut prev: Option<f64> = None;
    for m in cfg.m..=cfg.m_max {
        let (sol, ta, ts) = timed_solve(cfg, &geometry, cfg.p, m)?;
        let total = ta + ts;
        let ratio = prev.map_or(f64::NAN, |t| total / t);
        let check = match (compressed, m >= 3 && ratio.is_finite()) {
            (true, true) if ratio <= 6.0 => "PASS",
            (true, true) => "FAIL",
            (false, true) => "contrast",
            _ => "-",
        };
        println!("m {m} dofs {} total {total:.2}s ratio {ratio:.2} {check}", sol.dofs.num_dofs());
        table.row(vec![
            m.to_string(),
            sol.dofs.num_dofs().to_string(),
            num(ta),
            num(ts),
            num(total),
            num(ratio),
            check.to_string(),
        ]);
        prev = Some(total);
    }
    write_all(&cfg.out, &[table])
}

/// Uniform points in a cylinder about the z axis, dropping those too close
/// to the surface.
fn cloud(sol: &Solution, (radius, z0, z1): (f64, f64, f64), n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut batch = Vec::with_capacity(n - out.len());
        while batch.len() < n - out.len() {
            let x = Vec3::new(rng.random_range(-radius..radius), rng.random_range(-radius..radius), 0.0);
            if x.norm() <= radius {
                batch.push(Vec3::new(x.x, x.y, rng.random_range(z0..=z1)));
            }
        }
        let near = sol.near_surface(&batch);
        out.extend(batch.into_iter().zip(near).filter(|(_, n)| !n).map(|(x, _)| x));
    }
    out
}

fn default_cylinder(geometry: &SurfaceGeometry) -> (f64, f64, f64) {
    let (lo, hi) = geometry.bounding_box();
    let rxy = [lo.x, lo.y, hi.x, hi.y].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    (1.6 * rxy, lo.z - 0.4 * rxy, hi.z + 0.4 * rxy)
}

pub fn potential_bench(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let geometry = cfg.geometry()?;
    let cylinder = match cfg.points {
        None => default_cylinder(&geometry),
        Some(PointSpec::Cloud { radius, z0, z1 }) if z0 <= z1 => (radius, z0, z1),
        _ => return Err(CliError::Config("potential-bench takes --points cloud:R:Z0:Z1".into())),
    };
    let sol = scattering::solve(&cfg.problem(cfg.p, cfg.m), &geometry)?;
    let all = cloud(&sol, cylinder, cfg.n_max, cfg.seed);
    let mut table = Table::new(
        "potential_bench.csv",
        &cfg.describe(name),
        &["points", "direct_s", "clustered_s", "clustered_ratio", "rel_diff"],
    );
    let time = |mode: EvalMode, pts: &[Vec3]| {
        let mut times = Vec::new();
        let mut vals = Vec::new();
        for _ in 0..cfg.repeat {
            let t = Instant::now();
            vals = sol.scattered_field(pts, mode, cfg.cluster);
            times.push(t.elapsed().as_secs_f64());
        }
        (vals, median(times))
    };
    let mut crossover = None;
    let mut prev = None;
    let mut n = cfg.n_min;
    while n <= cfg.n_max {
        let pts = &all[..n];
        let (fast, tc) = time(EvalMode::Clustered, pts);
        let (td, diff) = if n <= cfg.direct_max {
            let (direct, td) = time(EvalMode::Direct, pts);
            (td, max_abs_diff(&fast, &direct) / max_abs(&direct))
        } else {
            (f64::NAN, f64::NAN)
        };
        if crossover.is_none() && tc < td {
            crossover = Some(n);
        }
        let ratio = prev.map_or(f64::NAN, |t| tc / t);
        println!("points {n} direct {td:.3}s clustered {tc:.3}s ratio {ratio:.2} rel diff {diff:.2e}");
        table.row(vec![n.to_string(), num(td), num(tc), num(ratio), num(diff)]);
        prev = Some(tc);
        n *= 2;
    }
    match crossover {
        Some(n) => {
            println!("clustered evaluation beats direct from {n} points");
            table.note(format!("crossover={n}"));
        }
        None => {
            println!("no crossover in the measured range");
            table.note("crossover=none".into());
        }
    }
    write_all(&cfg.out, &[table])
}

pub fn validate_geometry(cfg: &RunConfig, name: &str) -> Result<(), CliError> {
    let patches = cfg.patches()?;
    let report = ConformityReport::compute(&patches);
    let comment = cfg.describe(name);
    let mut table = Table::new(
        "interfaces.csv",
        &comment,
        &["patch_a", "edge_a", "patch_b", "edge_b", "reversed", "mismatch", "pass"],
    );
    for c in &report.interfaces {
        let f = c.interface;
        table.row(vec![
            f.a.0.to_string(),
            f.a.1.to_string(),
            f.b.0.to_string(),
            f.b.1.to_string(),
            (f.reversed as u8).to_string(),
            num(c.mismatch),
            (c.passes() as u8).to_string(),
        ]);
    }
    println!(
        "patches {} interfaces {} failing {} unmatched edges {} max mismatch {:.3e}",
        patches.len(),
        report.interfaces.len(),
        report.failures(),
        report.unmatched_edges,
        report.max_mismatch()
    );
    let checked = SurfaceGeometry::new(patches);
    if let Ok(geometry) = &checked {
        let disc = DofMap::new(geometry, cfg.p, cfg.m, Continuity::Discontinuous).map_err(scattering::ScatteringError::from)?;
        let cont = DofMap::new(geometry, cfg.p, cfg.m, Continuity::Continuous).map_err(scattering::ScatteringError::from)?;
        println!(
            "area {:.12} dofs at p={} m={}: discontinuous {} continuous {}",
            geometry.area(16, 8),
            cfg.p,
            cfg.m,
            disc.num_dofs(),
            cont.num_dofs()
        );
        table.note(format!(
            "valid=1 discontinuous_dofs={} continuous_dofs={}",
            disc.num_dofs(),
            cont.num_dofs()
        ));
    }
    if let Err(e) = &checked {
        println!("invalid: {e}");
        table.note(format!("valid=0 reason={e}"));
    }
    write_all(&cfg.out, &[table])?;
    checked.map(|_| ()).map_err(|_| CliError::InvalidGeometry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(u32, f64)> = (0..4).map(|m| (m, 3.0 * 2f64.powi(-4 * m as i32))).collect();
        assert!((log2_slope(&pts) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn median_of_odd_count() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
    }
}
