use std::path::Path;
use std::process::{Command, Output};

fn igabem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igabem")).args(args).output().expect("binary runs")
}

fn csv_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn unknown_geometry_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = igabem(&["solve", "--geometry", "teapot", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown geometry"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0, "no partial files");
}

#[test]
fn invalid_flags_are_rejected() {
    let out = igabem(&["solve", "--kappa", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = igabem(&["solve", "--points", "sphere:5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = igabem(&[
        "solve", "--geometry", "sphere", "--kappa", "1", "--p", "1", "--m", "1", "--repeat", "1",
        "--points", "sphere:5:20", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let field = csv_lines(&dir.path().join("field.csv"));
    assert!(field[0].starts_with("# igabem solve"));
    assert_eq!(field[1], "x,y,z,re,im,near_surface");
    assert_eq!(field.len(), 22);
    // 17 significant digits
    let re = field[2].split(',').nth(3).unwrap();
    assert_eq!(re.split('e').next().unwrap().trim_start_matches('-').len(), 18);
    let metrics = csv_lines(&dir.path().join("metrics.csv"));
    let cols: Vec<&str> = metrics[2].split(',').collect();
    assert_eq!(cols[5], "Converged");
    let far_error: f64 = cols[7].parse().unwrap();
    assert!(far_error < 1e-2, "{far_error}");
    let coeffs = csv_lines(&dir.path().join("coefficients.csv"));
    assert_eq!(coeffs.len(), 2 + cols[0].parse::<usize>().unwrap());
}

#[test]
fn torus_solve_reaches_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = igabem(&["solve", "--m", "1", "--repeat", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = csv_lines(&dir.path().join("metrics.csv"));
    let residual: f64 = metrics[2].split(',').nth(4).unwrap().parse().unwrap();
    assert!(residual <= 1e-12, "{residual}");
}

#[test]
fn convergence_on_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = igabem(&[
        "convergence", "--geometry", "sphere", "--kappa", "1", "--p", "0", "--m", "0", "--m-max", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&dir.path().join("convergence.csv"));
    assert_eq!(lines[1], "p,m,dofs,linf_error,time_s");
    let errors: Vec<f64> = lines[2..5].iter().map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(lines[5].starts_with("# p=0 fitted_log2_slope="));
}

#[test]
fn validate_geometry_reports_interfaces() {
    let dir = tempfile::tempdir().unwrap();
    let out = igabem(&["validate-geometry", "--p", "3", "--m", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(&dir.path().join("interfaces.csv"));
    // 16 patches, 32 glued edge pairs
    assert_eq!(lines.len(), 2 + 32 + 1);
    assert!(lines.last().unwrap().contains("discontinuous_dofs=1936"));
}

#[test]
fn validate_geometry_rejects_a_broken_file() {
    use igabem::geometry::{builtin_sphere, write_patches, Vec3};
    let dir = tempfile::tempdir().unwrap();
    let mut patches = builtin_sphere().patches().to_vec();
    patches[0] = patches[0].translated(Vec3::new(0.0, 0.0, 0.01));
    let file = dir.path().join("broken.geo");
    std::fs::write(&file, write_patches(&patches)).unwrap();
    let out = igabem(&["validate-geometry", "--geometry", file.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let lines = csv_lines(&dir.path().join("interfaces.csv"));
    let failing = lines.iter().filter(|l| l.ends_with(",0")).count();
    assert_eq!(failing, 4);
}
