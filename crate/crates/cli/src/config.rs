use clap::{Args, ValueEnum};
use igabem::assembly::{Coupling, ProblemKind};
use igabem::geometry::{builtin_sphere, builtin_torus, load_geometry, Vec3};
use igabem::geometry::{parse_patches, NurbsPatch, SurfaceGeometry};
use igabem::h2::H2Params;
use igabem::potential::ClusterParams;
use igabem::scattering::{Compression, ScatteringProblem};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Dense,
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalArg {
    Direct,
    Clustered,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// `torus`, `sphere` or a geometry file
    #[arg(long, default_value = "torus")]
    pub geometry: String,
    #[arg(long, value_enum, default_value = "soft")]
    pub problem: ProblemArg,
    #[arg(long, default_value_t = 2.5)]
    pub kappa: f64,
    /// incident direction, normalised before use
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_negative_numbers = true,
          default_values_t = [1.0, 0.0, 0.0])]
    pub dir: Vec<f64>,
    /// CFIE coupling, defaults to the wavenumber
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// last degree of a convergence study
    #[arg(long)]
    pub p_max: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    #[arg(long)]
    pub m_max: Option<u32>,
    #[arg(long, value_enum, default_value = "dense")]
    pub mode: ModeArg,
    /// Chebyshev points per direction in the H² operators
    #[arg(long, default_value_t = 9)]
    pub q: usize,
    #[arg(long, default_value_t = 1.6)]
    pub eta_adm: f64,
    /// elements per side of an H² leaf cluster
    #[arg(long, default_value_t = 1)]
    pub leaf: usize,
    #[arg(long, value_enum, default_value = "direct")]
    pub eval: EvalArg,
    /// Chebyshev points per direction in clustered potential evaluation
    #[arg(long, default_value_t = 9)]
    pub pot_q: usize,
    #[arg(long, default_value_t = 1.0)]
    pub pot_eta_adm: f64,
    /// `sphere:R:N`, `grid:R:Z0:Z1:NR:NT:NZ` (cylinder), `cloud:R:Z0:Z1`
    /// (random, for potential-bench) or `file:PATH`
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub n_min: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_max: usize,
    /// skip direct evaluation above this many points
    #[arg(long)]
    pub direct_max: Option<usize>,
    /// timings are the median over this many runs
    #[arg(long, default_value_t = 3)]
    pub repeat: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 30)]
    pub restart: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointSpec {
    Sphere { radius: f64, count: usize },
    Grid { radius: f64, z0: f64, z1: f64, nr: usize, nt: usize, nz: usize },
    Cloud { radius: f64, z0: f64, z1: f64 },
    File(PathBuf),
}

impl PointSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("bad point specification `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        if kind == "file" {
            return Ok(PointSpec::File(PathBuf::from(rest)));
        }
        let f: Vec<f64> = rest.split(':').map(|v| v.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let count = |v: f64| if v >= 1.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(bad()) };
        let spec = match (kind, f.as_slice()) {
            ("sphere", &[radius, n]) => PointSpec::Sphere { radius, count: count(n)? },
            ("grid", &[radius, z0, z1, nr, nt, nz]) => PointSpec::Grid {
                radius,
                z0,
                z1,
                nr: count(nr)?,
                nt: count(nt)?,
                nz: count(nz)?,
            },
            ("cloud", &[radius, z0, z1]) => PointSpec::Cloud { radius, z0, z1 },
            _ => return Err(bad()),
        };
        let radius = match spec {
            PointSpec::Sphere { radius, .. } | PointSpec::Grid { radius, .. } | PointSpec::Cloud { radius, .. } => radius,
            PointSpec::File(_) => 1.0,
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(bad());
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry_name: String,
    pub problem: ProblemKind,
    pub kappa: f64,
    pub direction: Vec3,
    pub eta: f64,
    pub p: usize,
    pub p_max: usize,
    pub m: u32,
    pub m_max: u32,
    pub compression: Compression,
    pub eval: EvalArg,
    pub cluster: ClusterParams,
    pub points: Option<PointSpec>,
    pub n_min: usize,
    pub n_max: usize,
    pub direct_max: usize,
    pub repeat: usize,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    pub tol: f64,
    pub restart: usize,
}

fn check(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg.to_string()))
    }
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self, CliError> {
        check(a.kappa > 0.0 && a.kappa.is_finite(), "--kappa must be positive")?;
        let direction = Vec3::new(a.dir[0], a.dir[1], a.dir[2]);
        check(direction.norm() > 0.0 && direction.norm().is_finite(), "--dir must be a nonzero vector")?;
        let eta = a.eta.unwrap_or(a.kappa);
        check(eta.is_finite(), "--eta must be finite")?;
        check(a.p <= 8, "--p must be at most 8")?;
        let p_max = a.p_max.unwrap_or(a.p);
        check((a.p..=8).contains(&p_max), "--p-max must lie between --p and 8")?;
        check(a.m <= 8, "--m must be at most 8")?;
        let m_max = a.m_max.unwrap_or(a.m);
        check((a.m..=8).contains(&m_max), "--m-max must lie between --m and 8")?;
        check(a.q >= 2 && a.q <= 16, "--q must lie in 2..=16")?;
        check(a.pot_q >= 2 && a.pot_q <= 16, "--pot-q must lie in 2..=16")?;
        check(a.eta_adm > 0.0 && a.pot_eta_adm > 0.0, "admissibility parameters must be positive")?;
        check(a.leaf >= 1, "--leaf must be at least 1")?;
        check(a.n_min >= 1 && a.n_min <= a.n_max, "need 1 <= --n-min <= --n-max")?;
        check(a.repeat >= 1, "--repeat must be at least 1")?;
        check(a.threads != Some(0), "--threads must be at least 1")?;
        check(a.tol > 0.0 && a.tol < 1.0, "--tol must lie in (0, 1)")?;
        check(a.restart >= 1, "--restart must be at least 1")?;
        let compression = match a.mode {
            ModeArg::Dense => Compression::Dense,
            ModeArg::H2 => Compression::H2(H2Params {
                q: a.q,
                eta_adm: a.eta_adm,
                leaf_side: a.leaf,
                ..Default::default()
            }),
        };
        Ok(Self {
            geometry_name: a.geometry.clone(),
            problem: match a.problem {
                ProblemArg::Soft => ProblemKind::SoundSoft,
                ProblemArg::Hard => ProblemKind::SoundHard,
            },
            kappa: a.kappa,
            direction: direction.normalize(),
            eta,
            p: a.p,
            p_max,
            m: a.m,
            m_max,
            compression,
            eval: a.eval,
            cluster: ClusterParams {
                q: a.pot_q,
                eta_adm: a.pot_eta_adm,
                ..Default::default()
            },
            points: a.points.as_deref().map(PointSpec::parse).transpose()?,
            n_min: a.n_min,
            n_max: a.n_max,
            direct_max: a.direct_max.unwrap_or(a.n_max),
            repeat: a.repeat,
            out: a.out.clone(),
            threads: a.threads,
            seed: a.seed,
            tol: a.tol,
            restart: a.restart,
        })
    }

    pub fn problem(&self, p: usize, m: u32) -> ScatteringProblem {
        let mut sp = ScatteringProblem::new(self.problem, self.kappa, p, m);
        sp.direction = self.direction;
        sp.coupling = Coupling::Eta(self.eta);
        sp.compression = self.compression;
        sp.gmres.tol = self.tol;
        sp.gmres.restart = self.restart;
        sp
    }

    pub fn is_builtin_sphere(&self) -> bool {
        self.geometry_name == "sphere"
    }

    pub fn patches(&self) -> Result<Vec<NurbsPatch>, CliError> {
        match self.geometry_name.as_str() {
            "torus" => Ok(builtin_torus().patches().to_vec()),
            "sphere" => Ok(builtin_sphere().patches().to_vec()),
            path if Path::new(path).is_file() => Ok(parse_patches(&std::fs::read_to_string(path)?)?),
            name => Err(CliError::UnknownGeometry(name.to_string())),
        }
    }

    pub fn geometry(&self) -> Result<SurfaceGeometry, CliError> {
        match self.geometry_name.as_str() {
            "torus" => Ok(builtin_torus()),
            "sphere" => Ok(builtin_sphere()),
            path if Path::new(path).is_file() => Ok(load_geometry(path)?),
            name => Err(CliError::UnknownGeometry(name.to_string())),
        }
    }

    /// One line of `key=value` pairs for the CSV header comment.
    pub fn describe(&self, command: &str) -> String {
        let mut s = format!("igabem {command} (desk-scale run)");
        let d = self.direction;
        let problem = match self.problem {
            ProblemKind::SoundSoft => "soft",
            ProblemKind::SoundHard => "hard",
        };
        let _ = write!(
            s,
            " geometry={} problem={problem} kappa={} dir={}:{}:{} eta={} p={}..{} m={}..{}",
            self.geometry_name, self.kappa, d.x, d.y, d.z, self.eta, self.p, self.p_max, self.m, self.m_max
        );
        match self.compression {
            Compression::Dense => s.push_str(" mode=dense"),
            Compression::H2(h) => {
                let _ = write!(s, " mode=h2 q={} eta_adm={} leaf={}", h.q, h.eta_adm, h.leaf_side);
            }
        }
        let _ = write!(
            s,
            " eval={:?} pot_q={} pot_eta_adm={} points={:?} n={}..{} direct_max={} repeat={} seed={} tol={} restart={}",
            self.eval,
            self.cluster.q,
            self.cluster.eta_adm,
            self.points,
            self.n_min,
            self.n_max,
            self.direct_max,
            self.repeat,
            self.seed,
            self.tol,
            self.restart
        );
        if let Some(t) = self.threads {
            let _ = write!(s, " threads={t}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_specs() {
        assert_eq!(PointSpec::parse("sphere:5:100").unwrap(), PointSpec::Sphere { radius: 5.0, count: 100 });
        assert_eq!(
            PointSpec::parse("grid:4:-1.5:1.5:10:20:5").unwrap(),
            PointSpec::Grid { radius: 4.0, z0: -1.5, z1: 1.5, nr: 10, nt: 20, nz: 5 }
        );
        assert_eq!(PointSpec::parse("file:a.csv").unwrap(), PointSpec::File("a.csv".into()));
        for bad in ["sphere:5", "sphere:-1:10", "sphere:5:2.5", "cube:1:2", "grid:1:2:3"] {
            assert!(PointSpec::parse(bad).is_err(), "{bad}");
        }
    }
}
