//! End-to-end scattering solves: CFIE assembly, GMRES, and evaluation of
//! the scattered field and far-field pattern from the computed density.

use crate::assembly::{
    assemble_dense, assemble_mass, assemble_rhs, AssemblyError, Coupling, OperatorKind, ProblemKind,
    QuadratureOrders,
};
use crate::dofmap::{Continuity, DofError, DofMap};
use crate::geometry::{SurfaceGeometry, Vec3};
use crate::h2::{H2Error, H2Matrix, H2Params};
use crate::gmres::{gmres_preconditioned, GmresConfig, GmresResult};
use crate::kernels::C64;
use crate::operator::{ComposedOperator, DenseOperator, LinearOperator, OperatorError, SpdInverse};
use crate::potential::{
    far_field, near_surface_flags, potential_direct, ClusterParams, ClusteredPotential, EvalMode, LayerKind,
    SourceSet,
};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error(transparent)]
    Dof(#[from] DofError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    H2(#[from] H2Error),
    #[error("wavenumber must be positive and finite, got {0}")]
    BadWavenumber(f64),
}

/// How boundary operators are represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compression {
    Dense,
    H2(H2Params),
}

/// Sign choices that the trace conventions leave open. The defaults
/// reproduce the Mie series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignConvention {
    /// `s` in `½M − K + s·iηW` for the sound-hard equation
    pub hard_coupling: f64,
    /// `u_s = soft_potential · SL(∂u/∂n)`
    pub soft_potential: f64,
    /// `u_s = hard_potential · DL(u)`
    pub hard_potential: f64,
}

impl Default for SignConvention {
    fn default() -> Self {
        Self {
            hard_coupling: -1.0,
            soft_potential: -1.0,
            hard_potential: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringProblem {
    pub problem: ProblemKind,
    pub kappa: f64,
    pub direction: Vec3,
    pub coupling: Coupling,
    pub degree: usize,
    pub level: u32,
    pub orders: QuadratureOrders,
    pub compression: Compression,
    pub gmres: GmresConfig,
    pub preconditioner: Preconditioner,
    pub signs: SignConvention,
}

/// Right preconditioner for GMRES.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// the inverse mass matrix; turns the soft equation into a
    /// second-kind operator on coefficients and keeps iteration counts
    /// flat, but hurts the hypersingular hard equation
    Mass,
}

impl ScatteringProblem {
    /// Plane wave along `+z`, `η = κ`, dense operators.
    pub fn new(problem: ProblemKind, kappa: f64, degree: usize, level: u32) -> Self {
        Self {
            problem,
            kappa,
            direction: Vec3::new(0.0, 0.0, 1.0),
            coupling: Coupling::Eta(kappa),
            degree,
            level,
            orders: QuadratureOrders::for_degree(degree),
            compression: Compression::Dense,
            gmres: GmresConfig::default(),
            preconditioner: match problem {
                ProblemKind::SoundSoft => Preconditioner::Mass,
                ProblemKind::SoundHard => Preconditioner::None,
            },
            signs: SignConvention::default(),
        }
    }

    /// Discontinuous splines for the Neumann data of soft scatterers,
    /// continuous splines for the Dirichlet data of hard ones.
    pub fn continuity(&self) -> Continuity {
        match self.problem {
            ProblemKind::SoundSoft => Continuity::Discontinuous,
            ProblemKind::SoundHard => Continuity::Continuous,
        }
    }

    pub fn dofs(&self, geometry: &SurfaceGeometry) -> Result<DofMap, ScatteringError> {
        Ok(DofMap::new(geometry, self.degree, self.level, self.continuity())?)
    }
}

fn operator(
    kind: OperatorKind,
    kappa: f64,
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
    orders: QuadratureOrders,
    compression: Compression,
) -> Result<Arc<dyn LinearOperator>, ScatteringError> {
    match compression {
        Compression::Dense => Ok(Arc::new(DenseOperator::new(assemble_dense(kind, kappa, geometry, dofs, orders)?))),
        Compression::H2(params) => Ok(Arc::new(H2Matrix::new(kind, kappa, geometry, dofs, orders, params)?)),
    }
}

/// The CFIE system operator:
/// soft `½M + K* − iηV`, hard `½M − K + s·iηW`.
pub fn cfie_system(
    sp: &ScatteringProblem,
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
) -> Result<ComposedOperator, ScatteringError> {
    let eta = sp.coupling.eta()?;
    let half = C64::new(0.5, 0.0);
    let mut terms: Vec<(C64, Arc<dyn LinearOperator>)> = vec![(half, Arc::new(assemble_mass(geometry, dofs)))];
    let op = |kind| operator(kind, sp.kappa, geometry, dofs, sp.orders, sp.compression);
    match sp.problem {
        ProblemKind::SoundSoft => match sp.compression {
            // one compressed matrix for K* − iηV
            Compression::H2(params) => terms.push((
                C64::new(1.0, 0.0),
                Arc::new(H2Matrix::combined(
                    OperatorKind::AdjointDoubleLayer,
                    C64::new(0.0, -eta),
                    sp.kappa,
                    geometry,
                    dofs,
                    sp.orders,
                    params,
                )?),
            )),
            Compression::Dense => {
                terms.push((C64::new(1.0, 0.0), op(OperatorKind::AdjointDoubleLayer)?));
                if eta != 0.0 {
                    terms.push((C64::new(0.0, -eta), op(OperatorKind::SingleLayer)?));
                }
            }
        },
        ProblemKind::SoundHard => {
            terms.push((C64::new(-1.0, 0.0), op(OperatorKind::DoubleLayer)?));
            if eta != 0.0 {
                terms.push((C64::new(0.0, sp.signs.hard_coupling * eta), op(OperatorKind::Hypersingular)?));
            }
        }
    }
    Ok(ComposedOperator::new(terms)?)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub assembly: Duration,
    pub solve: Duration,
}

/// A solved scattering problem: the unknown Cauchy datum as spline
/// coefficients.
#[derive(Debug, Clone)]
pub struct Solution {
    pub problem: ScatteringProblem,
    pub geometry: SurfaceGeometry,
    pub dofs: DofMap,
    pub coeffs: Vec<C64>,
    pub gmres: GmresResult,
    pub timings: Timings,
}

// there is no clock on wasm32-unknown-unknown; timings read zero there
#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl Fn() -> Duration {
    let t = std::time::Instant::now();
    move || t.elapsed()
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl Fn() -> Duration {
    || Duration::ZERO
}

pub fn solve(sp: &ScatteringProblem, geometry: &SurfaceGeometry) -> Result<Solution, ScatteringError> {
    if !(sp.kappa > 0.0 && sp.kappa.is_finite()) {
        return Err(ScatteringError::BadWavenumber(sp.kappa));
    }
    let dofs = sp.dofs(geometry)?;
    let t0 = stopwatch();
    let system = cfie_system(sp, geometry, &dofs)?;
    let rhs = assemble_rhs(sp.problem, sp.kappa, &sp.direction, sp.coupling, geometry, &dofs)?;
    let assembly = t0();
    let t1 = stopwatch();
    let prec = match sp.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Mass => Some(SpdInverse::new(assemble_mass(geometry, &dofs))),
    };
    let res = gmres_preconditioned(&system, prec.as_ref().map(|p| p as &dyn LinearOperator), &rhs, &sp.gmres)?;
    let solve = t1();
    Ok(Solution {
        problem: sp.clone(),
        geometry: geometry.clone(),
        coeffs: res.x.clone(),
        gmres: res,
        dofs,
        timings: Timings { assembly, solve },
    })
}

impl Solution {
    fn layer(&self) -> (LayerKind, f64) {
        match self.problem.problem {
            ProblemKind::SoundSoft => (LayerKind::SingleLayer, self.problem.signs.soft_potential),
            ProblemKind::SoundHard => (LayerKind::DoubleLayer, self.problem.signs.hard_potential),
        }
    }

    pub fn sources(&self) -> SourceSet {
        SourceSet::new(&self.geometry, &self.dofs, &self.coeffs, self.dofs.degree() + 3)
    }

    /// Scattered field at points off the surface.
    pub fn scattered_field(&self, points: &[Vec3], mode: EvalMode, params: ClusterParams) -> Vec<C64> {
        let (kind, sign) = self.layer();
        let src = self.sources();
        let vals = match mode {
            EvalMode::Direct => potential_direct(kind, self.problem.kappa, &src, points),
            EvalMode::Clustered => ClusteredPotential::new(kind, self.problem.kappa, &src, params).evaluate(points),
        };
        vals.into_iter().map(|v| v * sign).collect()
    }

    /// Direct evaluation with `q²` source points per element. A larger `q`
    /// keeps the quadrature accurate closer to the surface than the default.
    pub fn scattered_field_with_order(&self, points: &[Vec3], q: usize) -> Vec<C64> {
        let (kind, sign) = self.layer();
        let src = SourceSet::new(&self.geometry, &self.dofs, &self.coeffs, q);
        potential_direct(kind, self.problem.kappa, &src, points)
            .into_iter()
            .map(|v| v * sign)
            .collect()
    }

    pub fn far_field(&self, directions: &[Vec3]) -> Vec<C64> {
        let (kind, sign) = self.layer();
        far_field(kind, self.problem.kappa, &self.sources(), directions)
            .into_iter()
            .map(|v| v * sign)
            .collect()
    }

    /// Points too close to the surface for the potential quadrature.
    pub fn near_surface(&self, points: &[Vec3]) -> Vec<bool> {
        near_surface_flags(&self.geometry, &self.dofs, points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin_sphere;
    use crate::oracle::{MieSeries, SphereProblem};

    fn fib_sphere(n: usize, r: f64) -> Vec<Vec3> {
        let ga = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let s = (1.0 - z * z).sqrt();
                let t = ga * i as f64;
                Vec3::new(s * t.cos(), s * t.sin(), z) * r
            })
            .collect()
    }

    fn mie_error(problem: ProblemKind, p: usize, m: u32) -> f64 {
        let sphere = builtin_sphere();
        let sp = ScatteringProblem::new(problem, 1.0, p, m);
        let sol = solve(&sp, &sphere).unwrap();
        let kind = match problem {
            ProblemKind::SoundSoft => SphereProblem::Soft,
            ProblemKind::SoundHard => SphereProblem::Hard,
        };
        let mie = MieSeries::new(kind, 1.0, 1.0, sp.direction).unwrap();
        let pts = fib_sphere(100, 5.0);
        let u = sol.scattered_field(&pts, EvalMode::Direct, ClusterParams::default());
        let exact: Vec<C64> = pts.iter().map(|x| mie.scattered(x).unwrap()).collect();
        let scale = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
        u.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn soft_sphere_matches_mie() {
        let err = mie_error(ProblemKind::SoundSoft, 1, 2);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn compressed_solve_agrees_with_dense() {
        let sphere = builtin_sphere();
        let mut sp = ScatteringProblem::new(ProblemKind::SoundSoft, 1.0, 1, 1);
        let dense = solve(&sp, &sphere).unwrap();
        sp.compression = Compression::H2(H2Params::default());
        let h2 = solve(&sp, &sphere).unwrap();
        let err = dense.coeffs.iter().zip(&h2.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn hard_sphere_matches_mie() {
        let err = mie_error(ProblemKind::SoundHard, 1, 2);
        assert!(err < 1e-2, "{err}");
    }
}
