//! Gauss–Legendre rules and regularizing rules for singular element pairs.
//!
//! Singular pairs are integrated in relative coordinates: the pair of
//! reference squares is split into simplicial pieces around the singular
//! set and each piece is mapped by a Duffy-type transform whose Jacobian
//! cancels the `1/r` kernel singularity. Every resulting integrand is
//! analytic, so tensor Gauss rules converge exponentially.

use std::sync::OnceLock;
use thiserror::Error;

pub const MAX_ORDER: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature order {0} outside 1..={MAX_ORDER}")]
    BadOrder(usize),
}

/// Gauss–Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// The `n`-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_rule(n: usize) -> Result<&'static GaussRule, QuadratureError> {
    static RULES: OnceLock<Vec<OnceLock<GaussRule>>> = OnceLock::new();
    if n == 0 || n > MAX_ORDER {
        return Err(QuadratureError::BadOrder(n));
    }
    let rules = RULES.get_or_init(|| (0..MAX_ORDER).map(|_| OnceLock::new()).collect());
    Ok(rules[n - 1].get_or_init(|| GaussRule::compute(n)))
}

/// How two elements touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairRegime {
    Identical,
    CommonEdge,
    CommonVertex,
    Far,
}

/// A point of a rule on `[0,1]² × [0,1]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPoint {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub w: f64,
}

/// One of the eight symmetries of the unit square, mapping reference
/// coordinates to local cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Dihedral {
    pub swap: bool,
    pub flip_u: bool,
    pub flip_v: bool,
}

impl Dihedral {
    pub fn all() -> impl Iterator<Item = Dihedral> {
        (0..8).map(|k| Dihedral {
            swap: k & 1 != 0,
            flip_u: k & 2 != 0,
            flip_v: k & 4 != 0,
        })
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let [s, t] = if self.swap { [p[1], p[0]] } else { p };
        [
            if self.flip_u { 1.0 - s } else { s },
            if self.flip_v { 1.0 - t } else { t },
        ]
    }

    /// Index (counterclockwise from the origin) of the cell corner that a
    /// reference corner lands on.
    fn corner(&self, reference: usize) -> usize {
        const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let [u, v] = self.apply(CORNERS[reference]);
        match (u > 0.5, v > 0.5) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }
}

/// Classifies two elements from their corner node ids (counterclockwise
/// from the local origin) and picks reference frames in which the shared
/// set sits where the singular rules expect it: the common edge at
/// `t = 0` with matching parameter, the common vertex at the origin.
pub fn align_pair(a: &[usize; 4], b: &[usize; 4]) -> (PairRegime, Dihedral, Dihedral) {
    let shared: Vec<usize> = a.iter().copied().filter(|n| b.contains(n)).collect();
    let id = Dihedral::default();
    match shared.len() {
        0 => (PairRegime::Far, id, id),
        4 => {
            if a == b {
                (PairRegime::Identical, id, id)
            } else {
                // same cell seen with a different corner labelling
                let tb = Dihedral::all()
                    .find(|d| (0..4).all(|r| b[d.corner(r)] == a[r]))
                    .expect("matching labelling");
                (PairRegime::Identical, id, tb)
            }
        }
        1 => {
            let n = shared[0];
            let frame = |nodes: &[usize; 4]| {
                Dihedral::all()
                    .find(|d| nodes[d.corner(0)] == n)
                    .expect("vertex frame")
            };
            (PairRegime::CommonVertex, frame(a), frame(b))
        }
        2 => {
            let ta = Dihedral::all()
                .find(|d| {
                    let (c0, c1) = (a[d.corner(0)], a[d.corner(1)]);
                    shared.contains(&c0) && shared.contains(&c1)
                })
                .expect("edge frame");
            let (n0, n1) = (a[ta.corner(0)], a[ta.corner(1)]);
            let tb = Dihedral::all()
                .find(|d| b[d.corner(0)] == n0 && b[d.corner(1)] == n1)
                .expect("edge frame");
            (PairRegime::CommonEdge, ta, tb)
        }
        k => panic!("elements share {k} corners; mesh is not a conforming quad mesh"),
    }
}

/// Plain tensor rule for well separated pairs.
pub fn tensor_pair_rule(q: usize) -> Vec<PairPoint> {
    let g = gauss_rule(q).expect("valid order");
    let mut out = Vec::with_capacity(q.pow(4));
    for (x1, w1) in g.iter() {
        for (x2, w2) in g.iter() {
            for (y1, w3) in g.iter() {
                for (y2, w4) in g.iter() {
                    out.push(PairPoint {
                        x: [x1, x2],
                        y: [y1, y2],
                        w: w1 * w2 * w3 * w4,
                    });
                }
            }
        }
    }
    out
}

/// `ξ` with `ξ + z ∈ [0,1]` parametrized by `a ∈ [0,1]`.
fn shifted(a: f64, z: f64) -> f64 {
    (-z).max(0.0) + a * (1.0 - z.abs())
}

/// Rule on `[0,1]² × [0,1]²` for the regime, using `q` points per
/// direction of each piece.
pub fn singular_pair_rule(regime: PairRegime, q: usize) -> Vec<PairPoint> {
    let g = gauss_rule(q).expect("valid order");
    let mut out = Vec::new();
    match regime {
        PairRegime::Far => return tensor_pair_rule(q),
        PairRegime::Identical => {
            // z = y - x; four sign quadrants, two triangles each
            for s1 in [-1.0, 1.0] {
                for s2 in [-1.0, 1.0] {
                    for tri in 0..2 {
                        for (rho, wr) in g.iter() {
                            for (t, wt) in g.iter() {
                                let (m1, m2) = if tri == 0 { (rho, rho * t) } else { (rho * t, rho) };
                                let (z1, z2) = (s1 * m1, s2 * m2);
                                let jac = rho * (1.0 - m1) * (1.0 - m2);
                                for (a1, w1) in g.iter() {
                                    for (a2, w2) in g.iter() {
                                        let x = [shifted(a1, z1), shifted(a2, z2)];
                                        out.push(PairPoint {
                                            x,
                                            y: [x[0] + z1, x[1] + z2],
                                            w: wr * wt * w1 * w2 * jac,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        PairRegime::CommonEdge => {
            // shared edge x2 = y2 = 0 with x1 = y1; z1 = y1 - x1
            for s in [-1.0, 1.0] {
                for pyr in 0..3 {
                    for (rho, wr) in g.iter() {
                        for (t1, wt1) in g.iter() {
                            for (t2, wt2) in g.iter() {
                                let c = match pyr {
                                    0 => [rho, rho * t1, rho * t2],
                                    1 => [rho * t1, rho, rho * t2],
                                    _ => [rho * t1, rho * t2, rho],
                                };
                                let z1 = s * c[0];
                                let jac = rho * rho * (1.0 - c[0]);
                                for (a, wa) in g.iter() {
                                    let x1 = shifted(a, z1);
                                    out.push(PairPoint {
                                        x: [x1, c[1]],
                                        y: [x1 + z1, c[2]],
                                        w: wr * wt1 * wt2 * wa * jac,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        PairRegime::CommonVertex => {
            // shared corner at the origin of both squares
            for pyr in 0..4 {
                for (rho, wr) in g.iter() {
                    for (t1, w1) in g.iter() {
                        for (t2, w2) in g.iter() {
                            for (t3, w3) in g.iter() {
                                let rest = [rho * t1, rho * t2, rho * t3];
                                let mut v = [0.0; 4];
                                let mut k = 0;
                                for (j, slot) in v.iter_mut().enumerate() {
                                    if j == pyr {
                                        *slot = rho;
                                    } else {
                                        *slot = rest[k];
                                        k += 1;
                                    }
                                }
                                out.push(PairPoint {
                                    x: [v[0], v[1]],
                                    y: [v[2], v[3]],
                                    w: wr * w1 * w2 * w3 * rho.powi(3),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
