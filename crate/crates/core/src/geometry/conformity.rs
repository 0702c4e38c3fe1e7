use super::{edge_param, GeometryError, NurbsPatch, Vec3};

/// Interfaces whose edges deviate by more than this fail the check.
pub const CONFORMITY_TOL: f64 = 1e-10;

const SAMPLES: usize = 9;

/// Two glued patch edges. `reversed` means `t` on `a` meets `1 - t` on `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub reversed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceCheck {
    pub interface: Interface,
    /// Largest pointwise distance between the two edge curves.
    pub mismatch: f64,
}

impl InterfaceCheck {
    pub fn passes(&self) -> bool {
        self.mismatch < CONFORMITY_TOL
    }
}

#[derive(Debug, Clone)]
pub struct ConformityReport {
    pub interfaces: Vec<InterfaceCheck>,
    pub unmatched_edges: usize,
}

fn lobatto(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        .collect()
}

fn edge_samples(patch: &NurbsPatch, edge: usize, ts: &[f64]) -> Vec<Vec3> {
    ts.iter()
        .map(|&t| {
            let (x, y) = edge_param(edge, t);
            patch.point(x, y)
        })
        .collect()
}

impl ConformityReport {
    /// Pairs every patch edge with its closest counterpart and records the
    /// pointwise mismatch of each pairing.
    pub fn compute(patches: &[NurbsPatch]) -> Self {
        let ts = lobatto(SAMPLES);
        let samples: Vec<Vec<Vec3>> = patches
            .iter()
            .flat_map(|p| (0..4).map(move |e| (p, e)))
            .map(|(p, e)| edge_samples(p, e, &ts))
            .collect();
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for s in samples.iter().flatten() {
            lo = lo.inf(s);
            hi = hi.sup(s);
        }
        let loose = 1e-2 * (hi - lo).norm().max(f64::MIN_POSITIVE);

        let mut candidates = Vec::new();
        for ea in 0..samples.len() {
            for eb in ea + 1..samples.len() {
                let (sa, sb) = (&samples[ea], &samples[eb]);
                // cheap endpoint screen
                let ends_fwd = (sa[0] - sb[0]).norm().max((sa[SAMPLES - 1] - sb[SAMPLES - 1]).norm());
                let ends_rev = (sa[0] - sb[SAMPLES - 1]).norm().max((sa[SAMPLES - 1] - sb[0]).norm());
                if ends_fwd.min(ends_rev) > loose {
                    continue;
                }
                let fwd = (0..SAMPLES).map(|k| (sa[k] - sb[k]).norm()).fold(0.0, f64::max);
                let rev = (0..SAMPLES)
                    .map(|k| (sa[k] - sb[SAMPLES - 1 - k]).norm())
                    .fold(0.0, f64::max);
                let (mismatch, reversed) = if rev < fwd { (rev, true) } else { (fwd, false) };
                if mismatch <= loose {
                    candidates.push((mismatch, ea, eb, reversed));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut used = vec![false; samples.len()];
        let mut interfaces = Vec::new();
        for (mismatch, ea, eb, reversed) in candidates {
            if used[ea] || used[eb] {
                continue;
            }
            used[ea] = true;
            used[eb] = true;
            interfaces.push(InterfaceCheck {
                interface: Interface {
                    a: (ea / 4, ea % 4),
                    b: (eb / 4, eb % 4),
                    reversed,
                },
                mismatch,
            });
        }
        interfaces.sort_by_key(|c| (c.interface.a, c.interface.b));
        let unmatched_edges = used.iter().filter(|u| !**u).count();
        Self {
            interfaces,
            unmatched_edges,
        }
    }

    pub fn passes(&self) -> bool {
        self.unmatched_edges == 0 && self.interfaces.iter().all(InterfaceCheck::passes)
    }

    pub fn failures(&self) -> usize {
        self.interfaces.iter().filter(|c| !c.passes()).count()
    }

    pub fn max_mismatch(&self) -> f64 {
        self.interfaces.iter().map(|c| c.mismatch).fold(0.0, f64::max)
    }
}

pub(super) fn check_nondegenerate(index: usize, patch: &NurbsPatch) -> Result<(), GeometryError> {
    let n = 9;
    let measures: Vec<f64> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| patch.eval(a as f64 / (n - 1) as f64, b as f64 / (n - 1) as f64).measure)
        .collect();
    let max = measures.iter().cloned().fold(0.0, f64::max);
    let min = measures.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < 1e-8 * max {
        return Err(GeometryError::Degenerate(index));
    }
    Ok(())
}

/// +1 if the edge parameter runs counterclockwise around the reference square.
fn boundary_sign(edge: usize) -> i32 {
    if edge < 2 {
        1
    } else {
        -1
    }
}

/// Neighbouring patches must traverse their common edge in opposite
/// directions, and the enclosed volume `⅓∫ x·n` must be positive.
pub(super) fn check_orientation(
    patches: &[NurbsPatch],
    interfaces: &[Interface],
) -> Result<(), GeometryError> {
    let mut bad = vec![0usize; patches.len()];
    for f in interfaces {
        let dir = if f.reversed { -1 } else { 1 };
        if boundary_sign(f.a.1) * boundary_sign(f.b.1) * dir != -1 {
            bad[f.a.0] += 1;
            bad[f.b.0] += 1;
        }
    }
    if let Some((patch, _)) = bad.iter().enumerate().filter(|(_, &b)| b > 0).max_by_key(|(_, &b)| b) {
        return Err(GeometryError::InwardOrientation(patch));
    }
    let rule = crate::quadrature::gauss_rule(8).expect("valid order");
    let mut volume = 0.0;
    for patch in patches {
        for (x, wx) in rule.iter() {
            for (y, wy) in rule.iter() {
                let g = patch.eval(x, y);
                volume += wx * wy * g.measure * g.point.dot(&g.normal) / 3.0;
            }
        }
    }
    if volume <= 0.0 {
        return Err(GeometryError::InwardOrientation(0));
    }
    Ok(())
}
