//! Point-cluster evaluation of layer potentials: octrees over quadrature
//! and evaluation points, tensor Chebyshev interpolation of the kernel on
//! admissible box pairs, everything else summed directly.

use super::{layer_kernel, LayerKind, SourceSet};
use crate::geometry::Vec3;
use crate::chebyshev::Chebyshev;
use crate::kernels::{green_r, C64};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    /// Chebyshev points per direction.
    pub q: usize,
    /// A box is interpolated against another when
    /// `diam ≤ eta_adm · dist`.
    pub eta_adm: f64,
    pub leaf_size: usize,
    /// Boxes wider than this many wavelengths (`κ · diam`) are never
    /// compressed.
    pub max_kappa_diam: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            q: 9,
            eta_adm: 1.0,
            leaf_size: 64,
            max_kappa_diam: 4.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    lo: usize,
    hi: usize,
    center: Vec3,
    half: Vec3,
    children: Vec<usize>,
    depth: usize,
    parent: Option<usize>,
}

impl Node {
    fn len(&self) -> usize {
        self.hi - self.lo
    }

    fn diam(&self) -> f64 {
        2.0 * self.half.norm()
    }

    fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Octree {
    nodes: Vec<Node>,
    /// `perm[k]` is the original index of the `k`-th sorted point
    perm: Vec<usize>,
}

impl Octree {
    fn new(points: &[Vec3], leaf_size: usize) -> Self {
        let mut perm: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        let (lo, hi) = bounds(points, &perm);
        let c = (lo + hi) * 0.5;
        let r = (hi - lo).max() * 0.5;
        build(points, &mut perm, 0, points.len(), c, r, 0, None, leaf_size.max(1), &mut nodes);
        Self { nodes, perm }
    }
}

fn bounds(points: &[Vec3], idx: &[usize]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in idx {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    if idx.is_empty() {
        (Vec3::zeros(), Vec3::zeros())
    } else {
        (lo, hi)
    }
}

/// Splits the cube `(c, r)` into octants; stored boxes are shrunk to the
/// points they hold.
#[allow(clippy::too_many_arguments)]
fn build(
    points: &[Vec3],
    perm: &mut [usize],
    lo: usize,
    hi: usize,
    c: Vec3,
    r: f64,
    depth: usize,
    parent: Option<usize>,
    leaf_size: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let (bl, bh) = bounds(points, &perm[lo..hi]);
    let id = nodes.len();
    nodes.push(Node {
        lo,
        hi,
        center: (bl + bh) * 0.5,
        half: (bh - bl) * 0.5,
        children: Vec::new(),
        depth,
        parent,
    });
    if hi - lo <= leaf_size || depth >= 24 || (bh - bl).max() == 0.0 {
        return id;
    }
    let octant = |p: &Vec3| (p.x > c.x) as usize | ((p.y > c.y) as usize) << 1 | ((p.z > c.z) as usize) << 2;
    perm[lo..hi].sort_by_key(|&i| octant(&points[i]));
    let mut start = lo;
    let mut children = Vec::new();
    for o in 0..8 {
        let mut end = start;
        while end < hi && octant(&points[perm[end]]) == o {
            end += 1;
        }
        if end > start {
            let sign = |bit: usize| if o >> bit & 1 == 1 { 0.5 } else { -0.5 };
            let cc = c + Vec3::new(sign(0), sign(1), sign(2)) * r;
            children.push(build(points, perm, start, end, cc, r * 0.5, depth + 1, Some(id), leaf_size, nodes));
        }
        start = end;
    }
    nodes[id].children = children;
    id
}

fn box_distance(a: &Node, b: &Node) -> f64 {
    let gap = ((a.center - b.center).abs() - a.half - b.half).map(|v| v.max(0.0));
    gap.norm()
}

/// Half-widths used for interpolation; flat boxes get a minimal thickness.
fn interp_half(n: &Node) -> Vec3 {
    let m = n.half.max().max(1e-300);
    n.half.map(|h| h.max(1e-3 * m))
}

fn cheb_points(cheb: &Chebyshev, n: &Node) -> Vec<Vec3> {
    let h = interp_half(n);
    let q = cheb.q();
    let mut out = Vec::with_capacity(q * q * q);
    for &a in &cheb.nodes {
        for &b in &cheb.nodes {
            for &c in &cheb.nodes {
                out.push(n.center + Vec3::new(a * h.x, b * h.y, c * h.z));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Far {
    /// sources through the source-box interpolant, summed at targets
    M2P,
    /// sources summed at the target-box interpolation points
    P2L,
    M2L,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ClusterStats {
    pub direct_pairs: usize,
    pub far_pairs: usize,
    pub m2l_pairs: usize,
    /// kernel evaluations spent, direct and far
    pub kernel_evals: usize,
}

/// Source side of the clustered evaluation; reusable for many target sets.
#[derive(Debug, Clone)]
pub struct ClusteredPotential {
    kind: LayerKind,
    kappa: f64,
    params: ClusterParams,
    cheb: Chebyshev,
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    weights: Vec<C64>,
    tree: Octree,
    /// per source node, density moments at its Chebyshev points
    moments: Vec<Vec<C64>>,
}

impl ClusteredPotential {
    pub fn new(kind: LayerKind, kappa: f64, sources: &SourceSet, params: ClusterParams) -> Self {
        let tree = Octree::new(&sources.points, params.leaf_size);
        let points: Vec<Vec3> = tree.perm.iter().map(|&i| sources.points[i]).collect();
        let normals: Vec<Vec3> = tree.perm.iter().map(|&i| sources.normals[i]).collect();
        let weights: Vec<C64> = tree.perm.iter().map(|&i| sources.weights[i]).collect();
        let cheb = Chebyshev::new(params.q);
        let moments = tree
            .nodes
            .par_iter()
            .map(|n| moments(kind, &cheb, n, &points[n.lo..n.hi], &normals[n.lo..n.hi], &weights[n.lo..n.hi]))
            .collect();
        Self {
            kind,
            kappa,
            params,
            cheb,
            points,
            normals,
            weights,
            tree,
            moments,
        }
    }

    /// Whether the kernel may be interpolated over box `a` for all points of
    /// box `b`.
    fn interpolable(&self, a: &Node, b: &Node) -> bool {
        let d = a.diam();
        d <= self.params.eta_adm * box_distance(a, b) && self.kappa * d <= self.params.max_kappa_diam
    }

    pub fn evaluate(&self, targets: &[Vec3]) -> Vec<C64> {
        self.evaluate_with_stats(targets).0
    }

    pub fn evaluate_with_stats(&self, targets: &[Vec3]) -> (Vec<C64>, ClusterStats) {
        let zero = C64::new(0.0, 0.0);
        if targets.is_empty() || self.points.is_empty() {
            return (vec![zero; targets.len()], ClusterStats::default());
        }
        let ttree = Octree::new(targets, self.params.leaf_size);
        let tpts: Vec<Vec3> = ttree.perm.iter().map(|&i| targets[i]).collect();
        let nt = ttree.nodes.len();
        let q3 = self.params.q.pow(3);

        // interaction lists per target node
        let mut direct: Vec<Vec<usize>> = vec![Vec::new(); nt];
        let mut far: Vec<Vec<(Far, usize)>> = vec![Vec::new(); nt];
        let mut stats = ClusterStats::default();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((ti, si)) = stack.pop() {
            let (t, s) = (&ttree.nodes[ti], &self.tree.nodes[si]);
            let dcost = t.len() * s.len();
            // interpolating on a side pays only when it holds more than q³ points
            let on_t = t.len() > q3 && self.interpolable(t, s);
            let on_s = s.len() > q3 && self.interpolable(s, t);
            let how = match (on_t, on_s) {
                (true, true) => Some((Far::M2L, q3 * q3)),
                (true, false) => Some((Far::P2L, q3 * s.len())),
                (false, true) => Some((Far::M2P, t.len() * q3)),
                (false, false) => None,
            };
            if let Some((how, cost)) = how {
                far[ti].push((how, si));
                stats.far_pairs += 1;
                stats.m2l_pairs += (how == Far::M2L) as usize;
                stats.kernel_evals += cost;
                continue;
            }
            // no descendant pair can beat direct summation
            let hopeless = t.len() <= q3 && s.len() <= q3;
            match (t.is_leaf() || hopeless, s.is_leaf() || hopeless) {
                (true, true) => {
                    direct[ti].push(si);
                    stats.direct_pairs += 1;
                    stats.kernel_evals += dcost;
                }
                (false, true) => stack.extend(t.children.iter().map(|&c| (c, si))),
                (true, false) => stack.extend(s.children.iter().map(|&c| (ti, c))),
                (false, false) => {
                    if t.diam() >= s.diam() {
                        stack.extend(t.children.iter().map(|&c| (c, si)));
                    } else {
                        stack.extend(s.children.iter().map(|&c| (ti, c)));
                    }
                }
            }
        }

        // local expansions: P2L and M2L per target node
        let mut locals: Vec<Option<Vec<C64>>> = (0..nt)
            .into_par_iter()
            .map(|ti| {
                let list: Vec<_> = far[ti].iter().filter(|(h, _)| *h != Far::M2P).collect();
                if list.is_empty() {
                    return None;
                }
                let xs = cheb_points(&self.cheb, &ttree.nodes[ti]);
                let mut local = vec![zero; q3];
                for &&(how, si) in &list {
                    let s = &self.tree.nodes[si];
                    if how == Far::P2L {
                        for (l, x) in local.iter_mut().zip(&xs) {
                            *l += self.direct_sum(x, s.lo, s.hi);
                        }
                    } else {
                        let ys = cheb_points(&self.cheb, s);
                        let m = &self.moments[si];
                        for (l, x) in local.iter_mut().zip(&xs) {
                            let mut acc = zero;
                            for (y, mk) in ys.iter().zip(m) {
                                acc += green_r(self.kappa, (x - y).norm()) * mk;
                            }
                            *l += acc;
                        }
                    }
                }
                Some(local)
            })
            .collect();

        // push locals down to the leaves
        let mut order: Vec<usize> = (0..nt).collect();
        order.sort_by_key(|&i| ttree.nodes[i].depth);
        for &i in &order {
            let Some(parent) = ttree.nodes[i].parent else { continue };
            let Some(pl) = locals[parent].clone() else { continue };
            let child = reinterpolate(&self.cheb, &ttree.nodes[parent], &ttree.nodes[i], &pl);
            match &mut locals[i] {
                Some(l) => l.iter_mut().zip(&child).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(child),
            }
        }

        // leaves: local evaluation plus direct and M2P along the ancestor chain
        let leaves: Vec<usize> = (0..nt).filter(|&i| ttree.nodes[i].is_leaf()).collect();
        let parts: Vec<(usize, Vec<C64>)> = leaves
            .par_iter()
            .map(|&li| {
                let leaf = &ttree.nodes[li];
                let pts = &tpts[leaf.lo..leaf.hi];
                let mut out = vec![zero; pts.len()];
                if let Some(l) = &locals[li] {
                    for (o, x) in out.iter_mut().zip(pts) {
                        *o += interpolate(&self.cheb, leaf, l, x);
                    }
                }
                let mut node = Some(li);
                while let Some(ti) = node {
                    for &si in &direct[ti] {
                        let s = &self.tree.nodes[si];
                        for (o, x) in out.iter_mut().zip(pts) {
                            *o += self.direct_sum(x, s.lo, s.hi);
                        }
                    }
                    for &(how, si) in &far[ti] {
                        if how != Far::M2P {
                            continue;
                        }
                        let ys = cheb_points(&self.cheb, &self.tree.nodes[si]);
                        let m = &self.moments[si];
                        for (o, x) in out.iter_mut().zip(pts) {
                            for (y, mk) in ys.iter().zip(m) {
                                *o += green_r(self.kappa, (x - y).norm()) * mk;
                            }
                        }
                    }
                    node = ttree.nodes[ti].parent;
                }
                (li, out)
            })
            .collect();
        let mut result = vec![zero; targets.len()];
        for (li, vals) in parts {
            let leaf = &ttree.nodes[li];
            for (k, v) in (leaf.lo..leaf.hi).zip(vals) {
                result[ttree.perm[k]] = v;
            }
        }
        (result, stats)
    }

    fn direct_sum(&self, x: &Vec3, lo: usize, hi: usize) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in lo..hi {
            acc += layer_kernel(self.kind, self.kappa, x, &self.points[k], &self.normals[k]) * self.weights[k];
        }
        acc
    }
}

/// `M_k = Σ w_y L_k(y)` (single layer) or `Σ w_y ∂_n L_k(y)` (double layer).
fn moments(kind: LayerKind, cheb: &Chebyshev, n: &Node, pts: &[Vec3], normals: &[Vec3], w: &[C64]) -> Vec<C64> {
    let q = cheb.q();
    let h = interp_half(n);
    let mut out = vec![C64::new(0.0, 0.0); q * q * q];
    let mut v = [vec![0.0; q], vec![0.0; q], vec![0.0; q]];
    let mut d = [vec![0.0; q], vec![0.0; q], vec![0.0; q]];
    for ((y, ny), wy) in pts.iter().zip(normals).zip(w) {
        for c in 0..3 {
            let t = (y[c] - n.center[c]) / h[c];
            match kind {
                LayerKind::SingleLayer => cheb.lagrange(t, &mut v[c]),
                LayerKind::DoubleLayer => {
                    cheb.lagrange_d(t, &mut v[c], &mut d[c]);
                    d[c].iter_mut().for_each(|x| *x *= ny[c] / h[c]);
                }
            }
        }
        let mut k = 0;
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    let f = match kind {
                        LayerKind::SingleLayer => v[0][a] * v[1][b] * v[2][c],
                        LayerKind::DoubleLayer => {
                            d[0][a] * v[1][b] * v[2][c] + v[0][a] * d[1][b] * v[2][c] + v[0][a] * v[1][b] * d[2][c]
                        }
                    };
                    out[k] += wy * f;
                    k += 1;
                }
            }
        }
    }
    out
}

fn interpolate(cheb: &Chebyshev, n: &Node, vals: &[C64], x: &Vec3) -> C64 {
    let q = cheb.q();
    let h = interp_half(n);
    let mut l = [vec![0.0; q], vec![0.0; q], vec![0.0; q]];
    for c in 0..3 {
        cheb.lagrange((x[c] - n.center[c]) / h[c], &mut l[c]);
    }
    let mut acc = C64::new(0.0, 0.0);
    let mut k = 0;
    for a in 0..q {
        for b in 0..q {
            let f = l[0][a] * l[1][b];
            let mut inner = C64::new(0.0, 0.0);
            for c in 0..q {
                inner += vals[k] * l[2][c];
                k += 1;
            }
            acc += inner * f;
        }
    }
    acc
}

/// Values of the parent interpolant at the child's Chebyshev points,
/// one direction at a time.
fn reinterpolate(cheb: &Chebyshev, parent: &Node, child: &Node, vals: &[C64]) -> Vec<C64> {
    let q = cheb.q();
    let hp = interp_half(parent);
    let hc = interp_half(child);
    // mats[c][i][k]: parent basis k at child node i, direction c
    let mats: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let mut m = vec![0.0; q * q];
            for i in 0..q {
                let x = child.center[c] + cheb.nodes[i] * hc[c];
                cheb.lagrange((x - parent.center[c]) / hp[c], &mut m[i * q..(i + 1) * q]);
            }
            m
        })
        .collect();
    let idx = |a: usize, b: usize, c: usize| (a * q + b) * q + c;
    let mut cur = vals.to_vec();
    let mut next = vec![C64::new(0.0, 0.0); q * q * q];
    for dir in 0..3 {
        next.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let m = &mats[dir];
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    let src = [a, b, c];
                    let v = cur[idx(a, b, c)];
                    for i in 0..q {
                        let mut dst = src;
                        dst[dir] = i;
                        next[idx(dst[0], dst[1], dst[2])] += v * m[i * q + src[dir]];
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofmap::{Continuity, DofMap};
    use crate::geometry::builtin_torus;
    use crate::potential::potential_direct;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn torus_targets(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let p = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-2.0..2.0));
            let rho = (p.x * p.x + p.y * p.y).sqrt();
            if ((rho - 2.0).powi(2) + p.z * p.z).sqrt() > 0.6 {
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn agrees_with_direct_summation() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, Continuity::Discontinuous).unwrap();
        let coeffs: Vec<C64> =
            (0..dofs.num_dofs()).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.11).cos())).collect();
        let src = SourceSet::new(&torus, &dofs, &coeffs, 4);
        let targets = torus_targets(4000, 3);
        // small boxes and a low order so that every far-field path is taken
        let params = ClusterParams { q: 5, leaf_size: 8, eta_adm: 2.0, ..Default::default() };
        for kind in [LayerKind::SingleLayer, LayerKind::DoubleLayer] {
            let direct = potential_direct(kind, 1.0, &src, &targets);
            let fast = ClusteredPotential::new(kind, 1.0, &src, params);
            let (vals, stats) = fast.evaluate_with_stats(&targets);
            assert!(stats.far_pairs > 0 && stats.m2l_pairs > 0, "{stats:?}");
            let scale = direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let err = vals.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-3 * scale, "{kind:?}: relative {:e}, {stats:?}", err / scale);
        }
    }
}
