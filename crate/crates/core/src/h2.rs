//! H² compression of the Galerkin operators in the reference domain.
//!
//! Every patch carries a uniform quadtree over `[0, 1]²` whose leaves are
//! squares of `leaf_side × leaf_side` elements. The element-pair set of the
//! operator is split into near pairs, integrated exactly as in dense
//! assembly, and admissible cluster pairs, where the pulled-back kernel is
//! replaced by its tensor Chebyshev interpolant in both parameters. Cluster
//! bases are nested through the exact re-interpolation of a parent's
//! polynomials on its four children.

use crate::assembly::{AssemblyError, OperatorKind, PairIntegrator, QuadratureOrders};
use crate::chebyshev::Chebyshev;
use crate::dofmap::DofMap;
use crate::geometry::{SurfaceGeometry, Vec3};
use crate::kernels::{green_r, C64};
use num_complex::Complex32;
use crate::operator::{CsrMatrix, LinearOperator};
use crate::quadrature::gauss_rule;
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum H2Error {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("leaf side {0} must be a power of two")]
    LeafSide(usize),
    #[error("interpolation order must be in 1..=32, got {0}")]
    Order(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Params {
    /// Chebyshev points per parameter direction.
    pub q: usize,
    pub eta_adm: f64,
    /// Elements per side of a leaf cluster.
    pub leaf_side: usize,
    /// Coupling matrices are kept in double precision if they fit, else
    /// in single precision if they fit and `q ≤ 6` (where interpolation
    /// error dominates single-precision rounding by orders of magnitude),
    /// else recomputed on every product.
    pub max_coupling_bytes: usize,
}

impl Default for H2Params {
    fn default() -> Self {
        Self {
            q: 9,
            eta_adm: 1.6,
            leaf_side: 1,
            max_coupling_bytes: 2 << 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub patch: usize,
    pub level: u32,
    /// position in the level grid of the patch
    pub index: (usize, usize),
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// physical bounding box
    pub center: Vec3,
    pub half: Vec3,
}

impl Cluster {
    /// Parametric box `[x0, x1] × [y0, y1]`.
    pub fn param_box(&self) -> ([f64; 2], [f64; 2]) {
        let s = 0.5f64.powi(self.level as i32);
        let (i, j) = self.index;
        ([i as f64 * s, (i + 1) as f64 * s], [j as f64 * s, (j + 1) as f64 * s])
    }

    pub fn diam(&self) -> f64 {
        2.0 * self.half.norm()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ClusterTree {
    clusters: Vec<Cluster>,
    roots: Vec<usize>,
    /// clusters per level, coarse to fine
    levels: Vec<Vec<usize>>,
    /// mesh cells per leaf side
    leaf_side: usize,
}

impl ClusterTree {
    pub fn new(geometry: &SurfaceGeometry, dofs: &DofMap, leaf_side: usize) -> Result<Self, H2Error> {
        if !leaf_side.is_power_of_two() {
            return Err(H2Error::LeafSide(leaf_side));
        }
        let m = dofs.level();
        let cells = dofs.mesh().cells_per_side();
        let leaf_side = leaf_side.min(cells);
        let depth = m - leaf_side.trailing_zeros();
        let mut tree = Self {
            clusters: Vec::new(),
            roots: Vec::new(),
            levels: vec![Vec::new(); depth as usize + 1],
            leaf_side,
        };
        for patch in 0..geometry.num_patches() {
            let root = tree.build(geometry, patch, 0, (0, 0), None, depth);
            tree.roots.push(root);
        }
        Ok(tree)
    }

    fn build(
        &mut self,
        geometry: &SurfaceGeometry,
        patch: usize,
        level: u32,
        index: (usize, usize),
        parent: Option<usize>,
        depth: u32,
    ) -> usize {
        let mut c = Cluster {
            patch,
            level,
            index,
            parent,
            children: Vec::new(),
            center: Vec3::zeros(),
            half: Vec3::zeros(),
        };
        (c.center, c.half) = physical_box(geometry, &c);
        let id = self.clusters.len();
        self.clusters.push(c);
        self.levels[level as usize].push(id);
        if level < depth {
            let mut children = Vec::with_capacity(4);
            for di in 0..2 {
                for dj in 0..2 {
                    let child = (2 * index.0 + di, 2 * index.1 + dj);
                    children.push(self.build(geometry, patch, level + 1, child, Some(id), depth));
                }
            }
            self.clusters[id].children = children;
        }
        id
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// `max(diam) ≤ η · dist` of the physical bounding boxes.
    pub fn is_admissible(&self, a: usize, b: usize, eta: f64) -> bool {
        let (ca, cb) = (&self.clusters[a], &self.clusters[b]);
        let gap = ((ca.center - cb.center).abs() - ca.half - cb.half).map(|v| v.max(0.0));
        ca.diam().max(cb.diam()) <= eta * gap.norm()
    }

    /// Element indices covered by a cluster.
    pub fn elements(&self, dofs: &DofMap, id: usize) -> Vec<usize> {
        let c = &self.clusters[id];
        let mesh = dofs.mesh();
        let span = mesh.cells_per_side() >> c.level;
        let mut out = Vec::with_capacity(span * span);
        for c1 in c.index.0 * span..(c.index.0 + 1) * span {
            for c2 in c.index.1 * span..(c.index.1 + 1) * span {
                out.push(mesh.element_index(c.patch, c1, c2));
            }
        }
        out
    }
}

/// Bounding box of the image of the parametric box: a sampled hull grown
/// by a Lipschitz bound for the gaps between samples.
fn physical_box(geometry: &SurfaceGeometry, c: &Cluster) -> (Vec3, Vec3) {
    let ([x0, x1], [y0, y1]) = c.param_box();
    let n = 8;
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut lip: f64 = 0.0;
    for a in 0..=n {
        for b in 0..=n {
            let x = x0 + (x1 - x0) * a as f64 / n as f64;
            let y = y0 + (y1 - y0) * b as f64 / n as f64;
            let g = geometry.eval(c.patch, x, y);
            lo = lo.inf(&g.point);
            hi = hi.sup(&g.point);
            lip = lip.max(g.d1.norm()).max(g.d2.norm());
        }
    }
    let grow = lip * (x1 - x0) / n as f64 * 0.5;
    ((lo + hi) * 0.5, (hi - lo) * 0.5 + Vec3::repeat(grow))
}

/// The block partition: admissible cluster pairs and near leaf pairs.
#[derive(Debug, Clone, Default)]
pub struct BlockPartition {
    pub far: Vec<(usize, usize)>,
    pub near: Vec<(usize, usize)>,
}

pub fn partition(tree: &ClusterTree, eta: f64) -> BlockPartition {
    let mut out = BlockPartition::default();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &a in &tree.roots {
        for &b in &tree.roots {
            stack.push((a, b));
        }
    }
    while let Some((a, b)) = stack.pop() {
        if tree.is_admissible(a, b, eta) {
            out.far.push((a, b));
            continue;
        }
        let (ca, cb) = (&tree.clusters[a], &tree.clusters[b]);
        match (ca.is_leaf(), cb.is_leaf()) {
            (true, true) => out.near.push((a, b)),
            (false, true) => stack.extend(ca.children.iter().map(|&c| (c, b))),
            (true, false) => stack.extend(cb.children.iter().map(|&c| (a, c))),
            (false, false) => {
                for &x in &ca.children {
                    for &y in &cb.children {
                        stack.push((x, y));
                    }
                }
            }
        }
    }
    out.far.sort_unstable();
    out.near.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct H2Stats {
    pub clusters: usize,
    pub far_blocks: usize,
    pub near_leaf_pairs: usize,
    pub near_element_pairs: usize,
    pub near_nnz: usize,
    pub coupling_stored: bool,
    /// bytes of near field, bases and stored couplings
    pub memory: usize,
}

/// Geometry at the Chebyshev nodes of a cluster.
#[derive(Debug, Clone)]
struct NodeData {
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
}

#[derive(Debug, Clone)]
enum Couplings {
    Recompute,
    Double(Vec<Vec<DMatrix<C64>>>),
    Single(Vec<Vec<DMatrix<Complex32>>>),
}

trait Widen: Copy {
    fn widen(self) -> C64;
}

impl Widen for C64 {
    fn widen(self) -> C64 {
        self
    }
}

impl Widen for Complex32 {
    fn widen(self) -> C64 {
        C64::new(self.re as f64, self.im as f64)
    }
}

/// `out[k] += S xb[k]` for every slot `k` of `q2` coefficients.
fn couple<T: Widen + nalgebra::Scalar>(s: &DMatrix<T>, xb: &[C64], out: &mut [C64], q2: usize) {
    let zero = C64::new(0.0, 0.0);
    for (xb, o) in xb.chunks(q2).zip(out.chunks_mut(q2)) {
        for (j, &xj) in xb.iter().enumerate() {
            if xj == zero {
                continue;
            }
            for (oi, sij) in o.iter_mut().zip(s.column(j).iter()) {
                *oi += sij.widen() * xj;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct H2Matrix {
    kind: OperatorKind,
    kappa: f64,
    single_layer: C64,
    n: usize,
    q: usize,
    tree: ClusterTree,
    near: CsrMatrix,
    /// weight of each basis channel
    channels: Vec<f64>,
    /// per cluster, the global DOFs of a leaf (empty for inner clusters)
    leaf_dofs: Vec<Vec<usize>>,
    /// per cluster and channel, `|leaf_dofs| × q²`
    leaf_bases: Vec<Vec<DMatrix<f64>>>,
    /// 1D re-interpolation from a parent to its lower and upper half
    transfer: [DMatrix<f64>; 2],
    /// admissible column clusters per row cluster
    far: Vec<Vec<usize>>,
    coupling: Couplings,
    nodes: Vec<NodeData>,
    stats: H2Stats,
}

impl H2Matrix {
    pub fn new(
        kind: OperatorKind,
        kappa: f64,
        geometry: &SurfaceGeometry,
        dofs: &DofMap,
        orders: QuadratureOrders,
        params: H2Params,
    ) -> Result<Self, H2Error> {
        Self::combined(kind, C64::new(0.0, 0.0), kappa, geometry, dofs, orders, params)
    }

    /// `A + cV` as one matrix. V, K and K* share the basis channel, so the
    /// sum costs one build and one product instead of two.
    pub fn combined(
        kind: OperatorKind,
        single_layer: C64,
        kappa: f64,
        geometry: &SurfaceGeometry,
        dofs: &DofMap,
        orders: QuadratureOrders,
        params: H2Params,
    ) -> Result<Self, H2Error> {
        if params.q == 0 || params.q > 32 {
            return Err(H2Error::Order(params.q));
        }
        let integ = PairIntegrator::new(kind, kappa, geometry, dofs, orders)?.with_single_layer(single_layer)?;
        let tree = ClusterTree::new(geometry, dofs, params.leaf_side)?;
        let part = partition(&tree, params.eta_adm);
        let cheb = Chebyshev::new(params.q);
        let q = params.q;
        let nc = tree.clusters.len();

        let channels = match kind {
            OperatorKind::Hypersingular => {
                let k2 = -kappa * kappa;
                vec![1.0, 1.0, 1.0, k2, k2, k2]
            }
            _ => vec![1.0],
        };

        let near = assemble_near(&integ, &tree, dofs, &part.near);

        let nodes: Vec<NodeData> = tree
            .clusters
            .par_iter()
            .map(|c| {
                let ([x0, x1], [y0, y1]) = c.param_box();
                let mut nd = NodeData {
                    points: Vec::with_capacity(q * q),
                    normals: Vec::with_capacity(q * q),
                };
                for &t1 in &cheb.nodes {
                    for &t2 in &cheb.nodes {
                        let g = geometry.eval(c.patch, x0 + (x1 - x0) * 0.5 * (1.0 + t1), y0 + (y1 - y0) * 0.5 * (1.0 + t2));
                        nd.points.push(g.point);
                        nd.normals.push(g.normal);
                    }
                }
                nd
            })
            .collect();

        let bases: Vec<(Vec<usize>, Vec<DMatrix<f64>>)> = (0..nc)
            .into_par_iter()
            .map(|id| {
                if tree.clusters[id].is_leaf() {
                    leaf_basis(kind, geometry, dofs, &tree, id, &cheb)
                } else {
                    (Vec::new(), Vec::new())
                }
            })
            .collect();
        let (leaf_dofs, leaf_bases): (Vec<_>, Vec<_>) = bases.into_iter().unzip();

        // child nodes in parent coordinates: (t + ∓1) / 2
        let transfer = [-1.0, 1.0].map(|shift| {
            let mut m = DMatrix::zeros(q, q);
            let mut row = vec![0.0; q];
            for i in 0..q {
                cheb.lagrange(0.5 * (cheb.nodes[i] + shift), &mut row);
                for k in 0..q {
                    m[(i, k)] = row[k];
                }
            }
            m
        });

        let mut far = vec![Vec::new(); nc];
        for &(a, b) in &part.far {
            far[a].push(b);
        }
        let coupling_bytes = part.far.len() * q.pow(4) * std::mem::size_of::<C64>();
        let mut me = Self {
            kind,
            kappa,
            single_layer,
            n: dofs.num_dofs(),
            q,
            tree,
            near,
            channels,
            leaf_dofs,
            leaf_bases,
            transfer,
            far,
            coupling: Couplings::Recompute,
            nodes,
            stats: H2Stats::default(),
        };
        let mut stored_bytes = 0;
        if coupling_bytes <= params.max_coupling_bytes {
            let coupling = (0..nc)
                .into_par_iter()
                .map(|a| me.far[a].iter().map(|&b| me.coupling_block(a, b)).collect())
                .collect();
            me.coupling = Couplings::Double(coupling);
            stored_bytes = coupling_bytes;
        } else if q <= 6 && coupling_bytes / 2 <= params.max_coupling_bytes {
            let coupling = (0..nc)
                .into_par_iter()
                .map(|a| {
                    me.far[a]
                        .iter()
                        .map(|&b| me.coupling_block(a, b).map(|z| Complex32::new(z.re as f32, z.im as f32)))
                        .collect()
                })
                .collect();
            me.coupling = Couplings::Single(coupling);
            stored_bytes = coupling_bytes / 2;
        }
        let near_element_pairs = part.near.len() * me.tree.leaf_side.pow(4);
        let basis_bytes: usize = me.leaf_bases.iter().flatten().map(|m| m.len() * 8).sum();
        me.stats = H2Stats {
            clusters: nc,
            far_blocks: part.far.len(),
            near_leaf_pairs: part.near.len(),
            near_element_pairs,
            near_nnz: me.near.nnz(),
            coupling_stored: stored_bytes > 0,
            memory: me.near.nnz() * 24 + basis_bytes + stored_bytes,
        };
        Ok(me)
    }

    pub fn stats(&self) -> H2Stats {
        self.stats
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    /// The near-field part on its own.
    pub fn near_field(&self) -> &CsrMatrix {
        &self.near
    }

    /// Pulled-back kernel at Chebyshev node pairs, rows in `a`.
    fn coupling_block(&self, a: usize, b: usize) -> DMatrix<C64> {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        let q2 = self.q * self.q;
        let kappa = self.kappa;
        DMatrix::from_fn(q2, q2, |i, j| {
            let d = na.points[i] - nb.points[j];
            let r = d.norm();
            let g = green_r(kappa, r);
            let v = g * self.single_layer;
            match self.kind {
                OperatorKind::SingleLayer => g + v,
                OperatorKind::Hypersingular => g,
                OperatorKind::DoubleLayer => g * C64::new(-1.0, kappa * r) * (-d.dot(&nb.normals[j]) / (r * r)) + v,
                OperatorKind::AdjointDoubleLayer => {
                    g * C64::new(-1.0, kappa * r) * (d.dot(&na.normals[i]) / (r * r)) + v
                }
            }
        })
    }

    /// `out += T_childᵀ v` for the child at grid offset `(di, dj)`.
    fn transfer_up(&self, di: usize, dj: usize, v: &[C64], out: &mut [C64]) {
        let q = self.q;
        let (t1, t2) = (&self.transfer[di], &self.transfer[dj]);
        let mut tmp = vec![C64::new(0.0, 0.0); q * q];
        // contract the second index: tmp[a1][k2] = Σ_a2 t2[a2][k2] v[a1][a2]
        for a1 in 0..q {
            for a2 in 0..q {
                let x = v[a1 * q + a2];
                for k2 in 0..q {
                    tmp[a1 * q + k2] += x * t2[(a2, k2)];
                }
            }
        }
        for a1 in 0..q {
            for k1 in 0..q {
                let w = t1[(a1, k1)];
                for k2 in 0..q {
                    out[k1 * q + k2] += tmp[a1 * q + k2] * w;
                }
            }
        }
    }

    /// `out += T_child v`.
    fn transfer_down(&self, di: usize, dj: usize, v: &[C64], out: &mut [C64]) {
        let q = self.q;
        let (t1, t2) = (&self.transfer[di], &self.transfer[dj]);
        let mut tmp = vec![C64::new(0.0, 0.0); q * q];
        for k1 in 0..q {
            for k2 in 0..q {
                let x = v[k1 * q + k2];
                for a2 in 0..q {
                    tmp[k1 * q + a2] += x * t2[(a2, k2)];
                }
            }
        }
        for a1 in 0..q {
            for k1 in 0..q {
                let w = t1[(a1, k1)];
                for a2 in 0..q {
                    out[a1 * q + a2] += tmp[k1 * q + a2] * w;
                }
            }
        }
    }

    fn child_offset(&self, child: usize) -> (usize, usize) {
        let c = &self.tree.clusters[child];
        (c.index.0 & 1, c.index.1 & 1)
    }
}

impl H2Matrix {
    /// Products with several vectors at once; every coupling block is
    /// formed once per call when it is not stored.
    pub fn apply_many(&self, xs: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let zero = C64::new(0.0, 0.0);
        let nv = xs.len();
        let mut ys: Vec<Vec<C64>> = xs.iter().map(|x| self.near.apply(x).expect("length checked by caller")).collect();
        if nv == 0 {
            return ys;
        }
        let q2 = self.q * self.q;
        let nch = self.channels.len();
        // slot k = v * nch + ch holds q² coefficients
        let slots = nv * nch;
        let len = slots * q2;
        let nc = self.tree.clusters.len();

        let mut xh: Vec<Vec<C64>> = vec![Vec::new(); nc];
        for level in self.tree.levels.iter().rev() {
            let vals: Vec<Vec<C64>> = level
                .par_iter()
                .map(|&id| {
                    let mut v = vec![zero; len];
                    let c = &self.tree.clusters[id];
                    if c.is_leaf() {
                        let dofs = &self.leaf_dofs[id];
                        for (iv, x) in xs.iter().enumerate() {
                            for (ch, b) in self.leaf_bases[id].iter().enumerate() {
                                let k = iv * nch + ch;
                                let out = &mut v[k * q2..(k + 1) * q2];
                                for (i, &g) in dofs.iter().enumerate() {
                                    let xi = x[g];
                                    for (a, o) in out.iter_mut().enumerate() {
                                        *o += xi * b[(i, a)];
                                    }
                                }
                            }
                        }
                    } else {
                        for &child in &c.children {
                            let (di, dj) = self.child_offset(child);
                            for k in 0..slots {
                                let r = k * q2..(k + 1) * q2;
                                self.transfer_up(di, dj, &xh[child][r.clone()], &mut v[r]);
                            }
                        }
                    }
                    v
                })
                .collect();
            for (&id, v) in level.iter().zip(vals) {
                xh[id] = v;
            }
        }

        let mut yh: Vec<Vec<C64>> = (0..nc)
            .into_par_iter()
            .map(|a| {
                let mut out = vec![zero; len];
                for (kb, &b) in self.far[a].iter().enumerate() {
                    match &self.coupling {
                        Couplings::Double(c) => couple(&c[a][kb], &xh[b], &mut out, q2),
                        Couplings::Single(c) => couple(&c[a][kb], &xh[b], &mut out, q2),
                        Couplings::Recompute => couple(&self.coupling_block(a, b), &xh[b], &mut out, q2),
                    }
                }
                out
            })
            .collect();

        for level in self.tree.levels.iter().skip(1) {
            let vals: Vec<Vec<C64>> = level
                .par_iter()
                .map(|&id| {
                    let parent = self.tree.clusters[id].parent.expect("non-root");
                    let (di, dj) = self.child_offset(id);
                    let mut v = yh[id].clone();
                    for k in 0..slots {
                        let r = k * q2..(k + 1) * q2;
                        self.transfer_down(di, dj, &yh[parent][r.clone()], &mut v[r]);
                    }
                    v
                })
                .collect();
            for (&id, v) in level.iter().zip(vals) {
                yh[id] = v;
            }
        }

        let leaves = self.tree.levels.last().expect("at least one level");
        let parts: Vec<Vec<C64>> = leaves
            .par_iter()
            .map(|&id| {
                let dofs = &self.leaf_dofs[id];
                let mut out = vec![zero; nv * dofs.len()];
                for iv in 0..nv {
                    let o = &mut out[iv * dofs.len()..(iv + 1) * dofs.len()];
                    for (ch, b) in self.leaf_bases[id].iter().enumerate() {
                        let w = self.channels[ch];
                        let k = iv * nch + ch;
                        let v = &yh[id][k * q2..(k + 1) * q2];
                        for (i, oi) in o.iter_mut().enumerate() {
                            let mut acc = zero;
                            for (a, va) in v.iter().enumerate() {
                                acc += va * b[(i, a)];
                            }
                            *oi += acc * w;
                        }
                    }
                }
                out
            })
            .collect();
        for (&id, vals) in leaves.iter().zip(parts) {
            let dofs = &self.leaf_dofs[id];
            for (iv, y) in ys.iter_mut().enumerate() {
                for (&g, v) in dofs.iter().zip(&vals[iv * dofs.len()..(iv + 1) * dofs.len()]) {
                    y[g] += v;
                }
            }
        }
        ys
    }
}

impl LinearOperator for H2Matrix {
    fn nrows(&self) -> usize {
        self.n
    }

    fn ncols(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let out = self.apply_many(&[x.to_vec()]);
        y.copy_from_slice(&out[0]);
    }
}

/// Leaf DOFs and basis matrices `∫ χ_i L_a` per channel.
fn leaf_basis(
    kind: OperatorKind,
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
    tree: &ClusterTree,
    id: usize,
    cheb: &Chebyshev,
) -> (Vec<usize>, Vec<DMatrix<f64>>) {
    let q = cheb.q();
    let p = dofs.degree();
    let order = (p + q).div_ceil(2) + 2;
    let rule = gauss_rule(order).expect("order within table");
    let mesh = dofs.mesh();
    let nb = dofs.local_size();
    let h2 = mesh.h() * mesh.h();
    let elements = tree.elements(dofs, id);
    let mut global = Vec::new();
    let mut idx = Vec::new();
    for &e in &elements {
        dofs.element_dofs(&mesh.elements()[e], &mut idx);
        global.extend_from_slice(&idx);
    }
    global.sort_unstable();
    global.dedup();
    let nch = if kind == OperatorKind::Hypersingular { 6 } else { 1 };
    let mut mats = vec![DMatrix::zeros(global.len(), q * q); nch];
    let ([x0, x1], [y0, y1]) = tree.clusters[id].param_box();
    let mut vals = vec![0.0; nb];
    let mut grads = vec![[0.0; 2]; nb];
    let mut lx = vec![0.0; q];
    let mut ly = vec![0.0; q];
    let mut chan = vec![0.0; nch];
    for &e in &elements {
        let el = &mesh.elements()[e];
        dofs.element_dofs(el, &mut idx);
        let rows: Vec<usize> = idx.iter().map(|g| global.binary_search(g).expect("collected")).collect();
        for (s1, w1) in rule.iter() {
            for (s2, w2) in rule.iter() {
                let (x, y) = mesh.to_patch(el, [s1, s2]);
                let g = geometry.eval(el.patch, x, y);
                dofs.element_basis(el, [s1, s2], &mut vals, &mut grads);
                cheb.lagrange(2.0 * (x - x0) / (x1 - x0) - 1.0, &mut lx);
                cheb.lagrange(2.0 * (y - y0) / (y1 - y0) - 1.0, &mut ly);
                let w = w1 * w2 * h2;
                for a in 0..nb {
                    if nch == 1 {
                        chan[0] = w * g.measure * vals[a];
                    } else {
                        let c = g.d2 * grads[a][0] - g.d1 * grads[a][1];
                        for k in 0..3 {
                            chan[k] = w * c[k];
                            chan[3 + k] = w * g.measure * vals[a] * g.normal[k];
                        }
                    }
                    for (ch, m) in mats.iter_mut().enumerate() {
                        let f = chan[ch];
                        if f == 0.0 {
                            continue;
                        }
                        for (k1, &l1) in lx.iter().enumerate() {
                            let fl = f * l1;
                            for (k2, &l2) in ly.iter().enumerate() {
                                m[(rows[a], k1 * q + k2)] += fl * l2;
                            }
                        }
                    }
                }
            }
        }
    }
    (global, mats)
}

/// Near field from the same element-pair integrals as dense assembly,
/// summed in the same order.
fn assemble_near(integ: &PairIntegrator, tree: &ClusterTree, dofs: &DofMap, near: &[(usize, usize)]) -> CsrMatrix {
    let mesh = dofs.mesh();
    let ne = mesh.num_elements();
    let nb = integ.local_size();
    let element_dofs: Vec<Vec<usize>> = mesh
        .elements()
        .iter()
        .map(|e| {
            let mut v = Vec::new();
            dofs.element_dofs(e, &mut v);
            v
        })
        .collect();
    // near neighbours per element (symmetric)
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); ne];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in near {
        let (ea, eb) = (tree.elements(dofs, a), tree.elements(dofs, b));
        for &x in &ea {
            for &y in &eb {
                nbrs[x].push(y);
                if x <= y {
                    pairs.push((x, y));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    nbrs.par_iter_mut().for_each(|v| {
        v.sort_unstable();
        v.dedup();
    });
    // sparsity pattern row by row
    let mut dof_elements: Vec<Vec<usize>> = vec![Vec::new(); dofs.num_dofs()];
    for (e, ds) in element_dofs.iter().enumerate() {
        for &d in ds {
            dof_elements[d].push(e);
        }
    }
    let rows: Vec<Vec<usize>> = dof_elements
        .par_iter()
        .map(|els| {
            let mut cols = Vec::new();
            for &e in els {
                for &f in &nbrs[e] {
                    cols.extend_from_slice(&element_dofs[f]);
                }
            }
            cols.sort_unstable();
            cols.dedup();
            cols
        })
        .collect();
    let mut csr = CsrMatrix::from_pattern(dofs.num_dofs(), rows);
    const CHUNK: usize = 4096;
    let bs = 2 * nb * nb;
    for chunk in pairs.chunks(CHUNK) {
        let blocks: Vec<Vec<C64>> = chunk
            .par_iter()
            .map(|&(ea, eb)| {
                let mut blk = vec![C64::new(0.0, 0.0); bs];
                let (ab, ba) = blk.split_at_mut(nb * nb);
                integ.pair(ea, eb, ab, ba);
                blk
            })
            .collect();
        for (&(ea, eb), blk) in chunk.iter().zip(&blocks) {
            let (ab, ba) = blk.split_at(nb * nb);
            for (a, &r) in element_dofs[ea].iter().enumerate() {
                for (b, &c) in element_dofs[eb].iter().enumerate() {
                    csr.add(r, c, ab[a * nb + b]);
                }
            }
            if ea != eb {
                for (a, &r) in element_dofs[eb].iter().enumerate() {
                    for (b, &c) in element_dofs[ea].iter().enumerate() {
                        csr.add(r, c, ba[a * nb + b]);
                    }
                }
            }
        }
    }
    csr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_dense;
    use crate::dofmap::Continuity;
    use crate::geometry::builtin_torus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadtree_counts() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 3, Continuity::Discontinuous).unwrap();
        let tree = ClusterTree::new(&torus, &dofs, 1).unwrap();
        assert_eq!(tree.clusters().len(), 16 * 85);
        assert_eq!(tree.num_levels(), 4);
        assert!(ClusterTree::new(&torus, &dofs, 3).is_err());
        let coarse = ClusterTree::new(&torus, &dofs, 4).unwrap();
        assert_eq!(coarse.clusters().len(), 16 * 5);
    }

    #[test]
    fn admissibility() {
        let torus = crate::geometry::torus_grid(12, 10, 2.0, 0.5);
        let dofs = DofMap::new(&torus, 1, 2, Continuity::Discontinuous).unwrap();
        let tree = ClusterTree::new(&torus, &dofs, 1).unwrap();
        let r = tree.roots();
        assert!(!tree.is_admissible(r[0], r[0], 1.6));
        // opposite sides of the torus ring
        let far = (0..r.len())
            .max_by(|&a, &b| {
                let d = |i: usize| (tree.clusters()[r[i]].center - tree.clusters()[r[0]].center).norm();
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        assert!(tree.is_admissible(r[0], r[far], 1.6));
    }

    /// Every element pair is covered exactly once.
    #[test]
    fn partition_is_complete() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 2, Continuity::Discontinuous).unwrap();
        let tree = ClusterTree::new(&torus, &dofs, 1).unwrap();
        let part = partition(&tree, 1.6);
        let ne = dofs.mesh().num_elements();
        let mut count = vec![0u8; ne * ne];
        for &(a, b) in part.far.iter().chain(&part.near) {
            for x in tree.elements(&dofs, a) {
                for y in tree.elements(&dofs, b) {
                    count[x * ne + y] += 1;
                }
            }
        }
        assert!(count.iter().all(|&c| c == 1));
        assert!(!part.far.is_empty());
    }

    /// Relative deviation of H² products from dense ones, after checking
    /// that near-field entries untouched by far blocks are bit-identical.
    fn relative_matvec_error(kind: OperatorKind, continuity: Continuity) -> f64 {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, continuity).unwrap();
        let orders = QuadratureOrders::for_degree(1);
        let dense = assemble_dense(kind, 2.5, &torus, &dofs, orders).unwrap();
        let params = H2Params { q: 6, ..Default::default() };
        let h2 = H2Matrix::new(kind, 2.5, &torus, &dofs, orders, params).unwrap();
        assert!(h2.stats().far_blocks > 0);

        let tree = h2.tree();
        let part = partition(tree, params.eta_adm);
        let mesh = dofs.mesh();
        let mut touched = vec![false; dofs.num_dofs() * dofs.num_dofs()];
        let mut buf = Vec::new();
        let elem_dofs = |e: usize, buf: &mut Vec<usize>| dofs.element_dofs(&mesh.elements()[e], buf);
        for &(a, b) in &part.far {
            for x in tree.elements(&dofs, a) {
                elem_dofs(x, &mut buf);
                let rows = buf.clone();
                for y in tree.elements(&dofs, b) {
                    elem_dofs(y, &mut buf);
                    for &r in &rows {
                        for &c in &buf {
                            touched[r * dofs.num_dofs() + c] = true;
                        }
                    }
                }
            }
        }
        let mut pure = 0;
        for (r, c, v) in h2.near_field().iter() {
            if !touched[r * dofs.num_dofs() + c] {
                assert_eq!(v, dense[(r, c)]);
                pure += 1;
            }
        }
        assert!(pure > 0);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<C64>> = (0..3)
            .map(|_| (0..dofs.num_dofs()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        let ys = h2.apply_many(&xs);
        assert_eq!(ys[1], h2.apply(&xs[1]).unwrap());
        xs.iter()
            .zip(&ys)
            .map(|(x, yh)| {
                let yd = &dense * nalgebra::DVector::from_vec(x.clone());
                let err = yh.iter().zip(yd.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                err / yd.norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn coupling_storage_modes_agree() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 2, Continuity::Discontinuous).unwrap();
        let orders = QuadratureOrders::for_degree(1);
        let build = |max_coupling_bytes| {
            let params = H2Params { q: 4, leaf_side: 2, max_coupling_bytes, ..Default::default() };
            H2Matrix::new(OperatorKind::SingleLayer, 2.5, &torus, &dofs, orders, params).unwrap()
        };
        let full = build(usize::MAX);
        let bytes = full.stats().far_blocks * 256 * 16;
        let single = build(bytes / 2);
        let none = build(0);
        assert!(full.stats().coupling_stored && single.stats().coupling_stored && !none.stats().coupling_stored);
        assert!(single.stats().memory < full.stats().memory);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<C64> = (0..dofs.num_dofs()).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let y = full.apply(&x).unwrap();
        assert_eq!(none.apply(&x).unwrap(), y);
        let ys = single.apply(&x).unwrap();
        let dev = ys.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(dev > 0.0 && dev < 1e-6 * scale, "{dev:e}");
    }

    #[test]
    fn combined_matches_dense_sum() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, Continuity::Discontinuous).unwrap();
        let orders = QuadratureOrders::for_degree(1);
        let c = C64::new(0.0, -2.5);
        let ka = assemble_dense(OperatorKind::AdjointDoubleLayer, 2.5, &torus, &dofs, orders).unwrap();
        let v = assemble_dense(OperatorKind::SingleLayer, 2.5, &torus, &dofs, orders).unwrap();
        let dense = ka + v * c;
        let params = H2Params { q: 6, ..Default::default() };
        let h2 = H2Matrix::combined(OperatorKind::AdjointDoubleLayer, c, 2.5, &torus, &dofs, orders, params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<C64> = (0..dofs.num_dofs()).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let yd = &dense * nalgebra::DVector::from_vec(x.clone());
        let yh = h2.apply(&x).unwrap();
        let err = yh.iter().zip(yd.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / yd.norm();
        assert!(err < 1e-4, "{err}");
        assert!(H2Matrix::combined(OperatorKind::Hypersingular, c, 2.5, &torus, &dofs, orders, params).is_err());
    }

    #[test]
    fn single_layer_matches_dense() {
        let e = relative_matvec_error(OperatorKind::SingleLayer, Continuity::Discontinuous);
        assert!(e < 1e-4, "{e:e}");
    }

    #[test]
    fn double_layers_match_dense() {
        for kind in [OperatorKind::DoubleLayer, OperatorKind::AdjointDoubleLayer] {
            let e = relative_matvec_error(kind, Continuity::Discontinuous);
            assert!(e < 1e-4, "{kind:?}: {e:e}");
        }
    }

    #[test]
    fn hypersingular_matches_dense() {
        let e = relative_matvec_error(OperatorKind::Hypersingular, Continuity::Continuous);
        assert!(e < 1e-4, "{e:e}");
    }

    #[test]
    fn products_are_linear() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, Continuity::Discontinuous).unwrap();
        let orders = QuadratureOrders::for_degree(1);
        let params = H2Params { q: 4, ..Default::default() };
        let h2 = H2Matrix::new(OperatorKind::SingleLayer, 2.5, &torus, &dofs, orders, params).unwrap();
        let n = dofs.num_dofs();
        let zero = vec![C64::new(0.0, 0.0); n];
        assert!(h2.apply(&zero).unwrap().iter().all(|v| *v == zero[0]));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut rand_vec = || -> Vec<C64> {
            (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        };
        let (x, y) = (rand_vec(), rand_vec());
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let combo: Vec<C64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let lhs = h2.apply(&combo).unwrap();
        let (hx, hy) = (h2.apply(&x).unwrap(), h2.apply(&y).unwrap());
        let scale = hx.iter().chain(&hy).map(|v| v.norm()).fold(0.0, f64::max);
        for ((l, u), v) in lhs.iter().zip(&hx).zip(&hy) {
            assert!((l - (a * u + b * v)).norm() < 1e-13 * scale);
        }
        assert!(h2.apply(&zero[1..]).is_err());
    }

    /// Interpolation error decays exponentially in the number of points.
    #[test]
    fn more_points_reduce_the_error() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 1, Continuity::Discontinuous).unwrap();
        let orders = QuadratureOrders::for_degree(1);
        let dense = assemble_dense(OperatorKind::SingleLayer, 2.5, &torus, &dofs, orders).unwrap();
        let x: Vec<C64> = (0..dofs.num_dofs()).map(|i| C64::new((i as f64).sin(), (0.3 * i as f64).cos())).collect();
        let yd = &dense * nalgebra::DVector::from_vec(x.clone());
        let err = |q: usize| {
            let params = H2Params { q, ..Default::default() };
            let h2 = H2Matrix::new(OperatorKind::SingleLayer, 2.5, &torus, &dofs, orders, params).unwrap();
            let yh = h2.apply(&x).unwrap();
            yh.iter().zip(yd.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / yd.norm()
        };
        let (e3, e5) = (err(3), err(5));
        assert!(e5 * 10.0 < e3, "{e3:e} {e5:e}");
    }

    /// Without the coupling cache, a level-4 operator stores well under
    /// 30% of the dense entries.
    #[test]
    fn compressed_storage() {
        let torus = builtin_torus();
        let dofs = DofMap::new(&torus, 1, 4, Continuity::Discontinuous).unwrap();
        let tree = ClusterTree::new(&torus, &dofs, 2).unwrap();
        let part = partition(&tree, 1.6);
        let n = dofs.num_dofs();
        // near field: four entries per element pair at p = 1, discontinuous
        let near_entries = part.near.len() * 16 * 4;
        let basis_entries = tree.clusters().len() * 16 * 4;
        let ratio = (near_entries + basis_entries) as f64 / (n * n) as f64;
        assert!(ratio < 0.3, "{ratio}");
    }
}
