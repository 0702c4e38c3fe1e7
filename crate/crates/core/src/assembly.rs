//! Galerkin matrices of the boundary integral operators, the mass matrix
//! and right-hand sides.
//!
//! Assembly is driven by element pairs. [`PairIntegrator::pair`] returns the
//! local blocks of one pair in both orders; dense assembly and the
//! near field of the compressed operators share it, so their entries agree
//! bit for bit.

use crate::dofmap::{Continuity, DofMap};
use crate::geometry::{SurfaceGeometry, Vec3};
use crate::kernels::{green_r, plane_wave_traces, C64};
use crate::mesh::Element;
use crate::operator::CsrMatrix;
use crate::quadrature::{align_pair, gauss_rule, singular_pair_rule, PairPoint, PairRegime};
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("the hypersingular operator needs a continuous spline space")]
    HypersingularNeedsContinuous,
    #[error("the single layer can only be folded into V, K or K*")]
    NoSingleLayerChannel,
    #[error("coupling parameter η must be nonzero")]
    ZeroCoupling,
    #[error("direction must be a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("quadrature order {0} out of range")]
    BadOrder(usize),
}

/// Galerkin operators; `x` is the test point and `y` the trial point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    SingleLayer,
    DoubleLayer,
    AdjointDoubleLayer,
    /// Regularized: `⟨G curl φ, curl ψ⟩ − κ²⟨G n_x·n_y φ, ψ⟩`.
    Hypersingular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    SoundSoft,
    SoundHard,
}

/// CFIE coupling. `Uncoupled` drops the second equation and exists to
/// demonstrate spurious resonances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Eta(f64),
    Uncoupled,
}

impl Coupling {
    pub fn eta(&self) -> Result<f64, AssemblyError> {
        match *self {
            Coupling::Eta(e) if e == 0.0 || !e.is_finite() => Err(AssemblyError::ZeroCoupling),
            Coupling::Eta(e) => Ok(e),
            Coupling::Uncoupled => Ok(0.0),
        }
    }
}

/// Gauss points per direction: far pairs use `far` (raised for close
/// pairs), touching pairs use `singular` per direction of each piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOrders {
    pub far: usize,
    pub singular: usize,
}

impl QuadratureOrders {
    pub fn for_degree(p: usize) -> Self {
        Self {
            far: p + 3,
            singular: p + 4,
        }
    }
}

/// Extra far-field points by separation, `dist / diam` thresholds.
const FAR_TIERS: [(f64, usize); 4] = [(2.0, 0), (1.0, 1), (0.5, 2), (0.0, 4)];

/// Tensor-rule data of all elements for one quadrature order.
struct ElementQuad {
    npts: usize,
    points: Vec<Vec3>,
    normals: Vec<Vec3>,
    /// `w h²`
    w: Vec<f64>,
    /// `w h² a(x̂)`
    wmu: Vec<f64>,
    /// basis values, `[(elem * npts + pt) * nb + a]`
    phi: Vec<f64>,
    /// `∂₁φ ∂₂F − ∂₂φ ∂₁F`, same layout
    curl: Vec<[f64; 3]>,
}

fn curl_vector(grad: [f64; 2], d1: &Vec3, d2: &Vec3) -> [f64; 3] {
    let v = d2 * grad[0] - d1 * grad[1];
    [v.x, v.y, v.z]
}

impl ElementQuad {
    fn new(geometry: &SurfaceGeometry, dofs: &DofMap, q: usize) -> Self {
        let rule = gauss_rule(q).expect("order checked by caller");
        let mesh = dofs.mesh();
        let nb = dofs.local_size();
        let npts = q * q;
        let ne = mesh.num_elements();
        let h2 = mesh.h() * mesh.h();
        let mut out = Self {
            npts,
            points: Vec::with_capacity(ne * npts),
            normals: Vec::with_capacity(ne * npts),
            w: Vec::with_capacity(ne * npts),
            wmu: Vec::with_capacity(ne * npts),
            phi: vec![0.0; ne * npts * nb],
            curl: vec![[0.0; 3]; ne * npts * nb],
        };
        let mut grads = vec![[0.0; 2]; nb];
        for (ei, e) in mesh.elements().iter().enumerate() {
            for (k, (s1, w1)) in rule.iter().enumerate() {
                for (l, (s2, w2)) in rule.iter().enumerate() {
                    let pt = k * q + l;
                    let (x, y) = mesh.to_patch(e, [s1, s2]);
                    let g = geometry.eval(e.patch, x, y);
                    out.points.push(g.point);
                    out.normals.push(g.normal);
                    out.w.push(w1 * w2 * h2);
                    out.wmu.push(w1 * w2 * h2 * g.measure);
                    let base = (ei * npts + pt) * nb;
                    dofs.element_basis(e, [s1, s2], &mut out.phi[base..base + nb], &mut grads);
                    for a in 0..nb {
                        out.curl[base + a] = curl_vector(grads[a], &g.d1, &g.d2);
                    }
                }
            }
        }
        out
    }
}

/// Integrates one element pair for a fixed operator.
pub struct PairIntegrator<'a> {
    geometry: &'a SurfaceGeometry,
    dofs: &'a DofMap,
    kind: OperatorKind,
    kappa: f64,
    /// `c` in `A + cV`
    single_layer: C64,
    nb: usize,
    tiers: Vec<ElementQuad>,
    centers: Vec<Vec3>,
    radii: Vec<f64>,
    identical: Vec<PairPoint>,
    edge: Vec<PairPoint>,
    vertex: Vec<PairPoint>,
}

impl<'a> PairIntegrator<'a> {
    pub fn new(
        kind: OperatorKind,
        kappa: f64,
        geometry: &'a SurfaceGeometry,
        dofs: &'a DofMap,
        orders: QuadratureOrders,
    ) -> Result<Self, AssemblyError> {
        if kind == OperatorKind::Hypersingular && dofs.continuity() != Continuity::Continuous {
            return Err(AssemblyError::HypersingularNeedsContinuous);
        }
        let max_far = orders.far + FAR_TIERS[FAR_TIERS.len() - 1].1;
        if orders.far == 0 || max_far > crate::quadrature::MAX_ORDER {
            return Err(AssemblyError::BadOrder(orders.far));
        }
        if orders.singular == 0 || orders.singular > crate::quadrature::MAX_ORDER {
            return Err(AssemblyError::BadOrder(orders.singular));
        }
        let mesh = dofs.mesh();
        let mut centers = Vec::with_capacity(mesh.num_elements());
        let mut radii = Vec::with_capacity(mesh.num_elements());
        for e in mesh.elements() {
            let at = |s: [f64; 2]| {
                let (x, y) = mesh.to_patch(e, s);
                geometry.eval(e.patch, x, y).point
            };
            let c = at([0.5, 0.5]);
            let mut r: f64 = 0.0;
            for a in 0..=4 {
                for b in 0..=4 {
                    r = r.max((at([a as f64 / 4.0, b as f64 / 4.0]) - c).norm());
                }
            }
            centers.push(c);
            // sampled hull, slightly inflated for the curved parts in between
            radii.push(1.1 * r);
        }
        let tiers = FAR_TIERS
            .iter()
            .map(|&(_, extra)| ElementQuad::new(geometry, dofs, orders.far + extra))
            .collect();
        Ok(Self {
            geometry,
            dofs,
            kind,
            kappa,
            single_layer: C64::new(0.0, 0.0),
            nb: dofs.local_size(),
            tiers,
            centers,
            radii,
            identical: singular_pair_rule(PairRegime::Identical, orders.singular),
            edge: singular_pair_rule(PairRegime::CommonEdge, orders.singular),
            vertex: singular_pair_rule(PairRegime::CommonVertex, orders.singular),
        })
    }

    /// Integrates `A + cV` instead of `A`, sharing the kernel evaluation.
    pub fn with_single_layer(mut self, c: C64) -> Result<Self, AssemblyError> {
        if self.kind == OperatorKind::Hypersingular && c != C64::new(0.0, 0.0) {
            return Err(AssemblyError::NoSingleLayerChannel);
        }
        self.single_layer = c;
        Ok(self)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn single_layer(&self) -> C64 {
        self.single_layer
    }

    pub fn dofs(&self) -> &DofMap {
        self.dofs
    }

    /// Local block size `(p+1)²`.
    pub fn local_size(&self) -> usize {
        self.nb
    }

    pub fn element_center(&self, e: usize) -> (Vec3, f64) {
        (self.centers[e], self.radii[e])
    }

    fn tier(&self, ea: usize, eb: usize) -> usize {
        let dist = (self.centers[ea] - self.centers[eb]).norm() - self.radii[ea] - self.radii[eb];
        let diam = 2.0 * self.radii[ea].max(self.radii[eb]);
        FAR_TIERS
            .iter()
            .position(|&(ratio, _)| dist >= ratio * diam)
            .unwrap_or(FAR_TIERS.len() - 1)
    }

    /// Local blocks of the pair: `ab[a * nb + b]` couples test function `a`
    /// on `ea` with trial function `b` on `eb`, `ba[b * nb + a]` the
    /// reverse. For `ea == eb` only `ab` is written.
    pub fn pair(&self, ea: usize, eb: usize, ab: &mut [C64], ba: &mut [C64]) {
        let elements = self.dofs.mesh().elements();
        let (a, b) = (&elements[ea], &elements[eb]);
        let (regime, ta, tb) = align_pair(&a.corners, &b.corners);
        ab.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        if ea != eb {
            ba.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        }
        let rule = match regime {
            PairRegime::Far => return self.far_pair(ea, eb, ab, ba),
            PairRegime::Identical => &self.identical,
            PairRegime::CommonEdge => &self.edge,
            PairRegime::CommonVertex => &self.vertex,
        };
        self.singular_pair(a, b, ea == eb, rule, |p| (ta.apply(p.x), tb.apply(p.y)), ab, ba);
    }

    #[allow(clippy::too_many_arguments)]
    fn singular_pair(
        &self,
        a: &Element,
        b: &Element,
        same: bool,
        rule: &[PairPoint],
        frames: impl Fn(&PairPoint) -> ([f64; 2], [f64; 2]),
        ab: &mut [C64],
        ba: &mut [C64],
    ) {
        let nb = self.nb;
        let mesh = self.dofs.mesh();
        let h4 = mesh.h().powi(4);
        let kappa = self.kappa;
        let mut phi_x = vec![0.0; nb];
        let mut phi_y = vec![0.0; nb];
        let mut gr_x = vec![[0.0; 2]; nb];
        let mut gr_y = vec![[0.0; 2]; nb];
        let mut cx = vec![[0.0; 3]; nb];
        let mut cy = vec![[0.0; 3]; nb];
        for p in rule {
            let (sx, sy) = frames(p);
            let (px, py) = (mesh.to_patch(a, sx), mesh.to_patch(b, sy));
            let gx = self.geometry.eval(a.patch, px.0, px.1);
            let gy = self.geometry.eval(b.patch, py.0, py.1);
            self.dofs.element_basis(a, sx, &mut phi_x, &mut gr_x);
            self.dofs.element_basis(b, sy, &mut phi_y, &mut gr_y);
            let d = gx.point - gy.point;
            let r = d.norm();
            let g = green_r(kappa, r) * (p.w * h4);
            let mu = gx.measure * gy.measure;
            match self.kind {
                OperatorKind::SingleLayer => {
                    let k = g * mu * (1.0 + self.single_layer);
                    outer(ab, k, &phi_x, &phi_y);
                    if !same {
                        outer(ba, k, &phi_y, &phi_x);
                    }
                }
                OperatorKind::DoubleLayer | OperatorKind::AdjointDoubleLayer => {
                    let f = g * C64::new(-1.0, kappa * r) * (mu / (r * r));
                    // ∂G/∂n_y (x, y) = f (y − x)·n_y ; ∂G/∂n_x (x, y) = f (x − y)·n_x
                    let v = g * mu * self.single_layer;
                    let (k_ab, k_ba) = if self.kind == OperatorKind::DoubleLayer {
                        (f * (-d.dot(&gy.normal)) + v, f * d.dot(&gx.normal) + v)
                    } else {
                        (f * d.dot(&gx.normal) + v, f * (-d.dot(&gy.normal)) + v)
                    };
                    outer(ab, k_ab, &phi_x, &phi_y);
                    if !same {
                        outer(ba, k_ba, &phi_y, &phi_x);
                    }
                }
                OperatorKind::Hypersingular => {
                    for i in 0..nb {
                        cx[i] = curl_vector(gr_x[i], &gx.d1, &gx.d2);
                        cy[i] = curl_vector(gr_y[i], &gy.d1, &gy.d2);
                    }
                    let m = g * (-kappa * kappa * gx.normal.dot(&gy.normal) * mu);
                    for i in 0..nb {
                        for j in 0..nb {
                            let c = cx[i][0] * cy[j][0] + cx[i][1] * cy[j][1] + cx[i][2] * cy[j][2];
                            let v = g * c + m * (phi_x[i] * phi_y[j]);
                            ab[i * nb + j] += v;
                            if !same {
                                ba[j * nb + i] += v;
                            }
                        }
                    }
                }
            }
        }
    }

    fn far_pair(&self, ea: usize, eb: usize, ab: &mut [C64], ba: &mut [C64]) {
        let t = &self.tiers[self.tier(ea, eb)];
        let nb = self.nb;
        let n = t.npts;
        let kappa = self.kappa;
        let (oa, ob) = (ea * n, eb * n);
        let phi_a = &t.phi[oa * nb..(oa + n) * nb];
        let phi_b = &t.phi[ob * nb..(ob + n) * nb];
        let mut k1 = vec![C64::new(0.0, 0.0); n * n];
        match self.kind {
            OperatorKind::SingleLayer => {
                for i in 0..n {
                    for j in 0..n {
                        let r = (t.points[oa + i] - t.points[ob + j]).norm();
                        k1[i * n + j] = green_r(kappa, r) * (t.wmu[oa + i] * t.wmu[ob + j]) * (1.0 + self.single_layer);
                    }
                }
                sandwich(ab, &k1, phi_a, phi_b, n, nb, false);
                transpose_into(ba, ab, nb);
            }
            OperatorKind::DoubleLayer | OperatorKind::AdjointDoubleLayer => {
                let mut k2 = vec![C64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        let d = t.points[oa + i] - t.points[ob + j];
                        let r = d.norm();
                        let g = green_r(kappa, r) * (t.wmu[oa + i] * t.wmu[ob + j]);
                        let f = g * C64::new(-1.0, kappa * r) / (r * r);
                        let v = g * self.single_layer;
                        let (dl_ab, dl_ba) = (f * (-d.dot(&t.normals[ob + j])) + v, f * d.dot(&t.normals[oa + i]) + v);
                        if self.kind == OperatorKind::DoubleLayer {
                            k1[i * n + j] = dl_ab;
                            k2[i * n + j] = dl_ba;
                        } else {
                            k1[i * n + j] = dl_ba;
                            k2[i * n + j] = dl_ab;
                        }
                    }
                }
                sandwich(ab, &k1, phi_a, phi_b, n, nb, false);
                // ba[b][a] = Σ φ_b(y_j) k2[i][j] φ_a(x_i)
                let mut tmp = vec![C64::new(0.0, 0.0); nb * nb];
                sandwich(&mut tmp, &k2, phi_a, phi_b, n, nb, false);
                transpose_into(ba, &tmp, nb);
            }
            OperatorKind::Hypersingular => {
                let mut km = vec![C64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in 0..n {
                        let r = (t.points[oa + i] - t.points[ob + j]).norm();
                        let g = green_r(kappa, r);
                        k1[i * n + j] = g * (t.w[oa + i] * t.w[ob + j]);
                        km[i * n + j] = g
                            * (-kappa * kappa
                                * t.normals[oa + i].dot(&t.normals[ob + j])
                                * t.wmu[oa + i]
                                * t.wmu[ob + j]);
                    }
                }
                sandwich(ab, &km, phi_a, phi_b, n, nb, false);
                let curl_a = &t.curl[oa * nb..(oa + n) * nb];
                let curl_b = &t.curl[ob * nb..(ob + n) * nb];
                let mut ca = vec![0.0; n * nb];
                let mut cb = vec![0.0; n * nb];
                for c in 0..3 {
                    for (dst, src) in ca.iter_mut().zip(curl_a) {
                        *dst = src[c];
                    }
                    for (dst, src) in cb.iter_mut().zip(curl_b) {
                        *dst = src[c];
                    }
                    sandwich(ab, &k1, &ca, &cb, n, nb, true);
                }
                transpose_into(ba, ab, nb);
            }
        }
    }
}

#[inline]
fn outer(out: &mut [C64], k: C64, u: &[f64], v: &[f64]) {
    let nb = u.len();
    for i in 0..nb {
        let ki = k * u[i];
        for j in 0..nb {
            out[i * nb + j] += ki * v[j];
        }
    }
}

/// `out (+)= Φ_aᵀ K Φ_b` with `K` of size `n × n` and `Φ` of size `n × nb`.
fn sandwich(out: &mut [C64], k: &[C64], phi_a: &[f64], phi_b: &[f64], n: usize, nb: usize, accumulate: bool) {
    let mut t = vec![C64::new(0.0, 0.0); n * nb];
    for i in 0..n {
        let row = &k[i * n..(i + 1) * n];
        let ti = &mut t[i * nb..(i + 1) * nb];
        for (j, kij) in row.iter().enumerate() {
            let pb = &phi_b[j * nb..(j + 1) * nb];
            for (tv, &p) in ti.iter_mut().zip(pb) {
                *tv += kij * p;
            }
        }
    }
    if !accumulate {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    }
    for i in 0..n {
        let pa = &phi_a[i * nb..(i + 1) * nb];
        let ti = &t[i * nb..(i + 1) * nb];
        for (a, &p) in pa.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let o = &mut out[a * nb..(a + 1) * nb];
            for (ov, tv) in o.iter_mut().zip(ti) {
                *ov += tv * p;
            }
        }
    }
}

fn transpose_into(dst: &mut [C64], src: &[C64], nb: usize) {
    for i in 0..nb {
        for j in 0..nb {
            dst[j * nb + i] = src[i * nb + j];
        }
    }
}

/// Dense Galerkin matrix; rows are test functions, columns trial functions.
pub fn assemble_dense(
    kind: OperatorKind,
    kappa: f64,
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
    orders: QuadratureOrders,
) -> Result<DMatrix<C64>, AssemblyError> {
    let integ = PairIntegrator::new(kind, kappa, geometry, dofs, orders)?;
    let n = dofs.num_dofs();
    let ne = dofs.mesh().num_elements();
    let nb = integ.local_size();
    let mut mat = DMatrix::zeros(n, n);
    let elements = dofs.mesh().elements();
    let element_dofs: Vec<Vec<usize>> = elements
        .iter()
        .map(|e| {
            let mut v = Vec::new();
            dofs.element_dofs(e, &mut v);
            v
        })
        .collect();
    const CHUNK: usize = 8;
    for start in (0..ne).step_by(CHUNK) {
        let rows: Vec<Vec<C64>> = (start..(start + CHUNK).min(ne))
            .into_par_iter()
            .map(|ea| {
                let mut blocks = vec![C64::new(0.0, 0.0); (ne - ea) * 2 * nb * nb];
                for (k, eb) in (ea..ne).enumerate() {
                    let (ab, ba) = blocks[k * 2 * nb * nb..(k + 1) * 2 * nb * nb].split_at_mut(nb * nb);
                    integ.pair(ea, eb, ab, ba);
                }
                blocks
            })
            .collect();
        for (off, blocks) in rows.iter().enumerate() {
            let ea = start + off;
            for (k, eb) in (ea..ne).enumerate() {
                let (ab, ba) = blocks[k * 2 * nb * nb..(k + 1) * 2 * nb * nb].split_at(nb * nb);
                scatter(&mut mat, &element_dofs[ea], &element_dofs[eb], ab);
                if ea != eb {
                    scatter(&mut mat, &element_dofs[eb], &element_dofs[ea], ba);
                }
            }
        }
    }
    Ok(mat)
}

fn scatter(mat: &mut DMatrix<C64>, rows: &[usize], cols: &[usize], block: &[C64]) {
    let nb = cols.len();
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            mat[(r, c)] += block[a * nb + b];
        }
    }
}

/// Surface integrals `∫ f ψ_a` per element for a pointwise integrand.
fn element_loads(
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
    q: usize,
    mut f: impl FnMut(&crate::geometry::GeometryData) -> C64,
) -> Vec<C64> {
    let rule = gauss_rule(q).expect("valid order");
    let mesh = dofs.mesh();
    let nb = dofs.local_size();
    let h2 = mesh.h() * mesh.h();
    let mut out = vec![C64::new(0.0, 0.0); dofs.num_dofs()];
    let mut vals = vec![0.0; nb];
    let mut grads = vec![[0.0; 2]; nb];
    let mut idx = Vec::new();
    for e in mesh.elements() {
        dofs.element_dofs(e, &mut idx);
        for (s1, w1) in rule.iter() {
            for (s2, w2) in rule.iter() {
                let (x, y) = mesh.to_patch(e, [s1, s2]);
                let g = geometry.eval(e.patch, x, y);
                dofs.element_basis(e, [s1, s2], &mut vals, &mut grads);
                let v = f(&g) * (w1 * w2 * h2 * g.measure);
                for a in 0..nb {
                    out[idx[a]] += v * vals[a];
                }
            }
        }
    }
    out
}

/// Gram matrix `⟨φ_j, φ_i⟩_Γ` in sparse form.
pub fn assemble_mass(geometry: &SurfaceGeometry, dofs: &DofMap) -> CsrMatrix {
    let q = dofs.degree() + 4;
    let rule = gauss_rule(q).expect("valid order");
    let mesh = dofs.mesh();
    let nb = dofs.local_size();
    let h2 = mesh.h() * mesh.h();
    let mut pattern = vec![Vec::new(); dofs.num_dofs()];
    let mut idx = Vec::new();
    for e in mesh.elements() {
        dofs.element_dofs(e, &mut idx);
        for &r in &idx {
            pattern[r].extend_from_slice(&idx);
        }
    }
    for row in &mut pattern {
        row.sort_unstable();
        row.dedup();
    }
    let mut m = CsrMatrix::from_pattern(dofs.num_dofs(), pattern);
    let mut vals = vec![0.0; nb];
    let mut grads = vec![[0.0; 2]; nb];
    let mut local = vec![0.0; nb * nb];
    for e in mesh.elements() {
        dofs.element_dofs(e, &mut idx);
        local.iter_mut().for_each(|v| *v = 0.0);
        for (s1, w1) in rule.iter() {
            for (s2, w2) in rule.iter() {
                let (x, y) = mesh.to_patch(e, [s1, s2]);
                let mu = geometry.eval(e.patch, x, y).measure;
                dofs.element_basis(e, [s1, s2], &mut vals, &mut grads);
                let w = w1 * w2 * h2 * mu;
                for a in 0..nb {
                    for b in 0..nb {
                        local[a * nb + b] += w * vals[a] * vals[b];
                    }
                }
            }
        }
        for a in 0..nb {
            for b in 0..nb {
                m.add(idx[a], idx[b], C64::new(local[a * nb + b], 0.0));
            }
        }
    }
    m
}

/// Right-hand side of the CFIE for an incident plane wave in direction `d`:
/// sound-soft `⟨∂ₙu_inc − iη u_inc, ψ⟩`, sound-hard `⟨u_inc − iη ∂ₙu_inc, ψ⟩`.
pub fn assemble_rhs(
    problem: ProblemKind,
    kappa: f64,
    d: &Vec3,
    coupling: Coupling,
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
) -> Result<Vec<C64>, AssemblyError> {
    let eta = coupling.eta()?;
    if (d.norm() - 1.0).abs() > 1e-12 {
        return Err(AssemblyError::NonUnitDirection(d.norm()));
    }
    let ieta = C64::new(0.0, eta);
    Ok(element_loads(geometry, dofs, dofs.degree() + 4, |g| {
        let (u, du) = plane_wave_traces(kappa, d, g);
        match problem {
            ProblemKind::SoundSoft => du - ieta * u,
            ProblemKind::SoundHard => u - ieta * du,
        }
    }))
}

/// `⟨f, ψ_i⟩` for a general surface function.
pub fn assemble_load(
    geometry: &SurfaceGeometry,
    dofs: &DofMap,
    f: impl FnMut(&crate::geometry::GeometryData) -> C64,
) -> Vec<C64> {
    element_loads(geometry, dofs, dofs.degree() + 4, f)
}
