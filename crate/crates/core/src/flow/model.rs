use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dirac::family::BlockEigen;
use crate::dirac::projection::block_projection_derivative;
use crate::dirac::{curl_modes, Branch, CurlMode, SpinorBlock};
use crate::geometry::{harmonic_basis, ModelGeometry, Mode, PicardPoint};
use crate::linalg::{dot, mat_vec, Vec2, C64, ZERO};
use crate::sections::{intersect_forms, PerturbedDirac, SpectralCutSection, SpectralSystem};

use super::norms::{norm_parts, SplitNorms};
use super::quadratic::{c1_kernel, half_bilinear, harmonic_part, quadratic_terms, xi_coefficient, Form3, QuadraticTerms};
use super::{FlowConfig, FlowError};

/// Cuts bounding `F_n = P_n ∩ Q_n` as a window `(lower, upper]` in the
/// eigenvalues of `D'`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpinorWindow {
    Fixed { lower: f64, upper: f64 },
    Sections { p: SpectralCutSection, q: SpectralCutSection },
}

/// Eigenmode of `D'` spanning a line of the fiber of `F_n`.
#[derive(Debug, Clone)]
pub struct FiberMode {
    pub block: SpinorBlock,
    /// Eigenpair of `D`; the eigenvector is shared with `D'`.
    pub eigen: BlockEigen,
    /// Eigenvalue of `D'`.
    pub dprime: f64,
}

impl FiberMode {
    pub fn key(&self) -> (Mode, Branch) {
        (self.block.label, self.eigen.branch)
    }
}

/// Point of `F_n x W_n`: `phi` is indexed by [`FlowModel::fiber`] at `a`,
/// `omega` by [`FlowModel::forms`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub a: PicardPoint,
    pub phi: Vec<C64>,
    pub omega: Vec<f64>,
}

/// Value of the vector field at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    /// Horizontal component in Picard coordinates.
    pub da: Vec<f64>,
    /// Vertical component along the fiber modes of `F_n` at `a`.
    pub dphi: Vec<C64>,
    /// Vertical component along eigenvectors outside `F_n` (the
    /// `nabla pi` term only).
    pub dphi_normal: Vec<(Mode, Branch, C64)>,
    pub domega: Vec<f64>,
    pub chi: f64,
}

/// Layout of flat state vectors: Picard coordinates, then four reals per
/// tracked block, then the form coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatChart {
    pub b1: usize,
    pub labels: Vec<Mode>,
    pub nforms: usize,
}

impl FlatChart {
    pub fn dim(&self) -> usize {
        self.b1 + 4 * self.labels.len() + self.nforms
    }

    fn block_offset(&self, i: usize) -> usize {
        self.b1 + 4 * i
    }

    fn form_offset(&self) -> usize {
        self.b1 + 4 * self.labels.len()
    }

    pub fn block_vector(&self, x: &[f64], i: usize) -> Vec2 {
        let o = self.block_offset(i);
        [C64::new(x[o], x[o + 1]), C64::new(x[o + 2], x[o + 3])]
    }

    fn set_block(&self, x: &mut [f64], i: usize, v: Vec2) {
        let o = self.block_offset(i);
        x[o] = v[0].re;
        x[o + 1] = v[0].im;
        x[o + 2] = v[1].re;
        x[o + 3] = v[1].im;
    }

    pub fn base<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.b1]
    }

    pub fn omega<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[self.form_offset()..]
    }
}

/// Per-block data at a base point.
pub(crate) struct BlockState {
    pub block: SpinorBlock,
    pub eig: Vec<BlockEigen>,
    pub dprime: Vec<f64>,
    pub in_f: Vec<bool>,
    pub u: Vec2,
}

/// Result of evaluating the field in flat coordinates.
pub(crate) struct FlatEval {
    pub dx: Vec<f64>,
    pub chi: f64,
    pub blocks: Vec<BlockState>,
    pub du: Vec<Vec2>,
}

/// The data the flow at level `n` depends on: `D'`, the cuts of `F_n` and a
/// basis of `W_n`.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub pd: PerturbedDirac,
    pub window: SpinorWindow,
    /// Basis of `W_n`, sorted by eigenvalue.
    pub forms: Vec<CurlMode>,
    pub level: usize,
    volume: f64,
    harmonic: Vec<[f64; 3]>,
}

impl FlowModel {
    pub fn new(
        pd: PerturbedDirac,
        window: SpinorWindow,
        forms: Vec<CurlMode>,
        level: usize,
    ) -> Result<Self, FlowError> {
        let geom = &pd.family.geom;
        let l = geom.cover_lengths();
        let harmonic = harmonic_basis(geom)?.into_iter().map(|h| h.direction).collect();
        Ok(Self { volume: l[0] * l[1] * l[2], harmonic, pd, window, forms, level })
    }

    /// Level `n` of a spectral system.
    pub fn from_system(sys: &SpectralSystem, n: usize) -> Result<Self, FlowError> {
        if n >= sys.levels() {
            return Err(FlowError::InvalidConfig(format!("level {n} is beyond the ladder ({} levels)", sys.levels())));
        }
        let w = intersect_forms(&sys.wp[n], &sys.wq[n])?;
        let window = SpinorWindow::Sections { p: sys.p[n].clone(), q: sys.q[n].clone() };
        Self::new(sys.perturbed.clone(), window, w.modes, n)
    }

    /// Constant windows: `F = (lower, upper]` in `D'`, `W = (form_lower, form_upper]` in `*d`.
    pub fn with_windows(
        pd: PerturbedDirac,
        spinor: (f64, f64),
        form: (f64, f64),
    ) -> Result<Self, FlowError> {
        let forms = curl_modes(&pd.family.geom, form.0, form.1, pd.family.cap)?
            .into_iter()
            .filter(|m| m.eigenvalue > form.0)
            .collect();
        Self::new(pd, SpinorWindow::Fixed { lower: spinor.0, upper: spinor.1 }, forms, 0)
    }

    pub fn geom(&self) -> &ModelGeometry {
        &self.pd.family.geom
    }

    pub fn b1(&self) -> usize {
        self.geom().b1()
    }

    pub fn form_eigenvalues(&self) -> Vec<f64> {
        self.forms.iter().map(|m| m.eigenvalue).collect()
    }

    /// `(lower, upper)` of `F_n` at `c`.
    pub fn window_at(&self, c: &[f64]) -> Result<(f64, f64), FlowError> {
        match &self.window {
            SpinorWindow::Fixed { lower, upper } => Ok((*lower, *upper)),
            SpinorWindow::Sections { p, q } => Ok((-q.cut_at(c)?, p.cut_at(c)?)),
        }
    }

    /// Eigenmodes spanning the fiber of `F_n` at `c`, sorted by `D'`
    /// eigenvalue, then block label and branch.
    pub fn fiber(&self, c: &[f64]) -> Result<Vec<FiberMode>, FlowError> {
        let (lower, upper) = self.window_at(c)?;
        let mut out: Vec<FiberMode> = self
            .pd
            .eigen_in_window(c, lower, upper)?
            .into_iter()
            .filter(|(_, e)| e.eigenvalue > lower)
            .map(|(block, e)| {
                let eigen = block.eigen().into_iter().find(|x| x.branch == e.branch).expect("branch of block");
                FiberMode { block, eigen, dprime: e.eigenvalue }
            })
            .collect();
        out.sort_by(|a, b| a.dprime.total_cmp(&b.dprime).then(a.key().cmp(&b.key())));
        Ok(out)
    }

    /// Chart tracking the blocks of `F_n` at every point of `points`.
    pub fn chart(&self, points: &[Vec<f64>]) -> Result<FlatChart, FlowError> {
        let mut labels = BTreeSet::new();
        for c in points {
            for m in self.fiber(c)? {
                labels.insert(m.block.label);
            }
        }
        Ok(FlatChart { b1: self.b1(), labels: labels.into_iter().collect(), nforms: self.forms.len() })
    }

    pub fn zero_state(&self, a: &PicardPoint) -> Result<FlowState, FlowError> {
        let n = self.fiber(&a.coords)?.len();
        Ok(FlowState { a: a.clone(), phi: vec![ZERO; n], omega: vec![0.0; self.forms.len()] })
    }

    fn check_state(&self, state: &FlowState, fiber: &[FiberMode]) -> Result<(), FlowError> {
        if state.a.coords.len() != self.b1() {
            return Err(FlowError::StateMismatch { expected: self.b1(), got: state.a.coords.len() });
        }
        if state.phi.len() != fiber.len() {
            return Err(FlowError::StateMismatch { expected: fiber.len(), got: state.phi.len() });
        }
        if state.omega.len() != self.forms.len() {
            return Err(FlowError::StateMismatch { expected: self.forms.len(), got: state.omega.len() });
        }
        Ok(())
    }

    pub fn to_flat(&self, chart: &FlatChart, state: &FlowState) -> Result<Vec<f64>, FlowError> {
        let fiber = self.fiber(&state.a.coords)?;
        self.check_state(state, &fiber)?;
        let index: HashMap<Mode, usize> = chart.labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let mut x = vec![0.0; chart.dim()];
        x[..chart.b1].copy_from_slice(&state.a.coords);
        let mut u = vec![[ZERO; 2]; chart.labels.len()];
        for (m, p) in fiber.iter().zip(&state.phi) {
            let i = *index.get(&m.block.label).ok_or_else(|| {
                FlowError::InvalidConfig(format!("block {:?} is not tracked by the chart", m.block.label))
            })?;
            u[i][0] += *p * m.eigen.vector[0];
            u[i][1] += *p * m.eigen.vector[1];
        }
        for (i, v) in u.into_iter().enumerate() {
            chart.set_block(&mut x, i, v);
        }
        x[chart.form_offset()..].copy_from_slice(&state.omega);
        Ok(x)
    }

    /// Eigen-coordinates of a flat vector over the fiber at its base point.
    /// Fiber modes of untracked blocks get coefficient zero.
    pub fn from_flat(&self, chart: &FlatChart, x: &[f64]) -> Result<FlowState, FlowError> {
        let c = chart.base(x).to_vec();
        let fiber = self.fiber(&c)?;
        let index: HashMap<Mode, usize> = chart.labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let phi = fiber
            .iter()
            .map(|m| match index.get(&m.block.label) {
                Some(&i) => dot(&m.eigen.vector, &chart.block_vector(x, i)),
                None => ZERO,
            })
            .collect();
        Ok(FlowState { a: PicardPoint { coords: c }, phi, omega: chart.omega(x).to_vec() })
    }

    pub(crate) fn blocks_at(&self, chart: &FlatChart, x: &[f64]) -> Result<Vec<BlockState>, FlowError> {
        let c = chart.base(x);
        let (lower, upper) = self.window_at(c)?;
        let cuts = self.pd.cuts_at(c)?;
        Ok(chart
            .labels
            .iter()
            .enumerate()
            .map(|(i, &label)| {
                let block = self.pd.family.block(label, c);
                let eig = block.eigen();
                let dprime: Vec<f64> = eig.iter().map(|e| self.pd.modify(cuts, e.eigenvalue)).collect();
                let in_f = dprime.iter().map(|&d| d > lower && d <= upper).collect();
                BlockState { block, eig, dprime, in_f, u: chart.block_vector(x, i) }
            })
            .collect())
    }

    /// Split norms of a flat vector.
    pub fn flat_norms(&self, chart: &FlatChart, x: &[f64], config: &FlowConfig) -> Result<SplitNorms, FlowError> {
        let blocks = self.blocks_at(chart, x)?;
        Ok(self.norms_of_blocks(&blocks, chart.omega(x), config))
    }

    pub(crate) fn norms_of_blocks(&self, blocks: &[BlockState], omega: &[f64], config: &FlowConfig) -> SplitNorms {
        let spinor = blocks.iter().flat_map(|b| {
            (0..b.eig.len()).filter(move |&j| b.in_f[j]).map(move |j| (dot(&b.eig[j].vector, &b.u).norm(), b.dprime[j]))
        });
        let forms = omega.iter().zip(&self.forms).map(|(w, m)| (w.abs(), m.eigenvalue));
        norm_parts(spinor, forms, config.k_plus, config.k_minus)
    }

    fn embed_harmonic(&self, xh: &[f64]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (h, d) in xh.iter().zip(&self.harmonic) {
            for j in 0..3 {
                v[j] += h * d[j];
            }
        }
        v
    }

    /// Evaluates the field at a flat vector.
    pub(crate) fn eval_flat(&self, chart: &FlatChart, x: &[f64], config: &FlowConfig) -> Result<FlatEval, FlowError> {
        let blocks = self.blocks_at(chart, x)?;
        let omega = chart.omega(x);
        let chi = config.chi(self.norms_of_blocks(&blocks, omega, config).mixed());
        let mut dx = vec![0.0; chart.dim()];
        let nb = blocks.len();
        if chi == 0.0 {
            return Ok(FlatEval { dx, chi, blocks, du: vec![[ZERO; 2]; nb] });
        }
        let geom = self.geom();
        let embeds: Vec<Vec<(Mode, crate::linalg::Mat2)>> = blocks.iter().map(|b| b.block.embedding()).collect();
        let mut phi: Vec<(Mode, Vec2)> = Vec::new();
        for (b, emb) in blocks.iter().zip(&embeds) {
            for (m, mm) in emb {
                phi.push((*m, mat_vec(mm, &b.u)));
            }
        }
        let mut xh = vec![0.0; self.harmonic.len()];
        let mut c1_blocks = vec![[ZERO; 2]; nb];
        let mut form_source = vec![0.0; self.forms.len()];
        if config.quadratic {
            let t = half_bilinear(&phi, self.volume);
            let qr: HashMap<Mode, Form3> = t.into_iter().map(|(p, v)| (p, [-v[0], -v[1], -v[2]])).collect();
            xh = harmonic_part(geom, qr.get(&[0, 0, 0]).unwrap_or(&[ZERO; 3]), self.volume)?;
            for (j, f) in self.forms.iter().enumerate() {
                let mut s = ZERO;
                for (p, w) in &f.form {
                    if let Some(q) = qr.get(p) {
                        s += w[0].conj() * q[0] + w[1].conj() * q[1] + w[2].conj() * q[2];
                    }
                }
                form_source[j] = s.re;
            }
            let mut wmap: HashMap<Mode, Form3> = HashMap::new();
            for (f, &w) in self.forms.iter().zip(omega) {
                if w == 0.0 {
                    continue;
                }
                for (p, v) in &f.form {
                    let e = wmap.entry(*p).or_insert([ZERO; 3]);
                    for i in 0..3 {
                        e[i] += v[i] * w;
                    }
                }
            }
            let mut xi_cache: HashMap<Mode, C64> = HashMap::new();
            let f = 1.0 / self.volume.sqrt();
            let mut c1: HashMap<Mode, Vec2> = HashMap::with_capacity(phi.len());
            for (n, _) in &phi {
                let mut acc = [ZERO; 2];
                for (m, v) in &phi {
                    let p = [n[0] - m[0], n[1] - m[1], n[2] - m[2]];
                    let xi = *xi_cache
                        .entry(p)
                        .or_insert_with(|| qr.get(&p).map(|q| xi_coefficient(geom, p, q)).unwrap_or(ZERO));
                    let w = wmap.get(&p).copied().unwrap_or([ZERO; 3]);
                    if xi == ZERO && w == [ZERO; 3] {
                        continue;
                    }
                    let a = c1_kernel(&w, xi, v);
                    acc[0] += a[0] * f;
                    acc[1] += a[1] * f;
                }
                c1.insert(*n, acc);
            }
            for (i, emb) in embeds.iter().enumerate() {
                for (m, mm) in emb {
                    let v = c1[m];
                    // adjoint of the embedding
                    c1_blocks[i][0] += mm[0][0].conj() * v[0] + mm[1][0].conj() * v[1];
                    c1_blocks[i][1] += mm[0][1].conj() * v[0] + mm[1][1].conj() * v[1];
                }
            }
        }
        let dir = self.embed_harmonic(&xh);
        let moving = dir.iter().any(|&d| d != 0.0);
        let mut du = vec![[ZERO; 2]; nb];
        for (i, b) in blocks.iter().enumerate() {
            let h = b.block.hamiltonian();
            let hu = mat_vec(&h, &b.u);
            let rhs = [hu[0] + c1_blocks[i][0], hu[1] + c1_blocks[i][1]];
            let mut v = [ZERO; 2];
            for (j, e) in b.eig.iter().enumerate() {
                if b.in_f[j] {
                    let coef = dot(&e.vector, &rhs);
                    v[0] += coef * e.vector[0];
                    v[1] += coef * e.vector[1];
                }
            }
            if moving {
                let dv = b.block.d_hamiltonian(dir);
                for (p, q, val) in block_projection_derivative(&b.eig, &b.in_f, &dv) {
                    let coef = dot(&b.eig[p].vector, &b.u) * val;
                    v[0] += coef * b.eig[q].vector[0];
                    v[1] += coef * b.eig[q].vector[1];
                }
            }
            du[i] = [-v[0] * chi, -v[1] * chi];
            if b.block.dim() == 1 {
                du[i][1] = ZERO;
            }
            chart.set_block(&mut dx, i, du[i]);
        }
        // Picard coordinate r moves along harmonic direction r, a = 2 pi c
        for r in 0..chart.b1 {
            dx[r] = -chi * xh[r] / (2.0 * PI);
        }
        let fo = chart.form_offset();
        for (j, f) in self.forms.iter().enumerate() {
            dx[fo + j] = -chi * (f.eigenvalue * omega[j] + form_source[j]);
        }
        Ok(FlatEval { dx, chi, blocks, du })
    }

    /// The field in flat coordinates.
    pub fn flat_field(&self, chart: &FlatChart, x: &[f64], config: &FlowConfig) -> Result<Vec<f64>, FlowError> {
        Ok(self.eval_flat(chart, x, config)?.dx)
    }

    /// The approximate Seiberg-Witten vector field at `state`.
    pub fn vector_field(&self, state: &FlowState, config: &FlowConfig) -> Result<Tangent, FlowError> {
        let chart = self.chart(std::slice::from_ref(&state.a.coords))?;
        let x = self.to_flat(&chart, state)?;
        let ev = self.eval_flat(&chart, &x, config)?;
        let fiber = self.fiber(&state.a.coords)?;
        let index: BTreeMap<(Mode, Branch), usize> = fiber.iter().enumerate().map(|(i, m)| (m.key(), i)).collect();
        let mut dphi = vec![ZERO; fiber.len()];
        let mut dphi_normal = Vec::new();
        for (b, du) in ev.blocks.iter().zip(&ev.du) {
            for (j, e) in b.eig.iter().enumerate() {
                let comp = dot(&e.vector, du);
                match index.get(&(b.block.label, e.branch)) {
                    Some(&i) if b.in_f[j] => dphi[i] = comp,
                    _ => {
                        if comp != ZERO {
                            dphi_normal.push((b.block.label, e.branch, comp));
                        }
                    }
                }
            }
        }
        let fo = chart.form_offset();
        Ok(Tangent {
            da: ev.dx[..chart.b1].to_vec(),
            dphi,
            dphi_normal,
            domega: ev.dx[fo..].to_vec(),
            chi: ev.chi,
        })
    }

    /// Quadratic terms of a state.
    pub fn quadratic_terms(&self, state: &FlowState, config: &FlowConfig) -> Result<QuadraticTerms, FlowError> {
        let fiber = self.fiber(&state.a.coords)?;
        self.check_state(state, &fiber)?;
        let mut phi: BTreeMap<Mode, Vec2> = BTreeMap::new();
        for (m, p) in fiber.iter().zip(&state.phi) {
            let v = [m.eigen.vector[0] * *p, m.eigen.vector[1] * *p];
            for (mode, mm) in m.block.embedding() {
                let w = mat_vec(&mm, &v);
                let e = phi.entry(mode).or_insert([ZERO; 2]);
                e[0] += w[0];
                e[1] += w[1];
            }
        }
        let phi: Vec<(Mode, Vec2)> = phi.into_iter().collect();
        let mut w: BTreeMap<Mode, Form3> = BTreeMap::new();
        for (f, &c) in self.forms.iter().zip(&state.omega) {
            for (p, v) in &f.form {
                let e = w.entry(*p).or_insert([ZERO; 3]);
                for i in 0..3 {
                    e[i] += v[i] * c;
                }
            }
        }
        let w: Vec<(Mode, Form3)> = w.into_iter().collect();
        quadratic_terms(self.geom(), &state.a.coords, &phi, &w, self.pd.family.max_radius(), config.overflow)
    }

    /// Squared factor norms `(|phi+|^2, |phi-|^2, |omega+|^2, |omega-|^2)`
    /// and their time derivatives along the flow.
    pub fn flat_rates(&self, chart: &FlatChart, x: &[f64], config: &FlowConfig) -> Result<([f64; 4], [f64; 4]), FlowError> {
        let ev = self.eval_flat(chart, x, config)?;
        let omega = chart.omega(x);
        let sq = |n: &SplitNorms| [n.phi_plus.powi(2), n.phi_minus.powi(2), n.omega_plus.powi(2), n.omega_minus.powi(2)];
        let norms = sq(&self.norms_of_blocks(&ev.blocks, omega, config));
        let mut rates = [0.0; 4];
        for (b, du) in ev.blocks.iter().zip(&ev.du) {
            for (j, e) in b.eig.iter().enumerate() {
                if !b.in_f[j] {
                    continue;
                }
                let d = b.dprime[j];
                let (slot, k) = if d > 0.0 { (0, config.k_plus) } else { (1, config.k_minus) };
                let c = dot(&e.vector, &b.u);
                let dc = dot(&e.vector, du);
                rates[slot] += 2.0 * d.abs().powf(2.0 * k) * (c.conj() * dc).re;
            }
        }
        let fo = chart.form_offset();
        for (j, f) in self.forms.iter().enumerate() {
            let (slot, k) = if f.eigenvalue > 0.0 { (2, config.k_plus) } else { (3, config.k_minus) };
            rates[slot] += 2.0 * f.eigenvalue.abs().powf(2.0 * k) * omega[j] * ev.dx[fo + j];
        }
        // motion of the eigenframe with the base point
        let dc: Vec<f64> = ev.dx[..chart.b1].to_vec();
        let speed = dc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if speed > 0.0 {
            let h = 1e-6 / speed;
            let shifted = |s: f64| -> Result<[f64; 4], FlowError> {
                let mut y = x.to_vec();
                for r in 0..chart.b1 {
                    y[r] += s * dc[r];
                }
                Ok(sq(&self.flat_norms(chart, &y, config)?))
            };
            let (plus, minus) = (shifted(h)?, shifted(-h)?);
            for i in 0..2 {
                rates[i] += (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok((norms, rates))
    }

    /// Random flat vector at base `c` with factor norms below `radii`, or on
    /// the sphere of factor `face`.
    pub fn sample_flat<R: Rng>(
        &self,
        chart: &FlatChart,
        c: &[f64],
        radii: [f64; 4],
        face: Option<usize>,
        config: &FlowConfig,
        rng: &mut R,
    ) -> Result<Vec<f64>, FlowError> {
        let mut x = vec![0.0; chart.dim()];
        x[..chart.b1].copy_from_slice(c);
        let blocks = self.blocks_at(chart, &x)?;
        // raw Gaussian directions per factor, weighted back by |eta|^-k
        let mut groups: [Vec<(usize, usize, f64)>; 4] = Default::default();
        for (i, b) in blocks.iter().enumerate() {
            for j in 0..b.eig.len() {
                if b.in_f[j] {
                    let d = b.dprime[j];
                    let (slot, k) = if d > 0.0 { (0, config.k_plus) } else { (1, config.k_minus) };
                    groups[slot].push((i, j, d.abs().powf(k)));
                }
            }
        }
        for (j, f) in self.forms.iter().enumerate() {
            let (slot, k) = if f.eigenvalue > 0.0 { (2, config.k_plus) } else { (3, config.k_minus) };
            groups[slot].push((usize::MAX, j, f.eigenvalue.abs().powf(k)));
        }
        let fo = chart.form_offset();
        let mut u = vec![[ZERO; 2]; blocks.len()];
        for (slot, g) in groups.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let real_dim = g.iter().map(|e| if e.0 == usize::MAX { 1 } else { 2 }).sum::<usize>();
            let raw: Vec<C64> = g
                .iter()
                .map(|e| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = if e.0 == usize::MAX { 0.0 } else { StandardNormal.sample(rng) };
                    C64::new(re, im)
                })
                .collect();
            let len = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let radius = if face == Some(slot) {
                radii[slot]
            } else {
                radii[slot] * rng.gen::<f64>().powf(1.0 / real_dim as f64)
            };
            for (e, z) in g.iter().zip(raw) {
                let coef = z * (radius / len / e.2);
                if e.0 == usize::MAX {
                    x[fo + e.1] = coef.re;
                } else {
                    let v = blocks[e.0].eig[e.1].vector;
                    u[e.0][0] += coef * v[0];
                    u[e.0][1] += coef * v[1];
                }
            }
        }
        for (i, v) in u.into_iter().enumerate() {
            chart.set_block(&mut x, i, v);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::flow::{integrate_trajectory, IntegrationControls};
    use crate::geometry::ModelGeometry;
    use crate::sections::{build_perturbed_dirac, BaseGrid, SectionSettings};

    fn model(geom: ModelGeometry, c: Vec<f64>, spinor: (f64, f64), form: (f64, f64)) -> FlowModel {
        let st = SectionSettings::default();
        let pd = build_perturbed_dirac(&geom, &BaseGrid::single(c), 1.0, &st).unwrap();
        FlowModel::with_windows(pd, spinor, form).unwrap()
    }

    fn t3_model() -> FlowModel {
        model(ModelGeometry::t3([0.5; 3]), vec![0.0; 3], (-6.0, 6.0), (-7.0, 7.0))
    }

    fn random_state(m: &FlowModel, a: PicardPoint, scale: f64, rng: &mut ChaCha8Rng) -> FlowState {
        let mut s = m.zero_state(&a).unwrap();
        for p in s.phi.iter_mut() {
            *p = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
        }
        for w in s.omega.iter_mut() {
            *w = rng.gen_range(-1.0..1.0) * scale;
        }
        s
    }

    #[test]
    fn reducible_linear_mode() {
        let m = t3_model();
        assert_eq!(m.fiber(&[0.0; 3]).unwrap().len(), 16);
        assert!(!m.forms.is_empty());
        let cfg = FlowConfig::default();
        let a = PicardPoint::origin(3);
        let mut s = m.zero_state(&a).unwrap();
        let j = m.forms.len() - 1;
        let nu = m.forms[j].eigenvalue;
        s.omega[j] = 0.01;
        let t = m.vector_field(&s, &cfg).unwrap();
        assert_eq!(t.chi, 1.0);
        assert!(t.da.iter().all(|&x| x == 0.0));
        assert!(t.dphi.iter().all(|&x| x == ZERO) && t.dphi_normal.is_empty());
        for (i, d) in t.domega.iter().enumerate() {
            let want = if i == j { -nu * 0.01 } else { 0.0 };
            assert!((d - want).abs() < 1e-15);
        }
        let chart = m.chart(&[a.coords.clone()]).unwrap();
        let x0 = m.to_flat(&chart, &s).unwrap();
        let ctl = IntegrationControls { tol: 1e-12, ..Default::default() };
        let tr = integrate_trajectory(&m, &chart, &x0, &cfg, 0.3, &ctl).unwrap();
        let last = m.from_flat(&chart, &tr.last().x).unwrap();
        let want = 0.01 * (-nu * 0.3).exp();
        assert!((last.omega[j] - want).abs() < 1e-8 * want);
        assert_eq!(integrate_trajectory(&m, &chart, &x0, &cfg, 0.0, &ctl).unwrap().samples.len(), 1);
    }

    #[test]
    fn round_trip_in_time() {
        let m = t3_model();
        let cfg = FlowConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_state(&m, PicardPoint::origin(3), 1e-3, &mut rng);
        let chart = m.chart(&[s.a.coords.clone()]).unwrap();
        let x0 = m.to_flat(&chart, &s).unwrap();
        let ctl = IntegrationControls { tol: 1e-12, ..Default::default() };
        let fwd = integrate_trajectory(&m, &chart, &x0, &cfg, 0.2, &ctl).unwrap();
        let back = integrate_trajectory(&m, &chart, &fwd.last().x, &cfg, -0.2, &ctl).unwrap();
        let err = back.last().x.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert_eq!(back.last().t, -0.2);
    }

    #[test]
    fn cutoff_locality() {
        let m = t3_model();
        let cfg = FlowConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(&m, PicardPoint::origin(3), 1.0, &mut rng);
        assert!(m.split_norms(&s, &cfg).unwrap().mixed() > 2.0 * cfg.r_prime);
        let t = m.vector_field(&s, &cfg).unwrap();
        assert_eq!(t.chi, 0.0);
        assert!(t.dphi.iter().all(|&x| x == ZERO) && t.domega.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn phase_equivariance() {
        let m = model(ModelGeometry::flat_torus_bundle(1), vec![0.13], (-6.0, 6.0), (-7.0, 7.0));
        let cfg = FlowConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let c = rng.gen_range(0.0..1.0);
            let s = random_state(&m, PicardPoint { coords: vec![c] }, 1e-3, &mut rng);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let u = C64::from_polar(1.0, theta);
            let mut r = s.clone();
            r.phi.iter_mut().for_each(|p| *p *= u);
            let (a, b) = (m.vector_field(&s, &cfg).unwrap(), m.vector_field(&r, &cfg).unwrap());
            let scale = a.dphi.iter().map(|z| z.norm()).fold(1e-300, f64::max);
            for (x, y) in a.dphi.iter().zip(&b.dphi) {
                assert!((*x * u - *y).norm() < 1e-10 * scale);
            }
            for (x, y) in a.da.iter().zip(&b.da).chain(a.domega.iter().zip(&b.domega)) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn rates_match_norm_derivatives() {
        let m = model(ModelGeometry::flat_torus_bundle(1), vec![0.2], (-8.0, 8.0), (-7.0, 7.0));
        let cfg = FlowConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_state(&m, PicardPoint { coords: vec![0.2] }, 1e-4, &mut rng);
        let chart = m.chart(&[s.a.coords.clone()]).unwrap();
        let x = m.to_flat(&chart, &s).unwrap();
        let (norms, rates) = m.flat_rates(&chart, &x, &cfg).unwrap();
        let dx = m.flat_field(&chart, &x, &cfg).unwrap();
        assert!(dx[0] != 0.0);
        let h = 1e-4;
        let at = |sgn: f64| {
            let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + sgn * h * b).collect();
            m.flat_norms(&chart, &y, &cfg).unwrap().as_array().map(|v| v * v)
        };
        let (p, q) = (at(1.0), at(-1.0));
        for i in 0..4 {
            let fd = (p[i] - q[i]) / (2.0 * h);
            assert!((fd - rates[i]).abs() < 1e-5 * norms[i].max(1e-300) + 1e-6 * fd.abs(), "{i}: {fd} {}", rates[i]);
        }
    }

    #[test]
    fn samples_respect_radii() {
        let m = model(ModelGeometry::flat_torus_bundle(1), vec![0.0], (-8.0, 8.0), (-7.0, 7.0));
        let cfg = FlowConfig::default();
        let chart = m.chart(&[vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let radii = [1.0, 2.0, 3.0, 4.0];
        for face in [None, Some(0), Some(3)] {
            let x = m.sample_flat(&chart, &[0.4], radii, face, &cfg, &mut rng).unwrap();
            let n = m.flat_norms(&chart, &x, &cfg).unwrap().as_array();
            for i in 0..4 {
                if face == Some(i) {
                    assert!((n[i] - radii[i]).abs() < 1e-9 * radii[i]);
                } else {
                    assert!(n[i] <= radii[i] * (1.0 + 1e-12));
                }
            }
        }
    }
}
