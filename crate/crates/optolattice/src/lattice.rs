//! The optomechanical superlattice: parameters, disorder and the non-Hermitian
//! BdG dynamical matrix in real space and in Bloch form.
//!
//! Sites are numbered `0..4N`. Within each 4-site cell the first and last site
//! carry a blue-sideband drive (two-mode squeezing `G₊`) and the middle two a
//! red-sideband drive (beam splitter `G₋`). Neighbouring mechanical modes hop
//! with amplitude `J`. The mode vector is
//! `[a₁, b₁, …, a₄ₙ, b₄ₙ; a₁†, b₁†, …, a₄ₙ†, b₄ₙ†]` and the operator `ℋ_NH`
//! satisfies `i d⟨x⟩/dt = ℋ_NH ⟨x⟩`.

use std::fmt;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, zeros, CMat, I};

/// Largest operator dimension accepted by [`build_chain`].
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Boundary {
    #[default]
    #[serde(alias = "obc", alias = "open")]
    OBC,
    #[serde(alias = "pbc", alias = "periodic")]
    PBC,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainParams {
    pub g_plus: f64,
    pub g_minus: f64,
    pub j_hop: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub n_c: f64,
    pub n_m: f64,
    pub n_cells: usize,
    pub boundary: Boundary,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            g_plus: 0.242,
            g_minus: 1.0,
            j_hop: 0.5,
            kappa: 1.0,
            gamma: 1e-4,
            n_c: 0.0,
            n_m: 0.0,
            n_cells: 10,
            boundary: Boundary::OBC,
        }
    }
}

impl ChainParams {
    pub fn with_g_plus(mut self, g: f64) -> Self {
        self.g_plus = g;
        self
    }

    pub fn with_g_minus(mut self, g: f64) -> Self {
        self.g_minus = g;
        self
    }

    pub fn with_cells(mut self, n: usize) -> Self {
        self.n_cells = n;
        self
    }

    pub fn with_boundary(mut self, b: Boundary) -> Self {
        self.boundary = b;
        self
    }

    pub fn with_n_m(mut self, n: f64) -> Self {
        self.n_m = n;
        self
    }

    pub fn n_sites(&self) -> usize {
        4 * self.n_cells
    }

    /// Number of bosonic modes `L = 8N`.
    pub fn n_modes(&self) -> usize {
        8 * self.n_cells
    }

    /// BdG dimension `2L = 16N`.
    pub fn dim(&self) -> usize {
        16 * self.n_cells
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(invalid(name, format!("must be finite and >= 0, got {v}")))
            } else {
                Ok(())
            }
        };
        let positive = |name: &'static str, v: f64| {
            if !v.is_finite() || v <= 0.0 {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            } else {
                Ok(())
            }
        };
        nonneg("g_plus", self.g_plus)?;
        nonneg("g_minus", self.g_minus)?;
        nonneg("j_hop", self.j_hop)?;
        positive("kappa", self.kappa)?;
        positive("gamma", self.gamma)?;
        nonneg("n_c", self.n_c)?;
        nonneg("n_m", self.n_m)?;
        if self.n_cells == 0 {
            return Err(invalid("n_cells", "must be >= 1"));
        }
        if self.n_cells > MAX_DIM / 16 {
            return Err(Error::Sizing { dim: 16 * self.n_cells, limit: MAX_DIM });
        }
        Ok(())
    }
}

/// Sites `s` with `s % 4 ∈ {0, 3}` carry the blue-sideband drive.
#[inline]
pub fn is_blue(site: usize) -> bool {
    matches!(site % 4, 0 | 3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    /// Optical mode `a`.
    Optical,
    /// Mechanical mode `b`.
    Mechanical,
}

impl Species {
    pub fn offset(self) -> usize {
        match self {
            Species::Optical => 0,
            Species::Mechanical => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Species::Optical => 'a',
            Species::Mechanical => 'b',
        }
    }
}

/// One entry of the operator basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub site: usize,
    pub species: Species,
    pub dagger: bool,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.species.symbol(), self.site + 1, if self.dagger { "†" } else { "" })
    }
}

/// Index of an annihilation operator in the interleaved basis.
#[inline]
pub fn mode_index(site: usize, species: Species) -> usize {
    2 * site + species.offset()
}

pub fn basis_labels(n_sites: usize) -> Vec<ModeLabel> {
    let mut v = Vec::with_capacity(4 * n_sites);
    for dagger in [false, true] {
        for site in 0..n_sites {
            for species in [Species::Optical, Species::Mechanical] {
                v.push(ModeLabel { site, species, dagger });
            }
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderKind {
    /// Bond-resolved mechanical hopping `J + δJ`, `δJ ∈ [−a·J, a·J]`.
    HoppingJ,
    /// Site-resolved mechanical detuning in `[−a, a]`.
    MechFrequency,
    /// Mechanical damping on the two terminal sites multiplied by `a`.
    EndGamma,
    /// Random optical hopping `t a_i† a_{i+1} + h.c.`, `t ∈ [−a, a]`.
    OpticalHopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Default optical-hopping disorder strength, in units of κ.
pub const DEFAULT_OPTICAL_HOP: f64 = 0.05;

impl DisorderSpec {
    pub fn new(kind: DisorderKind, amplitude: f64, seed: u64) -> Self {
        Self { kind, amplitude, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(Error::InvalidDisorder(format!(
                "amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if self.kind == DisorderKind::EndGamma && self.amplitude <= 0.0 {
            return Err(Error::InvalidDisorder(
                "EndGamma amplitude is a damping multiplier and must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled offsets of one disorder specification.
///
/// Bond-type kinds hold one entry per bond (`4N−1` for OBC, `4N` for PBC,
/// bond `i` joining sites `i` and `i+1 mod 4N`); site-type kinds hold one entry
/// per site. For `EndGamma` the entry is the relative change of γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub kind: DisorderKind,
    pub offsets: Vec<f64>,
}

pub fn n_bonds(params: &ChainParams) -> usize {
    match params.boundary {
        Boundary::OBC => params.n_sites() - 1,
        Boundary::PBC => params.n_sites(),
    }
}

fn uniform_draw(seed: u64, index: usize, half_width: f64) -> f64 {
    if half_width == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.random_range(-half_width..=half_width)
}

pub fn sample_disorder(spec: &DisorderSpec, params: &ChainParams) -> Result<Realization> {
    spec.validate()?;
    let offsets = match spec.kind {
        DisorderKind::HoppingJ => (0..n_bonds(params))
            .map(|i| uniform_draw(spec.seed, i, spec.amplitude * params.j_hop))
            .collect(),
        DisorderKind::OpticalHopping => {
            (0..n_bonds(params)).map(|i| uniform_draw(spec.seed, i, spec.amplitude)).collect()
        }
        DisorderKind::MechFrequency => {
            (0..params.n_sites()).map(|i| uniform_draw(spec.seed, i, spec.amplitude)).collect()
        }
        DisorderKind::EndGamma => {
            let ns = params.n_sites();
            (0..ns)
                .map(|s| if s == 0 || s == ns - 1 { spec.amplitude - 1.0 } else { 0.0 })
                .collect()
        }
    };
    Ok(Realization { kind: spec.kind, offsets })
}

/// Site- and bond-resolved couplings after applying disorder.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub gamma: Vec<f64>,
    pub detuning: Vec<f64>,
    pub hop: Vec<f64>,
    pub optical_hop: Vec<f64>,
}

pub fn resolve(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<Resolved> {
    params.validate()?;
    let ns = params.n_sites();
    let nb = n_bonds(params);
    let mut r = Resolved {
        gamma: vec![params.gamma; ns],
        detuning: vec![0.0; ns],
        hop: vec![params.j_hop; nb],
        optical_hop: vec![0.0; nb],
    };
    for spec in disorder {
        let real = sample_disorder(spec, params)?;
        match spec.kind {
            DisorderKind::HoppingJ => r.hop.iter_mut().zip(&real.offsets).for_each(|(h, d)| *h += d),
            DisorderKind::OpticalHopping => {
                r.optical_hop.iter_mut().zip(&real.offsets).for_each(|(h, d)| *h += d)
            }
            DisorderKind::MechFrequency => {
                r.detuning.iter_mut().zip(&real.offsets).for_each(|(h, d)| *h += d)
            }
            DisorderKind::EndGamma => {
                r.gamma.iter_mut().zip(&real.offsets).for_each(|(g, d)| *g *= 1.0 + d)
            }
        }
    }
    Ok(r)
}

/// A non-Hermitian BdG operator together with its basis.
#[derive(Debug, Clone)]
pub struct NHOperator {
    pub matrix: CMat,
    pub basis: Vec<ModeLabel>,
    /// Bloch momentum for single-cell operators.
    pub k: Option<f64>,
    pub n_cells: usize,
    pub boundary: Boundary,
}

impl NHOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of bosonic modes (half the dimension).
    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    /// Dynamical matrix `A = −iℋ_NH` of `d⟨x⟩/dt = A⟨x⟩`.
    pub fn drift(&self) -> CMat {
        let mut a = self.matrix.clone();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                a[(i, j)] *= -I;
            }
        }
        a
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        crate::linalg::eigvals(&self.matrix)
    }
}

fn add_sym(m: &mut CMat, i: usize, j: usize, v: f64) {
    m[(i, j)] += c(v, 0.0);
    m[(j, i)] += c(v, 0.0);
}

pub fn build_chain(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<NHOperator> {
    let r = resolve(params, disorder)?;
    let ns = params.n_sites();
    let l = 2 * ns;
    let mut h = zeros(2 * l, 2 * l);
    for s in 0..ns {
        let a = mode_index(s, Species::Optical);
        let b = mode_index(s, Species::Mechanical);
        h[(a, a)] = c(0.0, -params.kappa / 2.0);
        h[(l + a, l + a)] = c(0.0, -params.kappa / 2.0);
        h[(b, b)] = c(r.detuning[s], -r.gamma[s] / 2.0);
        h[(l + b, l + b)] = c(-r.detuning[s], -r.gamma[s] / 2.0);
        if is_blue(s) {
            let g = params.g_plus;
            h[(a, l + b)] = c(g, 0.0);
            h[(b, l + a)] = c(g, 0.0);
            h[(l + a, b)] = c(-g, 0.0);
            h[(l + b, a)] = c(-g, 0.0);
        } else {
            let g = params.g_minus;
            add_sym(&mut h, a, b, g);
            add_sym(&mut h, l + a, l + b, -g);
        }
    }
    for (bond, (&jb, &tb)) in r.hop.iter().zip(&r.optical_hop).enumerate() {
        let (s, t) = (bond, (bond + 1) % ns);
        let (bs, bt) = (mode_index(s, Species::Mechanical), mode_index(t, Species::Mechanical));
        add_sym(&mut h, bs, bt, -jb);
        add_sym(&mut h, l + bs, l + bt, jb);
        if tb != 0.0 {
            let (as_, at) = (mode_index(s, Species::Optical), mode_index(t, Species::Optical));
            add_sym(&mut h, as_, at, tb);
            add_sym(&mut h, l + as_, l + at, -tb);
        }
    }
    Ok(NHOperator {
        matrix: h,
        basis: basis_labels(ns),
        k: None,
        n_cells: params.n_cells,
        boundary: params.boundary,
    })
}

/// Real 8×8 blocks of the single-cell problem: on-cell hopping `P`, the
/// inter-cell hop `R` (cell n → n+1) and the pairing `Δ`.
pub struct BlochBlocks {
    pub p: [[f64; 8]; 8],
    pub r: [[f64; 8]; 8],
    pub delta: [[f64; 8]; 8],
}

pub fn bloch_blocks(params: &ChainParams) -> BlochBlocks {
    let mut p = [[0.0; 8]; 8];
    let mut r = [[0.0; 8]; 8];
    let mut delta = [[0.0; 8]; 8];
    for s in 0..4 {
        let a = mode_index(s, Species::Optical);
        let b = mode_index(s, Species::Mechanical);
        if is_blue(s) {
            delta[a][b] = params.g_plus;
            delta[b][a] = params.g_plus;
        } else {
            p[a][b] = params.g_minus;
            p[b][a] = params.g_minus;
        }
        if s < 3 {
            let bn = mode_index(s + 1, Species::Mechanical);
            p[b][bn] = -params.j_hop;
            p[bn][b] = -params.j_hop;
        }
    }
    r[mode_index(3, Species::Mechanical)][mode_index(0, Species::Mechanical)] = -params.j_hop;
    BlochBlocks { p, r, delta }
}

fn reject_disorder(disorder: &[DisorderSpec]) -> Result<()> {
    if disorder.is_empty() {
        Ok(())
    } else {
        Err(Error::Unsupported("Bloch operators require a translation-invariant chain".into()))
    }
}

/// 16×16 Bloch operator `ℋ_NH(k) = [[h, Δ], [−Δ, −h]] − iη̄/2` with
/// `h(k) = P + e^{ik}R + e^{−ik}Rᵀ`. `k` is reduced modulo 2π.
pub fn build_bloch(params: &ChainParams, k: f64, disorder: &[DisorderSpec]) -> Result<NHOperator> {
    reject_disorder(disorder)?;
    params.validate()?;
    if !k.is_finite() {
        return Err(invalid("k", "must be finite"));
    }
    let k = k.rem_euclid(std::f64::consts::TAU);
    let blocks = bloch_blocks(params);
    let e = C64::from_polar(1.0, k);
    let mut m = zeros(16, 16);
    for i in 0..8 {
        for j in 0..8 {
            let hij = c(blocks.p[i][j], 0.0) + e * blocks.r[i][j] + e.conj() * blocks.r[j][i];
            m[(i, j)] = hij;
            m[(8 + i, 8 + j)] = -hij;
            m[(i, 8 + j)] = c(blocks.delta[i][j], 0.0);
            m[(8 + i, j)] = c(-blocks.delta[i][j], 0.0);
        }
    }
    for s in 0..4 {
        for (sp, rate) in [(Species::Optical, params.kappa), (Species::Mechanical, params.gamma)] {
            let i = mode_index(s, sp);
            m[(i, i)] += c(0.0, -rate / 2.0);
            m[(8 + i, 8 + i)] += c(0.0, -rate / 2.0);
        }
    }
    Ok(NHOperator { matrix: m, basis: basis_labels(4), k: Some(k), n_cells: 1, boundary: Boundary::PBC })
}

/// Analytic `∂ℋ_NH(k)/∂k = blockdiag(dh, −dh)` with `dh = i e^{ik}R − i e^{−ik}Rᵀ`.
pub fn bloch_derivative(params: &ChainParams, k: f64) -> CMat {
    let blocks = bloch_blocks(params);
    let e = C64::from_polar(1.0, k);
    let mut m = zeros(16, 16);
    for i in 0..8 {
        for j in 0..8 {
            let d = I * e * blocks.r[i][j] - I * e.conj() * blocks.r[j][i];
            m[(i, j)] = d;
            m[(8 + i, 8 + j)] = -d;
        }
    }
    m
}

/// The η̄, D and third-quantization diagonals describing baths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationData {
    /// Damping rates per BdG index (both halves).
    pub eta_bar: Vec<f64>,
    /// Diffusion diagonal: `κ(n_c+1), γ(n_m+1)` then `κn_c, γn_m`.
    pub d_matrix: Vec<f64>,
    pub m_block: Vec<f64>,
    pub n_block: Vec<f64>,
}

pub fn dissipation_data(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<DissipationData> {
    let r = resolve(params, disorder)?;
    let ns = params.n_sites();
    let l = 2 * ns;
    let mut eta = vec![0.0; 2 * l];
    let mut m = vec![0.0; l];
    let mut n = vec![0.0; l];
    for s in 0..ns {
        let (a, b) = (mode_index(s, Species::Optical), mode_index(s, Species::Mechanical));
        eta[a] = params.kappa;
        eta[b] = r.gamma[s];
        m[a] = 0.5 * params.kappa * (params.n_c + 1.0);
        m[b] = 0.5 * r.gamma[s] * (params.n_m + 1.0);
        n[a] = 0.5 * params.kappa * params.n_c;
        n[b] = 0.5 * r.gamma[s] * params.n_m;
    }
    let (lo, hi) = eta.split_at_mut(l);
    hi.copy_from_slice(lo);
    let d = m.iter().chain(n.iter()).map(|x| 2.0 * x).collect();
    Ok(DissipationData { eta_bar: eta, d_matrix: d, m_block: m, n_block: n })
}

/// Recovers the Hermitian BdG matrix `ℋ = σ̄_z(ℋ_NH + iη̄/2)`.
pub fn hermitian_part(op: &NHOperator, eta_bar: &[f64]) -> CMat {
    let n = op.dim();
    let l = n / 2;
    let mut h = op.matrix.clone();
    for i in 0..n {
        h[(i, i)] += c(0.0, eta_bar[i] / 2.0);
    }
    for i in l..n {
        for j in 0..n {
            h[(i, j)] = -h[(i, j)];
        }
    }
    h
}

/// Bloch-cell damping vector (16 entries).
pub fn bloch_eta_bar(params: &ChainParams) -> Vec<f64> {
    (0..16).map(|i| if i % 2 == 0 { params.kappa } else { params.gamma }).collect()
}
