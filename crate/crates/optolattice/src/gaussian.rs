//! Second moments of the Gaussian steady state and of its time evolution.
//!
//! Covariances use the ordering `x = (a₁, b₁, …, a_{L/2}, b_{L/2}, a₁†, …)` and
//! store `V_ij = ⟨x_i x_j†⟩`, so `V = [[⟨d d†⟩, ⟨d d⟩], [⟨d† d†⟩, ⟨d† d⟩]]` and
//! the vacuum is `diag(I, 0)`. Two solvers are independent of each other:
//!
//! * the spectral Lyapunov solve of `A V + V A† + D = 0` with `A = −iℋ_NH`;
//! * the third-quantization closed form built from `Ĥ, K̂, M̂, N̂`, where
//!   `C(t) = β(C̃ ∘ Γ(t))βᵀ` solves `Ċ = AC + CAᵀ + B` with `A = −2X̂ᵀ`, `B = Ŷ`.
//!
//! The flavor blocks `(d₀, d₁)` of the third-quantization path coincide with
//! the annihilation/creation halves of the dynamical basis, so the basis
//! reconciliation between both paths is the identity permutation. A direct
//! RK4 integration of `V̇ = AV + VA† + D` serves as a third oracle.

use serde::{Deserialize, Serialize};

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::lattice::{
    build_chain, dissipation_data, mode_index, resolve, ChainParams, DisorderSpec, DissipationData, NHOperator,
    Species,
};
use crate::linalg::{
    adjoint, c, condition_estimate, eig, eigh_real, from_real_diag, identity, inverse, max_abs, multiset_distance,
    transpose, zeros, CMat, Eigen, I, ONE, ZERO,
};
use crate::spectra::chain_spectrum;

/// Decay margin below which a mode counts as marginal.
pub const EPS_STAB: f64 = 1e-9;
/// Largest accepted `‖ℋV − Vℋ† + iD‖ / ‖D‖`.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Below this `|s t|` the kernel `(e^{st} − 1)/s` is evaluated by its series.
pub const SERIES_CUTOFF: f64 = 1e-6;
/// RK4 step of the direct integration.
pub const ODE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Lyapunov,
    ThirdQuantization,
    OdeIntegration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeMark {
    Stationary,
    At(f64),
}

#[derive(Debug, Clone)]
pub struct CovarianceState {
    pub v_matrix: CMat,
    pub provenance: Provenance,
    pub time: TimeMark,
    /// Non-fatal diagnostics (ill conditioning, solver fallbacks).
    pub warnings: Vec<String>,
}

impl CovarianceState {
    pub fn n_modes(&self) -> usize {
        self.v_matrix.nrows() / 2
    }

    pub fn vacuum(n_modes: usize) -> Self {
        let mut v = zeros(2 * n_modes, 2 * n_modes);
        for i in 0..n_modes {
            v[(i, i)] = ONE;
        }
        Self { v_matrix: v, provenance: Provenance::OdeIntegration, time: TimeMark::At(0.0), warnings: vec![] }
    }

    /// Hermiticity, commutation relations and non-negative occupations.
    pub fn check(&self, tol: f64) -> Result<()> {
        let v = &self.v_matrix;
        let l = self.n_modes();
        let scale = 1.0 + max_abs(v);
        for i in 0..2 * l {
            for j in 0..2 * l {
                if (v[(i, j)] - v[(j, i)].conj()).norm() > tol * scale {
                    return Err(Error::Unphysical(format!("V not Hermitian at ({i}, {j})")));
                }
            }
        }
        for i in 0..l {
            for j in 0..l {
                let delta = if i == j { ONE } else { ZERO };
                if (v[(i, j)] - v[(l + j, l + i)] - delta).norm() > tol * scale {
                    return Err(Error::Unphysical(format!("commutator violated at ({i}, {j})")));
                }
            }
        }
        for i in 0..l {
            if v[(l + i, l + i)].re < -tol * scale {
                return Err(Error::Unphysical(format!("negative occupation {:e} of mode {i}", v[(l + i, l + i)].re)));
            }
        }
        Ok(())
    }
}

fn stability_guard(values: &[C64]) -> Result<()> {
    let bad: Vec<&C64> = values.iter().filter(|l| l.re >= -EPS_STAB).collect();
    if bad.is_empty() {
        return Ok(());
    }
    let max_re = bad.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    Err(Error::NoStationaryState { count: bad.len(), max_re, eps: EPS_STAB })
}

/// Solves `A X + X Aᴴ = −R` (`dagger`) or `A X + X Aᵀ = −R` in the eigenbasis of `A`.
fn modal_solve(e: &Eigen, binv: &CMat, rhs: &CMat, dagger: bool) -> CMat {
    let beta = &e.vectors;
    let right = if dagger { adjoint(binv) } else { transpose(binv) };
    let core = binv * rhs * &right;
    let lam = &e.values;
    let n = lam.len();
    let scaled = CMat::from_fn(n, n, |i, j| {
        let s = lam[i] + if dagger { lam[j].conj() } else { lam[j] };
        -core[(i, j)] / s
    });
    let back = if dagger { adjoint(beta) } else { transpose(beta) };
    beta * &scaled * &back
}

fn min_pair_sum(values: &[C64], dagger: bool) -> f64 {
    let mut best = f64::INFINITY;
    for a in values {
        for b in values {
            best = best.min((a + if dagger { b.conj() } else { *b }).norm());
        }
    }
    best
}

fn hermitize(v: &CMat) -> CMat {
    CMat::from_fn(v.nrows(), v.ncols(), |i, j| (v[(i, j)] + v[(j, i)].conj()) * 0.5)
}

fn scaled(m: &CMat, s: C64) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

fn fro(m: &CMat) -> f64 {
    m.norm_l2()
}

/// `‖ℋV − Vℋ† + iD‖_F / ‖D‖_F`.
pub fn lyapunov_residual(op: &NHOperator, d: &DissipationData, v: &CMat) -> f64 {
    let h = &op.matrix;
    let dm = from_real_diag(&d.d_matrix);
    let r = h * v - v * h.adjoint() + scaled(&dm, I);
    fro(&r) / fro(&dm).max(f64::MIN_POSITIVE)
}

/// Stationary covariance from the spectral Lyapunov solve, with up to three
/// rounds of residual correction.
pub fn stationary_covariance(op: &NHOperator, d: &DissipationData) -> Result<CovarianceState> {
    if d.d_matrix.len() != op.dim() {
        return Err(invalid("dissipation", format!("{} entries for a {}-dimensional operator", d.d_matrix.len(), op.dim())));
    }
    let a = op.drift();
    let e = eig(&a)?;
    stability_guard(&e.values)?;
    let binv = inverse(&e.vectors);
    let mut warnings = vec![];
    let cond = condition_estimate(&e.vectors, &binv);
    if cond > 1e10 {
        warnings.push(format!("eigenbasis condition number {cond:.3e}"));
    }
    let gap = min_pair_sum(&e.values, true);
    if gap < 1e-8 * (1.0 + max_abs(&a)) {
        warnings.push(format!("near-degenerate denominator lambda_i + conj(lambda_j) = {gap:.3e}"));
    }
    let dm = from_real_diag(&d.d_matrix);
    let mut v = hermitize(&modal_solve(&e, &binv, &dm, true));
    let mut res = lyapunov_residual(op, d, &v);
    for _ in 0..3 {
        if res < 0.1 * RESIDUAL_TOL {
            break;
        }
        let r = &a * &v + &v * a.adjoint() + &dm;
        let corr = modal_solve(&e, &binv, &r, true);
        let next = hermitize(&(&v + &corr));
        let next_res = lyapunov_residual(op, d, &next);
        if next_res >= res {
            break;
        }
        v = next;
        res = next_res;
    }
    if res > RESIDUAL_TOL {
        return Err(Error::IllConditioned(format!("Lyapunov residual {res:.3e} exceeds {RESIDUAL_TOL:e}")));
    }
    Ok(CovarianceState { v_matrix: v, provenance: Provenance::Lyapunov, time: TimeMark::Stationary, warnings })
}

/// Builds the chain and its baths and returns the spectral stationary state.
pub fn stationary_for(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<CovarianceState> {
    stationary_covariance(&build_chain(params, disorder)?, &dissipation_data(params, disorder)?)
}

/// The quadratic Liouvillian in third-quantized form.
#[derive(Debug, Clone)]
pub struct ThirdQuantizationData {
    pub x_matrix: CMat,
    pub y_matrix: CMat,
    /// `A = −2X̂ᵀ`.
    pub a_matrix: CMat,
    /// Eigenvalues of `X̂`.
    pub rapidities: Vec<C64>,
    /// Eigenvalues `λ` of `A` matching the columns of `beta`.
    pub lambdas: Vec<C64>,
    pub beta: CMat,
    pub beta_inv: CMat,
    /// `β⁻¹ Ŷ β⁻ᵀ`.
    pub c_tilde: CMat,
}

/// Particle-conserving part `Ĥ` and pairing `K̂` of the system Hamiltonian.
fn hamiltonian_blocks(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let r = resolve(params, disorder)?;
    let ns = params.n_sites();
    let l = 2 * ns;
    let mut h = vec![vec![0.0; l]; l];
    let mut k = vec![vec![0.0; l]; l];
    for s in 0..ns {
        let (a, b) = (mode_index(s, Species::Optical), mode_index(s, Species::Mechanical));
        h[b][b] += r.detuning[s];
        if crate::lattice::is_blue(s) {
            k[a][b] = params.g_plus / 2.0;
            k[b][a] = params.g_plus / 2.0;
        } else {
            h[a][b] += params.g_minus;
            h[b][a] += params.g_minus;
        }
    }
    for (bond, (&jb, &tb)) in r.hop.iter().zip(&r.optical_hop).enumerate() {
        let (s, t) = (bond, (bond + 1) % ns);
        let (bs, bt) = (mode_index(s, Species::Mechanical), mode_index(t, Species::Mechanical));
        h[bs][bt] -= jb;
        h[bt][bs] -= jb;
        let (as_, at) = (mode_index(s, Species::Optical), mode_index(t, Species::Optical));
        h[as_][at] += tb;
        h[at][as_] += tb;
    }
    Ok((h, k))
}

pub fn build_third_quantization(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<ThirdQuantizationData> {
    let (h, k) = hamiltonian_blocks(params, disorder)?;
    let dd = dissipation_data(params, disorder)?;
    let l = h.len();
    let mut x = zeros(2 * l, 2 * l);
    let mut y = zeros(2 * l, 2 * l);
    for i in 0..l {
        for j in 0..l {
            let diag = if i == j { dd.m_block[i] - dd.n_block[i] } else { 0.0 };
            x[(i, j)] = (I * h[i][j] + diag) * 0.5;
            x[(l + i, l + j)] = (-I * h[i][j] + diag) * 0.5;
            x[(i, l + j)] = -I * k[i][j];
            x[(l + i, j)] = I * k[i][j];
            y[(i, j)] = -I * k[i][j];
            y[(l + i, l + j)] = I * k[i][j];
        }
        y[(i, l + i)] = c(dd.n_block[i], 0.0);
        y[(l + i, i)] = c(dd.n_block[i], 0.0);
    }
    let a = CMat::from_fn(2 * l, 2 * l, |i, j| x[(j, i)] * -2.0);
    let e = eig(&a)?;
    let beta_inv = inverse(&e.vectors);
    let c_tilde = &beta_inv * &y * beta_inv.transpose();
    let rapidities: Vec<C64> = e.values.iter().map(|v| -v / 2.0).collect();

    let nh = build_chain(params, disorder)?;
    let from_x: Vec<C64> = rapidities.iter().map(|r| -2.0 * I * r).collect();
    let reference = nh.eigenvalues()?;
    let mismatch = multiset_distance(&from_x, &reference);
    let scale = 1.0 + reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if mismatch > 1e-9 * scale {
        return Err(Error::Construction(format!("spectrum of -2iX differs from H_NH by {mismatch:.3e}")));
    }
    Ok(ThirdQuantizationData {
        x_matrix: x,
        y_matrix: y,
        a_matrix: a,
        rapidities,
        lambdas: e.values,
        beta: e.vectors,
        beta_inv,
        c_tilde,
    })
}

/// `(e^{st} − 1)/s`, switching to its Taylor series when `|st|` is tiny.
pub fn gamma_kernel(s: C64, t: f64) -> C64 {
    let x = s * t;
    if x.norm() < SERIES_CUTOFF {
        series_kernel(s, t)
    } else {
        ((x).exp() - 1.0) / s
    }
}

/// Third-order series of the kernel, `t(1 + x/2 + x²/6 + x³/24)` with `x = st`.
pub fn series_kernel(s: C64, t: f64) -> C64 {
    let x = s * t;
    (ONE + x / 2.0 + x * x / 6.0 + x * x * x / 24.0) * t
}

/// `V = [[2C₀₁ + I, 2C₀₀], [2C₁₁, 2C₁₀]]`.
fn covariance_from_c(cm: &CMat) -> CMat {
    let l = cm.nrows() / 2;
    CMat::from_fn(2 * l, 2 * l, |i, j| {
        let (bi, bj) = (i / l, j / l);
        let (ii, jj) = (i % l, j % l);
        let src = match (bi, bj) {
            (0, 0) => cm[(ii, l + jj)],
            (0, 1) => cm[(ii, jj)],
            (1, 0) => cm[(l + ii, l + jj)],
            _ => cm[(l + ii, jj)],
        };
        let delta = if bi == 0 && bj == 0 && ii == jj { ONE } else { ZERO };
        src * 2.0 + delta
    })
}

impl ThirdQuantizationData {
    pub fn n_modes(&self) -> usize {
        self.a_matrix.nrows() / 2
    }

    fn assemble(&self, weights: impl Fn(usize, usize) -> C64) -> CMat {
        let n = self.lambdas.len();
        let inner = CMat::from_fn(n, n, |i, j| self.c_tilde[(i, j)] * weights(i, j));
        &self.beta * &inner * self.beta.transpose()
    }

    /// Stationary relation `A C + C Aᵀ = −Ŷ` solved in the rapidity basis.
    pub fn stationary(&self) -> Result<CovarianceState> {
        stability_guard(&self.lambdas)?;
        let lam = &self.lambdas;
        let cm = self.assemble(|i, j| -ONE / (lam[i] + lam[j]));
        let mut warnings = vec![];
        let cond = condition_estimate(&self.beta, &self.beta_inv);
        if cond > 1e10 {
            warnings.push(format!("rapidity basis condition number {cond:.3e}"));
        }
        Ok(CovarianceState {
            v_matrix: hermitize(&covariance_from_c(&cm)),
            provenance: Provenance::ThirdQuantization,
            time: TimeMark::Stationary,
            warnings,
        })
    }

    /// Closed form `C(t) = β(C̃ ∘ Γ(t))βᵀ` from the vacuum.
    pub fn covariance_at(&self, t: f64) -> Result<CovarianceState> {
        let max_re = self.lambdas.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        if 2.0 * max_re * t > 700.0 {
            return Err(Error::UnstableGrowth(format!(
                "e^(t lambda) overflows at t = {t} (max Re lambda = {max_re:e}); use saturation_negativity"
            )));
        }
        let lam = &self.lambdas;
        let cm = self.assemble(|i, j| gamma_kernel(lam[i] + lam[j], t));
        Ok(CovarianceState {
            v_matrix: hermitize(&covariance_from_c(&cm)),
            provenance: Provenance::ThirdQuantization,
            time: TimeMark::At(t),
            warnings: vec![],
        })
    }

    /// `e^{At} z` for a BdG vector `z`.
    pub fn propagate(&self, z: &[C64], t: f64) -> Vec<C64> {
        let n = z.len();
        let zc = CMat::from_fn(n, 1, |i, _| z[i]);
        let w = &self.beta_inv * &zc;
        let scaled = CMat::from_fn(n, 1, |i, _| w[(i, 0)] * (self.lambdas[i] * t).exp());
        let out = &self.beta * &scaled;
        (0..n).map(|i| out[(i, 0)]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: CovarianceState,
    /// `⟨d_i⟩(t)` for each annihilation operator.
    pub means: Vec<C64>,
}

/// Covariance and mean amplitudes at time `t` starting from the vacuum,
/// displaced by the coherent amplitudes `z0` (one per mode) when given.
///
/// The covariance is the connected one and does not depend on `z0`.
pub fn evolve_covariance(
    params: &ChainParams,
    disorder: &[DisorderSpec],
    t: f64,
    z0: Option<&[C64]>,
) -> Result<Evolution> {
    if !t.is_finite() || t < 0.0 {
        return Err(invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    let l = params.n_modes();
    if let Some(z) = z0 {
        if z.len() != l {
            return Err(invalid("z0", format!("expected {l} amplitudes, got {}", z.len())));
        }
    }
    let full: Vec<C64> = match z0 {
        Some(z) => z.iter().copied().chain(z.iter().map(|v| v.conj())).collect(),
        None => vec![ZERO; 2 * l],
    };
    let tq = build_third_quantization(params, disorder)?;
    let cond = condition_estimate(&tq.beta, &tq.beta_inv);
    if cond > 1e10 {
        let op = build_chain(params, disorder)?;
        let d = dissipation_data(params, disorder)?;
        let (phi, q) = flow(&op.drift(), &from_real_diag(&d.d_matrix), t)?;
        let mut state = CovarianceState::vacuum(l);
        state.v_matrix = hermitize(&(&phi * &state.v_matrix * phi.adjoint() + q));
        state.time = TimeMark::At(t);
        state.warnings.push(format!("rapidity basis condition number {cond:.3e}; integrated directly"));
        let zc = CMat::from_fn(2 * l, 1, |i, _| full[i]);
        let m = &phi * &zc;
        return Ok(Evolution { state, means: (0..l).map(|i| m[(i, 0)]).collect() });
    }
    let state = tq.covariance_at(t)?;
    let means = tq.propagate(&full, t)[..l].to_vec();
    Ok(Evolution { state, means })
}

fn rk4_step(a: &CMat, d: &CMat, phi: &CMat, q: &CMat, h: f64) -> (CMat, CMat) {
    let fq = |q: &CMat| a * q + q * a.adjoint() + d;
    let fp = |p: &CMat| a * p;
    let half = c(h / 2.0, 0.0);
    let k1p = fp(phi);
    let k1q = fq(q);
    let k2p = fp(&(phi + scaled(&k1p, half)));
    let k2q = fq(&(q + scaled(&k1q, half)));
    let k3p = fp(&(phi + scaled(&k2p, half)));
    let k3q = fq(&(q + scaled(&k2q, half)));
    let k4p = fp(&(phi + scaled(&k3p, c(h, 0.0))));
    let k4q = fq(&(q + scaled(&k3q, c(h, 0.0))));
    let w = c(h / 6.0, 0.0);
    let two = c(2.0, 0.0);
    let p_next = phi + scaled(&(&k1p + scaled(&k2p, two) + scaled(&k3p, two) + &k4p), w);
    let q_next = q + scaled(&(&k1q + scaled(&k2q, two) + scaled(&k3q, two) + &k4q), w);
    (p_next, q_next)
}

/// Propagator `Φ(t)` and accumulated noise `Q(t) = ∫₀ᵗ Φ D Φ† ds`.
///
/// RK4 with step at most [`ODE_STEP`] covers a base interval no longer than
/// one time unit; longer times follow by repeated doubling
/// `Φ ← Φ²`, `Q ← ΦQΦ† + Q`.
pub fn flow(a: &CMat, d: &CMat, t: f64) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let doublings = if t > 1.0 { (t.log2().ceil()) as u32 } else { 0 };
    if doublings > 80 {
        return Err(invalid("t", format!("{t} is too long to integrate")));
    }
    let base = t / 2f64.powi(doublings as i32);
    let steps = ((base / ODE_STEP).ceil() as usize).max(1);
    let h = base / steps as f64;
    let mut phi = identity(n);
    let mut q = zeros(n, n);
    for _ in 0..steps {
        (phi, q) = rk4_step(a, d, &phi, &q, h);
    }
    for _ in 0..doublings {
        q = &phi * &q * phi.adjoint() + &q;
        phi = &phi * &phi;
        if !max_abs(&phi).is_finite() || !max_abs(&q).is_finite() {
            return Err(Error::UnstableGrowth(format!("direct integration overflowed before t = {t}")));
        }
    }
    Ok((phi, q))
}

/// Covariance at time `t` by direct integration from `v0`.
pub fn ode_covariance(op: &NHOperator, d: &DissipationData, v0: &CMat, t: f64) -> Result<CovarianceState> {
    let (phi, q) = flow(&op.drift(), &from_real_diag(&d.d_matrix), t)?;
    Ok(CovarianceState {
        v_matrix: hermitize(&(&phi * v0 * phi.adjoint() + q)),
        provenance: Provenance::OdeIntegration,
        time: TimeMark::At(t),
        warnings: vec![],
    })
}

/// Long-time limit of the direct integration, run to `t = 20/min|Re λ|`.
pub fn ode_stationary(op: &NHOperator, d: &DissipationData) -> Result<CovarianceState> {
    let values = op.drift();
    let lam = crate::linalg::eigvals(&values)?;
    stability_guard(&lam)?;
    let slowest = lam.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    let t = 20.0 / slowest;
    let mut st = ode_covariance(op, d, &CovarianceState::vacuum(op.n_modes()).v_matrix, t)?;
    st.time = TimeMark::Stationary;
    Ok(st)
}

/// One bosonic mode of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRef {
    pub site: usize,
    pub species: Species,
}

impl ModeRef {
    pub fn optical(site: usize) -> Self {
        Self { site, species: Species::Optical }
    }

    pub fn mechanical(site: usize) -> Self {
        Self { site, species: Species::Mechanical }
    }
}

/// Symmetrized quadrature covariance of two modes in the order
/// `(X₁, P₁, X₂, P₂)`, scaled so that the vacuum is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureBlock {
    pub q: [[f64; 4]; 4],
}

fn sub2(q: &[[f64; 4]; 4], r: usize, c0: usize) -> [[f64; 2]; 2] {
    [[q[r][c0], q[r][c0 + 1]], [q[r + 1][c0], q[r + 1][c0 + 1]]]
}

fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn det4(q: &[[f64; 4]; 4]) -> f64 {
    let mut m = *q;
    let mut det = 1.0;
    for col in 0..4 {
        let piv = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap_or(col);
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..4 {
            let f = m[r][col] / m[col][col];
            for k in col..4 {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    det
}

impl QuadratureBlock {
    pub fn alpha(&self) -> [[f64; 2]; 2] {
        sub2(&self.q, 0, 0)
    }

    pub fn beta(&self) -> [[f64; 2]; 2] {
        sub2(&self.q, 2, 2)
    }

    pub fn gamma(&self) -> [[f64; 2]; 2] {
        sub2(&self.q, 0, 2)
    }

    pub fn det(&self) -> f64 {
        det4(&self.q)
    }

    /// `Δ̃ = det α + det β − 2 det γ`.
    pub fn delta_tilde(&self) -> f64 {
        det2(self.alpha()) + det2(self.beta()) - 2.0 * det2(self.gamma())
    }
}

/// Maps `G_ab = ⟨o_a o_b⟩` for `o = (m₁, m₁†, m₂, m₂†)` to the real block.
fn quadratures_from_moments(g: &[[C64; 4]; 4]) -> Result<QuadratureBlock> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let t = [
        [c(s, 0.0), c(s, 0.0), ZERO, ZERO],
        [c(0.0, -s), c(0.0, s), ZERO, ZERO],
        [ZERO, ZERO, c(s, 0.0), c(s, 0.0)],
        [ZERO, ZERO, c(0.0, -s), c(0.0, s)],
    ];
    let mut raw = [[ZERO; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut acc = ZERO;
            for k in 0..4 {
                for l in 0..4 {
                    acc += t[a][k] * g[k][l] * t[b][l];
                }
            }
            raw[a][b] = acc;
        }
    }
    let scale = 1.0 + raw.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let mut q = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            if (raw[a][b] - raw[b][a].conj()).norm() > 1e-8 * scale {
                return Err(Error::Unphysical(format!("quadrature moments not Hermitian at ({a}, {b})")));
            }
            q[a][b] = 2.0 * raw[a][b].re;
        }
    }
    for a in 0..4 {
        for b in 0..a {
            let m = 0.5 * (q[a][b] + q[b][a]);
            q[a][b] = m;
            q[b][a] = m;
        }
    }
    Ok(QuadratureBlock { q })
}

fn check_mode(m: ModeRef, n_modes: usize) -> Result<usize> {
    let idx = mode_index(m.site, m.species);
    if idx >= n_modes {
        return Err(invalid("site", format!("site {} outside a chain with {} sites", m.site, n_modes / 2)));
    }
    Ok(idx)
}

pub fn quadrature_block(v: &CovarianceState, first: ModeRef, second: ModeRef) -> Result<QuadratureBlock> {
    let l = v.n_modes();
    let (i, j) = (check_mode(first, l)?, check_mode(second, l)?);
    if i == j {
        return Err(invalid("pair", "the two modes must differ"));
    }
    let w = [i, l + i, j, l + j];
    let partner = |x: usize| if x < l { x + l } else { x - l };
    let mut g = [[ZERO; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            g[a][b] = v.v_matrix[(w[a], partner(w[b]))];
        }
    }
    quadratures_from_moments(&g)
}

/// Smallest symplectic eigenvalue `ν̃₋` of the partially transposed block.
pub fn nu_minus(q: &QuadratureBlock) -> Result<f64> {
    let det = q.det();
    let dt = q.delta_tilde();
    let disc = dt * dt - 4.0 * det;
    let scale = (dt * dt).max(det.abs()).max(1.0);
    if disc < -1e-9 * scale {
        return Err(Error::Unphysical(format!("negative discriminant {disc:e}")));
    }
    if det <= 0.0 {
        return Err(Error::Unphysical(format!("non-positive determinant {det:e}")));
    }
    let nu2 = 2.0 * det / (dt + disc.max(0.0).sqrt());
    if !(nu2 > 0.0) {
        return Err(Error::Unphysical(format!("non-positive symplectic eigenvalue {nu2:e}")));
    }
    Ok(nu2.sqrt())
}

/// `E_N = max(0, −log₂ ν̃₋)`.
pub fn log_negativity(q: &QuadratureBlock) -> Result<f64> {
    Ok((-nu_minus(q)?.log2()).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitePopulation {
    pub optical: f64,
    pub mechanical: f64,
}

pub fn populations(v: &CovarianceState) -> Result<Vec<SitePopulation>> {
    let l = v.n_modes();
    let occ = |i: usize| -> Result<f64> {
        let n = v.v_matrix[(l + i, l + i)].re;
        if n < -1e-9 * (1.0 + n.abs()) {
            return Err(Error::Unphysical(format!("occupation {n:e} of mode {i}")));
        }
        Ok(n.max(0.0))
    };
    (0..l / 2)
        .map(|s| {
            Ok(SitePopulation {
                optical: occ(mode_index(s, Species::Optical))?,
                mechanical: occ(mode_index(s, Species::Mechanical))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaturationOptions {
    pub max_iterations: usize,
    /// Spread allowed among the last three iterates.
    pub tolerance: f64,
    /// Relative eigenvalue cut for the rank of the divergent block.
    pub rank_tol: f64,
}

impl Default for SaturationOptions {
    fn default() -> Self {
        Self { max_iterations: 12, tolerance: 1e-4, rank_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationIterate {
    pub t: f64,
    pub nu_minus: f64,
    /// Occupations of the two modes at `t`.
    pub populations: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub nu_minus: f64,
    pub log_negativity: f64,
    pub lambda_end: f64,
    pub t0: f64,
    /// Rank of the divergent part of the quadrature block.
    pub rank: usize,
    pub iterates: Vec<SaturationIterate>,
}

fn mix2(x: [[f64; 2]; 2], y: [[f64; 2]; 2]) -> f64 {
    x[0][0] * y[1][1] + x[1][1] * y[0][0] - x[0][1] * y[1][0] - x[1][0] * y[0][1]
}

fn small_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let cm = CMat::from_fn(n, n, |i, j| c(m[i][j], 0.0));
    crate::linalg::det(&cm).re
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|p| a[i][p] * b[p][j]).sum()).collect()).collect()
}

fn mat_t(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn mat_inv(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return vec![];
    }
    let inv = inverse(&CMat::from_fn(n, n, |i, j| c(a[i][j], 0.0)));
    (0..n).map(|i| (0..n).map(|j| inv[(i, j)].re).collect()).collect()
}

/// `ν̃₋` of `Q = Q_f + Q_ξ/u` evaluated with the divergent part factored out.
fn split_nu(qf: &[[f64; 4]; 4], qx: &[[f64; 4]; 4], u: f64, rank_tol: f64) -> Result<(f64, usize)> {
    let rows: Vec<Vec<f64>> = qx.iter().map(|r| r.to_vec()).collect();
    let (mu, vecs) = eigh_real(&rows)?;
    let top = mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let keep: Vec<usize> = (0..4).filter(|&i| mu[i].abs() > rank_tol * top).collect();
    let drop: Vec<usize> = (0..4).filter(|&i| mu[i].abs() <= rank_tol * top).collect();
    let r = keep.len();
    if r > 2 {
        return Err(Error::Unsupported(format!("divergent block of rank {r} > 2")));
    }
    let col = |i: usize| vecs[i].clone();
    let rk: Vec<Vec<f64>> = keep.iter().map(|&i| col(i)).collect();
    let rp: Vec<Vec<f64>> = drop.iter().map(|&i| col(i)).collect();
    let qf_v: Vec<Vec<f64>> = qf.iter().map(|r| r.to_vec()).collect();
    let proj = |left: &[Vec<f64>], right: &[Vec<f64>]| mat_mul(&mat_mul(left, &qf_v), &mat_t(right));
    let y = proj(&rp, &rp);
    let z = proj(&rk, &rp);
    let xb = proj(&rk, &rk);
    let zyz = mat_mul(&mat_mul(&z, &mat_inv(&y)), &mat_t(&z));
    let s: Vec<Vec<f64>> = (0..r).map(|i| (0..r).map(|j| xb[i][j] - zyz[i][j]).collect()).collect();
    let det_d: f64 = keep.iter().map(|&i| mu[i]).product();
    let inner: Vec<Vec<f64>> =
        (0..r).map(|i| (0..r).map(|j| if i == j { 1.0 } else { 0.0 } + u * s[i][j] / mu[keep[i]]).collect()).collect();
    let d = small_det(&y) * det_d * small_det(&inner);

    let mut qx2 = [[0.0; 4]; 4];
    for (kk, &i) in keep.iter().enumerate() {
        for a in 0..4 {
            for b in 0..4 {
                qx2[a][b] += rk[kk][a] * mu[i] * rk[kk][b];
            }
        }
    }
    let dl = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| det2(y) + u * mix2(x, y) + u * u * det2(x);
    let delta = dl(sub2(qf, 0, 0), sub2(&qx2, 0, 0)) + dl(sub2(qf, 2, 2), sub2(&qx2, 2, 2))
        - 2.0 * dl(sub2(qf, 0, 2), sub2(&qx2, 0, 2));
    let ur = u.powi(4 - r as i32);
    let disc = delta * delta - 4.0 * ur * d;
    if disc < -1e-9 * (delta * delta).max(f64::MIN_POSITIVE) {
        return Err(Error::Unphysical(format!("negative discriminant {disc:e} in the saturated block")));
    }
    let nu2 = 2.0 * d * u.powi(2 - r as i32) / (delta + disc.max(0.0).sqrt());
    if !(nu2 > 0.0) || !nu2.is_finite() {
        return Err(Error::Unphysical(format!("saturated symplectic eigenvalue squared {nu2:e}")));
    }
    Ok((nu2.sqrt(), r))
}

/// Entanglement of a mode pair in the regime of unstable end modes and a
/// stable bulk.
///
/// With `ξ = e^{2tλ_end}` the exact finite-time moments split as
/// `Q = Q_f + ξ Q_ξ`; `ν̃₋` is evaluated from that split at `t_n = n·5/λ_end`
/// until the last three iterates agree within the tolerance.
pub fn saturation_negativity(
    params: &ChainParams,
    disorder: &[DisorderSpec],
    pair: (ModeRef, ModeRef),
    opts: &SaturationOptions,
) -> Result<SaturationReport> {
    let spec = chain_spectrum(params, disorder)?;
    if spec.im_e_bulk_max >= 0.0 {
        return Err(Error::Unsupported(format!(
            "bulk is unstable (max Im E = {:e}); saturation needs a stable bulk",
            spec.im_e_bulk_max
        )));
    }
    match spec.im_e_end {
        Some(e) if e > 0.0 => {}
        _ => {
            return Err(Error::Precondition(
                "no unstable end modes: a stationary state exists, use stationary_covariance".into(),
            ))
        }
    }
    let tq = build_third_quantization(params, disorder)?;
    let l = tq.n_modes();
    let (i, j) = (check_mode(pair.0, l)?, check_mode(pair.1, l)?);
    if i == j {
        return Err(invalid("pair", "the two modes must differ"));
    }
    let lam = &tq.lambdas;
    let n = lam.len();
    let lambda_end = lam.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let t0 = 5.0 / lambda_end;
    let w = [i, l + i, j, l + j];
    let bw = CMat::from_fn(4, n, |a, k| tq.beta[(w[a], k)]);
    let moments = |weights: &dyn Fn(usize, usize) -> C64, unit: bool| {
        let inner = CMat::from_fn(n, n, |a, b| tq.c_tilde[(a, b)] * weights(a, b));
        let cw = &bw * &inner * bw.transpose();
        let mut g = [[ZERO; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                g[a][b] = cw[(a, b)] * 2.0;
            }
        }
        if unit {
            g[0][1] += ONE;
            g[2][3] += ONE;
        }
        g
    };

    let mut iterates = Vec::new();
    let mut rank = 0;
    for step in 1..=opts.max_iterations.max(3) {
        let t = step as f64 * t0;
        let finite = |a: usize, b: usize| {
            let s = lam[a] + lam[b];
            if s.re > 0.0 {
                -ONE / s
            } else {
                gamma_kernel(s, t)
            }
        };
        let divergent = |a: usize, b: usize| {
            let s = lam[a] + lam[b];
            if s.re > 0.0 {
                (t * (s - 2.0 * lambda_end)).exp() / s
            } else {
                ZERO
            }
        };
        let qf = quadratures_from_moments(&moments(&finite, true))?.q;
        let qx = quadratures_from_moments(&moments(&divergent, false))?.q;
        let u = (-2.0 * t * lambda_end).exp();
        let (nu, r) = split_nu(&qf, &qx, u, opts.rank_tol)?;
        rank = r;
        let full = moments(&|a, b| gamma_kernel(lam[a] + lam[b], t), true);
        let pops = [full[1][0].re.max(0.0), full[3][2].re.max(0.0)];
        iterates.push(SaturationIterate { t, nu_minus: nu, populations: pops });
        if iterates.len() >= 3 {
            let tail = &iterates[iterates.len() - 3..];
            let lo = tail.iter().map(|x| x.nu_minus).fold(f64::INFINITY, f64::min);
            let hi = tail.iter().map(|x| x.nu_minus).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < opts.tolerance {
                let nu = tail[2].nu_minus;
                return Ok(SaturationReport {
                    nu_minus: nu,
                    log_negativity: (-nu.log2()).max(0.0),
                    lambda_end,
                    t0,
                    rank,
                    iterates,
                });
            }
        }
    }
    let trace: Vec<String> = iterates.iter().map(|x| format!("{:.6}", x.nu_minus)).collect();
    Err(Error::NotConverged(format!(
        "saturation iterates did not settle (rank {rank}): [{}]",
        trace.join(", ")
    )))
}
