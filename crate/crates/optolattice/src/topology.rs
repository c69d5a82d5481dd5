//! Chiral symmetry, the effective Hermitian Hamiltonian `ℋ_eff(k, η) = ηS − iSℋ_NH(k)`
//! and its Chern number.
//!
//! Curvature follows the convention `A = i⟨u|∂u⟩`, `Ω = ∂_k A_η − ∂_η A_k`, for the
//! eight lowest bands of `ℋ_eff`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{bloch_derivative, build_bloch, ChainParams};
use crate::linalg::{c, eigh, zeros, CMat, I};
use crate::par::Exec;

/// Number of occupied bands.
pub const HALF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChiralForm {
    /// `½σ₀⊗[σ_z⊗σ₀⊗(σ_z+σ₀) + σ₀⊗σ_z⊗(σ₀−σ_z)]`.
    Pauli,
    /// Block product `ΠΣ`.
    SigmaPi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiralOperator {
    pub diag: [f64; 16],
    pub provenance: ChiralForm,
    /// Residuals of both candidates, in declaration order of [`ChiralForm`].
    pub residuals: [f64; 2],
}

pub fn pauli_form() -> [f64; 16] {
    let mut d = [0.0; 16];
    for (i, v) in d.iter_mut().enumerate() {
        let within = i % 8;
        let (site, mech) = (within / 2, within % 2 == 1);
        let bit1 = if site < 2 { 1.0 } else { -1.0 };
        let bit2 = if site % 2 == 0 { 1.0 } else { -1.0 };
        *v = if mech { bit2 } else { bit1 };
    }
    d
}

pub fn sigma_pi_form() -> [f64; 16] {
    let sigma = [1.0, 1.0, -1.0, -1.0];
    let tau = [1.0, -1.0, 1.0, -1.0];
    let pi_blocks = [sigma, tau, tau.map(|x: f64| -x), sigma.map(|x: f64| -x)];
    let mut d = [0.0; 16];
    for b in 0..4 {
        for i in 0..4 {
            d[4 * b + i] = pi_blocks[b][i] * sigma[i];
        }
    }
    d
}

/// `max |S H S − (−H†)|` for diagonal `S`.
pub fn chiral_residual(s: &[f64; 16], h: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..16 {
        for j in 0..16 {
            worst = worst.max((h[(i, j)] * (s[i] * s[j]) + h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub const CHIRAL_TOL: f64 = 1e-12;

const PROBE_K: [f64; 4] = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];

fn max_residual(s: &[f64; 16], params: &ChainParams) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in PROBE_K {
        worst = worst.max(chiral_residual(s, &build_bloch(params, k, &[])?.matrix));
    }
    Ok(worst)
}

/// Tests both candidate forms at four momenta and returns the one that
/// satisfies `S ℋ_NH S⁻¹ = −ℋ_NH†`. Ties (e.g. vanishing couplings) are broken on a
/// generic parameter set.
pub fn chiral_operator(params: &ChainParams) -> Result<ChiralOperator> {
    let forms = [(ChiralForm::Pauli, pauli_form()), (ChiralForm::SigmaPi, sigma_pi_form())];
    let res = [max_residual(&forms[0].1, params)?, max_residual(&forms[1].1, params)?];
    let pass: Vec<usize> = (0..2).filter(|&i| res[i] < CHIRAL_TOL).collect();
    let pick = match pass.len() {
        0 => {
            return Err(Error::Symmetry(format!(
                "no chiral candidate satisfies the relation (main-text residual {:e}, sigma-pi residual {:e})",
                res[0], res[1]
            )))
        }
        1 => pass[0],
        _ => {
            let generic = ChainParams { g_plus: 0.31, g_minus: 0.73, j_hop: 0.47, gamma: 0.013, ..*params };
            let gen = [max_residual(&forms[0].1, &generic)?, max_residual(&forms[1].1, &generic)?];
            if gen[0] <= gen[1] { 0 } else { 1 }
        }
    };
    Ok(ChiralOperator { diag: forms[pick].1, provenance: forms[pick].0, residuals: res })
}

/// Parameters plus the selected chiral operator.
#[derive(Debug, Clone, Copy)]
pub struct TopoModel {
    pub params: ChainParams,
    pub chiral: ChiralOperator,
}

impl TopoModel {
    pub fn new(params: &ChainParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params: *params, chiral: chiral_operator(params)? })
    }

    fn s_times(&self, m: &CMat, scale: C64) -> CMat {
        let s = &self.chiral.diag;
        CMat::from_fn(16, 16, |i, j| m[(i, j)] * (scale * s[i]))
    }

    pub fn effective_hamiltonian(&self, k: f64, eta: f64) -> Result<CMat> {
        let hk = build_bloch(&self.params, k, &[])?.matrix;
        let mut h = self.s_times(&hk, -I);
        for i in 0..16 {
            h[(i, i)] += c(eta * self.chiral.diag[i], 0.0);
        }
        let scale = 1.0 + eta.abs() + crate::linalg::max_abs(&hk);
        let mut asym = 0.0f64;
        for i in 0..16 {
            for j in 0..16 {
                asym = asym.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        if asym > 1e-12 * scale {
            return Err(Error::Symmetry(format!("effective Hamiltonian not Hermitian: {asym:e}")));
        }
        Ok(h)
    }

    /// `ℛ_η ℋ_eff ℛ_η†` with `ℛ_η = exp[i(π/4)(1 + tanh η)𝒢]`.
    pub fn compactified_hamiltonian(&self, k: f64, eta: f64) -> Result<CMat> {
        let h = self.effective_hamiltonian(k, eta)?;
        let r = rotation(eta);
        Ok(&r * &h * r.adjoint())
    }

    /// `∂_k ℋ_eff = −iS ∂_k ℋ_NH`.
    pub fn dk_effective(&self, k: f64) -> CMat {
        self.s_times(&bloch_derivative(&self.params, k), -I)
    }

    pub fn berry_curvature(&self, k: f64, eta: f64) -> Result<f64> {
        let h = self.effective_hamiltonian(k, eta)?;
        let dk = self.dk_effective(k);
        let s = &self.chiral.diag;
        let ds = CMat::from_fn(16, 16, |i, j| if i == j { c(s[i], 0.0) } else { c(0.0, 0.0) });
        curvature_from(&h, &dk, &ds, k, eta)
    }
}

/// Block permutation `𝒢` exchanging 4-blocks `b ↔ 3 − b`.
pub fn g_matrix() -> CMat {
    CMat::from_fn(16, 16, |i, j| if j / 4 == 3 - i / 4 && i % 4 == j % 4 { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

pub fn rotation(eta: f64) -> CMat {
    let theta = PI / 4.0 * (1.0 + eta.tanh());
    let g = g_matrix();
    CMat::from_fn(16, 16, |i, j| {
        let id = if i == j { theta.cos() } else { 0.0 };
        c(id, 0.0) + I * theta.sin() * g[(i, j)]
    })
}

/// Sum-over-states curvature of the eight lowest bands of `h`.
pub fn curvature_from(h: &CMat, dk: &CMat, deta: &CMat, k: f64, eta: f64) -> Result<f64> {
    let (e, u) = eigh(h)?;
    let gap = e[HALF] - e[HALF - 1];
    if gap < 1e-10 {
        return Err(Error::GapClosure { k, eta, gap });
    }
    let mk = u.adjoint() * dk * &u;
    let me = u.adjoint() * deta * &u;
    let mut sum = 0.0;
    for n in 0..HALF {
        for m in HALF..16 {
            let de = e[n] - e[m];
            sum += (mk[(n, m)] * me[(m, n)]).im / (de * de);
        }
    }
    Ok(-2.0 * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernLevel {
    pub nk: usize,
    pub neta: usize,
    pub eta_max: f64,
    pub chern: f64,
    pub boundary_flux: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyReport {
    /// Plaquette sum over the window, `−ΣF/2π`.
    pub chern: f64,
    /// Plaquette sum with the two boundary loops closed; an exact integer up to rounding.
    pub chern_closed: f64,
    pub eta_window: f64,
    pub grid_dims: (usize, usize),
    /// `(|φ_top| + |φ_bottom|)/2π` of the Berry phases along the η = ±η_max loops.
    pub boundary_flux: f64,
    pub converged: bool,
    pub chiral_form: ChiralForm,
    pub refinements: Vec<ChernLevel>,
    /// `(k, η, Ω)` at plaquette centres of the final grid, Ω = −F/(ΔkΔη).
    pub curvature_samples: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernOptions {
    pub nk: usize,
    pub neta: usize,
    /// `None` selects `10·max(κ, G₊, G₋, J)`.
    pub eta_max: Option<f64>,
    pub max_refinements: usize,
    pub keep_samples: bool,
}

impl Default for ChernOptions {
    fn default() -> Self {
        Self { nk: 64, neta: 64, eta_max: None, max_refinements: 4, keep_samples: true }
    }
}

pub fn default_eta_max(p: &ChainParams) -> f64 {
    10.0 * p.kappa.max(p.g_plus).max(p.g_minus).max(p.j_hop)
}

struct Plaquettes {
    chern: f64,
    chern_closed: f64,
    boundary_flux: f64,
    samples: Vec<(f64, f64, f64)>,
}

fn link(a: &CMat, b: &CMat) -> C64 {
    let d = (a.adjoint() * b).determinant();
    let n = d.norm();
    if n == 0.0 {
        c(1.0, 0.0)
    } else {
        d / n
    }
}

fn occupied(model: &TopoModel, k: f64, eta: f64) -> Result<CMat> {
    let h = model.compactified_hamiltonian(k, eta)?;
    let (e, u) = eigh(&h)?;
    let gap = e[HALF] - e[HALF - 1];
    if gap < 1e-10 {
        return Err(Error::GapClosure { k, eta, gap });
    }
    Ok(u.subcols(0, HALF).to_owned())
}

fn plaquette_sum(model: &TopoModel, nk: usize, neta: usize, eta_max: f64, exec: Exec, keep: bool) -> Result<Plaquettes> {
    let ks: Vec<f64> = (0..nk).map(|i| TAU * i as f64 / nk as f64).collect();
    let etas: Vec<f64> = (0..neta).map(|j| -eta_max + 2.0 * eta_max * j as f64 / (neta - 1) as f64).collect();
    let columns: Vec<Result<Vec<CMat>>> =
        exec.map(ks.clone(), |k| etas.iter().map(|&eta| occupied(model, k, eta)).collect());
    let mut vecs = Vec::with_capacity(nk);
    for col in columns {
        vecs.push(col?);
    }
    let (dk, deta) = (TAU / nk as f64, 2.0 * eta_max / (neta - 1) as f64);
    let rows: Vec<(f64, Vec<(f64, f64, f64)>)> = exec.map_range(nk, |i| {
        let ip = (i + 1) % nk;
        let mut acc = 0.0;
        let mut samples = Vec::new();
        for j in 0..neta - 1 {
            let u1 = link(&vecs[i][j], &vecs[ip][j]);
            let u2 = link(&vecs[ip][j], &vecs[ip][j + 1]);
            let u3 = link(&vecs[i][j + 1], &vecs[ip][j + 1]);
            let u4 = link(&vecs[i][j], &vecs[i][j + 1]);
            let f = (u1 * u2 * u3.conj() * u4.conj()).arg();
            acc += f;
            if keep {
                samples.push((ks[i] + dk / 2.0, etas[j] + deta / 2.0, -f / (dk * deta)));
            }
        }
        (acc, samples)
    });
    let mut total = 0.0;
    let mut samples = Vec::new();
    for (acc, s) in rows {
        total += acc;
        samples.extend(s);
    }
    let loop_phase = |j: usize| {
        let mut prod = c(1.0, 0.0);
        for i in 0..nk {
            prod *= link(&vecs[i][j], &vecs[(i + 1) % nk][j]);
        }
        prod.arg()
    };
    let (bottom, top) = (loop_phase(0), loop_phase(neta - 1));
    Ok(Plaquettes {
        chern: -total / TAU,
        chern_closed: -(total - (bottom - top)) / TAU,
        boundary_flux: (bottom.abs() + top.abs()) / TAU,
        samples,
    })
}

/// Link-variable Chern number with successive refinement.
///
/// Level `i+1` doubles both grid dimensions when `i` is even and doubles `η_max`
/// (keeping the η spacing) when `i` is odd. The run is converged once two
/// successive levels round to the same integer, differ by less than 1e-2, and the
/// boundary flux of the newer level is below 1e-3.
pub fn chern_number(params: &ChainParams, opts: &ChernOptions, exec: Exec) -> Result<TopologyReport> {
    let model = TopoModel::new(params)?;
    if opts.nk < 2 || opts.neta < 2 {
        return Err(crate::error::invalid("grid", "need at least 2 points per direction"));
    }
    let mut eta_max = opts.eta_max.unwrap_or_else(|| default_eta_max(params));
    if !(eta_max.is_finite() && eta_max > 0.0) {
        return Err(crate::error::invalid("eta_max", "must be finite and > 0"));
    }
    let (mut nk, mut neta) = (opts.nk, opts.neta);
    let mut levels: Vec<ChernLevel> = Vec::new();
    let mut last: Option<Plaquettes> = None;
    for level in 0..=opts.max_refinements {
        let pl = plaquette_sum(&model, nk, neta, eta_max, exec, opts.keep_samples)?;
        levels.push(ChernLevel { nk, neta, eta_max, chern: pl.chern, boundary_flux: pl.boundary_flux });
        let done = levels.len() >= 2 && {
            let (a, b) = (levels[levels.len() - 2].chern, pl.chern);
            a.round() == b.round() && (a - b).abs() < 1e-2 && (b - b.round()).abs() < 1e-2 && pl.boundary_flux < 1e-3
        };
        if done {
            return Ok(report(&model, pl, eta_max, (nk, neta), true, levels));
        }
        last = Some(pl);
        if level % 2 == 0 {
            nk *= 2;
            neta = 2 * neta - 1;
        } else {
            eta_max *= 2.0;
            neta = 2 * neta - 1;
        }
    }
    let final_level = *levels.last().expect("at least one level");
    let trace: Vec<String> = levels
        .iter()
        .map(|l| format!("{}x{} eta_max={} C={:.6} flux={:.2e}", l.nk, l.neta, l.eta_max, l.chern, l.boundary_flux))
        .collect();
    let _ = (last, final_level);
    Err(Error::NotConverged(format!("Chern refinement trace: {}", trace.join("; "))))
}

fn report(
    model: &TopoModel,
    pl: Plaquettes,
    eta_max: f64,
    dims: (usize, usize),
    converged: bool,
    levels: Vec<ChernLevel>,
) -> TopologyReport {
    TopologyReport {
        chern: pl.chern,
        chern_closed: pl.chern_closed,
        eta_window: eta_max,
        grid_dims: dims,
        boundary_flux: pl.boundary_flux,
        converged,
        chiral_form: model.chiral.provenance,
        refinements: levels,
        curvature_samples: pl.samples,
    }
}

/// Single plaquette evaluation without refinement.
pub fn chern_fixed_grid(params: &ChainParams, nk: usize, neta: usize, eta_max: f64, exec: Exec) -> Result<ChernLevel> {
    let model = TopoModel::new(params)?;
    let pl = plaquette_sum(&model, nk, neta, eta_max, exec, false)?;
    Ok(ChernLevel { nk, neta, eta_max, chern: pl.chern, boundary_flux: pl.boundary_flux })
}

/// Direct quadrature of the sum-over-states curvature: periodic trapezoid in k,
/// midpoint rule in θ with `η = tan θ`.
pub fn chern_quadrature(params: &ChainParams, nk: usize, ntheta: usize, exec: Exec) -> Result<f64> {
    let model = TopoModel::new(params)?;
    let dtheta = PI / ntheta as f64;
    let rows: Vec<Result<f64>> = exec.map_range(ntheta, |j| {
        let theta = -PI / 2.0 + (j as f64 + 0.5) * dtheta;
        let eta = theta.tan();
        let jac = 1.0 / theta.cos().powi(2);
        let mut acc = 0.0;
        for i in 0..nk {
            let k = TAU * i as f64 / nk as f64;
            acc += model.berry_curvature(k, eta)?;
        }
        Ok(acc * jac)
    });
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total * (TAU / nk as f64) * dtheta / TAU)
}

/// Eigenvalues of the effective and compactified Hamiltonians at one point.
pub fn compare_spectra(model: &TopoModel, k: f64, eta: f64) -> Result<f64> {
    let (a, _) = eigh(&model.effective_hamiltonian(k, eta)?)?;
    let (b, _) = eigh(&model.compactified_hamiltonian(k, eta)?)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

pub fn zero_matrix() -> CMat {
    zeros(16, 16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff};
    use proptest::prelude::*;

    fn reference_chain() -> ChainParams {
        ChainParams::default()
    }

    fn fd_curvature(model: &TopoModel, k: f64, eta: f64, d: f64) -> f64 {
        let h = model.effective_hamiltonian(k, eta).unwrap();
        let hk = (&model.effective_hamiltonian(k + d, eta).unwrap() - &model.effective_hamiltonian(k - d, eta).unwrap())
            * faer::Scale(c(0.5 / d, 0.0));
        let he = (&model.effective_hamiltonian(k, eta + d).unwrap() - &model.effective_hamiltonian(k, eta - d).unwrap())
            * faer::Scale(c(0.5 / d, 0.0));
        curvature_from(&h, &hk, &he, k, eta).unwrap()
    }

    #[test]
    fn pauli_form_is_selected() {
        let s = chiral_operator(&reference_chain()).unwrap();
        assert_eq!(s.provenance, ChiralForm::Pauli);
        assert!(s.residuals[0] < CHIRAL_TOL);
        assert!(s.residuals[1] > 1e-3);
        assert!(s.diag.iter().all(|&x| x * x == 1.0));
    }

    #[test]
    fn sigma_pi_blocks() {
        let d = sigma_pi_form();
        assert_eq!(&d[0..4], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(&d[4..8], &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(&d[8..12], &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(&d[12..16], &[-1.0; 4]);
    }

    #[test]
    fn both_forms_pass_without_couplings() {
        let p = ChainParams { g_plus: 0.0, g_minus: 0.0, j_hop: 0.0, ..reference_chain() };
        let s = chiral_operator(&p).unwrap();
        assert!(s.residuals.iter().all(|&r| r < CHIRAL_TOL));
        assert_eq!(s.provenance, ChiralForm::Pauli);
    }

    #[test]
    fn residual_at_pi_over_three() {
        let s = pauli_form();
        let h = build_bloch(&reference_chain(), PI / 3.0, &[]).unwrap().matrix;
        assert!(chiral_residual(&s, &h) < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_trivial_and_large_eta() {
        let p = ChainParams { g_plus: 0.0, g_minus: 0.0, j_hop: 0.0, ..reference_chain() };
        let m = TopoModel::new(&p).unwrap();
        let (e, _) = eigh(&m.effective_hamiltonian(0.4, 0.0).unwrap()).unwrap();
        let mut abs: Vec<f64> = e.iter().map(|x| x.abs()).collect();
        abs.sort_by(f64::total_cmp);
        assert!(abs[..8].iter().all(|x| (x - 5e-5).abs() < 1e-15));
        assert!(abs[8..].iter().all(|x| (x - 0.5).abs() < 1e-15));

        let m = TopoModel::new(&reference_chain()).unwrap();
        let eta = 200.0;
        let (e, _) = eigh(&m.effective_hamiltonian(1.0, eta).unwrap()).unwrap();
        let bound = crate::linalg::max_abs(&build_bloch(&reference_chain(), 1.0, &[]).unwrap().matrix) * 16.0;
        assert!(e[..8].iter().all(|x| (x + eta).abs() < bound));
        assert!(e[8..].iter().all(|x| (x - eta).abs() < bound));
    }

    #[test]
    fn effective_spectrum_symmetric_at_origin() {
        let m = TopoModel::new(&reference_chain()).unwrap();
        let (e, _) = eigh(&m.effective_hamiltonian(0.0, 0.0).unwrap()).unwrap();
        for i in 0..8 {
            assert!((e[i] + e[15 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_is_unitary() {
        for eta in [0.0, 0.7, 30.0, -30.0] {
            let r = rotation(eta);
            assert!(max_abs_diff(&(&r * r.adjoint()), &identity(16)) < 1e-12);
        }
        let r = rotation(30.0);
        let g = g_matrix();
        let want = CMat::from_fn(16, 16, |i, j| I * g[(i, j)]);
        assert!(max_abs_diff(&r, &want) < 1e-12);
    }

    #[test]
    fn compactified_spectrum_matches() {
        let m = TopoModel::new(&reference_chain()).unwrap();
        assert!(compare_spectra(&m, 1.0, 0.7).unwrap() < 1e-10);
        assert!(compare_spectra(&m, 0.0, 0.0).unwrap() < 1e-10);
    }

    #[test]
    fn no_hopping_no_curvature() {
        let p = ChainParams { j_hop: 0.0, ..reference_chain() };
        let m = TopoModel::new(&p).unwrap();
        for (k, eta) in [(0.1, 0.2), (2.0, -1.0), (4.0, 3.0)] {
            assert_eq!(m.berry_curvature(k, eta).unwrap(), 0.0);
        }
        let c = chern_fixed_grid(&p, 16, 33, 10.0, Exec::Sequential).unwrap();
        assert!(c.chern.abs() < 1e-12);
    }

    #[test]
    fn analytic_curvature_matches_finite_difference() {
        let m = TopoModel::new(&reference_chain()).unwrap();
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let k = TAU * next();
            let eta = 4.0 * next() - 2.0;
            let a = m.berry_curvature(k, eta).unwrap();
            let f = fd_curvature(&m, k, eta, 1e-5);
            assert!((a - f).abs() < 1e-5, "k={k} eta={eta} analytic={a} fd={f}");
        }
    }

    #[test]
    fn refinement_converges_to_four() {
        let r = chern_number(&reference_chain(), &ChernOptions { keep_samples: false, ..Default::default() }, Exec::Parallel)
            .unwrap();
        assert!(r.converged);
        assert!((r.chern - 4.0).abs() < 1e-2, "{r:?}");
        assert!((r.chern_closed - 4.0).abs() < 1e-9);
        assert!(r.boundary_flux < 1e-3);
    }

    #[test]
    fn gap_closure_reported() {
        let p = ChainParams { g_plus: 0.0, g_minus: 0.0, j_hop: 0.0, gamma: 1.0, ..reference_chain() };
        let m = TopoModel::new(&p).unwrap();
        let err = m.berry_curvature(0.0, 0.5).unwrap_err();
        assert_eq!(err.category(), "gap-closure");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn hermitian_and_compact_equivalent(k in 0.0f64..TAU, eta in -5.0f64..5.0,
                                           gp in 0.0f64..1.0, gm in 0.1f64..1.5, j in 0.0f64..1.0) {
            let p = ChainParams { g_plus: gp, g_minus: gm, j_hop: j, ..reference_chain() };
            let m = TopoModel::new(&p).unwrap();
            let h = m.effective_hamiltonian(k, eta).unwrap();
            prop_assert!(max_abs_diff(&h, &h.adjoint().to_owned()) < 1e-12);
            prop_assert!(compare_spectra(&m, k, eta).unwrap() < 1e-10);
            let hnh = build_bloch(&p, k, &[]).unwrap().matrix;
            prop_assert!(chiral_residual(&m.chiral.diag, &hnh) < CHIRAL_TOL);
        }
    }
}
