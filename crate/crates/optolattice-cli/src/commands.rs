use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use optolattice::gaussian::{
    build_third_quantization, evolve_covariance, log_negativity, lyapunov_residual, nu_minus, ode_stationary,
    populations, quadrature_block, saturation_negativity, stationary_covariance, CovarianceState, ModeRef,
};
use optolattice::lattice::{build_bloch, build_chain, dissipation_data, Species};
use optolattice::linalg::{max_abs_diff, multiset_distance};
use optolattice::spectra::{chain_spectrum, linspace, phase_diagram, sweep_line, ModeKind};
use optolattice::topology::{chern_number, chiral_operator, chiral_residual, compare_spectra, TopoModel};
use optolattice::twosite::{self, TwoSiteParams};
use optolattice::ChainParams;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::table::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Imaginary parts of the OBC spectrum along a G+ line, with the two-site overlay.
    Spectrum,
    /// Stability regions A-E on a (G-, G+) grid.
    PhaseDiagram,
    /// Chern number of the effective Hamiltonian with refinement history.
    Chern,
    /// Stationary mode populations and the negativity of the selected pair.
    Steady,
    /// Stationary negativity of the selected pair along a G+ line.
    Negativity,
    /// Saturation negativity for unstable end modes over a stable bulk.
    Saturation,
    /// Two-site poles and their asymptotic forms along a G+ line.
    Twosite,
    /// Time evolution from the vacuum.
    Evolve,
    /// Full eigenvalue listing for each disorder realization.
    Disorder,
    /// Runs the built-in oracle checks.
    Selfcheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::PhaseDiagram => "phase-diagram",
            Command::Chern => "chern",
            Command::Steady => "steady",
            Command::Negativity => "negativity",
            Command::Saturation => "saturation",
            Command::Twosite => "twosite",
            Command::Evolve => "evolve",
            Command::Disorder => "disorder",
            Command::Selfcheck => "selfcheck",
        }
    }
}

pub struct Outcome {
    pub table: Table,
    pub summary: Value,
    /// Set when the run completed but reported failed checks.
    pub failures: usize,
}

impl Outcome {
    fn ok(table: Table, summary: Value) -> Self {
        Self { table, summary, failures: 0 }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Spectrum => spectrum(cfg),
        Command::PhaseDiagram => phase(cfg),
        Command::Chern => chern(cfg),
        Command::Steady => steady(cfg),
        Command::Negativity => negativity(cfg),
        Command::Saturation => saturation(cfg),
        Command::Twosite => twosite_scan(cfg),
        Command::Evolve => evolve(cfg),
        Command::Disorder => disorder(cfg),
        Command::Selfcheck => selfcheck(cfg),
    }
}

fn occupation(v: &CovarianceState, m: ModeRef) -> Result<f64, CliError> {
    let pops = populations(v)?;
    let site = pops.get(m.site).ok_or_else(|| CliError::Config(format!("pair site {} out of range", m.site)))?;
    Ok(match m.species {
        Species::Optical => site.optical,
        Species::Mechanical => site.mechanical,
    })
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let l = &cfg.line;
    let rows = sweep_line(&cfg.params, (l.g_plus_min, l.g_plus_max), l.steps, cfg.exec)?;
    let mut t = Table::new(vec!["g_plus", "im_e_end", "im_e_bulk_max", "im_e_twosite"]);
    for r in &rows {
        t.push(vec![r.g_plus.into(), r.im_e_end.into(), r.im_e_bulk_max.into(), r.im_e_twosite.into()]);
    }
    let crossing = rows.windows(2).find(|w| w[0].im_e_end < 0.0 && w[1].im_e_end > 0.0).map(|w| w[1].g_plus);
    Ok(Outcome::ok(t, json!({ "points": rows.len(), "first_unstable_end_g_plus": crossing })))
}

fn phase(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let g = &cfg.grid;
    let cells = phase_diagram(
        &cfg.params,
        (g.g_minus_min, g.g_minus_max),
        (g.g_plus_min, g.g_plus_max),
        (g.n_g_minus, g.n_g_plus),
        &cfg.phase,
        cfg.exec,
    )?;
    let mut t = Table::new(vec!["g_minus", "g_plus", "region"]);
    let mut boundaries = 0;
    for c in &cells {
        if c.verdict.region().is_none() {
            boundaries += 1;
        }
        t.push(vec![c.g_minus.into(), c.g_plus.into(), c.verdict.to_string().into()]);
    }
    Ok(Outcome::ok(t, json!({ "cells": cells.len(), "boundary_cells": boundaries })))
}

fn chern(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rep = chern_number(&cfg.params, &cfg.chern, cfg.exec)?;
    let mut t = Table::new(vec!["level", "nk", "neta", "eta_max", "chern", "boundary_flux"]);
    for (i, l) in rep.refinements.iter().enumerate() {
        t.push(vec![i.into(), l.nk.into(), l.neta.into(), l.eta_max.into(), l.chern.into(), l.boundary_flux.into()]);
    }
    Ok(Outcome::ok(
        t,
        json!({
            "chern": rep.chern,
            "chern_closed": rep.chern_closed,
            "converged": rep.converged,
            "eta_window": rep.eta_window,
            "grid": [rep.grid_dims.0, rep.grid_dims.1],
            "boundary_flux": rep.boundary_flux,
            "chiral_form": format!("{:?}", rep.chiral_form),
        }),
    ))
}

fn steady(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dis = cfg.disorder_for(0);
    let op = build_chain(&cfg.params, &dis)?;
    let d = dissipation_data(&cfg.params, &dis)?;
    let v = stationary_covariance(&op, &d)?;
    let mut t = Table::new(vec!["site", "n_opt", "n_mech"]);
    for (s, p) in populations(&v)?.iter().enumerate() {
        t.push(vec![(s + 1).into(), p.optical.into(), p.mechanical.into()]);
    }
    let q = quadrature_block(&v, cfg.pair.0, cfg.pair.1)?;
    Ok(Outcome::ok(
        t,
        json!({
            "nu_minus": nu_minus(&q)?,
            "log_negativity": log_negativity(&q)?,
            "lyapunov_residual": lyapunov_residual(&op, &d, &v.v_matrix),
            "warnings": v.warnings,
        }),
    ))
}

fn negativity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let l = &cfg.line;
    let dis = cfg.disorder_for(0);
    let pair = cfg.pair;
    let points = cfg.exec.map(linspace(l.g_plus_min, l.g_plus_max, l.steps), |g| {
        let p = cfg.params.with_g_plus(g);
        let r = optolattice::gaussian::stationary_for(&p, &dis)
            .and_then(|v| quadrature_block(&v, pair.0, pair.1))
            .and_then(|q| Ok((nu_minus(&q)?, log_negativity(&q)?)));
        (g, r)
    });
    let mut t = Table::new(vec!["g_plus", "nu_minus", "e_n", "status"]);
    let mut stable = 0;
    for (g, r) in points {
        match r {
            Ok((nu, en)) => {
                stable += 1;
                t.push(vec![g.into(), nu.into(), en.into(), "ok".into()]);
            }
            Err(e) if e.is_validation() => return Err(e.into()),
            Err(e) => t.push(vec![g.into(), f64::NAN.into(), f64::NAN.into(), e.category().into()]),
        }
    }
    Ok(Outcome::ok(t, json!({ "points": l.steps, "stationary_points": stable, "n_m": cfg.params.n_m })))
}

fn saturation(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rep = saturation_negativity(&cfg.params, &cfg.disorder_for(0), cfg.pair, &cfg.saturation)?;
    let mut t = Table::new(vec!["t", "nu_minus", "n_first", "n_second"]);
    for it in &rep.iterates {
        t.push(vec![it.t.into(), it.nu_minus.into(), it.populations[0].into(), it.populations[1].into()]);
    }
    Ok(Outcome::ok(
        t,
        json!({
            "nu_minus": rep.nu_minus,
            "log_negativity": rep.log_negativity,
            "lambda_end": rep.lambda_end,
            "t0": rep.t0,
            "rank": rep.rank,
        }),
    ))
}

fn twosite_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let l = &cfg.line;
    let mut t = Table::new(vec!["g_plus", "max_im", "asymptote_small", "asymptote_large", "cubic_small"]);
    for g in linspace(l.g_plus_min, l.g_plus_max, l.steps) {
        let p = TwoSiteParams::from(&cfg.params.with_g_plus(g));
        t.push(vec![
            g.into(),
            twosite::max_im(&p)?.into(),
            twosite::asymptote_small_gplus(&p).value.into(),
            twosite::asymptote_large_gplus(&p).into(),
            twosite::cubic_small_gplus(&p).into(),
        ]);
    }
    let small = twosite::asymptote_small_gplus(&TwoSiteParams::from(&cfg.params));
    Ok(Outcome::ok(t, json!({ "points": l.steps, "small_g_plus_out_of_regime": small.out_of_regime })))
}

fn evolve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dis = cfg.disorder_for(0);
    let pair = cfg.pair;
    let times = linspace(0.0, cfg.times.t_max, cfg.times.steps);
    let results = cfg.exec.map(times, |t| (t, evolve_covariance(&cfg.params, &dis, t, None)));
    let mut table = Table::new(vec!["t", "n_first", "n_second", "nu_minus", "e_n"]);
    let mut notes = Vec::new();
    for (t, r) in results {
        let ev = r?;
        notes.extend(ev.state.warnings.iter().cloned());
        let q = quadrature_block(&ev.state, pair.0, pair.1)?;
        table.push(vec![
            t.into(),
            occupation(&ev.state, pair.0)?.into(),
            occupation(&ev.state, pair.1)?.into(),
            nu_minus(&q)?.into(),
            log_negativity(&q)?.into(),
        ]);
    }
    notes.sort();
    notes.dedup();
    Ok(Outcome::ok(table, json!({ "points": cfg.times.steps, "warnings": notes })))
}

fn disorder(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let runs: Vec<usize> = (0..cfg.realizations).collect();
    let reports = cfg.exec.map(runs, |r| chain_spectrum(&cfg.params, &cfg.disorder_for(r)));
    let mut t = Table::new(vec!["realization", "index", "re_e", "im_e", "localization", "label"]);
    let mut ends = Vec::new();
    for (r, rep) in reports.into_iter().enumerate() {
        let rep = rep?;
        let mut order: Vec<usize> = (0..rep.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (rep.eigenvalues[a], rep.eigenvalues[b]);
            x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
        });
        for (k, &i) in order.iter().enumerate() {
            let e = rep.eigenvalues[i];
            let label = match rep.labels[i] {
                ModeKind::End => "end",
                ModeKind::Bulk => "bulk",
            };
            t.push(vec![r.into(), k.into(), e.re.into(), e.im.into(), rep.localization[i].into(), label.into()]);
        }
        ends.push(rep.end_indices().len());
    }
    Ok(Outcome::ok(t, json!({ "realizations": cfg.realizations, "end_states_per_realization": ends })))
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
}

fn selfcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = cfg.params;
    let mut checks = Vec::new();

    let chi = chiral_operator(&p)?;
    let (mut chiral, mut ph) = (0.0f64, 0.0f64);
    for i in 0..8 {
        let h = build_bloch(&p, TAU * i as f64 / 8.0 + 0.1, &[])?;
        chiral = chiral.max(chiral_residual(&chi.diag, &h.matrix));
        let ev = h.eigenvalues()?;
        let mirrored: Vec<C64> = ev.iter().map(|e| -e.conj()).collect();
        ph = ph.max(multiset_distance(&ev, &mirrored));
    }
    checks.push(Check { name: "chiral residual", value: chiral, tolerance: 1e-12 });
    checks.push(Check { name: "particle-hole pairing", value: ph, tolerance: 1e-10 });

    let model = TopoModel::new(&p)?;
    let mut compact = 0.0f64;
    for (k, eta) in [(0.3, -1.0), (2.0, 0.5), (4.4, 3.0)] {
        compact = compact.max(compare_spectra(&model, k, eta)?);
    }
    checks.push(Check { name: "compactified spectrum", value: compact, tolerance: 1e-10 });

    let c = chern_number(&p, &cfg.chern, cfg.exec)?;
    checks.push(Check { name: "chern integrality", value: (c.chern - c.chern.round()).abs(), tolerance: 1e-2 });

    let small = ChainParams { n_cells: p.n_cells.min(2), ..p };
    let op = build_chain(&small, &[])?;
    let d = dissipation_data(&small, &[])?;
    let ly = stationary_covariance(&op, &d)?;
    let tq = build_third_quantization(&small, &[])?.stationary()?;
    let ode = ode_stationary(&op, &d)?;
    checks.push(Check {
        name: "lyapunov vs third quantization",
        value: max_abs_diff(&ly.v_matrix, &tq.v_matrix),
        tolerance: 1e-6,
    });
    checks.push(Check { name: "lyapunov vs ode", value: max_abs_diff(&ly.v_matrix, &ode.v_matrix), tolerance: 1e-6 });
    checks.push(Check { name: "lyapunov residual", value: lyapunov_residual(&op, &d, &ly.v_matrix), tolerance: 1e-9 });

    let vac = CovarianceState::vacuum(4);
    let q = quadrature_block(&vac, ModeRef::optical(0), ModeRef::mechanical(0))?;
    checks.push(Check { name: "vacuum negativity", value: log_negativity(&q)?, tolerance: 0.0 });

    let mut t = Table::new(vec!["check", "value", "tolerance", "pass"]);
    let mut failures = 0;
    for ch in &checks {
        let pass = ch.value <= ch.tolerance;
        if !pass {
            failures += 1;
        }
        t.push(vec![Cell::from(ch.name), ch.value.into(), ch.tolerance.into(), pass.into()]);
    }
    Ok(Outcome { table: t, summary: json!({ "checks": checks.len(), "failed": failures }), failures })
}
