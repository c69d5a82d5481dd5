//! Eigenspectra of the chain, end/bulk labelling, stability phases and sweeps.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{build_bloch, build_chain, Boundary, ChainParams, DisorderSpec, NHOperator};
use crate::linalg::{cluster, column, eig, eigvals, orthonormalize};
use crate::par::Exec;
use crate::twosite::{self, TwoSiteParams};

/// Eigenvalues closer than this share a localization value.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeKind {
    End,
    Bulk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    pub localization: Vec<f64>,
    pub labels: Vec<ModeKind>,
    /// Largest imaginary part among end-labelled eigenvalues.
    pub im_e_end: Option<f64>,
    pub im_e_bulk_max: f64,
    pub im_e_bulk_min: f64,
}

impl SpectrumReport {
    pub fn end_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == ModeKind::End).collect()
    }

    pub fn bulk_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == ModeKind::Bulk).collect()
    }

    /// The `count` end-labelled eigenvalues with the largest localization.
    pub fn most_localized_ends(&self, count: usize) -> Vec<usize> {
        let mut idx = self.end_indices();
        idx.sort_by(|&a, &b| self.localization[b].total_cmp(&self.localization[a]).then(a.cmp(&b)));
        idx.truncate(count);
        idx
    }

    pub fn max_im(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.im).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Indices of basis entries living on the first or last unit cell.
fn terminal_rows(op: &NHOperator) -> Vec<usize> {
    let last = op.n_cells.saturating_sub(1);
    op.basis
        .iter()
        .enumerate()
        .filter(|(_, lab)| {
            let cell = lab.site / 4;
            cell == 0 || cell == last
        })
        .map(|(i, _)| i)
        .collect()
}

pub fn eigenspectrum(op: &NHOperator) -> Result<SpectrumReport> {
    let e = eig(&op.matrix)?;
    let n = e.values.len();
    let rows = terminal_rows(op);
    let mut localization = vec![0.0; n];
    for group in cluster(&e.values, DEGENERACY_TOL) {
        let cols: Vec<Vec<C64>> = group.iter().map(|&j| column(&e.vectors, j)).collect();
        let q = orthonormalize(&cols, 1e-8);
        let weight = if q.is_empty() {
            0.0
        } else {
            q.iter().map(|v| rows.iter().map(|&r| v[r].norm_sqr()).sum::<f64>()).sum::<f64>() / q.len() as f64
        };
        for &j in &group {
            localization[j] = weight.clamp(0.0, 1.0);
        }
    }
    let labels: Vec<ModeKind> = localization
        .iter()
        .map(|&w| {
            if op.boundary == Boundary::OBC && w > 0.5 {
                ModeKind::End
            } else {
                ModeKind::Bulk
            }
        })
        .collect();
    let mut im_e_end: Option<f64> = None;
    let mut bulk_max = f64::NEG_INFINITY;
    let mut bulk_min = f64::INFINITY;
    for (ev, lab) in e.values.iter().zip(&labels) {
        match lab {
            ModeKind::End => im_e_end = Some(im_e_end.map_or(ev.im, |m| m.max(ev.im))),
            ModeKind::Bulk => {
                bulk_max = bulk_max.max(ev.im);
                bulk_min = bulk_min.min(ev.im);
            }
        }
    }
    Ok(SpectrumReport {
        eigenvalues: e.values,
        localization,
        labels,
        im_e_end,
        im_e_bulk_max: bulk_max,
        im_e_bulk_min: bulk_min,
    })
}

/// Convenience: builds the chain and returns its spectrum.
pub fn chain_spectrum(params: &ChainParams, disorder: &[DisorderSpec]) -> Result<SpectrumReport> {
    eigenspectrum(&build_chain(params, disorder)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseLabel {
    pub region: Region,
    pub stable_end: bool,
    pub stable_bulk: bool,
}

impl PhaseLabel {
    pub fn of(region: Region) -> Self {
        let (stable_end, stable_bulk) = match region {
            Region::A | Region::B => (true, true),
            Region::C => (false, true),
            Region::D | Region::E => (false, false),
        };
        Self { region, stable_end, stable_bulk }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhaseVerdict {
    Region(PhaseLabel),
    /// The deciding quantity lies within tolerance of a phase boundary.
    Boundary { lower: Region, upper: Region, margin: f64 },
}

impl PhaseVerdict {
    pub fn region(&self) -> Option<Region> {
        match self {
            PhaseVerdict::Region(l) => Some(l.region),
            PhaseVerdict::Boundary { .. } => None,
        }
    }
}

impl fmt::Display for PhaseVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseVerdict::Region(l) => write!(f, "{}", l.region),
            PhaseVerdict::Boundary { lower, upper, .. } => write!(f, "{lower}|{upper}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseTolerances {
    /// Minimum `|Im E|` of the bulk continuum separating D from E.
    pub delta_gap: f64,
    /// Distance to a decision threshold reported as a boundary.
    pub boundary: f64,
    /// Momentum samples used for the bulk continuum.
    pub k_points: usize,
}

impl Default for PhaseTolerances {
    fn default() -> Self {
        Self { delta_gap: 1e-3, boundary: 1e-7, k_points: 512 }
    }
}

/// Smallest `|Im E|` over the Bloch bands sampled on a uniform k grid.
pub fn bulk_min_abs_im(params: &ChainParams, k_points: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for i in 0..k_points.max(1) {
        let k = std::f64::consts::TAU * i as f64 / k_points.max(1) as f64;
        for e in eigvals(&build_bloch(params, k, &[])?.matrix)? {
            best = best.min(e.im.abs());
        }
    }
    Ok(best)
}

pub fn classify_phase(params: &ChainParams, tol: &PhaseTolerances) -> Result<PhaseVerdict> {
    let obc = ChainParams { boundary: Boundary::OBC, ..*params };
    let rep = chain_spectrum(&obc, &[])?;
    let bulk = rep.im_e_bulk_max;
    let boundary = |lower, upper, margin: f64| Ok(PhaseVerdict::Boundary { lower, upper, margin: margin.abs() });
    if bulk.abs() < tol.boundary {
        return boundary(Region::C, Region::D, bulk);
    }
    if bulk < 0.0 {
        let Some(end) = rep.im_e_end else {
            return Ok(PhaseVerdict::Region(PhaseLabel::of(Region::A)));
        };
        if end.abs() < tol.boundary {
            return boundary(Region::B, Region::C, end);
        }
        if end > 0.0 {
            return Ok(PhaseVerdict::Region(PhaseLabel::of(Region::C)));
        }
        if (end - bulk).abs() < tol.boundary {
            return boundary(Region::A, Region::B, end - bulk);
        }
        let region = if end <= bulk { Region::A } else { Region::B };
        return Ok(PhaseVerdict::Region(PhaseLabel::of(region)));
    }
    let gap = bulk_min_abs_im(params, tol.k_points)?;
    if (gap - tol.delta_gap).abs() < tol.boundary {
        return boundary(Region::D, Region::E, gap - tol.delta_gap);
    }
    let region = if gap < tol.delta_gap { Region::D } else { Region::E };
    Ok(PhaseVerdict::Region(PhaseLabel::of(region)))
}

/// `n` evenly spaced points from `a` to `b` inclusive (`[a]` when `n == 1`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineRow {
    pub g_plus: f64,
    pub im_e_end: f64,
    pub im_e_bulk_max: f64,
    pub im_e_twosite: f64,
}

/// Imaginary-part line scan in `G₊` with the two-site overlay column.
/// `im_e_end` is NaN where no end state is identified.
pub fn sweep_line(
    base: &ChainParams,
    g_plus_range: (f64, f64),
    steps: usize,
    exec: Exec,
) -> Result<Vec<LineRow>> {
    base.validate()?;
    let grid = linspace(g_plus_range.0, g_plus_range.1, steps);
    exec.map(grid, |g| {
        let p = ChainParams { g_plus: g, boundary: Boundary::OBC, ..*base };
        let rep = chain_spectrum(&p, &[])?;
        Ok(LineRow {
            g_plus: g,
            im_e_end: rep.im_e_end.unwrap_or(f64::NAN),
            im_e_bulk_max: rep.im_e_bulk_max,
            im_e_twosite: twosite::max_im(&TwoSiteParams::from(&p))?,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub g_minus: f64,
    pub g_plus: f64,
    pub verdict: PhaseVerdict,
}

/// Phase labels on a rectangular grid, rows ordered by `G₋` then `G₊`.
pub fn phase_diagram(
    base: &ChainParams,
    g_minus_range: (f64, f64),
    g_plus_range: (f64, f64),
    grid: (usize, usize),
    tol: &PhaseTolerances,
    exec: Exec,
) -> Result<Vec<PhaseCell>> {
    base.validate()?;
    let gm = linspace(g_minus_range.0, g_minus_range.1, grid.0);
    let gp = linspace(g_plus_range.0, g_plus_range.1, grid.1);
    let points: Vec<(f64, f64)> = gm.iter().flat_map(|&m| gp.iter().map(move |&p| (m, p))).collect();
    exec.map(points, |(m, p)| {
        let params = ChainParams { g_minus: m, g_plus: p, ..*base };
        Ok(PhaseCell { g_minus: m, g_plus: p, verdict: classify_phase(&params, tol)? })
    })
    .into_iter()
    .collect()
}

/// True when the labels visit `A, B, C, D, E` in this order (boundaries skipped).
pub fn is_ordered_sequence(verdicts: &[PhaseVerdict]) -> bool {
    let regions: Vec<Region> = verdicts.iter().filter_map(|v| v.region()).collect();
    let monotone = regions.windows(2).all(|w| w[0] <= w[1]);
    let all = [Region::A, Region::B, Region::C, Region::D, Region::E].iter().all(|r| regions.contains(r));
    monotone && all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DisorderKind;

    fn reference_chain() -> ChainParams {
        ChainParams::default()
    }

    #[test]
    fn trivial_chain_is_all_bulk() {
        let p = ChainParams { g_plus: 0.0, g_minus: 0.0, j_hop: 0.0, ..reference_chain() };
        let rep = chain_spectrum(&p, &[]).unwrap();
        assert!(rep.labels.iter().all(|&l| l == ModeKind::Bulk));
        let n_opt = rep.eigenvalues.iter().filter(|e| (e.im + 0.5).abs() < 1e-14).count();
        let n_mech = rep.eigenvalues.iter().filter(|e| (e.im + 5e-5).abs() < 1e-14).count();
        assert_eq!((n_opt, n_mech), (80, 80));
    }

    #[test]
    fn reference_chain_has_eight_end_states() {
        let rep = chain_spectrum(&reference_chain(), &[]).unwrap();
        let ends = rep.end_indices();
        assert_eq!(ends.len(), 8);
        assert!(ends.iter().all(|&i| rep.eigenvalues[i].re.abs() < 1e-8));
        let e = rep.im_e_end.unwrap();
        assert!((2e-4..8e-4).contains(&e.abs()), "Im E_e = {e}");
        assert!(rep.end_indices().iter().all(|&i| rep.eigenvalues[i].im <= e));
    }

    #[test]
    fn end_count_stable_in_size() {
        for n in [7, 8, 12, 16] {
            let rep = chain_spectrum(&reference_chain().with_cells(n), &[]).unwrap();
            let zero_re = rep.end_indices().iter().filter(|&&i| rep.eigenvalues[i].re.abs() < 1e-8).count();
            assert_eq!(zero_re, 8, "N={n}");
        }
    }

    #[test]
    fn short_chains_split_exponentially() {
        let split = |n: usize| {
            let rep = chain_spectrum(&reference_chain().with_cells(n), &[]).unwrap();
            rep.most_localized_ends(8).iter().map(|&i| rep.eigenvalues[i].re.abs()).fold(0.0, f64::max)
        };
        let (s4, s5, s6) = (split(4), split(5), split(6));
        assert!(s4 < 1e-5 && s5 < s4 / 5.0 && s6 < s5 / 5.0, "{s4} {s5} {s6}");
    }

    #[test]
    fn end_energy_is_size_independent() {
        let a = chain_spectrum(&reference_chain().with_cells(8), &[]).unwrap().im_e_end.unwrap();
        let b = chain_spectrum(&reference_chain().with_cells(16), &[]).unwrap().im_e_end.unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn periodic_chain_has_no_end_labels() {
        let rep = chain_spectrum(&reference_chain().with_boundary(Boundary::PBC), &[]).unwrap();
        assert!(rep.end_indices().is_empty());
        assert!(rep.im_e_end.is_none());
    }

    #[test]
    fn classification_examples() {
        let tol = PhaseTolerances::default();
        let region = |g: f64| classify_phase(&reference_chain().with_g_plus(g), &tol).unwrap().region();
        assert_eq!(region(0.05), Some(Region::A));
        assert_eq!(region(0.242), Some(Region::B));
        assert_eq!(region(0.26), Some(Region::C));
        assert_eq!(region(0.35), Some(Region::D));
        assert_eq!(region(1.0), Some(Region::E));
    }

    #[test]
    fn huge_boundary_tolerance_yields_boundary() {
        let tol = PhaseTolerances { boundary: 1.0, ..Default::default() };
        let v = classify_phase(&reference_chain(), &tol).unwrap();
        assert!(matches!(v, PhaseVerdict::Boundary { .. }));
        assert!(v.to_string().contains('|'));
    }

    #[test]
    fn no_drive_row_is_stable() {
        let cells = phase_diagram(
            &reference_chain(),
            (0.2, 1.5),
            (0.0, 0.0),
            (4, 1),
            &PhaseTolerances::default(),
            Exec::Sequential,
        )
        .unwrap();
        for c in cells {
            let r = c.verdict.region().unwrap();
            assert!(matches!(r, Region::A | Region::B), "{c:?}");
        }
    }

    #[test]
    fn one_by_one_grid_equals_classification() {
        let tol = PhaseTolerances::default();
        let cells = phase_diagram(&reference_chain(), (1.0, 1.0), (0.26, 0.26), (1, 1), &tol, Exec::Parallel).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].verdict, classify_phase(&reference_chain().with_g_plus(0.26), &tol).unwrap());
    }

    #[test]
    fn line_sweep_brackets_instability() {
        let rows = sweep_line(&reference_chain(), (0.242, 0.26), 2, Exec::Sequential).unwrap();
        assert!(rows[0].im_e_end < 0.0 && rows[1].im_e_end > 0.0);
        let single = sweep_line(&reference_chain(), (0.242, 0.3), 1, Exec::Sequential).unwrap();
        assert_eq!(single.len(), 1);
        let rep = chain_spectrum(&reference_chain(), &[]).unwrap();
        assert_eq!(single[0].im_e_end, rep.im_e_end.unwrap());
        assert_eq!(single[0].im_e_bulk_max, rep.im_e_bulk_max);
    }

    #[test]
    fn line_sweep_small_gplus_near_twosite_value() {
        let rows = sweep_line(&reference_chain(), (0.0, 0.0), 1, Exec::Sequential).unwrap();
        let ts = rows[0].im_e_twosite;
        assert!((rows[0].im_e_end - ts).abs() < 0.05, "{rows:?}");
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = sweep_line(&reference_chain(), (0.0, 0.4), 9, Exec::Parallel).unwrap();
        let b = sweep_line(&reference_chain(), (0.0, 0.4), 9, Exec::Sequential).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.g_plus.to_bits(), y.g_plus.to_bits());
            assert_eq!(x.im_e_end.to_bits(), y.im_e_end.to_bits());
        }
    }

    #[test]
    fn frequency_disorder_breaks_zero_real_part() {
        let d = DisorderSpec::new(DisorderKind::MechFrequency, 0.01, 3);
        let rep = chain_spectrum(&reference_chain(), &[d]).unwrap();
        let ends = rep.most_localized_ends(8);
        assert_eq!(ends.len(), 8);
        assert!(ends.iter().any(|&i| rep.eigenvalues[i].re.abs() > 1e-8));
    }

    #[test]
    fn sequence_detector() {
        let mk = |r| PhaseVerdict::Region(PhaseLabel::of(r));
        let good = [Region::A, Region::A, Region::B, Region::C, Region::D, Region::E].map(mk);
        assert!(is_ordered_sequence(&good));
        let bad = [Region::A, Region::B, Region::C, Region::B, Region::D, Region::E].map(mk);
        assert!(!is_ordered_sequence(&bad));
        assert!(!is_ordered_sequence(&[mk(Region::A), mk(Region::E)]));
    }
}
