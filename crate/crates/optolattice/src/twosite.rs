//! Two-site reduction of a chain end: one blue-driven site coupled through the
//! mechanical hop `J` to one red-driven site.
//!
//! The dynamical matrix is written in the basis `(a₁, b₁†, a₂†, b₂†)`:
//!
//! ```text
//! ⎡ −iκ/2    G₊      0      0   ⎤
//! ⎢  −G₊   −iγ/2     0      J   ⎥
//! ⎢   0      0    −iκ/2   −G₋   ⎥
//! ⎣   0      J     −G₋   −iγ/2  ⎦
//! ```
//!
//! which is the creation-half restriction of the chain operator for sites 1
//! and 2 (pairing on site 1, beam splitter on site 2, hop between the
//! mechanical modes). Its eigenvalues are the poles of the two-site response.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::ChainParams;
use crate::linalg::{c, eigvals, zeros};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSiteParams {
    pub g_plus: f64,
    pub g_minus: f64,
    pub j_hop: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl From<&ChainParams> for TwoSiteParams {
    fn from(p: &ChainParams) -> Self {
        Self { g_plus: p.g_plus, g_minus: p.g_minus, j_hop: p.j_hop, kappa: p.kappa, gamma: p.gamma }
    }
}

impl TwoSiteParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g_plus", self.g_plus), ("g_minus", self.g_minus), ("j_hop", self.j_hop)] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("kappa", self.kappa), ("gamma", self.gamma)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The four complex energies sorted by descending imaginary part.
pub fn twosite_poles(p: &TwoSiteParams) -> Result<[C64; 4]> {
    p.validate()?;
    let mut m = zeros(4, 4);
    let (k2, g2) = (-p.kappa / 2.0, -p.gamma / 2.0);
    m[(0, 0)] = c(0.0, k2);
    m[(1, 1)] = c(0.0, g2);
    m[(2, 2)] = c(0.0, k2);
    m[(3, 3)] = c(0.0, g2);
    m[(0, 1)] = c(p.g_plus, 0.0);
    m[(1, 0)] = c(-p.g_plus, 0.0);
    m[(1, 3)] = c(p.j_hop, 0.0);
    m[(3, 1)] = c(p.j_hop, 0.0);
    m[(2, 3)] = c(-p.g_minus, 0.0);
    m[(3, 2)] = c(-p.g_minus, 0.0);
    let mut ev = eigvals(&m)?;
    ev.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
    Ok([ev[0], ev[1], ev[2], ev[3]])
}

/// Largest imaginary part among the poles.
pub fn max_im(p: &TwoSiteParams) -> Result<f64> {
    Ok(twosite_poles(p)?[0].im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptote {
    pub value: f64,
    /// Set when `J ≥ G₋`, where the expansion in `J/G₋` is meaningless.
    pub out_of_regime: bool,
}

/// `−γ/2 − (κ−γ)(J²/G₋²)(1 − J²/G₋²)`, the small-`G₊` expansion.
pub fn asymptote_small_gplus(p: &TwoSiteParams) -> Asymptote {
    let x = if p.g_minus > 0.0 { (p.j_hop / p.g_minus).powi(2) } else { f64::INFINITY };
    let value = if p.j_hop == 0.0 { -p.gamma / 2.0 } else { -p.gamma / 2.0 - (p.kappa - p.gamma) * x * (1.0 - x) };
    Asymptote { value, out_of_regime: p.j_hop >= p.g_minus }
}

/// `−(κ+γ)/2 + sqrt((κ−γ)²/4 + 4G₊²)`, the large-`G₊` limit.
pub fn asymptote_large_gplus(p: &TwoSiteParams) -> f64 {
    -(p.kappa + p.gamma) / 2.0 + ((p.kappa - p.gamma).powi(2) / 4.0 + 4.0 * p.g_plus * p.g_plus).sqrt()
}

/// Closed cubic-root form of the small-`G₊` pole, first order in γ.
pub fn cubic_small_gplus(p: &TwoSiteParams) -> f64 {
    let (k, g, gm2, j2) = (p.kappa, p.gamma, p.g_minus * p.g_minus, p.j_hop * p.j_hop);
    let u = k * k - 18.0 * gm2 + 36.0 * j2;
    let w = k * k - 12.0 * gm2 - 12.0 * j2;
    let disc = C64::new(k * k * u * u - w * w * w, 0.0).sqrt();
    let delta = c(k * u, 0.0) + disc - c(3.0 * (k * k - 6.0 * gm2 + 12.0 * j2) * g, 0.0);
    let root = delta.cbrt();
    let val = -(root + k + 2.0 * g) / 6.0 + (12.0 * (gm2 + j2) - (k - g).powi(2)) / (6.0 * root);
    val.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ref_params(g_plus: f64) -> TwoSiteParams {
        TwoSiteParams { g_plus, g_minus: 1.0, j_hop: 0.5, kappa: 1.0, gamma: 1e-4 }
    }

    #[test]
    fn decoupled_blue_site() {
        let p = TwoSiteParams { g_plus: 0.0, j_hop: 0.0, ..ref_params(0.0) };
        let poles = twosite_poles(&p).unwrap();
        let mut ims: Vec<f64> = poles.iter().map(|z| z.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[3] + 5e-5).abs() < 1e-12);
        assert!(poles.iter().any(|z| (z.im + 0.5).abs() < 1e-12 && z.re.abs() < 1e-12));
        let red: Vec<&C64> = poles.iter().filter(|z| z.re.abs() > 1e-6).collect();
        assert_eq!(red.len(), 2);
        assert!((red[0].re + red[1].re).abs() < 1e-12);
    }

    #[test]
    fn asymptote_values() {
        let small = asymptote_small_gplus(&ref_params(1e-4));
        assert!((small.value + 0.18753125).abs() < 1e-12);
        assert!(!small.out_of_regime);
        assert!((asymptote_large_gplus(&ref_params(1.0)) - 1.561_490_686_598_254).abs() < 1e-12);
        let p0 = TwoSiteParams { j_hop: 0.0, ..ref_params(0.0) };
        assert_eq!(asymptote_small_gplus(&p0).value, -5e-5);
        let at_zero = asymptote_large_gplus(&ref_params(0.0));
        assert!((at_zero + 1e-4).abs() < 1e-15);
    }

    #[test]
    fn large_gplus_linear_growth() {
        for g in [5.0, 10.0, 50.0] {
            let p = ref_params(g);
            let lin = 2.0 * g - (p.kappa + p.gamma) / 2.0;
            assert!((asymptote_large_gplus(&p) - lin).abs() / lin < 1e-2);
        }
    }

    #[test]
    fn cubic_form_matches_exact_pole() {
        for j in [0.3, 0.5] {
            let p = TwoSiteParams { g_plus: 0.0, gamma: 1e-7, j_hop: j, ..ref_params(0.0) };
            let exact = max_im(&p).unwrap();
            assert!((cubic_small_gplus(&p) - exact).abs() < 1e-5, "j={j}");
        }
    }

    #[test]
    fn out_of_regime_flag() {
        let p = TwoSiteParams { j_hop: 1.5, ..ref_params(0.0) };
        assert!(asymptote_small_gplus(&p).out_of_regime);
    }

    #[test]
    fn zero_crossing_between_02_and_03() {
        let lo = max_im(&ref_params(0.2)).unwrap();
        let hi = max_im(&ref_params(0.3)).unwrap();
        assert!(lo < 0.0 && hi > 0.0);
    }

    proptest! {
        #[test]
        fn poles_sorted_and_trace_preserved(gp in 0.0f64..2.0, gm in 0.0f64..2.0, j in 0.0f64..1.0) {
            let p = TwoSiteParams { g_plus: gp, g_minus: gm, j_hop: j, kappa: 1.0, gamma: 1e-4 };
            let poles = twosite_poles(&p).unwrap();
            prop_assert!(poles.windows(2).all(|w| w[0].im >= w[1].im));
            let tr: C64 = poles.iter().sum();
            prop_assert!((tr - C64::new(0.0, -(p.kappa + p.gamma))).norm() < 1e-10);
        }
    }
}
