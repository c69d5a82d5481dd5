use std::path::{Path, PathBuf};

use optolattice::gaussian::{ModeRef, SaturationOptions};
use optolattice::spectra::PhaseTolerances;
use optolattice::topology::ChernOptions;
use optolattice::{ChainParams, DisorderSpec, Exec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineScan {
    pub g_plus_min: f64,
    pub g_plus_max: f64,
    pub steps: usize,
}

impl Default for LineScan {
    fn default() -> Self {
        Self { g_plus_min: 0.0, g_plus_max: 0.4, steps: 81 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridScan {
    pub g_minus_min: f64,
    pub g_minus_max: f64,
    pub g_plus_min: f64,
    pub g_plus_max: f64,
    pub n_g_minus: usize,
    pub n_g_plus: usize,
}

impl Default for GridScan {
    fn default() -> Self {
        Self { g_minus_min: 0.1, g_minus_max: 2.0, g_plus_min: 0.0, g_plus_max: 1.2, n_g_minus: 20, n_g_plus: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeScan {
    pub t_max: f64,
    pub steps: usize,
}

impl Default for TimeScan {
    fn default() -> Self {
        Self { t_max: 200.0, steps: 41 }
    }
}

/// Everything a run needs; every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ChainParams,
    /// Added to the seed of every disorder entry.
    pub seed: u64,
    pub threads: Option<usize>,
    pub exec: Exec,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub disorder: Vec<DisorderSpec>,
    pub realizations: usize,
    pub pair: (ModeRef, ModeRef),
    pub line: LineScan,
    pub grid: GridScan,
    pub times: TimeScan,
    pub phase: PhaseTolerances,
    pub chern: ChernOptions,
    pub saturation: SaturationOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ChainParams::default(),
            seed: 0,
            threads: None,
            exec: Exec::Parallel,
            format: Format::Csv,
            out: None,
            disorder: Vec::new(),
            realizations: 1,
            pair: (ModeRef::optical(0), ModeRef::mechanical(0)),
            line: LineScan::default(),
            grid: GridScan::default(),
            times: TimeScan::default(),
            phase: PhaseTolerances::default(),
            chern: ChernOptions { keep_samples: false, ..ChernOptions::default() },
            saturation: SaturationOptions::default(),
        }
    }
}

/// Values given on the command line; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub g_plus: Option<f64>,
    pub g_minus: Option<f64>,
    pub j_hop: Option<f64>,
    pub gamma: Option<f64>,
    pub n_cells: Option<usize>,
    pub n_m: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub sequential: bool,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        let p = &mut self.params;
        if let Some(v) = o.g_plus {
            p.g_plus = v;
        }
        if let Some(v) = o.g_minus {
            p.g_minus = v;
        }
        if let Some(v) = o.j_hop {
            p.j_hop = v;
        }
        if let Some(v) = o.gamma {
            p.gamma = v;
        }
        if let Some(v) = o.n_cells {
            p.n_cells = v;
        }
        if let Some(v) = o.n_m {
            p.n_m = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
        if let Some(v) = o.format {
            self.format = v;
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if o.sequential {
            self.exec = Exec::Sequential;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        for d in &self.disorder {
            d.validate()?;
        }
        let positive = |name: &str, n: usize| {
            if n == 0 {
                Err(CliError::Config(format!("`{name}` must be at least 1")))
            } else {
                Ok(())
            }
        };
        positive("line.steps", self.line.steps)?;
        positive("grid.n_g_minus", self.grid.n_g_minus)?;
        positive("grid.n_g_plus", self.grid.n_g_plus)?;
        positive("times.steps", self.times.steps)?;
        positive("realizations", self.realizations)?;
        if self.threads == Some(0) {
            return Err(CliError::Config("`threads` must be at least 1".into()));
        }
        for (name, v) in [
            ("line.g_plus_min", self.line.g_plus_min),
            ("line.g_plus_max", self.line.g_plus_max),
            ("grid.g_minus_min", self.grid.g_minus_min),
            ("grid.g_minus_max", self.grid.g_minus_max),
            ("grid.g_plus_min", self.grid.g_plus_min),
            ("grid.g_plus_max", self.grid.g_plus_max),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CliError::Config(format!("`{name}` must be finite and >= 0, got {v}")));
            }
        }
        if !self.times.t_max.is_finite() || self.times.t_max < 0.0 {
            return Err(CliError::Config(format!("`times.t_max` must be finite and >= 0, got {}", self.times.t_max)));
        }
        Ok(())
    }

    /// Disorder specs for realization `r`, seeds offset by the master seed.
    pub fn disorder_for(&self, r: usize) -> Vec<DisorderSpec> {
        self.disorder
            .iter()
            .map(|d| DisorderSpec { seed: d.seed.wrapping_add(self.seed).wrapping_add(r as u64), ..*d })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"params": {"g_plus": 0.1, "bogus": 1}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"colour": "red"}"#).is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"params": {"g_plus": 0.1}, "line": {"steps": 3}}"#).unwrap();
        assert_eq!(c.params.g_plus, 0.1);
        assert_eq!(c.params.g_minus, 1.0);
        assert_eq!(c.line.steps, 3);
        assert_eq!(c.line.g_plus_max, 0.4);
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::default();
        c.apply(&Overrides { g_plus: Some(0.3), n_cells: Some(4), seed: Some(9), ..Default::default() });
        assert_eq!((c.params.g_plus, c.params.n_cells, c.seed), (0.3, 4, 9));
    }

    #[test]
    fn disorder_seeds_shift_with_master_seed() {
        let c: RunConfig =
            serde_json::from_str(r#"{"seed": 10, "disorder": [{"kind": "hopping_j", "amplitude": 0.1, "seed": 2}]}"#)
                .unwrap();
        assert_eq!(c.disorder_for(0)[0].seed, 12);
        assert_eq!(c.disorder_for(3)[0].seed, 15);
    }
}
