//! Run configuration: defaults, config-file loading and flag overlay.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use polyfolio::market::CsvFormat;
use polyfolio::score::IntegralMethod;
use polyfolio::strategy::{BehavioralFunction, BehavioralShape, DEFAULT_RATIO};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMode {
    /// Spectral clustering on pairwise earth mover's distances.
    Emd,
    /// k-medoids on corner-mass ratios.
    Features,
}

/// Everything that determines the outputs of a run. Saved next to the
/// outputs; re-running with the saved file reproduces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,

    /// Price or return panel CSV.
    pub input: Option<PathBuf>,
    pub format: CsvFormat,
    /// Market JSON with `sigma`, `mu` and evaluation `returns`.
    pub market: Option<PathBuf>,
    /// JSON object mapping labels to portfolio weights.
    pub portfolios: Option<PathBuf>,
    /// Mixture JSON written by `strategies`.
    pub mixture: Option<PathBuf>,
    /// Weight region JSON `{"a": [[..]], "b": [..]}`; the simplex when absent.
    pub region: Option<PathBuf>,

    pub window: usize,
    pub m: usize,
    pub band: f64,
    pub warning_days: usize,
    pub crisis_days: usize,
    pub samples: usize,
    pub snapshots: Vec<NaiveDate>,

    pub k: usize,
    pub cluster_mode: ClusterMode,
    /// Days between clustered windows.
    pub stride: usize,
    /// Grid the copulas are coarsened to before transport distances.
    pub emd_grid: usize,
    pub corner: f64,

    pub m1: usize,
    pub m2: usize,
    /// L1 budget of the portfolio domain; long-only simplex when absent.
    pub gamma: Option<f64>,
    pub anchors: Vec<Vec<f64>>,
    /// Last day of the estimation window when building from a panel.
    pub estimation_end: Option<NaiveDate>,
    pub estimation_days: usize,
    pub evaluation_days: usize,
    pub risk: BehavioralFunction,
    pub dispersion: BehavioralFunction,
    pub temperatures: usize,

    pub eps: f64,
    pub integral: IntegralMethod,
    pub direct_samples: usize,
    pub draws: usize,
    pub copula_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: 0,
            input: None,
            format: CsvFormat::Prices,
            market: None,
            portfolios: None,
            mixture: None,
            region: None,
            window: 60,
            m: 100,
            band: 0.1,
            warning_days: 60,
            crisis_days: 100,
            samples: 500_000,
            snapshots: Vec::new(),
            k: 6,
            cluster_mode: ClusterMode::Emd,
            stride: 5,
            emd_grid: 10,
            corner: 0.2,
            m1: 3,
            m2: 4,
            gamma: None,
            anchors: Vec::new(),
            estimation_end: None,
            estimation_days: 100,
            evaluation_days: 10,
            risk: BehavioralFunction::constant(),
            dispersion: BehavioralFunction::constant(),
            temperatures: 4,
            eps: 0.05,
            integral: IntegralMethod::Telescoping,
            direct_samples: 4_000,
            draws: 10_000,
            copula_samples: 100_000,
        }
    }
}

impl RunConfig {
    /// Defaults, overridden by a config file when given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
            }
        }
    }

    /// SHA-256 of the canonical JSON encoding, in hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Named behavioral profiles accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RiskProfile {
    Constant,
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DispersionProfile {
    Constant,
    /// Favors concentrated strategies (large α).
    Concentrated,
    Medium,
    /// Favors dispersed strategies (small α).
    Dispersed,
}

/// Behavioral function of a named profile; `x0` and `ratio` keep the
/// defaults of the shape when absent.
pub fn profile_function(rising: bool, falling: bool, medium: bool, x0: Option<f64>, ratio: Option<f64>) -> BehavioralFunction {
    let x0 = x0.unwrap_or(0.5);
    let shape = if rising {
        BehavioralShape::SigmoidRising { x0 }
    } else if falling {
        BehavioralShape::SigmoidFalling { x0 }
    } else if medium {
        BehavioralShape::BumpMedium { x0 }
    } else {
        return BehavioralFunction::constant();
    };
    BehavioralFunction { shape, ratio: ratio.unwrap_or(DEFAULT_RATIO) }
}

pub fn risk_function(p: RiskProfile, x0: Option<f64>, ratio: Option<f64>) -> BehavioralFunction {
    profile_function(p == RiskProfile::High, p == RiskProfile::Low, p == RiskProfile::Medium, x0, ratio)
}

pub fn dispersion_function(p: DispersionProfile, x0: Option<f64>, ratio: Option<f64>) -> BehavioralFunction {
    profile_function(
        p == DispersionProfile::Concentrated,
        p == DispersionProfile::Dispersed,
        p == DispersionProfile::Medium,
        x0,
        ratio,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_hash_is_stable() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"m": 20, "risk": {"shape": {"kind": "sigmoid_falling", "x0": 0.3}, "ratio": 5.0}}"#).unwrap();
        assert_eq!(c.m, 20);
        assert_eq!(c.window, 60);
        assert_eq!(c.risk, BehavioralFunction { shape: BehavioralShape::SigmoidFalling { x0: 0.3 }, ratio: 5.0 });
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn profiles_map_to_shapes() {
        assert_eq!(risk_function(RiskProfile::Low, None, None), BehavioralFunction::falling(0.5));
        assert_eq!(risk_function(RiskProfile::Constant, Some(0.2), None), BehavioralFunction::constant());
        assert_eq!(dispersion_function(DispersionProfile::Concentrated, Some(0.7), Some(4.0)).ratio, 4.0);
    }
}
