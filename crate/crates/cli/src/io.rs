//! Input files and the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, Axis};
use polyfolio::domain::PortfolioDomain;
use polyfolio::market::{ingest_csv, shrinkage_covariance_of, ReturnsPanel};
use polyfolio::strategy::WeightRegion;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// Market inputs of the strategy and score commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Market {
    pub symbols: Vec<String>,
    pub sigma: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// Evaluation returns `R` the scores are computed against.
    pub returns: Vec<f64>,
    /// Daily returns of the evaluation window, one row per day.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Vec<Vec<f64>>>,
}

/// Validated market arrays.
pub struct MarketData {
    pub symbols: Vec<String>,
    pub sigma: Array2<f64>,
    pub mu: Array1<f64>,
    pub r: Array1<f64>,
    pub evaluation: Option<Array2<f64>>,
}

fn matrix(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Array2<f64>, CliError> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::input(format!("{what}: every row needs {cols} entries")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(CliError::input(format!("{what}: non-finite entry")));
    }
    Ok(Array2::from_shape_vec((rows.len(), cols), flat).expect("shape checked"))
}

impl Market {
    pub fn validate(self) -> Result<MarketData, CliError> {
        let n = self.symbols.len();
        if n < 2 {
            return Err(CliError::input("market needs at least two symbols"));
        }
        if self.sigma.len() != n || self.mu.len() != n || self.returns.len() != n {
            return Err(CliError::input(format!("market arrays must all have {n} entries")));
        }
        let sigma = matrix(&self.sigma, n, "sigma")?;
        if (0..n).any(|i| (0..i).any(|j| (sigma[[i, j]] - sigma[[j, i]]).abs() > 1e-12 * (1.0 + sigma[[i, j]].abs()))) {
            return Err(CliError::input("sigma is not symmetric"));
        }
        if self.mu.iter().chain(&self.returns).any(|v| !v.is_finite()) {
            return Err(CliError::input("mu and returns must be finite"));
        }
        let evaluation = self.evaluation.as_deref().map(|rows| matrix(rows, n, "evaluation")).transpose()?;
        Ok(MarketData { symbols: self.symbols, sigma, mu: Array1::from(self.mu), r: Array1::from(self.returns), evaluation })
    }
}

pub fn load_panel(cfg: &RunConfig) -> Result<ReturnsPanel<f64>, CliError> {
    let path = cfg.input.as_deref().ok_or_else(|| CliError::input("--input is required"))?;
    Ok(ingest_csv(path, cfg.format)?)
}

/// Market from `--market`, or estimated from a panel window: shrinkage
/// covariance and mean of the `estimation_days` returns ending at
/// `estimation_end`, evaluated on the mean of the following
/// `evaluation_days` returns.
pub fn load_market(cfg: &RunConfig) -> Result<MarketData, CliError> {
    if let Some(p) = &cfg.market {
        let text = read(p)?;
        let m: Market = serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        return m.validate();
    }
    let panel = load_panel(cfg)?;
    let (k, e) = (cfg.estimation_days, cfg.evaluation_days);
    if k < 2 || e == 0 {
        return Err(CliError::input("need at least 2 estimation days and 1 evaluation day"));
    }
    let end = match cfg.estimation_end {
        Some(d) => panel.index_of(d).ok_or_else(|| CliError::input(format!("estimation end {d} is not a panel date")))?,
        None => k - 1,
    };
    if end + 1 < k || end + e >= panel.len() {
        return Err(CliError::input(format!(
            "panel of {} days cannot hold {k} estimation and {e} evaluation days ending at row {end}",
            panel.len()
        )));
    }
    let block = panel.returns().slice(s![end + 1 - k..=end, ..]);
    let cov = shrinkage_covariance_of(block, panel.symbols())?;
    let eval = panel.returns().slice(s![end + 1..=end + e, ..]).to_owned();
    Ok(MarketData {
        symbols: panel.symbols().to_vec(),
        sigma: cov.sigma,
        mu: block.mean_axis(Axis(0)).expect("nonempty window"),
        r: eval.mean_axis(Axis(0)).expect("nonempty window"),
        evaluation: Some(eval),
    })
}

/// Labelled portfolios, each feasible on `domain` and summing to one.
pub fn load_portfolios(cfg: &RunConfig, domain: &PortfolioDomain<f64>) -> Result<Vec<(String, Array1<f64>)>, CliError> {
    let p = cfg.portfolios.as_deref().ok_or_else(|| CliError::input("--portfolios is required"))?;
    let text = read(p)?;
    let map: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
    if map.is_empty() {
        return Err(CliError::input("no portfolios given"));
    }
    let n = domain.n_assets();
    map.into_iter()
        .map(|(label, v)| {
            let w: Vec<f64> = serde_json::from_value(v).map_err(|e| CliError::input(format!("portfolio {label}: {e}")))?;
            if w.len() != n {
                return Err(CliError::input(format!("portfolio {label} has {} weights, expected {n}", w.len())));
            }
            let x = Array1::from(w);
            let total = x.sum();
            if !((total - 1.0).abs() <= 1e-6) {
                return Err(CliError::input(format!("portfolio {label} sums to {total}, not 1")));
            }
            if !domain.contains_portfolio(x.view(), 1e-9) {
                return Err(CliError::input(format!("portfolio {label} lies outside the portfolio domain")));
            }
            Ok((label, x))
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// Weight region from `--region`, or the simplex of dimension `m`.
pub fn load_region(cfg: &RunConfig, m: usize) -> Result<WeightRegion<f64>, CliError> {
    let Some(p) = &cfg.region else {
        return Ok(WeightRegion::simplex(m)?);
    };
    let text = read(p)?;
    let f: RegionFile = serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
    let a = matrix(&f.a, m, "region a")?;
    if f.b.len() != a.nrows() {
        return Err(CliError::input("region b must have one entry per row of a"));
    }
    Ok(WeightRegion::new(a, Array1::from(f.b))?)
}

fn read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
}

/// The output directory of one run; every file records the config hash.
pub struct Outputs {
    pub dir: PathBuf,
    pub hash: String,
}

impl Outputs {
    pub fn new(dir: PathBuf, hash: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, hash })
    }

    /// Text of the leading comment line.
    pub fn comment(&self) -> String {
        format!("polyfolio config sha256:{}", self.hash)
    }

    /// Writes `name` through `f`, which receives the comment to emit first.
    pub fn write<F>(&self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write, &str) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::numerical(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w, &self.comment())?;
        w.flush().map_err(|e| CliError::numerical(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_str(&self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w, _| Ok(w.write_all(text.as_bytes()).map_err(polyfolio::Error::from)?))
    }

    /// JSON with `config_hash` as the first field.
    pub fn write_json(&self, name: &str, mut value: serde_json::Value) -> Result<(), CliError> {
        if let serde_json::Value::Object(map) = &mut value {
            map.shift_insert(0, "config_hash".into(), self.hash.clone().into());
        }
        let text = serde_json::to_string_pretty(&value).expect("json value serializes");
        self.write_str(name, &(text + "\n"))
    }
}
