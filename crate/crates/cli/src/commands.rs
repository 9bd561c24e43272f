//! One function per subcommand; each reads inputs named by the
//! [`RunConfig`] and writes its files through [`Outputs`].

use ndarray::{Array1, Array2};
use polyfolio::cluster::{corner_features, emd_matrix, feature_matrix, kmedoids, spectral_cluster, write_matrix_csv, ClusterReport};
use polyfolio::copula::{detect, estimate_copula, indicator, rolling_copulas, window_copula, DetectConfig, Severity};
use polyfolio::domain::{varsi_fraction, PortfolioDomain};
use polyfolio::market::ingest_csv;
use polyfolio::sampler::{derive_seed, SamplerConfig};
use polyfolio::score::{
    classic_measures, curves_svg, min_max_mean_scores, mixed_strategy_copula, parametric_score, score_distribution,
    ComponentIntegrator, DistributionConfig, IntegralConfig, IntegralMethod, ScoreReport,
};
use polyfolio::stats::BoundedDensity;
use polyfolio::strategy::{
    bias_vector, boltzmann_center, build_mixture, behavioral_weights, strategy_index, temperature_sequence, AnnealConfig,
    BoltzmannConfig, Exponent, GridConfig, MixtureStrategy, WeightRegion,
};
use polyfolio::svg;
use serde_json::json;

use crate::config::{ClusterMode, RunConfig};
use crate::io::{load_market, load_panel, load_portfolios, load_region, MarketData, Outputs};
use crate::CliError;

// Independent seed streams of one run.
const STREAM_GRID: u64 = 1;
const STREAM_INTEGRAL: u64 = 2;
const STREAM_WEIGHTS: u64 = 3;
const STREAM_DRAWS: u64 = 4;
const STREAM_COPULA: u64 = 5;

fn io_err(e: std::io::Error) -> CliError {
    polyfolio::Error::from(e).into()
}

fn detect_config(cfg: &RunConfig) -> DetectConfig {
    DetectConfig {
        window: cfg.window,
        m: cfg.m,
        band: cfg.band,
        warning_days: cfg.warning_days,
        crisis_days: cfg.crisis_days,
        sample_count: cfg.samples,
        seed: cfg.seed,
    }
}

fn sampler(cfg: &RunConfig, stream: u64) -> SamplerConfig {
    SamplerConfig::default().with_seed(derive_seed(cfg.seed, stream))
}

pub fn ingest(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let path = cfg.input.as_deref().ok_or_else(|| CliError::input("--input is required"))?;
    let panel = ingest_csv::<f64>(path, cfg.format)?;
    out.write("returns.csv", |w, c| Ok(panel.write_csv(w, Some(c))?))?;
    out.write_json(
        "summary.json",
        json!({
            "symbols": panel.symbols(),
            "days": panel.len(),
            "first": panel.dates()[0],
            "last": panel.dates()[panel.len() - 1],
        }),
    )
}

pub fn detect_cmd(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let panel = load_panel(cfg)?;
    let dc = detect_config(cfg);
    let mut snapshots = Vec::with_capacity(cfg.snapshots.len());
    for d in &cfg.snapshots {
        let t = panel.index_of(*d).ok_or_else(|| CliError::input(format!("snapshot {d} is not a panel date")))?;
        if t + 1 < dc.window {
            return Err(CliError::input(format!("snapshot {d} precedes the first full window")));
        }
        snapshots.push((*d, t));
    }
    let series = detect(&panel, &dc)?;
    out.write("indicator.csv", |w, c| Ok(series.write_csv(w, Some(c))?))?;
    out.write("intervals.csv", |w, c| {
        writeln!(w, "# {c}").map_err(io_err)?;
        writeln!(w, "start,end,start_index,end_index,days,severity").map_err(io_err)?;
        for iv in &series.intervals {
            let sev = match iv.severity {
                Severity::Warning => "warning",
                Severity::Crisis => "crisis",
            };
            writeln!(w, "{},{},{},{},{},{sev}", iv.start, iv.end, iv.start_index, iv.end_index, iv.len()).map_err(io_err)?;
        }
        Ok(())
    })?;
    out.write_str("timeline.svg", &series.to_svg("Crisis indicator", Some(&out.comment())))?;
    for (d, t) in snapshots {
        let copula = window_copula(&panel, &dc, t)?;
        out.write(&format!("copula_{d}.csv"), |w, c| Ok(copula.write_csv(w, Some(c))?))?;
        out.write_str(&format!("copula_{d}.svg"), &copula.to_svg(&format!("Copula {d}"), Some(&out.comment())))?;
    }
    Ok(())
}

pub fn cluster_cmd(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let panel = load_panel(cfg)?;
    let dc = detect_config(cfg);
    let (dates, copulas) = rolling_copulas(&panel, &dc, cfg.stride)?;
    let indicators: Vec<f64> = copulas.iter().map(|c| indicator(c, cfg.band)).collect::<Result<_, _>>()?;
    let (distance, labels, medoids, sigma) = match cfg.cluster_mode {
        ClusterMode::Emd => {
            let d = emd_matrix(&copulas, cfg.emd_grid)?;
            let sc = spectral_cluster(d.view(), cfg.k, cfg.seed)?;
            (d, sc.labels, sc.medoids, Some(sc.sigma))
        }
        ClusterMode::Features => {
            let feats = copulas.iter().map(|c| corner_features(c, cfg.corner)).collect::<Result<Vec<_>, _>>()?;
            let fm = feature_matrix(&feats);
            let n = fm.nrows();
            let d = Array2::from_shape_fn((n, n), |(i, j)| {
                let diff = &fm.row(i) - &fm.row(j);
                diff.dot(&diff).sqrt()
            });
            let med = kmedoids(fm.view(), cfg.k, cfg.seed)?;
            (d, med.labels, med.medoids, None)
        }
    };
    out.write("distance.csv", |w, c| Ok(write_matrix_csv(distance.view(), w, Some(c))?))?;
    out.write("labels.csv", |w, c| {
        writeln!(w, "# {c}").map_err(io_err)?;
        writeln!(w, "date,label,indicator").map_err(io_err)?;
        for ((d, l), v) in dates.iter().zip(&labels).zip(&indicators) {
            writeln!(w, "{d},{l},{v:.16e}").map_err(io_err)?;
        }
        Ok(())
    })?;
    let mut report = ClusterReport::new(cfg.k, sigma, labels, medoids, Some(&indicators));
    report.config_hash = out.hash.clone();
    let mut value = serde_json::to_value(&report).map_err(polyfolio::Error::from)?;
    value["mode"] = serde_json::to_value(cfg.cluster_mode).map_err(polyfolio::Error::from)?;
    value["dates"] = json!(dates);
    out.write_json("report.json", value)
}

struct Setup {
    market: MarketData,
    domain: PortfolioDomain<f64>,
    mixture: MixtureStrategy<f64>,
    /// Behavioral weights.
    weights: Vec<f64>,
    /// Unnormalized bias vector.
    bias: Array1<f64>,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let market = load_market(cfg)?;
    let n = market.mu.len();
    let domain = PortfolioDomain::build(n, cfg.gamma)?;
    let mut mixture = match &cfg.mixture {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            let mix = MixtureStrategy::from_json(&text)?;
            if mix.n_assets() != n {
                return Err(CliError::input(format!("mixture has {} assets, market has {n}", mix.n_assets())));
            }
            mix
        }
        None => {
            let grid = GridConfig {
                m1: cfg.m1,
                m2: cfg.m2,
                anchors: cfg.anchors.clone(),
                anneal: AnnealConfig { sampler: sampler(cfg, STREAM_GRID), ..Default::default() },
                ..Default::default()
            };
            build_mixture(&domain, market.sigma.view(), market.mu.view(), &grid)?
        }
    };
    let f_alpha = vec![cfg.dispersion.clone(); mixture.groups().len()];
    cfg.risk.validate()?;
    cfg.dispersion.validate()?;
    let weights = behavioral_weights(&mixture, &cfg.risk, &f_alpha)?;
    let bias = Array1::from(bias_vector(&mixture, &cfg.risk, &f_alpha)?);
    mixture.set_weights(weights.clone())?;
    Ok(Setup { market, domain, mixture, weights, bias })
}

fn anneal(cfg: &RunConfig) -> AnnealConfig {
    AnnealConfig { sampler: sampler(cfg, STREAM_WEIGHTS), ..Default::default() }
}

fn boltzmann(cfg: &RunConfig) -> BoltzmannConfig {
    BoltzmannConfig { sampler: sampler(cfg, STREAM_WEIGHTS), ..Default::default() }
}

/// Temperature ladder of the bias on `region`; empty when fewer than two
/// temperatures are requested.
fn temperatures(cfg: &RunConfig, region: &WeightRegion<f64>, bias: &Array1<f64>) -> Result<Vec<f64>, CliError> {
    if cfg.temperatures < 2 {
        return Ok(Vec::new());
    }
    Ok(temperature_sequence(region, bias, cfg.temperatures, &anneal(cfg))?)
}

fn integral_config(cfg: &RunConfig, method: IntegralMethod) -> IntegralConfig {
    IntegralConfig { method, eps: cfg.eps, direct_samples: cfg.direct_samples, sampler: sampler(cfg, STREAM_INTEGRAL), ..Default::default() }
}

pub fn strategies(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let m2 = s.mixture.m2();
    out.write_str("mixture.json", &(s.mixture.to_json(Some(&out.hash))? + "\n"))?;
    out.write("strategies.csv", |w, c| {
        writeln!(w, "# {c}").map_err(io_err)?;
        writeln!(w, "index,group,level,q,alpha,proposal_volatility,bias,weight").map_err(io_err)?;
        for (i, g) in s.mixture.groups().iter().enumerate() {
            let q = match &g.exponent {
                Exponent::Utility { q } => q.to_string(),
                Exponent::Anchored { .. } => "anchored".into(),
            };
            for (j, a) in g.alphas.iter().enumerate() {
                let k = strategy_index(i, j, m2);
                writeln!(w, "{k},{i},{j},{q},{a},{},{},{}", g.proposal_volatility, s.bias[k], s.weights[k]).map_err(io_err)?;
            }
        }
        Ok(())
    })?;
    let proposals: Vec<Vec<f64>> = s.mixture.groups().iter().map(|g| g.proposal.to_vec()).collect();
    out.write_json(
        "strategies.json",
        json!({
            "symbols": s.market.symbols,
            "components": s.mixture.len(),
            "volatility_range": s.mixture.volatility_range(),
            "proposals": proposals,
            "weights": s.weights,
        }),
    )
}

fn weight_json(w: &Array1<f64>) -> serde_json::Value {
    json!(w.to_vec())
}

pub fn score_cmd(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let portfolios = load_portfolios(cfg, &s.domain)?;
    let region = load_region(cfg, s.mixture.len())?;
    let temps = temperatures(cfg, &region, &s.bias)?;
    let integrator = ComponentIntegrator::new(&s.mixture, &s.domain, &integral_config(cfg, cfg.integral))?;
    let bcfg = boltzmann(cfg);
    let mut reports = Vec::with_capacity(portfolios.len());
    let mut classic = serde_json::Map::new();
    for (label, x) in &portfolios {
        log::info!("scoring {label}");
        let ints = integrator.integrate(s.market.r.view(), s.market.r.dot(x))?;
        let range = min_max_mean_scores(&ints, &region, &bcfg)?;
        let curve = parametric_score(&ints, &region, &s.bias, &temps, &bcfg)?;
        reports.push(ScoreReport::new(label.clone(), x.clone(), ints, s.weights.clone(), range, curve)?);
        let measures = match &s.market.evaluation {
            Some(window) => {
                serde_json::to_value(classic_measures(x.view(), window.view(), None, None)?).map_err(polyfolio::Error::from)?
            }
            None => json!({ "cross_sectional": varsi_fraction(s.market.r.view(), s.market.r.dot(x)) }),
        };
        classic.insert(label.clone(), measures);
    }
    out.write_str("score_report.json", &(ScoreReport::many_to_json(&reports, Some(&out.hash))? + "\n"))?;
    out.write("parametric_curve.csv", |w, c| {
        writeln!(w, "# {c}").map_err(io_err)?;
        writeln!(w, "label,index,temperature,score,se").map_err(io_err)?;
        for r in &reports {
            for (i, p) in r.curve.iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", r.label, i + 1, p.temperature, p.score.value, p.score.se).map_err(io_err)?;
            }
        }
        Ok(())
    })?;
    out.write_str("parametric_curve.svg", &curves_svg(&reports, "Parametric score", Some(&out.comment())))?;
    out.write_json("classic_measures.json", json!({ "portfolios": classic }))
}

/// Behavioral weights followed by the Boltzmann centers of the ladder.
fn weight_series(cfg: &RunConfig, s: &Setup, region: &WeightRegion<f64>) -> Result<Vec<(String, Option<f64>, Array1<f64>)>, CliError> {
    let mut out = vec![("w".to_string(), None, Array1::from(s.weights.clone()))];
    let bcfg = boltzmann(cfg);
    for (i, t) in temperatures(cfg, region, &s.bias)?.into_iter().enumerate() {
        let mut c = bcfg.clone();
        c.sampler.seed = derive_seed(bcfg.sampler.seed, i as u64);
        out.push((format!("T{}", i + 1), Some(t), boltzmann_center(region, &s.bias, t, &c)?.w));
    }
    Ok(out)
}

pub fn score_dist(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let portfolios = load_portfolios(cfg, &s.domain)?;
    let region = load_region(cfg, s.mixture.len())?;
    let series = weight_series(cfg, &s, &region)?;
    let integrator = ComponentIntegrator::new(&s.mixture, &s.domain, &integral_config(cfg, IntegralMethod::Direct))?;
    let weights: Vec<Vec<f64>> = series.iter().map(|(_, _, w)| w.to_vec()).collect();
    let dcfg = DistributionConfig { draws: cfg.draws, seed: derive_seed(cfg.seed, STREAM_DRAWS) };
    let mut curves = Vec::new();
    let mut report = serde_json::Map::new();
    for (label, x) in &portfolios {
        log::info!("score distribution of {label}");
        let dists = score_distribution(&integrator, x.view(), s.market.mu.view(), s.market.sigma.view(), &weights, &dcfg)?;
        out.write(&format!("density_{label}.csv"), |w, c| {
            writeln!(w, "# {c}").map_err(io_err)?;
            writeln!(w, "series,x,density").map_err(io_err)?;
            for ((name, _, _), d) in series.iter().zip(&dists) {
                match &d.density {
                    BoundedDensity::PointMass(x) => writeln!(w, "{name},{x},inf").map_err(io_err)?,
                    dens => {
                        for (x, y) in dens.grid(201) {
                            writeln!(w, "{name},{x},{y}").map_err(io_err)?;
                        }
                    }
                }
            }
            Ok(())
        })?;
        let mut entries = Vec::new();
        for ((name, t, w), d) in series.iter().zip(&dists) {
            let n = d.scores.len() as f64;
            let mean = d.scores.iter().sum::<f64>() / n;
            let sd = (d.scores.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
            let (point_mass, modes) = match &d.density {
                BoundedDensity::PointMass(x) => (Some(*x), vec![(*x, f64::INFINITY)]),
                dens => {
                    curves.push((format!("{label} {name}"), dens.grid(201)));
                    (None, dens.modes(1001))
                }
            };
            entries.push(json!({
                "series": name,
                "temperature": t,
                "weights": weight_json(w),
                "mean": mean,
                "sd": sd,
                "point_mass": point_mass,
                "modes": modes.iter().filter(|m| m.1.is_finite()).map(|m| json!({"x": m.0, "density": m.1})).collect::<Vec<_>>(),
            }));
        }
        report.insert(label.clone(), json!(entries));
    }
    out.write_str("density.svg", &svg::curves(&curves, "Score density", Some(&out.comment())))?;
    out.write_json("report.json", json!({ "draws": cfg.draws, "portfolios": report }))
}

pub fn alt_copula(cfg: &RunConfig, out: &Outputs) -> Result<(), CliError> {
    let s = setup(cfg)?;
    if !s.domain.is_simplex() {
        return Err(CliError::input("alternative copulas are defined on the long-only simplex"));
    }
    let region = load_region(cfg, s.mixture.len())?;
    let series = weight_series(cfg, &s, &region)?;
    let (r, sigma) = (s.market.r.view(), s.market.sigma.view());
    let uniform = estimate_copula(r, sigma, cfg.m, cfg.copula_samples, derive_seed(cfg.seed, STREAM_COPULA))?;
    let mut entries = vec![json!({
        "series": "uniform",
        "indicator": indicator(&uniform, cfg.band)?,
    })];
    out.write("copula_uniform.csv", |w, c| Ok(uniform.write_csv(w, Some(c))?))?;
    out.write_str("copula_uniform.svg", &uniform.to_svg("Uniform portfolios", Some(&out.comment())))?;
    let mut mixture = s.mixture.clone();
    for (i, (name, t, w)) in series.iter().enumerate() {
        mixture.set_weights(w.to_vec())?;
        let smp = SamplerConfig::default().with_seed(derive_seed(derive_seed(cfg.seed, STREAM_COPULA), i as u64 + 1));
        let copula = mixed_strategy_copula(&mixture, &s.domain, r, sigma, cfg.m, cfg.copula_samples, &smp)?;
        out.write(&format!("copula_{name}.csv"), |wr, c| Ok(copula.write_csv(wr, Some(c))?))?;
        out.write_str(&format!("copula_{name}.svg"), &copula.to_svg(&format!("Mixed strategy {name}"), Some(&out.comment())))?;
        entries.push(json!({
            "series": name,
            "temperature": t,
            "weights": weight_json(w),
            "indicator": indicator(&copula, cfg.band)?,
        }));
    }
    out.write_json("report.json", json!({ "band": cfg.band, "copulas": entries }))
}
