//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//! Pass a criterion id (`C7`) as an argument to run a subset.

use std::time::Instant;

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use polyfolio::cluster::emd;
use polyfolio::copula::{detect, estimate_copula, DetectConfig, Severity};
use polyfolio::domain::{varsi_fraction, PortfolioDomain};
use polyfolio::lp::LinearProgram;
use polyfolio::market::ReturnsPanel;
use polyfolio::sampler::{sample_logconcave, sample_simplex_uniform, LogConcaveDensity, SamplerConfig, SquaredDistance};
use polyfolio::score::{
    component_integrals, min_max_mean_scores, parametric_score, score, score_distribution, ComponentIntegrator,
    DistributionConfig, IntegralConfig, IntegralMethod,
};
use polyfolio::stats::{chi_square_homogeneity, ks_test, BoundedDensity};
use polyfolio::strategy::{
    behavioral_weights, build_mixture, temperature_sequence, AnnealConfig, BehavioralFunction, BoltzmannConfig,
    Exponent, GridConfig, MixtureStrategy, StrategyGroup, WeightRegion,
};
use polyfolio::CopulaF64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

const C1_CASES: usize = 20;
const C1_POINTS: usize = 1_000_000;
const C1_SIGMAS: f64 = 3.0;
const C1_SECONDS: f64 = 10.0;

const C2_M: usize = 100;
const C2_SAMPLES: usize = 500_000;
const C2_TARGET: f64 = 0.01;
const C2_TOL: f64 = 0.002;

const C3_PLANT: std::ops::Range<usize> = 150..270;
const C3_DAYS: usize = 420;
const C3_MIN_OVERLAP: f64 = 0.9;
const C3_SECONDS: f64 = 300.0;

const C5_CASES: usize = 20;
const C5_EPS: f64 = 0.02;

const C6_INSTANCES: usize = 10;
const C6_SIGMAS: f64 = 3.0;

const C8_TROUGH: f64 = 0.2;
const C8_LOW_MODE: (f64, f64) = (0.1, 0.3);
const C8_HIGH_MODE: (f64, f64) = (0.7, 0.9);

const C9_PAIRS: usize = 20;
const C9_TRIPLES: usize = 100;
const C9_TOL: f64 = 1e-8;

const C10_DRAWS: usize = 10_000;
const C10_P: f64 = 0.01;

const C11_DIMS: [usize; 4] = [5, 10, 20, 40];
const C11_MAX_SLOPE: f64 = 2.0;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        ("C1", "Varsi fraction vs rejection sampling", c1),
        ("C2", "copula marginals at m = 100", c2),
        ("C3", "planted crisis detection", c3),
        ("C4", "crypto crash reproduction", c4),
        ("C5", "score at α → 0 equals the Varsi fraction", c5),
        ("C6", "parametric score within min/max, hot end at the mean", c6),
        ("C7", "crypto fixture ordering MV > ERC > BTC", c7),
        ("C8", "bimodal MV score distribution", c8),
        ("C9", "EMD vs dense LP and metric axioms", c9),
        ("C10", "sampler KS and chi-square statistics", c10),
        ("C11", "component-integral sample growth", c11),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| f.eq_ignore_ascii_case(id)) {
            continue;
        }
        let t = Instant::now();
        let outcome = run();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::NotRun(d) => ("NOT RUN", d),
        };
        println!("{id:<4} {tag:<7} {name} [{secs:.1}s]: {detail}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn dirichlet(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let e = Array1::from_shape_fn(n, |_| -> f64 { Exp1.sample(rng) });
    let s = e.sum();
    e / s
}

fn random_covariance(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() - 0.5);
    a.t().dot(&a) / n as f64 + Array2::<f64>::eye(n) * 0.1
}

fn c1() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for case in 0..C1_CASES {
        let n = 2 + case % 7;
        let r = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let c = lo + (hi - lo) * rng.random_range(0.05..0.95);
        let exact = varsi_fraction(r.view(), c);
        let seed = rng.random::<u64>();
        // Independent oracle: normalized exponentials, accepted when R·x ≤ c.
        let chunks = 16;
        let hits: usize = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut g = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut e = vec![0.0; n];
                (0..C1_POINTS / chunks)
                    .filter(|_| {
                        for v in e.iter_mut() {
                            *v = Exp1.sample(&mut g);
                        }
                        let total: f64 = e.iter().sum();
                        e.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>() <= c * total
                    })
                    .count()
            })
            .sum();
        let p = hits as f64 / C1_POINTS as f64;
        let se = (p * (1.0 - p) / C1_POINTS as f64).sqrt().max(1e-12);
        let z = (exact - p).abs() / se;
        worst = worst.max(z);
        if z > C1_SIGMAS {
            bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(bad == 0 && secs < C1_SECONDS, format!("{C1_CASES} cases, worst {worst:.2} se, {bad} beyond {C1_SIGMAS} se, {secs:.1}s"))
}

fn fixture() -> (Vec<String>, Array2<f64>, Array1<f64>, Array1<f64>, Vec<(String, Array1<f64>)>) {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/crypto_market.json")).unwrap();
    let d: serde_json::Value = serde_json::from_str(&text).unwrap();
    let v = |x: &serde_json::Value| x.as_array().unwrap().iter().map(|y| y.as_f64().unwrap()).collect::<Vec<f64>>();
    let symbols = d["symbols"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
    let scale = d["sigma_scale"].as_f64().unwrap();
    let rows: Vec<Vec<f64>> = d["sigma"].as_array().unwrap().iter().map(v).collect();
    let n = rows.len();
    let sigma = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j] * scale);
    let mu = Array1::from(v(&d["mu_percent"])) / 100.0;
    let r = Array1::from(v(&d["evaluation_mean_return_percent"])) / 100.0;
    let portfolios = ["MV", "ERC", "BTC"]
        .iter()
        .map(|k| {
            let x = Array1::from(v(&d["portfolios_percent"][*k]));
            let s = x.sum();
            (k.to_string(), x / s)
        })
        .collect();
    (symbols, sigma, mu, r, portfolios)
}

fn c2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (_, sigma, _, r, _) = fixture();
    let mut cases = vec![(r, sigma)];
    for n in [5, 20] {
        cases.push((Array1::from_shape_fn(n, |_| rng.random_range(-0.02..0.03)), random_covariance(n, &mut rng) * 1e-3));
    }
    let mut worst: f64 = 0.0;
    for (k, (r, s)) in cases.iter().enumerate() {
        let c: CopulaF64 = estimate_copula(r.view(), s.view(), C2_M, C2_SAMPLES, 7 + k as u64).unwrap();
        for v in c.row_sums().into_iter().chain(c.column_sums()) {
            worst = worst.max((v - C2_TARGET).abs());
        }
    }
    verdict(worst <= C2_TOL, format!("{} copulas (n = 12, 5, 20), largest marginal deviation {worst:.2e}", cases.len()))
}

/// Daily returns of twelve assets with volatility rising in the index and
/// drift proportional to volatility, negative on `crash` days.
fn regime_panel(crash: std::ops::Range<usize>, seed: u64) -> ReturnsPanel<f64> {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol: Vec<f64> = (0..n).map(|j| 0.004 + 0.0015 * j as f64).collect();
    let returns = Array2::from_shape_fn((C3_DAYS, n), |(t, j)| {
        let z: f64 = StandardNormal.sample(&mut rng);
        let drift = if crash.contains(&t) { -2.0 * vol[j] } else { 0.15 * vol[j] };
        drift + vol[j] * z
    });
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    ReturnsPanel::new(
        (0..n).map(|j| format!("S{j}")).collect(),
        (0..C3_DAYS).map(|i| start + chrono::Days::new(i as u64)).collect(),
        returns,
    )
    .unwrap()
}

fn c3() -> Outcome {
    let cfg = DetectConfig::default();
    let t = Instant::now();
    let crashed = detect(&regime_panel(C3_PLANT, 31), &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let calm = detect(&regime_panel(0..0, 32), &cfg).unwrap();
    // Indicator values start at the first full window.
    let offset = cfg.window - 1;
    let crises: Vec<_> = crashed.intervals.iter().filter(|iv| iv.severity == Severity::Crisis).collect();
    let overlap = crises
        .iter()
        .map(|iv| {
            let (s, e) = (iv.start_index + offset, iv.end_index + offset + 1);
            e.min(C3_PLANT.end).saturating_sub(s.max(C3_PLANT.start))
        })
        .sum::<usize>() as f64
        / C3_PLANT.len() as f64;
    let spans: Vec<String> = crashed.intervals.iter().map(|iv| format!("{}..{} {:?}", iv.start, iv.end, iv.severity)).collect();
    verdict(
        crises.len() == 1 && overlap >= C3_MIN_OVERLAP && calm.intervals.is_empty() && secs < C3_SECONDS,
        format!(
            "n = 12, m = {}, {} samples: intervals [{}], plant covered {:.0}%, calm control {} intervals, {secs:.0}s",
            cfg.m,
            cfg.sample_count,
            spans.join(", "),
            100.0 * overlap,
            calm.intervals.len()
        ),
    )
}

fn c4() -> Outcome {
    Outcome::NotRun("needs the historical daily crypto price CSV, which is not among the offline fixtures".into())
}

fn c5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for case in 0..C5_CASES {
        let n = 2 + case % 5;
        let groups = (0..2)
            .map(|_| {
                let c = dirichlet(n, &mut rng);
                StrategyGroup { exponent: Exponent::Anchored { center: c.to_vec() }, proposal: c, proposal_volatility: 0.0, alphas: vec![1e-4, 1e-3] }
            })
            .collect();
        let mix = MixtureStrategy::new(random_covariance(n, &mut rng), Array1::zeros(n), groups, None, (0.0, 1.0)).unwrap();
        let dom = PortfolioDomain::<f64>::simplex(n);
        let r = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let x = dirichlet(n, &mut rng);
        let w = dirichlet(mix.len(), &mut rng).to_vec();
        let cfg = IntegralConfig { eps: C5_EPS, sampler: SamplerConfig::default().with_seed(case as u64), ..Default::default() };
        let ints = component_integrals(&mix, &dom, r.view(), r.dot(&x), &cfg).unwrap();
        let s = score(&ints, &w).unwrap().value;
        worst = worst.max((s - varsi_fraction(r.view(), r.dot(&x))).abs());
    }
    verdict(worst <= C5_EPS, format!("{C5_CASES} cases n ≤ 6, telescoping at eps {C5_EPS}, worst |s − varsi| {worst:.2e}"))
}

fn c6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut violations = Vec::new();
    let mut worst_center: f64 = 0.0;
    for inst in 0..C6_INSTANCES {
        let n = 4;
        let (groups_n, m2) = (2 + inst % 3, 2 + inst % 2);
        let groups = (0..groups_n)
            .map(|_| {
                let c = dirichlet(n, &mut rng);
                let a0 = rng.random_range(2.0..10.0);
                let alphas = (0..m2).map(|j| a0 * 8f64.powi(j as i32)).collect();
                StrategyGroup { exponent: Exponent::Anchored { center: c.to_vec() }, proposal: c, proposal_volatility: 0.0, alphas }
            })
            .collect();
        let mix = MixtureStrategy::new(random_covariance(n, &mut rng), Array1::zeros(n), groups, None, (0.0, 1.0)).unwrap();
        let m = mix.len();
        let dom = PortfolioDomain::<f64>::simplex(n);
        let r = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let x = dirichlet(n, &mut rng);
        let sampler = SamplerConfig::default().with_seed(60 + inst as u64);
        let icfg = IntegralConfig { method: IntegralMethod::Direct, direct_samples: 3000, sampler: sampler.clone(), ..Default::default() };
        let ints = component_integrals(&mix, &dom, r.view(), r.dot(&x), &icfg).unwrap();
        let region = if inst % 2 == 0 {
            WeightRegion::simplex(m).unwrap()
        } else {
            // At most 60% of investors in the first two strategies.
            let mut a = Array2::zeros((1, m));
            a[[0, 0]] = 1.0;
            a[[0, 1]] = 1.0;
            WeightRegion::new(a, Array1::from(vec![0.6])).unwrap()
        };
        let bias = Array1::from_shape_fn(m, |_| rng.random::<f64>());
        let temps = temperature_sequence(&region, &bias, 5, &AnnealConfig { sampler: sampler.clone(), ..Default::default() }).unwrap();
        let bcfg = BoltzmannConfig { sampler, ..Default::default() };
        let range = min_max_mean_scores(&ints, &region, &bcfg).unwrap();
        let curve = parametric_score(&ints, &region, &bias, &temps, &bcfg).unwrap();
        for p in &curve {
            let lo = range.s_min.value - C6_SIGMAS * (range.s_min.se.powi(2) + p.score.se.powi(2)).sqrt();
            let hi = range.s_max.value + C6_SIGMAS * (range.s_max.se.powi(2) + p.score.se.powi(2)).sqrt();
            if p.score.value < lo || p.score.value > hi {
                violations.push(format!("instance {inst} T={:.3e}", p.temperature));
            }
        }
        let hot = &curve[0].score;
        let z = (hot.value - range.s_mean.value).abs() / (hot.se.powi(2) + range.s_mean.se.powi(2)).sqrt().max(1e-12);
        worst_center = worst_center.max(z);
        if z > C6_SIGMAS {
            violations.push(format!("instance {inst}: s(T_max) {:.4} vs mean {:.4}", hot.value, range.s_mean.value));
        }
    }
    verdict(
        violations.is_empty(),
        format!("{C6_INSTANCES} instances M ≤ 12, worst |s(T_max) − s̄| {worst_center:.2} se; violations {violations:?}"),
    )
}

fn c7() -> Outcome {
    let (_, sigma, mu, r, portfolios) = fixture();
    let n = mu.len();
    let dom = PortfolioDomain::<f64>::simplex(n);
    let mix = build_mixture(&dom, sigma.view(), mu.view(), &GridConfig::default()).unwrap();
    let m = mix.len();
    let cfg = IntegralConfig { sampler: SamplerConfig::default().with_seed(7), ..Default::default() };
    let integrator = ComponentIntegrator::new(&mix, &dom, &cfg).unwrap();
    let f_alpha = vec![BehavioralFunction::constant(); mix.groups().len()];
    let variants: Vec<(&str, Option<Vec<f64>>)> = vec![
        ("cross-sectional", None),
        ("mean", Some(vec![1.0 / m as f64; m])),
        ("high-risk", Some(behavioral_weights(&mix, &BehavioralFunction::rising(0.5), &f_alpha).unwrap())),
        ("medium-risk", Some(behavioral_weights(&mix, &BehavioralFunction::bump(0.5), &f_alpha).unwrap())),
        ("low-risk", Some(behavioral_weights(&mix, &BehavioralFunction::falling(0.5), &f_alpha).unwrap())),
    ];
    let mut table = vec![vec![0.0; portfolios.len()]; variants.len()];
    for (p, (_, x)) in portfolios.iter().enumerate() {
        let r_star = r.dot(x);
        let ints = integrator.integrate(r.view(), r_star).unwrap();
        for (v, (_, w)) in variants.iter().enumerate() {
            table[v][p] = match w {
                None => varsi_fraction(r.view(), r_star),
                Some(w) => score(&ints, w).unwrap().value,
            };
        }
    }
    let ordered = table.iter().all(|row| row[0] > row[1] && row[1] > row[2]);
    let cells: Vec<String> = variants
        .iter()
        .zip(&table)
        .map(|((name, _), row)| format!("{name} {:.1}/{:.1}/{:.1}", 100.0 * row[0], 100.0 * row[1], 100.0 * row[2]))
        .collect();
    // Historical targets are reported, not required: the fixture stands in
    // for the historical panel.
    let targets = format!(
        "targets MV cross-sectional 70.2±2 → {:.1}, MV mean 67.6±3 → {:.1}, MV low-risk 82.1±3 → {:.1}, BTC < 1 → {:.1}",
        100.0 * table[0][0],
        100.0 * table[1][0],
        100.0 * table[4][0],
        100.0 * table[1..].iter().map(|row| row[2]).fold(0.0, f64::max)
    );
    verdict(ordered, format!("M = {m}, MV/ERC/BTC %: {}; {targets}", cells.join("; ")))
}

fn c8() -> Outcome {
    let (_, sigma, mu, _, portfolios) = fixture();
    let dom = PortfolioDomain::<f64>::simplex(mu.len());
    let mix = build_mixture(&dom, sigma.view(), mu.view(), &GridConfig::default()).unwrap();
    let m = mix.len();
    let cfg = IntegralConfig { method: IntegralMethod::Direct, direct_samples: 4000, ..Default::default() };
    let integrator = ComponentIntegrator::new(&mix, &dom, &cfg).unwrap();
    let x = &portfolios[0].1;
    let dist = score_distribution(&integrator, x.view(), mu.view(), sigma.view(), &[vec![1.0 / m as f64; m]], &DistributionConfig { draws: 10_000, seed: 3 })
        .unwrap();
    let density = &dist[0].density;
    if let BoundedDensity::PointMass(v) = density {
        return Outcome::Fail(format!("point mass at {v}"));
    }
    let modes = density.modes(1001);
    let best_in = |(a, b): (f64, f64)| modes.iter().filter(|(x, _)| *x >= a && *x <= b).copied().max_by(|p, q| p.1.total_cmp(&q.1));
    let (Some(low), Some(high)) = (best_in(C8_LOW_MODE), best_in(C8_HIGH_MODE)) else {
        return Outcome::Fail(format!("modes {modes:.3?}"));
    };
    let trough = (0..=1000)
        .map(|i| low.0 + (high.0 - low.0) * i as f64 / 1000.0)
        .map(|x| density.pdf(x))
        .fold(f64::INFINITY, f64::min);
    let depth = 1.0 - trough / low.1.min(high.1);
    verdict(
        depth >= C8_TROUGH,
        format!("M = {m}, 10⁴ return draws: modes at {:.3} and {:.3}, trough {:.0}% below the lower peak, {} local maxima", low.0, high.0, 100.0 * depth, modes.len()),
    )
}

/// Earth mover's distance between two grid masses as a dense transport LP.
fn lp_emd(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let m = a.nrows();
    let cells = m * m;
    let cost = Array1::from_shape_fn(cells * cells, |k| {
        let (p, q) = (k / cells, k % cells);
        let (pi, pj, qi, qj) = ((p / m) as f64, (p % m) as f64, (q / m) as f64, (q % m) as f64);
        ((pi - qi).powi(2) + (pj - qj).powi(2)).sqrt()
    });
    let mut a_eq = Array2::zeros((2 * cells, cells * cells));
    let mut b_eq = Array1::zeros(2 * cells);
    for p in 0..cells {
        for q in 0..cells {
            a_eq[[p, p * cells + q]] = 1.0;
            a_eq[[cells + q, p * cells + q]] = 1.0;
        }
        b_eq[p] = a[[p / m, p % m]];
        b_eq[cells + p] = b[[p / m, p % m]];
    }
    LinearProgram::new(cost).with_equalities(a_eq, b_eq).solve().unwrap().objective
}

fn random_copula(m: usize, rng: &mut ChaCha8Rng) -> CopulaF64 {
    let raw = Array2::from_shape_fn((m, m), |_| rng.random::<f64>());
    let s = raw.sum();
    CopulaF64::from_mass(raw / s).unwrap()
}

fn c9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut lp_gap: f64 = 0.0;
    for _ in 0..C9_PAIRS {
        let (a, b) = (random_copula(4, &mut rng), random_copula(4, &mut rng));
        lp_gap = lp_gap.max((emd(&a, &b, 4).unwrap() - lp_emd(a.mass(), b.mass())).abs());
    }
    let mut axiom_gap: f64 = 0.0;
    let mut positive = true;
    for _ in 0..C9_TRIPLES {
        let (a, b, c) = (random_copula(4, &mut rng), random_copula(4, &mut rng), random_copula(4, &mut rng));
        let d = |x: &CopulaF64, y: &CopulaF64| emd(x, y, 4).unwrap();
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        axiom_gap = axiom_gap.max(d(&a, &a).abs()).max((ab - ba).abs()).max(ac - ab - bc);
        positive &= ab > C9_TOL;
    }
    verdict(
        lp_gap <= C9_TOL && axiom_gap <= C9_TOL && positive,
        format!("{C9_PAIRS} pairs max |EMD − LP| {lp_gap:.1e}; {C9_TRIPLES} triples max axiom violation {axiom_gap:.1e}"),
    )
}

fn cell_counts(points: &[Array1<f64>], bins: usize) -> Vec<usize> {
    let k = points[0].len() - 1;
    let mut counts = vec![0usize; bins.pow(k as u32)];
    for p in points {
        let idx = (0..k).fold(0, |idx, j| idx * bins + ((p[j] * bins as f64) as usize).min(bins - 1));
        counts[idx] += 1;
    }
    counts
}

fn c10() -> Outcome {
    let mut min_ks: f64 = 1.0;
    for (i, n) in [3usize, 5, 10].into_iter().enumerate() {
        let beta = Beta::new(1.0, (n - 1) as f64).unwrap();
        let pts = sample_simplex_uniform::<f64>(n, C10_DRAWS, 1000 + i as u64).unwrap();
        for k in 0..n {
            let xs: Vec<f64> = pts.iter().map(|p| p[k]).collect();
            min_ks = min_ks.min(ks_test(&xs, |x| beta.cdf(x)));
        }
    }
    let n = 4;
    let dom = PortfolioDomain::<f64>::simplex(n).full_dimensionalize().unwrap();
    let h = SquaredDistance { center: Array1::from(vec![0.7, 0.1, 0.1, 0.1]) };
    let dens = LogConcaveDensity::new(&dom, &h, 1e-6).unwrap();
    let cfg = SamplerConfig { walk_length: 5, ..SamplerConfig::default() }.with_seed(1010);
    let hmc = sample_logconcave(dens, &cfg, C10_DRAWS).unwrap();
    let exact = sample_simplex_uniform::<f64>(n, C10_DRAWS, 1011).unwrap();
    let chi = chi_square_homogeneity(&cell_counts(&hmc, 5), &cell_counts(&exact, 5));
    verdict(
        min_ks > C10_P && chi > C10_P,
        format!("smallest KS p-value {min_ks:.3} over n ∈ {{3, 5, 10}}; ReHMC vs exact chi-square p = {chi:.3} (n = 4)"),
    )
}

fn c11() -> Outcome {
    let mut points = Vec::new();
    for n in C11_DIMS {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let sigma = random_covariance(n, &mut rng);
        let c = Array1::from_elem(n, 1.0 / n as f64);
        let g = StrategyGroup { exponent: Exponent::Anchored { center: c.to_vec() }, proposal: c.clone(), proposal_volatility: 0.0, alphas: vec![50.0 * n as f64] };
        let mix = MixtureStrategy::new(sigma, Array1::zeros(n), vec![g], None, (0.0, 1.0)).unwrap();
        let dom = PortfolioDomain::<f64>::simplex(n);
        let r = Array1::from_shape_fn(n, |_| rng.random::<f64>());
        let cfg = IntegralConfig { sampler: SamplerConfig::default().with_seed(1), ..Default::default() };
        let est = component_integrals(&mix, &dom, r.view(), r.dot(&c), &cfg).unwrap();
        points.push(((n as f64).ln(), (est.samples as f64).ln(), est.samples));
    }
    let k = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / k, points.iter().map(|p| p.1).sum::<f64>() / k);
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let counts: Vec<usize> = points.iter().map(|p| p.2).collect();
    verdict(slope < C11_MAX_SLOPE, format!("samples {counts:?} for n = {C11_DIMS:?}, log-log slope {slope:.2}"))
}
