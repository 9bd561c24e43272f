//! The mixed-strategy portfolio score and its variants.
//!
//! For returns `R` and a candidate portfolio `x`, `S = P ∩ {R·y ≤ R·x}` and
//! component `k` of a mixture contributes `c_k = ∫_S π_k`. The score is
//! `⟨c, w⟩` for investor composition `w`; the min/max/mean and parametric
//! scores vary `w` over a weight region.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{count_cells, return_levels, volatility_levels, Copula};
use crate::domain::{min_max_volatility, varsi_fraction, FullDimDomain, HalfspaceSection, PortfolioDomain};
use crate::linalg::{psd_sqrt, quad_form};
use crate::market::sample_covariance;
use crate::sampler::{
    derive_seed, sample_simplex_uniform, Chain, ConcaveFn, Flat, LogConcaveDensity, NegUtility, SamplerConfig, Walk,
};
use crate::stats::{batch_means, BoundedDensity};
use crate::strategy::{boltzmann_center, BoltzmannConfig, MixtureStrategy, WeightRegion};
use crate::{svg, Error, Result, Scalar};

/// How each `c_k` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMethod {
    /// Ratio of partition functions on `S` and `P`, each a telescoping
    /// product over a `β` ladder from the uniform density.
    Telescoping,
    /// Fraction of `π_k` samples on `P` that land in `S`.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegralConfig {
    pub method: IntegralMethod,
    /// Target accuracy; a telescoping stage draws `max(min_stage_samples, ⌈√d/eps²⌉)` points.
    pub eps: f64,
    pub min_stage_samples: usize,
    /// Bound on the relative variance of each stage's ratio samples.
    pub variance_limit: f64,
    /// Samples per component for [`IntegralMethod::Direct`].
    pub direct_samples: usize,
    /// Uniform samples for `vol(S)/vol(P)` off the simplex.
    pub volume_samples: usize,
    pub batches: usize,
    pub sampler: SamplerConfig,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        Self {
            method: IntegralMethod::Telescoping,
            eps: 0.05,
            min_stage_samples: 500,
            variance_limit: 0.25,
            direct_samples: 20_000,
            volume_samples: 200_000,
            batches: 20,
            sampler: SamplerConfig::default(),
        }
    }
}

impl IntegralConfig {
    /// Points drawn per telescoping stage in intrinsic dimension `d`.
    pub fn stage_samples(&self, d: usize) -> usize {
        let n = ((d.max(1) as f64).sqrt() / (self.eps * self.eps)).ceil() as usize;
        n.max(self.min_stage_samples).max(2 * self.batches)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 0.5), got {}", self.eps)));
        }
        if !(self.variance_limit > 0.0) || self.batches < 2 || self.direct_samples < self.batches {
            return Err(Error::InvalidParameter("variance limit must be positive and batches ≥ 2".into()));
        }
        Ok(())
    }
}

/// Outcome class of a set of component integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralStatus {
    Estimated,
    /// `S` is empty (or has no interior): every `c_k = 0`.
    Empty,
    /// `S = P`: every `c_k = 1`.
    Full,
}

/// `c_k = ∫_S π_k` for every mixture component, with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentIntegrals<T> {
    pub c: Array1<T>,
    pub se: Array1<T>,
    pub r: Array1<T>,
    pub r_star: T,
    pub status: IntegralStatus,
    /// Points drawn for this estimate, including the shared `P` side.
    pub samples: usize,
}

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Estimate<T> {
    pub value: T,
    pub se: T,
}

/// Draws successive batches of `e^{βh}` on one domain, warm-starting each
/// chain where the previous one stopped.
struct StageSampler<'a, T: Scalar> {
    fd: &'a FullDimDomain<T>,
    h: &'a dyn ConcaveFn<T>,
    config: SamplerConfig,
    count: usize,
    warm: Option<Array1<T>>,
    stage: u64,
    drawn: usize,
}

impl<'a, T: Scalar> StageSampler<'a, T> {
    fn draw(&mut self, beta: T) -> Result<Vec<T>> {
        let mut cfg = self.config.clone();
        cfg.seed = derive_seed(self.config.seed, self.stage);
        self.stage += 1;
        let flat: &dyn ConcaveFn<T> = &Flat;
        let density = if beta == T::zero() {
            if self.fd.is_bare_simplex() {
                cfg.walk = Walk::ExactSimplex;
            }
            LogConcaveDensity::new(self.fd, flat, T::zero())?
        } else {
            LogConcaveDensity::new(self.fd, self.h, beta)?
        };
        let mut chain = Chain::new(density, &cfg, self.warm.clone())?;
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let x = chain.next_portfolio()?;
            out.push(self.h.value(x.view()));
        }
        if beta > T::zero() {
            self.warm = Some(chain.position().clone());
        }
        self.drawn += self.count;
        Ok(out)
    }
}

/// `(ln(Z(α)/vol), Σ rel_se²)` at each ascending target `α`, where
/// `Z(β) = ∫ e^{βh}`. Starting at `β = 0`, each stage samples at the
/// current `β` and averages `e^{(β' − β)h}`; `β'` grows geometrically and is
/// pulled back towards `β` while the summands' relative variance exceeds
/// the limit.
fn log_partition_ladder<T: Scalar>(
    sampler: &mut StageSampler<'_, T>,
    targets: &[T],
    beta1: T,
    growth: T,
    variance_limit: T,
    batches: usize,
) -> Result<Vec<(T, T)>> {
    let mut out = Vec::with_capacity(targets.len());
    let mut cur = T::zero();
    let mut log_z = T::zero();
    let mut rel_var = T::zero();
    let mut h = None;
    for &target in targets {
        while cur < target {
            let hv = match &h {
                Some(v) => v,
                None => h.insert(sampler.draw(cur)?),
            };
            let mut next = if cur == T::zero() { beta1.min(target) } else { (cur * growth).min(target) };
            let (shift, w) = loop {
                let dbeta = next - cur;
                let shift = hv.iter().fold(T::neg_infinity(), |m, &v| m.max(dbeta * v));
                let w: Vec<T> = hv.iter().map(|&v| (dbeta * v - shift).exp()).collect();
                let n = T::from_usize_lossy(w.len());
                let mean = w.iter().copied().sum::<T>() / n;
                let var = w.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                let small = if cur == T::zero() { next <= beta1 * T::lit(1e-9) } else { next - cur <= cur * T::lit(1e-6) };
                if var <= variance_limit * mean * mean || small {
                    break (shift, w);
                }
                next = if cur == T::zero() { next * T::lit(0.5) } else { (cur * next).sqrt() };
            };
            let (mean, se) = batch_means(&w, batches);
            log_z += mean.ln() + shift;
            rel_var += (se / mean) * (se / mean);
            cur = next;
            h = None;
        }
        out.push((log_z, rel_var));
    }
    Ok(out)
}

/// Estimates component integrals for any `(R, R*)` against one mixture,
/// computing the `R`-independent `P` side once.
pub struct ComponentIntegrator<'a, T: Scalar> {
    mixture: &'a MixtureStrategy<T>,
    domain: &'a PortfolioDomain<T>,
    fd: FullDimDomain<T>,
    config: IntegralConfig,
    fns: Vec<NegUtility<T>>,
    beta1: Vec<T>,
    p_side: PSide<T>,
    p_samples: usize,
}

enum PSide<T> {
    /// `(ln(Z_P/vol P), Σ rel_se²)` per component.
    Telescoping(Vec<(T, T)>),
    /// `N × n` sample matrix per component.
    Direct(Vec<Array2<T>>),
}

impl<'a, T: Scalar> ComponentIntegrator<'a, T> {
    pub fn new(mixture: &'a MixtureStrategy<T>, domain: &'a PortfolioDomain<T>, config: &IntegralConfig) -> Result<Self> {
        config.validate()?;
        if domain.n_assets() != mixture.n_assets() {
            return Err(Error::DimensionMismatch { expected: mixture.n_assets(), got: domain.n_assets() });
        }
        let fd = domain.full_dimensionalize()?;
        let fns: Vec<NegUtility<T>> = mixture
            .groups()
            .iter()
            .map(|g| g.exponent.concave_fn(mixture.sigma().view(), mixture.mu().view(), g.proposal.view()))
            .collect();
        let vertices = domain.portfolio_vertices();
        let beta1 = mixture
            .groups()
            .iter()
            .zip(&fns)
            .map(|(g, f)| {
                let mut hi = f.value(g.proposal.view());
                let mut lo = hi;
                for v in &vertices {
                    let hv = f.value(v.view());
                    hi = hi.max(hv);
                    lo = lo.min(hv);
                }
                if hi > lo {
                    (hi - lo).recip()
                } else {
                    T::one()
                }
            })
            .collect();
        let mut out = Self { mixture, domain, fd, config: config.clone(), fns, beta1, p_side: PSide::Telescoping(Vec::new()), p_samples: 0 };
        let (p_side, drawn) = match config.method {
            IntegralMethod::Telescoping => {
                let (v, n) = out.telescope(&out.fd, 0)?;
                (PSide::Telescoping(v), n)
            }
            IntegralMethod::Direct => {
                let (v, n) = out.direct_samples()?;
                (PSide::Direct(v), n)
            }
        };
        out.p_side = p_side;
        out.p_samples = drawn;
        Ok(out)
    }

    pub fn mixture(&self) -> &MixtureStrategy<T> {
        self.mixture
    }

    pub fn config(&self) -> &IntegralConfig {
        &self.config
    }

    /// Per-component sample matrices on `P` (direct method only).
    pub fn component_samples(&self) -> Option<&[Array2<T>]> {
        match &self.p_side {
            PSide::Direct(v) => Some(v),
            PSide::Telescoping(_) => None,
        }
    }

    fn growth(&self) -> T {
        let d = T::from_usize_lossy(self.fd.dim().max(2));
        (T::one() - d.sqrt().recip()).recip()
    }

    /// Telescoping ladders of every group on `fd`, in component order.
    fn telescope(&self, fd: &FullDimDomain<T>, side: u64) -> Result<(Vec<(T, T)>, usize)> {
        let m2 = self.mixture.m2();
        let count = self.config.stage_samples(fd.dim());
        let growth = self.growth();
        let limit = T::lit(self.config.variance_limit);
        let per_group = self
            .mixture
            .groups()
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let mut order: Vec<usize> = (0..m2).collect();
                order.sort_by(|&a, &b| g.alphas[a].partial_cmp(&g.alphas[b]).expect("finite alpha"));
                let targets: Vec<T> = order.iter().map(|&j| g.alphas[j]).collect();
                let mut cfg = self.config.sampler.clone();
                cfg.seed = derive_seed(self.config.sampler.seed, 2 * i as u64 + side);
                let mut sampler = StageSampler { fd, h: &self.fns[i], config: cfg, count, warm: None, stage: 0, drawn: 0 };
                let ladder = log_partition_ladder(&mut sampler, &targets, self.beta1[i], growth, limit, self.config.batches)?;
                let mut vals = vec![(T::zero(), T::zero()); m2];
                for (k, &j) in order.iter().enumerate() {
                    vals[j] = ladder[k];
                }
                Ok((vals, sampler.drawn))
            })
            .collect::<Result<Vec<_>>>()?;
        let drawn = per_group.iter().map(|g| g.1).sum();
        Ok((per_group.into_iter().flat_map(|g| g.0).collect(), drawn))
    }

    fn direct_samples(&self) -> Result<(Vec<Array2<T>>, usize)> {
        let fns = self.mixture.concave_fns();
        let alphas = self.mixture.alphas();
        let n = self.mixture.n_assets();
        let count = self.config.direct_samples;
        let mats = (0..fns.len())
            .into_par_iter()
            .map(|k| {
                let mut cfg = self.config.sampler.clone();
                cfg.seed = derive_seed(self.config.sampler.seed, k as u64);
                let flat: &dyn ConcaveFn<T> = &Flat;
                let density = if alphas[k] == T::zero() {
                    if self.fd.is_bare_simplex() {
                        cfg.walk = Walk::ExactSimplex;
                    }
                    LogConcaveDensity::new(&self.fd, flat, T::zero())?
                } else {
                    LogConcaveDensity::new(&self.fd, &fns[k], alphas[k])?
                };
                let mut chain = Chain::new(density, &cfg, None)?;
                let mut mat = Array2::zeros((count, n));
                for mut row in mat.rows_mut() {
                    row.assign(&chain.next_portfolio()?);
                }
                Ok(mat)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((mats, count * fns.len()))
    }

    /// Fraction of `P`'s volume in `{R·x ≤ R*}`, with its relative variance.
    fn volume_fraction(&self, r: ArrayView1<'_, T>, r_star: T) -> Result<(T, T, usize)> {
        if self.domain.is_simplex() {
            return Ok((varsi_fraction(r, r_star), T::zero(), 0));
        }
        let mut cfg = self.config.sampler.clone();
        cfg.seed = derive_seed(self.config.sampler.seed, u64::MAX);
        let flat: &dyn ConcaveFn<T> = &Flat;
        let mut chain = Chain::new(LogConcaveDensity::new(&self.fd, flat, T::zero())?, &cfg, None)?;
        let count = self.config.volume_samples;
        let mut hits = Vec::with_capacity(count);
        for _ in 0..count {
            let x = chain.next_portfolio()?;
            hits.push(if r.dot(&x) <= r_star { T::one() } else { T::zero() });
        }
        let (f, se) = batch_means(&hits, self.config.batches);
        let rel = if f > T::zero() { (se / f) * (se / f) } else { T::zero() };
        Ok((f, rel, count))
    }

    /// `c_k` for `S = P ∩ {R·x ≤ R*}`.
    pub fn integrate(&self, r: ArrayView1<'_, T>, r_star: T) -> Result<ComponentIntegrals<T>> {
        let n = self.mixture.n_assets();
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
        if !r_star.is_finite() || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("returns must be finite".into()));
        }
        let m = self.mixture.len();
        let vertices = self.domain.portfolio_vertices();
        let (lo, hi) = vertices.iter().fold((T::infinity(), T::neg_infinity()), |(l, u), v| {
            let x = r.dot(v);
            (l.min(x), u.max(x))
        });
        let constant = |value: T, status| ComponentIntegrals {
            c: Array1::from_elem(m, value),
            se: Array1::zeros(m),
            r: r.to_owned(),
            r_star,
            status,
            samples: 0,
        };
        if r_star >= hi {
            return Ok(constant(T::one(), IntegralStatus::Full));
        }
        if r_star < lo {
            return Ok(constant(T::zero(), IntegralStatus::Empty));
        }
        match &self.p_side {
            PSide::Direct(mats) => {
                let (c, se): (Vec<T>, Vec<T>) = mats
                    .iter()
                    .map(|mat| {
                        let hits: Vec<T> = mat.dot(&r).iter().map(|&v| if v <= r_star { T::one() } else { T::zero() }).collect();
                        batch_means(&hits, self.config.batches)
                    })
                    .unzip();
                Ok(ComponentIntegrals {
                    c: Array1::from(c),
                    se: Array1::from(se),
                    r: r.to_owned(),
                    r_star,
                    status: IntegralStatus::Estimated,
                    samples: self.p_samples,
                })
            }
            PSide::Telescoping(p) => {
                let section = HalfspaceSection::new(r.to_owned(), r_star);
                let s_fd = match self.fd.intersect(self.domain, &section) {
                    Ok(s) => s,
                    Err(Error::Region(_)) => return Ok(constant(T::zero(), IntegralStatus::Empty)),
                    Err(e) => return Err(e),
                };
                let (frac, frac_var, vol_draws) = self.volume_fraction(r, r_star)?;
                if !(frac > T::zero()) {
                    return Ok(constant(T::zero(), IntegralStatus::Empty));
                }
                let (s, drawn) = self.telescope(&s_fd, 1)?;
                let mut c = Array1::zeros(m);
                let mut se = Array1::zeros(m);
                for k in 0..m {
                    let ck = frac * (s[k].0 - p[k].0).exp();
                    let rel = (s[k].1 + p[k].1 + frac_var).sqrt();
                    c[k] = ck.min(T::one()).max(T::zero());
                    se[k] = ck * rel;
                }
                Ok(ComponentIntegrals {
                    c,
                    se,
                    r: r.to_owned(),
                    r_star,
                    status: IntegralStatus::Estimated,
                    samples: self.p_samples + drawn + vol_draws,
                })
            }
        }
    }
}

/// One-shot [`ComponentIntegrator`] evaluation.
pub fn component_integrals<T: Scalar>(
    mixture: &MixtureStrategy<T>,
    domain: &PortfolioDomain<T>,
    r: ArrayView1<'_, T>,
    r_star: T,
    config: &IntegralConfig,
) -> Result<ComponentIntegrals<T>> {
    ComponentIntegrator::new(mixture, domain, config)?.integrate(r, r_star)
}

/// `⟨c, w⟩` with standard error `√(Σ w_k² se_k²)`; equal weights give
/// `mean(c)`.
pub fn score<T: Scalar>(integrals: &ComponentIntegrals<T>, w: &[T]) -> Result<Estimate<T>> {
    let m = integrals.c.len();
    if w.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: w.len() });
    }
    let value = if w.iter().all(|&v| v == w[0]) && (w[0] * T::from_usize_lossy(m) - T::one()).abs() <= T::epsilon() * T::lit(4.0) {
        integrals.c.sum() / T::from_usize_lossy(m)
    } else {
        integrals.c.iter().zip(w).map(|(&c, &v)| c * v).sum()
    };
    let se = integrals.se.iter().zip(w).map(|(&s, &v)| s * s * v * v).sum::<T>().sqrt();
    Ok(Estimate { value, se })
}

/// `⟨c, w⟩` at a weight estimate with its own standard errors.
fn score_at<T: Scalar>(integrals: &ComponentIntegrals<T>, w: &Array1<T>, w_se: &Array1<T>) -> Result<Estimate<T>> {
    let base = score(integrals, w.as_slice().expect("contiguous weights"))?;
    let extra = integrals.c.iter().zip(w_se).map(|(&c, &s)| c * c * s * s).sum::<T>();
    Ok(Estimate { value: base.value, se: (base.se * base.se + extra).sqrt() })
}

/// Extreme and mean scores over a weight region.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRange<T> {
    pub s_min: Estimate<T>,
    pub argmin: Array1<T>,
    pub s_max: Estimate<T>,
    pub argmax: Array1<T>,
    pub s_mean: Estimate<T>,
    /// Center of mass of the region.
    pub center: Array1<T>,
}

/// `s_min`, `s_max` by linear programming over `Q`, and `s̄` at the center
/// of mass of `Q` (exactly `1/M` on the simplex).
pub fn min_max_mean_scores<T: Scalar>(
    integrals: &ComponentIntegrals<T>,
    region: &WeightRegion<T>,
    config: &BoltzmannConfig,
) -> Result<ScoreRange<T>> {
    let m = integrals.c.len();
    if region.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: region.dim() });
    }
    let (_, argmin) = region.optimize(&integrals.c, false)?;
    let (_, argmax) = region.optimize(&integrals.c, true)?;
    let center = boltzmann_center(region, &Array1::zeros(m), T::infinity(), config)?;
    Ok(ScoreRange {
        s_min: score(integrals, argmin.as_slice().expect("contiguous"))?,
        s_max: score(integrals, argmax.as_slice().expect("contiguous"))?,
        s_mean: score_at(integrals, &center.w, &center.se)?,
        argmin,
        argmax,
        center: center.w,
    })
}

/// One point of the parametric curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPoint<T> {
    pub temperature: T,
    pub score: Estimate<T>,
    /// Boltzmann center of mass at this temperature.
    pub weights: Array1<T>,
}

/// `s(T_i) = ⟨c, E_{p_{T_i}}[w]⟩` with `p_T ∝ exp(⟨r, w⟩/T)` on `Q`;
/// temperatures are independent tasks with derived seeds.
pub fn parametric_score<T: Scalar>(
    integrals: &ComponentIntegrals<T>,
    region: &WeightRegion<T>,
    r: &Array1<T>,
    temperatures: &[T],
    config: &BoltzmannConfig,
) -> Result<Vec<ParametricPoint<T>>> {
    let m = integrals.c.len();
    if region.dim() != m || r.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: region.dim().min(r.len()) });
    }
    temperatures
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut cfg = config.clone();
            cfg.sampler.seed = derive_seed(config.sampler.seed, i as u64);
            let center = boltzmann_center(region, r, t, &cfg)?;
            Ok(ParametricPoint { temperature: t, score: score_at(integrals, &center.w, &center.se)?, weights: center.w })
        })
        .collect()
}

/// Everything reported for one portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport<T> {
    pub label: String,
    pub portfolio: Array1<T>,
    pub integrals: ComponentIntegrals<T>,
    pub weights: Vec<T>,
    pub score: Estimate<T>,
    pub range: ScoreRange<T>,
    pub curve: Vec<ParametricPoint<T>>,
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct ReportRecord<'a, T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
    label: &'a str,
    portfolio: Vec<T>,
    r: Vec<T>,
    r_star: T,
    status: IntegralStatus,
    c: Vec<T>,
    c_se: Vec<T>,
    samples: usize,
    weights: Vec<T>,
    score: Estimate<T>,
    s_min: Estimate<T>,
    argmin: Vec<T>,
    s_max: Estimate<T>,
    argmax: Vec<T>,
    s_mean: Estimate<T>,
    curve: Vec<CurveRecord<T>>,
}

#[derive(Serialize)]
#[serde(bound = "T: Scalar")]
struct CurveRecord<T> {
    temperature: Option<T>,
    score: Estimate<T>,
    weights: Vec<T>,
}

impl<T: Scalar> ScoreReport<T> {
    /// Assembles the report; the curve may be empty.
    pub fn new(
        label: impl Into<String>,
        portfolio: Array1<T>,
        integrals: ComponentIntegrals<T>,
        weights: Vec<T>,
        range: ScoreRange<T>,
        curve: Vec<ParametricPoint<T>>,
    ) -> Result<Self> {
        let s = score(&integrals, &weights)?;
        Ok(Self { label: label.into(), portfolio, integrals, weights, score: s, range, curve })
    }

    fn record<'a>(&'a self, config_hash: Option<&'a str>) -> ReportRecord<'a, T> {
        ReportRecord {
            config_hash,
            label: &self.label,
            portfolio: self.portfolio.to_vec(),
            r: self.integrals.r.to_vec(),
            r_star: self.integrals.r_star,
            status: self.integrals.status,
            c: self.integrals.c.to_vec(),
            c_se: self.integrals.se.to_vec(),
            samples: self.integrals.samples,
            weights: self.weights.clone(),
            score: self.score,
            s_min: self.range.s_min,
            argmin: self.range.argmin.to_vec(),
            s_max: self.range.s_max,
            argmax: self.range.argmax.to_vec(),
            s_mean: self.range.s_mean,
            curve: self
                .curve
                .iter()
                .map(|p| CurveRecord {
                    temperature: p.temperature.is_finite().then_some(p.temperature),
                    score: p.score,
                    weights: p.weights.to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, config_hash: Option<&str>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record(config_hash))?)
    }

    /// Several reports as one JSON array.
    pub fn many_to_json(reports: &[Self], config_hash: Option<&str>) -> Result<String> {
        let recs: Vec<_> = reports.iter().map(|r| r.record(config_hash)).collect();
        Ok(serde_json::to_string_pretty(&recs)?)
    }

    /// `index,temperature,score,se` rows; an infinite temperature is written as `inf`.
    pub fn write_curve_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "index,temperature,score,se")?;
        for (i, p) in self.curve.iter().enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, p.temperature, p.score.value, p.score.se)?;
        }
        Ok(())
    }
}

/// Parametric curves of several reports, score against ladder index.
pub fn curves_svg<T: Scalar>(reports: &[ScoreReport<T>], title: &str, comment: Option<&str>) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> = reports
        .iter()
        .map(|r| {
            let pts = r.curve.iter().enumerate().map(|(i, p)| ((i + 1) as f64, p.score.value.as_f64())).collect();
            (r.label.clone(), pts)
        })
        .collect();
    svg::curves(&series, title, comment)
}

/// Settings of [`score_distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionConfig {
    pub draws: usize,
    pub seed: u64,
}

impl Default for DistributionConfig {
    fn default() -> Self {
        Self { draws: 10_000, seed: 0 }
    }
}

/// Scores of one portfolio under random returns and their bounded
/// kernel density.
#[derive(Debug, Clone)]
pub struct ScoreDistribution {
    pub scores: Vec<f64>,
    pub density: BoundedDensity,
}

impl ScoreDistribution {
    /// `x,density` rows on `points` grid nodes (a point mass is written as one row).
    pub fn write_csv<W: Write>(&self, mut w: W, points: usize, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "x,density")?;
        match &self.density {
            BoundedDensity::PointMass(x) => writeln!(w, "{x},inf")?,
            d => {
                for (x, y) in d.grid(points) {
                    writeln!(w, "{x},{y}")?;
                }
            }
        }
        Ok(())
    }
}

/// Distribution of the score of `x` for `R ~ N(μ, Σ)`, one per weight
/// vector. Every draw reuses the same per-component samples on `P`
/// (the direct estimator), so `c(R)` is a count per component.
pub fn score_distribution<T: Scalar>(
    integrator: &ComponentIntegrator<'_, T>,
    x: ArrayView1<'_, T>,
    mu: ArrayView1<'_, T>,
    sigma: ArrayView2<'_, T>,
    weights: &[Vec<T>],
    config: &DistributionConfig,
) -> Result<Vec<ScoreDistribution>> {
    let mats = integrator
        .component_samples()
        .ok_or_else(|| Error::InvalidParameter("score distributions need the direct integral method".into()))?;
    let n = x.len();
    if mu.len() != n || sigma.dim() != (n, n) || mats[0].ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    let m = mats.len();
    if let Some(w) = weights.iter().find(|w| w.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: w.len() });
    }
    if config.draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    let root = psd_sqrt(sigma)?;
    // Differences p − x, so a draw only needs the sign of (p − x)·R.
    let diffs: Vec<Array2<T>> = mats.iter().map(|mat| mat - &x.insert_axis(ndarray::Axis(0))).collect();
    let per_draw: Vec<Vec<f64>> = (0..config.draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64));
            let z = Array1::from_shape_fn(n, |_| T::lit(StandardNormal.sample(&mut rng)));
            let r = &mu + &root.dot(&z);
            let c: Vec<f64> = diffs
                .iter()
                .map(|d| {
                    let hits = d.dot(&r).iter().filter(|&&v| v <= T::zero()).count();
                    hits as f64 / d.nrows() as f64
                })
                .collect();
            weights.iter().map(|w| c.iter().zip(w).map(|(a, b)| a * b.as_f64()).sum::<f64>().clamp(0.0, 1.0)).collect()
        })
        .collect();
    Ok((0..weights.len())
        .map(|j| {
            let scores: Vec<f64> = per_draw.iter().map(|d| d[j]).collect();
            let density = BoundedDensity::fit(&scores);
            ScoreDistribution { scores, density }
        })
        .collect())
}

/// Classic performance measures over an evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicMeasures {
    /// Mean excess return over the benchmark.
    pub excess_mean: f64,
    /// `excess_mean / sd(excess)`; undefined when the excess is constant.
    pub sharpe: Option<f64>,
    /// Mean return over the risk-free portfolio divided by the downside
    /// deviation; undefined without downside.
    pub sortino: Option<f64>,
    pub jensen_alpha: f64,
    pub beta: f64,
    /// Fraction of the simplex outperformed at the window's mean returns.
    pub cross_sectional: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sharpe (vs. `benchmark`), Sortino and Jensen's alpha (vs. `risk_free`,
/// market = `benchmark`) and the cross-sectional score of `x`.
///
/// `returns` is `T × n`. The benchmark defaults to equal weights; the
/// risk-free portfolio defaults to the global minimum-variance portfolio
/// of the window's sample covariance.
pub fn classic_measures<T: Scalar>(
    x: ArrayView1<'_, T>,
    returns: ArrayView2<'_, T>,
    benchmark: Option<ArrayView1<'_, T>>,
    risk_free: Option<ArrayView1<'_, T>>,
) -> Result<ClassicMeasures> {
    let (t, n) = returns.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if t == 0 {
        return Err(Error::InsufficientData("empty evaluation window".into()));
    }
    let ew = Array1::from_elem(n, T::from_usize_lossy(n).recip());
    let bench = benchmark.map(|b| b.to_owned()).unwrap_or(ew);
    let rf = match risk_free {
        Some(v) => v.to_owned(),
        None => {
            let cov = sample_covariance(returns);
            min_max_volatility(&PortfolioDomain::simplex(n), cov.view())?.gmv
        }
    };
    if bench.len() != n || rf.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bench.len().min(rf.len()) });
    }
    let series = |w: &Array1<T>| -> Vec<f64> { returns.dot(w).iter().map(|v| v.as_f64()).collect() };
    let p = series(&x.to_owned());
    let b = series(&bench);
    let f = series(&rf);
    let excess: Vec<f64> = p.iter().zip(&b).map(|(a, c)| a - c).collect();
    let excess_mean = mean(&excess);
    let sd = if t > 1 {
        (excess.iter().map(|e| (e - excess_mean).powi(2)).sum::<f64>() / (t - 1) as f64).sqrt()
    } else {
        0.0
    };
    let sharpe = (sd > 0.0).then(|| excess_mean / sd);
    let over_rf: Vec<f64> = p.iter().zip(&f).map(|(a, c)| a - c).collect();
    let downside = (over_rf.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>() / t as f64).sqrt();
    let sortino = (downside > 0.0).then(|| mean(&over_rf) / downside);
    let market: Vec<f64> = b.iter().zip(&f).map(|(a, c)| a - c).collect();
    let (mp, mm) = (mean(&over_rf), mean(&market));
    let var_m = market.iter().map(|v| (v - mm).powi(2)).sum::<f64>();
    let cov_pm = over_rf.iter().zip(&market).map(|(a, c)| (a - mp) * (c - mm)).sum::<f64>();
    let beta = if var_m > 0.0 { cov_pm / var_m } else { 0.0 };
    let mean_r: Array1<T> = returns.mean_axis(ndarray::Axis(0)).expect("nonempty window");
    let cross_sectional = varsi_fraction(mean_r.view(), mean_r.dot(&x)).as_f64();
    Ok(ClassicMeasures { excess_mean, sharpe, sortino, jensen_alpha: mp - beta * mm, beta, cross_sectional })
}

/// Copula of `(R·x, xᵀΣx)` for portfolios drawn from the mixture, with
/// cells defined by the uniform measure on the simplex (exact return
/// levels, volatility quantiles of `sample_count` uniform points).
pub fn mixed_strategy_copula<T: Scalar>(
    mixture: &MixtureStrategy<T>,
    domain: &PortfolioDomain<T>,
    r: ArrayView1<'_, T>,
    sigma: ArrayView2<'_, T>,
    m: usize,
    sample_count: usize,
    sampler: &SamplerConfig,
) -> Result<Copula<T>> {
    let n = r.len();
    if !domain.is_simplex() || domain.n_assets() != n || mixture.n_assets() != n {
        return Err(Error::InvalidParameter("mixed-strategy copulae are defined on the simplex of the mixture".into()));
    }
    if sigma.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n * n, got: sigma.len() });
    }
    if m < 2 || sample_count < m * m {
        return Err(Error::InvalidParameter(format!("need m ≥ 2 and at least m² samples, got m = {m}, {sample_count}")));
    }
    let rl = return_levels(r, m)?;
    let uniform = sample_simplex_uniform::<T>(n, sample_count, derive_seed(sampler.seed, 1))?;
    let vl = volatility_levels(sigma, m, &uniform)?;
    let fd = domain.full_dimensionalize()?;
    let draws = mixture.sample(&fd, sample_count, sampler)?;
    let pairs: Vec<(T, T)> = draws.points.iter().map(|x| (r.dot(x), quad_form(sigma, x.view()))).collect();
    let mass = count_cells(&pairs, &rl, &vl.values)?;
    Copula::with_levels(mass, rl, vl.values, sample_count)
}
