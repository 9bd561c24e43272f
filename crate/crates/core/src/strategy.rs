//! Allocation strategies as truncated log-concave densities `∝ e^{α·h}`,
//! their mixtures, and the investor compositions (mixture weights) over a
//! weight region.
//!
//! A strategy group shares one exponent `h` (one formal proposal) and owns a
//! ladder of dispersion parameters `α`; components are laid out group-major
//! (see [`strategy_index`]).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{min_max_volatility, minimize_quadratic_utility, FullDimDomain, PortfolioDomain};
use crate::linalg::quad_form;
use crate::lp::LinearProgram;
use crate::sampler::{
    anneal_down, anneal_up, derive_seed, equidistant_alpha_sequence, sample_mixture, Chain,
    AnnealModel, ConcaveFn, Flat, Linear, LogConcaveDensity, McmcAnnealModel, MixtureSample, NegUtility,
    SamplerConfig,
};
use crate::stats::batch_means;
use crate::{Error, Result, Scalar};

/// Exponent family of a strategy density `∝ e^{α·h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Exponent<T> {
    /// `h = φ_q(x̃) − φ_q(x)` with `φ_q(x) = xᵀΣx − q·μᵀx`.
    Utility { q: T },
    /// `h = −(x − c)ᵀΣ(x − c)`, a dispersion family around a fixed portfolio.
    Anchored { center: Vec<T> },
}

impl<T: Scalar> Exponent<T> {
    /// The exponent as a concave function; `proposal` is its maximizer.
    pub fn concave_fn(&self, sigma: ArrayView2<'_, T>, mu: ArrayView1<'_, T>, proposal: ArrayView1<'_, T>) -> NegUtility<T> {
        match self {
            Exponent::Utility { q } => {
                let f = NegUtility::new(sigma.to_owned(), mu.to_owned(), *q, T::zero());
                let offset = f.utility(proposal);
                NegUtility::new(sigma.to_owned(), mu.to_owned(), *q, offset)
            }
            Exponent::Anchored { center } => {
                let c = Array1::from(center.clone());
                let sc = sigma.dot(&c);
                let offset = -c.dot(&sc);
                NegUtility::new(sigma.to_owned(), sc * T::lit(2.0), T::one(), offset)
            }
        }
    }

    pub fn q(&self) -> Option<T> {
        match self {
            Exponent::Utility { q } => Some(*q),
            Exponent::Anchored { .. } => None,
        }
    }
}

/// One allocation strategy: density `∝ e^{α·h}` on the portfolio domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<T> {
    pub exponent: Exponent<T>,
    pub alpha: T,
    /// Formal proposal `x̃`, the mode of the density.
    pub proposal: Array1<T>,
    /// `x̃ᵀΣx̃`.
    pub proposal_volatility: T,
}

/// Strategies sharing one exponent, indexed by dispersion level.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyGroup<T> {
    pub exponent: Exponent<T>,
    pub proposal: Array1<T>,
    pub proposal_volatility: T,
    /// Increasing dispersion parameters.
    pub alphas: Vec<T>,
}

/// Flat index of dispersion level `j` within risk group `i` (both 0-based)
/// when every group has `m2` levels.
pub fn strategy_index(i: usize, j: usize, m2: usize) -> usize {
    i * m2 + j
}

/// A mixture of strategies with investor-composition weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureStrategy<T> {
    sigma: Array2<T>,
    mu: Array1<T>,
    groups: Vec<StrategyGroup<T>>,
    weights: Vec<T>,
    v_min: T,
    v_max: T,
}

impl<T: Scalar> MixtureStrategy<T> {
    /// Equal weights unless `weights` is given; every group must have the
    /// same number of dispersion levels.
    pub fn new(
        sigma: Array2<T>,
        mu: Array1<T>,
        groups: Vec<StrategyGroup<T>>,
        weights: Option<Vec<T>>,
        volatility_range: (T, T),
    ) -> Result<Self> {
        let n = mu.len();
        if sigma.dim() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, got: sigma.nrows() });
        }
        let m2 = groups.first().map(|g| g.alphas.len()).unwrap_or(0);
        if groups.is_empty() || m2 == 0 || groups.iter().any(|g| g.alphas.len() != m2) {
            return Err(Error::InvalidParameter("groups must be nonempty with equal dispersion counts".into()));
        }
        if let Some(g) = groups.iter().find(|g| g.proposal.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: g.proposal.len() });
        }
        let m = groups.len() * m2;
        let weights = weights.unwrap_or_else(|| vec![T::from_usize_lossy(m).recip(); m]);
        let mut out = Self { sigma, mu, groups, weights: Vec::new(), v_min: volatility_range.0, v_max: volatility_range.1 };
        out.set_weights(weights)?;
        Ok(out)
    }

    /// Replaces the weights; they must lie on the simplex within 1e-12
    /// (then renormalized exactly).
    pub fn set_weights(&mut self, weights: Vec<T>) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: weights.len() });
        }
        if weights.iter().any(|&w| !(w >= T::zero())) {
            return Err(Error::InvalidWeights("weights must be nonnegative".into()));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        self.weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(())
    }

    pub fn sigma(&self) -> &Array2<T> {
        &self.sigma
    }

    pub fn mu(&self) -> &Array1<T> {
        &self.mu
    }

    pub fn groups(&self) -> &[StrategyGroup<T>] {
        &self.groups
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Dispersion levels per group.
    pub fn m2(&self) -> usize {
        self.groups[0].alphas.len()
    }

    /// Number of components `M`.
    pub fn len(&self) -> usize {
        self.groups.len() * self.m2()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `(v_min, v_max)` the behavioral rescaling of volatilities uses.
    pub fn volatility_range(&self) -> (T, T) {
        (self.v_min, self.v_max)
    }

    /// Components in index order.
    pub fn components(&self) -> Vec<Strategy<T>> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.alphas.iter().map(move |&alpha| Strategy {
                    exponent: g.exponent.clone(),
                    alpha,
                    proposal: g.proposal.clone(),
                    proposal_volatility: g.proposal_volatility,
                })
            })
            .collect()
    }

    /// The exponent of every component, in index order.
    pub fn concave_fns(&self) -> Vec<NegUtility<T>> {
        let per_group: Vec<NegUtility<T>> = self
            .groups
            .iter()
            .map(|g| g.exponent.concave_fn(self.sigma.view(), self.mu.view(), g.proposal.view()))
            .collect();
        (0..self.len()).map(|k| per_group[k / self.m2()].clone()).collect()
    }

    /// Dispersion parameters in index order.
    pub fn alphas(&self) -> Vec<T> {
        self.groups.iter().flat_map(|g| g.alphas.iter().copied()).collect()
    }

    /// `count` draws from the mixture on `domain`.
    pub fn sample(&self, domain: &FullDimDomain<T>, count: usize, config: &SamplerConfig) -> Result<MixtureSample<T>> {
        let fns = self.concave_fns();
        let alphas = self.alphas();
        let densities = fns
            .iter()
            .zip(&alphas)
            .map(|(f, &a)| LogConcaveDensity::new(domain, f, a))
            .collect::<Result<Vec<_>>>()?;
        sample_mixture(&densities, &self.weights, config, count)
    }

    pub fn to_json(&self, config_hash: Option<&str>) -> Result<String> {
        let record = MixtureRecord {
            config_hash: config_hash.map(str::to_owned),
            q_list: self.groups.iter().map(|g| g.exponent.q()).collect(),
            anchors: self
                .groups
                .iter()
                .map(|g| match &g.exponent {
                    Exponent::Anchored { center } => Some(center.clone()),
                    Exponent::Utility { .. } => None,
                })
                .collect(),
            alpha_grid: self.groups.iter().map(|g| g.alphas.clone()).collect(),
            weights: self.weights.clone(),
            sigma: self.sigma.outer_iter().map(|r| r.to_vec()).collect(),
            mu: self.mu.to_vec(),
            proposals: self.groups.iter().map(|g| g.proposal.to_vec()).collect(),
            proposal_volatilities: self.groups.iter().map(|g| g.proposal_volatility).collect(),
            v_min: self.v_min,
            v_max: self.v_max,
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MixtureRecord<T> = serde_json::from_str(text)?;
        let n = r.mu.len();
        if r.sigma.len() != n || r.sigma.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("sigma must be n×n".into()));
        }
        let sigma = Array2::from_shape_fn((n, n), |(i, j)| r.sigma[i][j]);
        let k = r.q_list.len();
        if r.anchors.len() != k || r.alpha_grid.len() != k || r.proposals.len() != k || r.proposal_volatilities.len() != k {
            return Err(Error::InvalidInput("per-group arrays differ in length".into()));
        }
        let groups = (0..k)
            .map(|i| {
                let exponent = match (&r.q_list[i], &r.anchors[i]) {
                    (Some(q), None) => Exponent::Utility { q: *q },
                    (None, Some(c)) => Exponent::Anchored { center: c.clone() },
                    _ => return Err(Error::InvalidInput(format!("group {i} needs exactly one of q or anchor"))),
                };
                Ok(StrategyGroup {
                    exponent,
                    proposal: Array1::from(r.proposals[i].clone()),
                    proposal_volatility: r.proposal_volatilities[i],
                    alphas: r.alpha_grid[i].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sigma, Array1::from(r.mu), groups, Some(r.weights), (r.v_min, r.v_max))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct MixtureRecord<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    q_list: Vec<Option<T>>,
    anchors: Vec<Option<Vec<T>>>,
    alpha_grid: Vec<Vec<T>>,
    weights: Vec<T>,
    sigma: Vec<Vec<T>>,
    mu: Vec<T>,
    proposals: Vec<Vec<T>>,
    proposal_volatilities: Vec<T>,
    v_min: T,
    v_max: T,
}

/// `Q = {w : A·w ≤ b, w ≥ 0, Σw = 1}`.
#[derive(Debug, Clone)]
pub struct WeightRegion<T> {
    m: usize,
    a: Array2<T>,
    b: Array1<T>,
    full_dim: Option<FullDimDomain<T>>,
    point: Option<Array1<T>>,
}

impl<T: Scalar> WeightRegion<T> {
    /// The simplex `Δ^{M−1}`.
    pub fn simplex(m: usize) -> Result<Self> {
        Self::new(Array2::zeros((0, m)), Array1::zeros(0))
    }

    /// Errors with [`Error::Region`] when `Q` is empty. A region pinned to
    /// a single point is accepted; other lower-dimensional regions are not.
    pub fn new(a: Array2<T>, b: Array1<T>) -> Result<Self> {
        let m = a.ncols();
        if m == 0 {
            return Err(Error::InvalidParameter("weight region needs M ≥ 1".into()));
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let mut out = Self { m, a, b, full_dim: None, point: None };
        let feasible = out.optimize(&Array1::zeros(m), false)?.1;
        if m == 1 {
            out.point = Some(feasible);
            return Ok(out);
        }
        let n_extra = out.a.nrows();
        let mut a_full = Array2::zeros((n_extra + m, m));
        a_full.slice_mut(ndarray::s![..n_extra, ..]).assign(&out.a);
        a_full.slice_mut(ndarray::s![n_extra.., ..]).assign(&(-Array2::<T>::eye(m)));
        let mut b_full = Array1::zeros(n_extra + m);
        b_full.slice_mut(ndarray::s![..n_extra]).assign(&out.b);
        let ones = Array2::ones((1, m));
        let one = Array1::ones(1);
        let bary = Array1::from_elem(m, T::from_usize_lossy(m).recip());
        let interior = (n_extra == 0).then(|| bary.view());
        match FullDimDomain::from_hrep(m, a_full, b_full, ones.view(), one.view(), interior, n_extra == 0) {
            Ok(fd) => out.full_dim = Some(fd),
            Err(Error::Region(_)) => {
                let pinned = (0..m).all(|k| {
                    let mut e = Array1::zeros(m);
                    e[k] = T::one();
                    match (out.optimize(&e, false), out.optimize(&e, true)) {
                        (Ok((lo, _)), Ok((hi, _))) => hi - lo <= T::tolerance().sqrt() * T::lit(1e-2),
                        _ => false,
                    }
                });
                if !pinned {
                    return Err(Error::Region("weight region is lower-dimensional".into()));
                }
                out.point = Some(feasible);
            }
            Err(e) => return Err(e),
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &Array2<T> {
        &self.a
    }

    pub fn b(&self) -> &Array1<T> {
        &self.b
    }

    /// No constraints beyond the simplex.
    pub fn is_simplex(&self) -> bool {
        self.a.nrows() == 0
    }

    /// Reduction for sampling; absent when `Q` is a single point.
    pub fn full_dim(&self) -> Option<&FullDimDomain<T>> {
        self.full_dim.as_ref()
    }

    /// The only element when `Q` is a single point.
    pub fn point(&self) -> Option<&Array1<T>> {
        self.point.as_ref()
    }

    /// Largest constraint violation of `w` (0 when feasible).
    pub fn residual(&self, w: ArrayView1<'_, T>) -> T {
        let sum = (w.sum() - T::one()).abs();
        let neg = w.iter().fold(T::zero(), |m, &v| m.max(-v));
        let extra = (self.a.dot(&w) - &self.b).iter().fold(T::zero(), |m, &v| m.max(v));
        sum.max(neg).max(extra)
    }

    /// `min` (or `max`) of `⟨c, w⟩` over `Q` with an optimal `w`.
    pub fn optimize(&self, c: &Array1<T>, maximize: bool) -> Result<(T, Array1<T>)> {
        if c.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: c.len() });
        }
        let objective = if maximize { c.mapv(|v| -v) } else { c.clone() };
        let sol = LinearProgram::new(objective)
            .with_inequalities(self.a.clone(), self.b.clone())
            .with_equalities(Array2::ones((1, self.m)), Array1::ones(1))
            .solve()
            .map_err(|e| Error::Region(format!("weight region: {e}")))?;
        let w = sol.x.mapv(|v| v.max(T::zero()));
        Ok((c.dot(&w), w))
    }
}

/// Shape of a behavioral function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehavioralShape {
    Constant,
    /// Logistic, increasing through `x0`.
    SigmoidRising { x0: f64 },
    /// Logistic, decreasing through `x0`.
    SigmoidFalling { x0: f64 },
    /// Gaussian bump peaking at `x0`.
    BumpMedium { x0: f64 },
    /// Piecewise-linear through `(t, value)` points with positive values.
    Table { points: Vec<(f64, f64)> },
}

/// A positive weight profile over a rescaled risk or dispersion level.
///
/// Parametric shapes are affinely rescaled so that `max/min = ratio`
/// exactly on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralFunction {
    pub shape: BehavioralShape,
    pub ratio: f64,
}

/// Logistic steepness of the sigmoid shapes.
pub const SIGMOID_STEEPNESS: f64 = 10.0;
/// Standard deviation of the bump shape.
pub const BUMP_WIDTH: f64 = 0.15;
/// Default `max/min` ratio of behavioral functions.
pub const DEFAULT_RATIO: f64 = 10.0;

impl BehavioralFunction {
    pub fn new(shape: BehavioralShape, ratio: f64) -> Result<Self> {
        let f = Self { shape, ratio };
        f.validate()?;
        Ok(f)
    }

    pub fn constant() -> Self {
        Self { shape: BehavioralShape::Constant, ratio: 1.0 }
    }

    pub fn rising(x0: f64) -> Self {
        Self { shape: BehavioralShape::SigmoidRising { x0 }, ratio: DEFAULT_RATIO }
    }

    pub fn falling(x0: f64) -> Self {
        Self { shape: BehavioralShape::SigmoidFalling { x0 }, ratio: DEFAULT_RATIO }
    }

    pub fn bump(x0: f64) -> Self {
        Self { shape: BehavioralShape::BumpMedium { x0 }, ratio: DEFAULT_RATIO }
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(BehavioralShape::Table { points }, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio >= 1.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!("behavioral ratio must be ≥ 1, got {}", self.ratio)));
        }
        match &self.shape {
            BehavioralShape::Table { points } => {
                if points.is_empty()
                    || points.iter().any(|&(t, v)| !(t.is_finite() && v > 0.0 && v.is_finite()))
                    || points.windows(2).any(|w| !(w[0].0 < w[1].0))
                {
                    return Err(Error::InvalidParameter(
                        "behavioral table needs increasing t and positive finite values".into(),
                    ));
                }
            }
            BehavioralShape::SigmoidRising { x0 } | BehavioralShape::SigmoidFalling { x0 } | BehavioralShape::BumpMedium { x0 } => {
                if !x0.is_finite() {
                    return Err(Error::InvalidParameter("behavioral x0 must be finite".into()));
                }
            }
            BehavioralShape::Constant => {}
        }
        Ok(())
    }

    /// Value at `t`, clamped to `[0, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = if t.is_nan() { 0.5 } else { t.clamp(0.0, 1.0) };
        let stretch = |g: f64, g_lo: f64, g_hi: f64| {
            if g_hi > g_lo {
                1.0 + (self.ratio - 1.0) * (g - g_lo) / (g_hi - g_lo)
            } else {
                1.0
            }
        };
        let logistic = |x0: f64, t: f64| 1.0 / (1.0 + (-SIGMOID_STEEPNESS * (t - x0)).exp());
        match &self.shape {
            BehavioralShape::Constant => 1.0,
            BehavioralShape::SigmoidRising { x0 } => stretch(logistic(*x0, t), logistic(*x0, 0.0), logistic(*x0, 1.0)),
            BehavioralShape::SigmoidFalling { x0 } => {
                stretch(logistic(*x0, 1.0 - t), logistic(*x0, 0.0), logistic(*x0, 1.0))
            }
            BehavioralShape::BumpMedium { x0 } => {
                let g = |t: f64| (-(t - x0).powi(2) / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp();
                let peak = g(x0.clamp(0.0, 1.0));
                let floor = g(0.0).min(g(1.0));
                stretch(g(t), floor, peak)
            }
            BehavioralShape::Table { points } => {
                let i = points.partition_point(|p| p.0 <= t);
                if i == 0 {
                    points[0].1
                } else if i == points.len() {
                    points[i - 1].1
                } else {
                    let (t0, v0) = points[i - 1];
                    let (t1, v1) = points[i];
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }
}

/// `z(t) = (t − c)/(d − c)` clamped to `[0, 1]`; `1/2` on a degenerate interval.
pub fn rescale<T: Scalar>(t: T, c: T, d: T) -> f64 {
    if d > c {
        ((t - c) / (d - c)).as_f64().clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Unnormalized bias `r`: `f_q(z(v_i))·f_{α,i}(z(α_ij))` at
/// [`strategy_index`]`(i, j)`, with volatilities rescaled over the mixture's
/// `[v_min, v_max]` and each group's `α` over its own ladder.
pub fn bias_vector<T: Scalar>(
    mixture: &MixtureStrategy<T>,
    f_q: &BehavioralFunction,
    f_alpha: &[BehavioralFunction],
) -> Result<Vec<f64>> {
    let groups = mixture.groups();
    if f_alpha.len() != groups.len() {
        return Err(Error::DimensionMismatch { expected: groups.len(), got: f_alpha.len() });
    }
    let (v_min, v_max) = mixture.volatility_range();
    let m2 = mixture.m2();
    let mut r = vec![0.0; mixture.len()];
    for (i, (g, fa)) in groups.iter().zip(f_alpha).enumerate() {
        let risk = f_q.eval(rescale(g.proposal_volatility, v_min, v_max));
        let (lo, hi) = (g.alphas[0], g.alphas[m2 - 1]);
        for (j, &a) in g.alphas.iter().enumerate() {
            r[strategy_index(i, j, m2)] = risk * fa.eval(rescale(a, lo, hi));
        }
    }
    Ok(r)
}

/// The bias vector normalized onto the simplex.
pub fn behavioral_weights<T: Scalar>(
    mixture: &MixtureStrategy<T>,
    f_q: &BehavioralFunction,
    f_alpha: &[BehavioralFunction],
) -> Result<Vec<T>> {
    let r = bias_vector(mixture, f_q, f_alpha)?;
    let total: f64 = r.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateFunctions);
    }
    Ok(r.iter().map(|v| T::lit(v / total)).collect())
}

/// Risk levels and their formal proposals.
#[derive(Debug, Clone)]
pub struct RiskSequence<T> {
    pub q: Vec<T>,
    /// Volatility targets `v_1 < … < v_M`.
    pub targets: Vec<T>,
    pub proposals: Vec<Array1<T>>,
    /// `x̃_iᵀΣx̃_i`, each within `tol` of its target.
    pub volatilities: Vec<T>,
    pub v_min: T,
    pub v_max: T,
    /// Volatility at the top of the efficient frontier (`q → ∞`).
    pub v_top: T,
}

fn qp_tolerance<T: Scalar>(sigma: ArrayView2<'_, T>, mu: ArrayView1<'_, T>, q: T) -> T {
    let smax = sigma.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mmax = mu.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    ((smax + q * mmax) * T::tolerance() * T::lit(0.1)).max(T::min_positive_value())
}

/// `q_1 < … < q_M` whose proposals have volatilities equidistant strictly
/// inside `(v_min, min(v_max, v_top))`.
///
/// The targets stop at the frontier top because no `q` reaches volatilities
/// above the maximum-return proposal.
pub fn risk_sequence<T: Scalar>(
    domain: &PortfolioDomain<T>,
    sigma: ArrayView2<'_, T>,
    mu: ArrayView1<'_, T>,
    m1: usize,
    tol: T,
) -> Result<RiskSequence<T>> {
    if m1 == 0 {
        return Err(Error::InvalidParameter("M1 must be at least 1".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let range = min_max_volatility(domain, sigma)?;
    let solve = |q: T| -> Result<(T, Array1<T>)> {
        let sol = minimize_quadratic_utility(domain, sigma, mu, q, qp_tolerance(sigma, mu, q))?;
        Ok((quad_form(sigma, sol.x.view()), sol.x))
    };
    let mut prev = solve(T::one())?.0;
    let mut v_top = prev;
    for j in 1..64 {
        let v = solve(T::lit(2f64.powi(j)))?.0;
        v_top = v;
        if (v - prev).abs() <= tol * T::lit(1e-3) {
            break;
        }
        prev = v;
    }
    let v_eff = range.v_max.min(v_top);
    if !(v_eff - range.v_min > tol) {
        return Err(Error::NonMonotoneFrontier { target: v_eff.as_f64() });
    }
    let step = (v_eff - range.v_min) / T::from_usize_lossy(m1 + 1);
    let targets: Vec<T> = (1..=m1).map(|i| range.v_min + step * T::from_usize_lossy(i)).collect();

    let bisect = |mut lo: T, mut hi: T, target: T| -> Result<(T, T, Array1<T>)> {
        let (vlo, xlo) = solve(lo)?;
        if (vlo - target).abs() <= tol {
            return Ok((lo, vlo, xlo));
        }
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            let (v, x) = solve(mid)?;
            if (v - target).abs() <= tol {
                return Ok((mid, v, x));
            }
            if v < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        Err(Error::NonMonotoneFrontier { target: target.as_f64() })
    };
    let v_last = targets[m1 - 1];
    let mut j = 0;
    while solve(T::lit(2f64.powi(j)))?.0 <= v_last {
        j += 1;
        if j > 64 {
            return Err(Error::NonMonotoneFrontier { target: v_last.as_f64() });
        }
    }
    let q_cap = T::lit(2f64.powi(j));
    let last = bisect(T::zero(), q_cap, v_last)?;
    let mut q = Vec::with_capacity(m1);
    let mut proposals = Vec::with_capacity(m1);
    let mut volatilities = Vec::with_capacity(m1);
    let mut lo = T::zero();
    for &target in &targets[..m1 - 1] {
        let (qi, vi, xi) = bisect(lo, last.0, target)?;
        lo = qi;
        q.push(qi);
        volatilities.push(vi);
        proposals.push(xi);
    }
    q.push(last.0);
    volatilities.push(last.1);
    proposals.push(last.2);
    Ok(RiskSequence { q, targets, proposals, volatilities, v_min: range.v_min, v_max: range.v_max, v_top })
}

/// Knobs of the `L2`-norm annealing used for dispersion and temperature ladders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    /// `‖π_{α_L}/U‖` threshold.
    pub norm_threshold: f64,
    /// Starting value of both schedules.
    pub alpha0: f64,
    /// Ball radius around the mode for the concentration test.
    pub delta: f64,
    /// Mass allowed outside the ball at `α_U`.
    pub epsilon: f64,
    /// Sub-samples in the concentration t-test.
    pub nu: usize,
    pub significance: f64,
    /// Samples drawn per visited `α`.
    pub samples: usize,
    /// Matching tolerance of consecutive norms in the equidistant ladder.
    pub tol: f64,
    pub sampler: SamplerConfig,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            norm_threshold: 1.1,
            alpha0: 1.0,
            delta: 0.1,
            epsilon: 0.05,
            nu: 10,
            significance: 0.05,
            samples: 1000,
            tol: 1e-3,
            sampler: SamplerConfig::default(),
        }
    }
}

/// An equidistant-in-norm ladder `α_L = α_1 < … < α_M`.
#[derive(Debug, Clone)]
pub struct DispersionLadder<T> {
    pub alpha_l: T,
    pub alpha_u: T,
    pub alphas: Vec<T>,
    /// Common norm between consecutive ladder densities.
    pub d: T,
}

fn ladder<T: Scalar>(
    domain: &FullDimDomain<T>,
    h: &dyn ConcaveFn<T>,
    mode: Array1<T>,
    count: usize,
    config: &AnnealConfig,
    level_distance: bool,
) -> Result<Option<DispersionLadder<T>>> {
    let mut model = McmcAnnealModel::new(domain, h, mode, config.sampler.clone(), config.samples);
    if level_distance {
        model = model.with_level_distance();
    }
    if model.is_flat()? {
        return Ok(None);
    }
    let alpha_l = anneal_down(&mut model, T::lit(config.norm_threshold), T::lit(config.alpha0))?;
    let up = anneal_up(&mut model, alpha_l, T::lit(config.delta), T::lit(config.epsilon), config.nu, config.significance)?;
    let d = up.max_norm();
    let alphas = if up.alpha_u > alpha_l {
        equidistant_alpha_sequence(&mut model, alpha_l, up.alpha_u, count, d, T::lit(config.tol))?
    } else {
        // Concentrated already at α_L: geometric spacing over one schedule step.
        let n = T::from_usize_lossy(model.dim());
        let hi = alpha_l * (T::one() + n.recip());
        equidistant_alpha_sequence(&mut model, alpha_l, hi, count, d, T::lit(config.tol))?
    };
    Ok(Some(DispersionLadder { alpha_l, alpha_u: up.alpha_u, alphas, d }))
}

/// `M2` increasing dispersion parameters for the density `∝ e^{α·h}` whose
/// mode is `mode` (portfolio coordinates).
pub fn dispersion_sequence<T: Scalar>(
    domain: &FullDimDomain<T>,
    h: &dyn ConcaveFn<T>,
    mode: ArrayView1<'_, T>,
    m2: usize,
    config: &AnnealConfig,
) -> Result<DispersionLadder<T>> {
    if m2 < 2 {
        return Err(Error::InvalidParameter(format!("M2 must be at least 2, got {m2}")));
    }
    ladder(domain, h, mode.to_owned(), m2, config, false)?
        .ok_or_else(|| Error::InvalidInput("the exponent is constant on the domain".into()))
}

/// Settings of [`build_mixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Risk levels.
    pub m1: usize,
    /// Dispersion levels per group.
    pub m2: usize,
    /// Volatility matching tolerance of the risk bisection.
    pub risk_tol: f64,
    /// Extra groups anchored at fixed portfolios.
    pub anchors: Vec<Vec<f64>>,
    pub anneal: AnnealConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { m1: 3, m2: 4, risk_tol: 1e-7, anchors: Vec::new(), anneal: AnnealConfig::default() }
    }
}

/// The `M1×M2` strategy grid (plus anchored groups) with equal weights.
/// Dispersion ladders of different groups are computed in parallel from
/// independent seeds. The volatility range used by behavioral rescaling is
/// `[v_min, min(v_max, v_top)]`.
pub fn build_mixture<T: Scalar>(
    domain: &PortfolioDomain<T>,
    sigma: ArrayView2<'_, T>,
    mu: ArrayView1<'_, T>,
    grid: &GridConfig,
) -> Result<MixtureStrategy<T>> {
    let scale = sigma.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let risk = risk_sequence(domain, sigma, mu, grid.m1, T::lit(grid.risk_tol) * scale.max(T::min_positive_value()))?;
    let fd = domain.full_dimensionalize()?;
    let mut specs: Vec<(Exponent<T>, Array1<T>)> = risk
        .q
        .iter()
        .zip(&risk.proposals)
        .map(|(&q, x)| (Exponent::Utility { q }, x.clone()))
        .collect();
    for c in &grid.anchors {
        let center: Vec<T> = c.iter().map(|&v| T::lit(v)).collect();
        let x = Array1::from(center.clone());
        if !domain.contains_portfolio(x.view(), T::lit(1e-9)) {
            return Err(Error::InvalidInput("anchor portfolio is not feasible".into()));
        }
        specs.push((Exponent::Anchored { center }, x));
    }
    let groups = specs
        .into_par_iter()
        .enumerate()
        .map(|(i, (exponent, proposal))| {
            let h = exponent.concave_fn(sigma, mu, proposal.view());
            let mut cfg = grid.anneal.clone();
            cfg.sampler.seed = derive_seed(grid.anneal.sampler.seed, i as u64);
            let lad = dispersion_sequence(&fd, &h, proposal.view(), grid.m2, &cfg)?;
            Ok(StrategyGroup {
                proposal_volatility: quad_form(sigma, proposal.view()),
                exponent,
                proposal,
                alphas: lad.alphas,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Rescale risk over the attainable proposal volatilities, not up to
    // the simplex maximum the frontier never reaches.
    MixtureStrategy::new(sigma.to_owned(), mu.to_owned(), groups, None, (risk.v_min, risk.v_max.min(risk.v_top)))
}

/// Settings of Boltzmann center estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoltzmannConfig {
    pub samples: usize,
    pub batches: usize,
    pub sampler: SamplerConfig,
}

impl Default for BoltzmannConfig {
    fn default() -> Self {
        Self { samples: 20_000, batches: 20, sampler: SamplerConfig::default() }
    }
}

/// A center-of-mass estimate with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Center<T> {
    pub w: Array1<T>,
    pub se: Array1<T>,
}

fn sample_center<T: Scalar>(points: &[Array1<T>], batches: usize) -> Center<T> {
    let m = points[0].len();
    let mut w = Array1::zeros(m);
    let mut se = Array1::zeros(m);
    for k in 0..m {
        let col: Vec<T> = points.iter().map(|p| p[k]).collect();
        let (mean, err) = batch_means(&col, batches);
        w[k] = mean;
        se[k] = err;
    }
    Center { w, se }
}

/// Center of mass of `p_T(w) ∝ exp(⟨r, w⟩/T)` on `Q` by log-concave
/// sampling; an infinite `T` gives the uniform center of mass (exactly
/// `1/M` on the simplex).
pub fn boltzmann_center<T: Scalar>(
    region: &WeightRegion<T>,
    r: &Array1<T>,
    temperature: T,
    config: &BoltzmannConfig,
) -> Result<Center<T>> {
    if r.len() != region.dim() {
        return Err(Error::DimensionMismatch { expected: region.dim(), got: r.len() });
    }
    if !(temperature > T::zero()) {
        return Err(Error::InvalidParameter(format!("temperature must be positive, got {temperature}")));
    }
    if let Some(p) = region.point() {
        return Ok(Center { w: p.clone(), se: Array1::zeros(p.len()) });
    }
    let fd = region.full_dim().expect("full-dimensional region");
    let m = region.dim();
    if temperature.is_infinite() && region.is_simplex() {
        return Ok(Center { w: Array1::from_elem(m, T::from_usize_lossy(m).recip()), se: Array1::zeros(m) });
    }
    let flat = Flat;
    let linear = Linear { r: r.clone() };
    let density = if temperature.is_infinite() {
        LogConcaveDensity::new(fd, &flat, T::zero())?
    } else {
        LogConcaveDensity::new(fd, &linear, temperature.recip())?
    };
    let mut cfg = config.sampler.clone();
    if temperature.is_infinite() && fd.is_bare_simplex() {
        cfg.walk = crate::sampler::Walk::ExactSimplex;
    }
    // Warm start next to the maximizing vertex: at low temperature the mass
    // sits there and a start at the center would need a long burn-in.
    let start = if temperature.is_infinite() {
        None
    } else {
        let (_, mode) = region.optimize(r, true)?;
        let eps = T::lit(0.05);
        let blend = &mode * (T::one() - eps) + &fd.portfolio(fd.center().view()) * eps;
        Some(fd.project(blend.view()))
    };
    let mut chain = Chain::new(density, &cfg, start)?;
    let points = (0..config.samples.max(config.batches * 2))
        .map(|_| chain.next_portfolio())
        .collect::<Result<Vec<_>>>()?;
    let mut c = sample_center(&points, config.batches);
    // The mean of feasible points is feasible; clear rounding on the simplex.
    let sum = c.w.sum();
    c.w.mapv_inplace(|v| v.max(T::zero()) / sum);
    Ok(c)
}

/// Decreasing temperatures `T_1 > … > T_count` equidistant in the `L2` norm
/// between consecutive Boltzmann densities, from the `T_max` at which
/// `p_T` is within `norm_threshold` of uniform down to the `T_min` at which
/// it concentrates within `delta` of the maximizing face. A bias that is
/// constant on `Q` yields the single temperature `1/alpha0`.
pub fn temperature_sequence<T: Scalar>(
    region: &WeightRegion<T>,
    r: &Array1<T>,
    count: usize,
    config: &AnnealConfig,
) -> Result<Vec<T>> {
    if count < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 temperatures, got {count}")));
    }
    let Some(fd) = region.full_dim() else {
        return Ok(vec![T::lit(config.alpha0).recip()]);
    };
    let (_, mode) = region.optimize(r, true)?;
    let h = Linear { r: r.clone() };
    // Ties in the bias make the maximizer a face; concentration is judged
    // against the face's supporting hyperplane.
    match ladder(fd, &h, mode, count, config, true)? {
        None => Ok(vec![T::lit(config.alpha0).recip()]),
        Some(l) => Ok(l.alphas.iter().map(|a| a.recip()).collect()),
    }
}
