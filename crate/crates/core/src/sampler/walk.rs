use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::LogConcaveDensity;
use super::derive_seed;
use super::simplex::SimplexSampler;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Walk {
    /// Independent draws by sorted-uniform spacings; flat density on an
    /// uncut simplex only.
    ExactSimplex,
    ReflectiveHmc,
    HitAndRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub walk: Walk,
    /// Leapfrog step; derived from the domain and density when absent.
    pub step_size: Option<f64>,
    pub leapfrog_steps: usize,
    /// Walk steps between returned samples.
    pub walk_length: usize,
    /// Walk steps discarded at start; `2·d` when absent.
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub max_reflections: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            walk: Walk::ReflectiveHmc,
            step_size: None,
            leapfrog_steps: 20,
            walk_length: 1,
            burn_in: None,
            seed: 0,
            max_reflections: 100,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_walk(mut self, walk: Walk) -> Self {
        self.walk = walk;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.leapfrog_steps == 0 || self.walk_length == 0 || self.max_reflections == 0 {
            return Err(Error::InvalidParameter(
                "leapfrog steps, walk length and reflection cap must be positive".into(),
            ));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("step size must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// A single Markov chain on a [`LogConcaveDensity`], in the reduced `y`
/// coordinates. Owns its RNG; confined to one thread.
pub struct Chain<'a, T: Scalar> {
    density: LogConcaveDensity<'a, T>,
    walk: Walk,
    step: T,
    leapfrog: usize,
    walk_length: usize,
    max_reflections: usize,
    rng: ChaCha8Rng,
    y: Array1<T>,
    slack: Array1<T>,
    logp: T,
    exact: Option<SimplexSampler<T>>,
    proposals: usize,
    accepted: usize,
}

impl<'a, T: Scalar> Chain<'a, T> {
    /// Starts at `start` (reduced coordinates) when it is strictly
    /// feasible, else at the domain's Chebyshev center, then burns in.
    pub fn new(density: LogConcaveDensity<'a, T>, config: &SamplerConfig, start: Option<Array1<T>>) -> Result<Self> {
        config.validate()?;
        let domain = density.domain;
        let exact = match config.walk {
            Walk::ExactSimplex => {
                if !(density.is_flat() && domain.is_bare_simplex()) {
                    return Err(Error::InvalidParameter(
                        "the exact simplex walk needs a flat density on an uncut simplex".into(),
                    ));
                }
                Some(SimplexSampler::new(domain.n_assets()))
            }
            _ => None,
        };
        let y = start
            .filter(|s| s.len() == domain.dim() && domain.slack(s.view()).iter().all(|&v| v > T::zero()))
            .unwrap_or_else(|| domain.center().clone());
        let slack = domain.slack(y.view());
        let logp = density.log_density(y.view());
        let step = match config.step_size {
            Some(s) => T::lit(s),
            None => default_step(&density, &y),
        };
        let mut chain = Self {
            density,
            walk: config.walk,
            step,
            leapfrog: config.leapfrog_steps,
            walk_length: config.walk_length,
            max_reflections: config.max_reflections,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            y,
            slack,
            logp,
            exact,
            proposals: 0,
            accepted: 0,
        };
        let burn = config.burn_in.unwrap_or(2 * domain.dim());
        if chain.exact.is_none() {
            for _ in 0..burn {
                chain.transition()?;
            }
        }
        Ok(chain)
    }

    pub fn step_size(&self) -> T {
        self.step
    }

    pub fn position(&self) -> &Array1<T> {
        &self.y
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// Advances by the walk length and returns the reduced coordinates.
    pub fn next_y(&mut self) -> Result<&Array1<T>> {
        for _ in 0..self.walk_length {
            self.transition()?;
        }
        Ok(&self.y)
    }

    /// Advances by the walk length and returns the portfolio coordinates.
    pub fn next_portfolio(&mut self) -> Result<Array1<T>> {
        self.next_y()?;
        Ok(self.density.domain.portfolio(self.y.view()))
    }

    fn transition(&mut self) -> Result<()> {
        match self.walk {
            Walk::ExactSimplex => {
                let n = self.density.domain.n_assets();
                let mut buf = vec![T::zero(); n];
                self.exact.as_mut().expect("exact sampler").fill(&mut self.rng, &mut buf);
                self.y = self.density.domain.project(Array1::from(buf).view());
                self.slack = self.density.domain.slack(self.y.view());
                Ok(())
            }
            Walk::ReflectiveHmc => self.hmc_step(),
            Walk::HitAndRun => {
                self.hit_and_run_step();
                Ok(())
            }
        }
    }

    fn gaussian(&mut self, d: usize) -> Array1<T> {
        Array1::from_shape_fn(d, |_| T::lit(StandardNormal.sample(&mut self.rng)))
    }

    fn hmc_step(&mut self) -> Result<()> {
        let domain = self.density.domain;
        let d = domain.dim();
        let flat = self.density.is_flat();
        let jitter = T::lit(self.rng.random_range(0.8..1.2));
        let eps = self.step * jitter;
        let half = eps * T::lit(0.5);

        let mut p = self.gaussian(d);
        let h0 = -self.logp + p.dot(&p) * T::lit(0.5);
        let mut y = self.y.clone();
        let mut slack = domain.slack(y.view());
        if !flat {
            p.scaled_add(half, &self.density.grad_log_density(y.view()));
        }
        for l in 0..self.leapfrog {
            drift(domain, &mut y, &mut slack, &mut p, eps, self.max_reflections)?;
            if !flat {
                let kick = if l + 1 == self.leapfrog { half } else { eps };
                p.scaled_add(kick, &self.density.grad_log_density(y.view()));
            }
        }
        self.proposals += 1;
        let slack = domain.slack(y.view());
        let scale = T::one() + domain.z().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if slack.iter().any(|&s| s < -T::tolerance() * scale) {
            return Ok(());
        }
        let logp = self.density.log_density(y.view());
        let h1 = -logp + p.dot(&p) * T::lit(0.5);
        let log_u = T::lit(self.rng.random::<f64>().ln());
        if flat || log_u < h0 - h1 {
            self.y = y;
            self.slack = slack.mapv(|s| s.max(T::zero()));
            self.logp = logp;
            self.accepted += 1;
        }
        Ok(())
    }

    fn hit_and_run_step(&mut self) {
        let domain = self.density.domain;
        let d = domain.dim();
        let mut u = self.gaussian(d);
        let norm = u.dot(&u).sqrt();
        u /= norm;
        let bu = domain.b_mat().dot(&u);
        let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
        for (&s, &b) in self.slack.iter().zip(bu.iter()) {
            if b > T::zero() {
                hi = hi.min(s / b);
            } else if b < T::zero() {
                lo = lo.max(s / b);
            }
        }
        self.proposals += 1;
        let uniform = |rng: &mut ChaCha8Rng, a: T, b: T| a + (b - a) * T::lit(rng.random::<f64>());
        let (t, logp) = if self.density.is_flat() {
            (uniform(&mut self.rng, lo, hi), T::zero())
        } else {
            let e: f64 = Exp1.sample(&mut self.rng);
            let threshold = self.logp - T::lit(e);
            let mut found = (T::zero(), self.logp);
            for _ in 0..200 {
                let t = uniform(&mut self.rng, lo, hi);
                let cand = &self.y + &(&u * t);
                let lp = self.density.log_density(cand.view());
                if lp >= threshold {
                    found = (t, lp);
                    break;
                }
                if t < T::zero() {
                    lo = t;
                } else {
                    hi = t;
                }
            }
            found
        };
        self.y.scaled_add(t, &u);
        self.slack.scaled_add(-t, &bu);
        self.slack.mapv_inplace(|s| s.max(T::zero()));
        self.logp = logp;
        self.accepted += 1;
    }
}

/// Billiard motion for time `t` with specular reflections at facets.
fn drift<T: Scalar>(
    domain: &crate::domain::FullDimDomain<T>,
    y: &mut Array1<T>,
    slack: &mut Array1<T>,
    p: &mut Array1<T>,
    t: T,
    max_reflections: usize,
) -> Result<()> {
    let b = domain.b_mat();
    let norms = domain.row_norms();
    let mut bv = b.dot(&*p);
    let mut remaining = t;
    let mut reflections = 0;
    loop {
        let mut t_hit = remaining;
        let mut facet = None;
        for i in 0..bv.len() {
            if bv[i] > T::zero() {
                let ti = slack[i].max(T::zero()) / bv[i];
                if ti < t_hit {
                    t_hit = ti;
                    facet = Some(i);
                }
            }
        }
        y.scaled_add(t_hit, p);
        slack.scaled_add(-t_hit, &bv);
        let Some(i) = facet else {
            return Ok(());
        };
        reflections += 1;
        if reflections > max_reflections {
            return Err(Error::StepSize { max_reflections });
        }
        let row = b.row(i);
        let coef = T::lit(2.0) * bv[i] / (norms[i] * norms[i]);
        p.scaled_add(-coef, &row);
        bv.scaled_add(-coef, &b.dot(&row));
        slack[i] = T::zero();
        remaining -= t_hit;
    }
}

/// `min(0.5·r, 0.025/√(α·L), √(0.5·r/g), 1/g)` with `r` the inradius, `L`
/// the curvature bound of `h` and `g = α·‖∇h‖`: a geometric cap, a
/// leapfrog stability cap, a cap on the displacement one kick can cause,
/// and the decay length of a density concentrated against a facet.
fn default_step<T: Scalar>(density: &LogConcaveDensity<'_, T>, y: &Array1<T>) -> T {
    let r = density.domain.inradius();
    let mut step = T::lit(0.5) * r;
    if !density.is_flat() {
        let curv = density.alpha * density.h.curvature();
        if curv > T::zero() {
            step = step.min(T::lit(0.025) / curv.sqrt());
        }
        let g = density.grad_log_density(y.view());
        let gn = g.dot(&g).sqrt();
        if gn > T::zero() {
            step = step.min((T::lit(0.5) * r / gn).sqrt()).min(gn.recip());
        }
    }
    step
}

/// `count` samples of the density, in portfolio coordinates.
pub fn sample_logconcave<T: Scalar>(
    density: LogConcaveDensity<'_, T>,
    config: &SamplerConfig,
    count: usize,
) -> Result<Vec<Array1<T>>> {
    let mut chain = Chain::new(density, config, None)?;
    (0..count).map(|_| chain.next_portfolio()).collect()
}

/// Mixture samples with their component labels.
#[derive(Debug, Clone)]
pub struct MixtureSample<T> {
    pub points: Vec<Array1<T>>,
    pub labels: Vec<usize>,
}

/// Draws `u ~ U(0,1)` per sample, picks the component whose cumulative
/// weight interval contains `u`, and samples that component. Components
/// run as independent chains (in parallel) with derived seeds.
pub fn sample_mixture<T: Scalar>(
    components: &[LogConcaveDensity<'_, T>],
    weights: &[T],
    config: &SamplerConfig,
    count: usize,
) -> Result<MixtureSample<T>> {
    if components.len() != weights.len() || components.is_empty() {
        return Err(Error::DimensionMismatch { expected: components.len(), got: weights.len() });
    }
    check_weights(weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cumulative: Vec<T> = weights
        .iter()
        .scan(T::zero(), |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("nonempty");
    let labels: Vec<usize> = (0..count)
        .map(|_| {
            let u = T::lit(rng.random::<f64>()) * total;
            cumulative.iter().position(|&c| u < c).unwrap_or_else(|| {
                weights.iter().rposition(|&w| w > T::zero()).expect("positive weight")
            })
        })
        .collect();
    let mut per_component = vec![0usize; components.len()];
    for &l in &labels {
        per_component[l] += 1;
    }
    let draws: Vec<Vec<Array1<T>>> = components
        .par_iter()
        .enumerate()
        .map(|(k, dens)| {
            if per_component[k] == 0 {
                return Ok(Vec::new());
            }
            let cfg = SamplerConfig { seed: derive_seed(config.seed, k as u64 + 1), ..config.clone() };
            sample_logconcave(*dens, &cfg, per_component[k])
        })
        .collect::<Result<_>>()?;
    let mut cursors = vec![0usize; components.len()];
    let points = labels
        .iter()
        .map(|&l| {
            let p = draws[l][cursors[l]].clone();
            cursors[l] += 1;
            p
        })
        .collect();
    Ok(MixtureSample { points, labels })
}

pub(crate) fn check_weights<T: Scalar>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|&w| !(w >= -T::tolerance())) {
        return Err(Error::InvalidWeights("weights must be nonnegative".into()));
    }
    let sum = weights.iter().copied().sum::<T>();
    if (sum - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}
