use ndarray::{s, Array1};

use super::density::{ConcaveFn, Flat, LogConcaveDensity};
use super::derive_seed;
use super::walk::{Chain, SamplerConfig, Walk};
use crate::domain::FullDimDomain;
use crate::stats::t_test_greater;
use crate::{Error, Result, Scalar};

const MAX_SCHEDULE_STEPS: usize = 10_000;
const MAX_BISECTIONS: usize = 200;

/// `ln((1/k) Σ exp(v_i))`, shifted by the maximum.
pub fn log_mean_exp<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let v: Vec<T> = values.into_iter().collect();
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s = v.iter().map(|&x| (x - m).exp()).sum::<T>();
    m + (s / T::from_usize_lossy(v.len())).ln()
}

/// `‖π_b/π_c‖ = ∫ π_b²/π_c` estimated from `h` values of samples drawn at `a`:
/// `E_a[e^{(2b−c−a)h}]·E_a[e^{(c−a)h}] / E_a[e^{(b−a)h}]²`.
pub fn reweighted_norm<T: Scalar>(h_values: &[T], a: T, b: T, c: T) -> T {
    let two = T::lit(2.0);
    let term = |k: T| log_mean_exp(h_values.iter().map(|&h| k * h));
    (term(two * b - c - a) + term(c - a) - two * term(b - a)).exp()
}

/// Product-of-averages estimate of `‖π_next/π_prev‖` from `h` values of
/// samples drawn at `alpha_next`. Never below 1 (Cauchy–Schwarz on the
/// empirical measure).
pub fn l2_norm_ratio<T: Scalar>(alpha_next: T, alpha_prev: T, h_values: &[T]) -> T {
    let diff = alpha_next - alpha_prev;
    if diff == T::zero() {
        return T::one();
    }
    let up = log_mean_exp(h_values.iter().map(|&h| diff * h));
    let down = log_mean_exp(h_values.iter().map(|&h| -diff * h));
    (up + down).exp().max(T::one())
}

/// Norm and mass queries the annealing schedules are driven by.
pub trait AnnealModel<T: Scalar> {
    /// Dimension `n` of the schedules `α(1 ± 1/n)^i`.
    fn dim(&self) -> usize;
    /// Whether `h` is constant on the domain.
    fn is_flat(&mut self) -> Result<bool>;
    /// `‖π_α / uniform‖`.
    fn norm_vs_uniform(&mut self, alpha: T) -> Result<T>;
    /// `‖π_next / π_prev‖` for `next ≥ prev`.
    fn norm_between(&mut self, alpha_next: T, alpha_prev: T) -> Result<T>;
    /// Fractions of `nu` sub-samples of `π_α` lying within `delta` of the mode.
    fn ball_ratios(&mut self, alpha: T, delta: T, nu: usize) -> Result<Vec<f64>>;
}

/// First `α` of the schedule whose norm w.r.t. the uniform distribution
/// is at most `threshold`, refined by bisection to the crossing (relative
/// width 1e-3). Starts at `alpha0`; decays by `(1 − 1/n)` while the norm is
/// too large, otherwise brackets upwards by doubling.
pub fn anneal_down<T: Scalar, M: AnnealModel<T>>(model: &mut M, threshold: T, alpha0: T) -> Result<T> {
    if !(threshold > T::one()) || !(alpha0 > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "need threshold > 1 and alpha0 > 0, got {threshold}, {alpha0}"
        )));
    }
    if model.is_flat()? {
        return Ok(alpha0);
    }
    let n = T::from_usize_lossy(model.dim());
    let (mut lo, mut hi);
    if model.norm_vs_uniform(alpha0)? <= threshold {
        lo = alpha0;
        hi = alpha0;
        let mut steps = 0;
        loop {
            hi = hi * T::lit(2.0);
            if model.norm_vs_uniform(hi)? > threshold {
                break;
            }
            lo = hi;
            steps += 1;
            if steps > 200 {
                return Ok(lo);
            }
        }
    } else {
        hi = alpha0;
        let decay = T::one() - n.recip();
        let mut steps = 0;
        loop {
            lo = hi * decay;
            if model.norm_vs_uniform(lo)? <= threshold {
                break;
            }
            hi = lo;
            steps += 1;
            if steps > MAX_SCHEDULE_STEPS {
                return Err(Error::Convergence { iterations: steps, residual: lo.as_f64(), best: vec![lo.as_f64()] });
            }
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= T::lit(1e-3) * hi {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        if model.norm_vs_uniform(mid)? <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Result of the increasing schedule.
#[derive(Debug, Clone)]
pub struct AnnealUp<T> {
    pub alpha_u: T,
    /// Every `α` visited, starting at the initial value.
    pub ladder: Vec<T>,
    /// `‖π_{α_{i+1}}/π_{α_i}‖` along the ladder.
    pub consecutive_norms: Vec<T>,
}

impl<T: Scalar> AnnealUp<T> {
    /// The common norm `d` of an equidistant ladder.
    pub fn max_norm(&self) -> T {
        self.consecutive_norms.iter().copied().fold(T::one(), T::max)
    }
}

/// First `α = α₀(1 + 1/n)^i` for which a one-sided t-test over `nu`
/// sub-sample ratios rejects "at most `1 − ε` of the mass lies within
/// `delta` of the mode" at level `significance`.
pub fn anneal_up<T: Scalar, M: AnnealModel<T>>(
    model: &mut M,
    alpha0: T,
    delta: T,
    epsilon: T,
    nu: usize,
    significance: f64,
) -> Result<AnnealUp<T>> {
    if !(alpha0 > T::zero()) || !(delta > T::zero()) || !(epsilon > T::zero() && epsilon < T::one()) || nu < 2 {
        return Err(Error::InvalidParameter(format!(
            "need alpha0 > 0, delta > 0, 0 < epsilon < 1, nu ≥ 2; got {alpha0}, {delta}, {epsilon}, {nu}"
        )));
    }
    let growth = T::one() + T::from_usize_lossy(model.dim()).recip();
    let target = 1.0 - epsilon.as_f64();
    let mut alpha = alpha0;
    let mut ladder = vec![alpha];
    let mut norms = Vec::new();
    for _ in 0..MAX_SCHEDULE_STEPS {
        let ratios = model.ball_ratios(alpha, delta, nu)?;
        if t_test_greater(&ratios, target) < significance {
            return Ok(AnnealUp { alpha_u: alpha, ladder, consecutive_norms: norms });
        }
        let next = alpha * growth;
        norms.push(model.norm_between(next, alpha)?);
        alpha = next;
        ladder.push(alpha);
    }
    Err(Error::Convergence {
        iterations: MAX_SCHEDULE_STEPS,
        residual: alpha.as_f64(),
        best: vec![alpha.as_f64()],
    })
}

/// Ladder `α_L = α_1 < … < α_k` (with `α_k ≥ α_U`) whose consecutive norms
/// equal `d` within `tol`, thinned or interpolated to `m` values.
pub fn equidistant_alpha_sequence<T: Scalar, M: AnnealModel<T>>(
    model: &mut M,
    alpha_l: T,
    alpha_u: T,
    m: usize,
    d: T,
    tol: T,
) -> Result<Vec<T>> {
    if !(alpha_l > T::zero() && alpha_l < alpha_u) || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need 0 < alpha_L < alpha_U and M ≥ 2, got {alpha_l}, {alpha_u}, {m}"
        )));
    }
    let mut ladder = vec![alpha_l];
    if d > T::one() + tol {
        let mut a = alpha_l;
        while a < alpha_u {
            if ladder.len() > MAX_SCHEDULE_STEPS {
                return Err(Error::Convergence {
                    iterations: ladder.len(),
                    residual: a.as_f64(),
                    best: ladder.iter().map(|v| v.as_f64()).collect(),
                });
            }
            let mut hi = alpha_u.max(a * T::lit(2.0));
            let mut guard = 0;
            while model.norm_between(hi, a)? < d {
                hi = hi * T::lit(2.0);
                guard += 1;
                if guard > 200 {
                    return Err(Error::Numerical("norm ladder does not grow".into()));
                }
            }
            let mut lo = a;
            let mut next = hi;
            for _ in 0..MAX_BISECTIONS {
                let mid = (lo + hi) * T::lit(0.5);
                let v = model.norm_between(mid, a)?;
                next = mid;
                if (v - d).abs() <= tol || hi - lo <= T::lit(1e-12) * hi {
                    break;
                }
                if v < d {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            ladder.push(next);
            a = next;
        }
    } else {
        ladder.push(alpha_u);
    }
    Ok(pick_equidistant(&ladder, m))
}

/// `m` values picked equidistantly by index (both ends kept); when the
/// ladder is shorter, intermediate positions interpolate `ln α` linearly.
pub(crate) fn pick_equidistant<T: Scalar>(ladder: &[T], m: usize) -> Vec<T> {
    let k = ladder.len();
    if k == 1 {
        return vec![ladder[0]; m];
    }
    (0..m)
        .map(|i| {
            let pos = i as f64 * (k - 1) as f64 / (m - 1) as f64;
            if k >= m {
                ladder[pos.round() as usize]
            } else {
                let j = (pos.floor() as usize).min(k - 2);
                let frac = T::lit(pos - j as f64);
                (ladder[j].ln() * (T::one() - frac) + ladder[j + 1].ln() * frac).exp()
            }
        })
        .collect()
}

struct Batch<T> {
    alpha: T,
    h: Vec<T>,
    dist: Vec<T>,
}

/// [`AnnealModel`] backed by MCMC samples of `π_α ∝ e^{αh}`; each `α` is
/// sampled once (warm-started from the previous chain) and reused.
pub struct McmcAnnealModel<'a, T: Scalar> {
    domain: &'a FullDimDomain<T>,
    h: &'a dyn ConcaveFn<T>,
    mode: Array1<T>,
    config: SamplerConfig,
    samples: usize,
    dim: usize,
    cache: Vec<Batch<T>>,
    warm: Option<Array1<T>>,
    streams: u64,
    /// `(h(mode), ‖∇h‖)` when distances are measured to the level set of
    /// the mode rather than to the mode itself.
    level: Option<(T, T)>,
}

impl<'a, T: Scalar> McmcAnnealModel<'a, T> {
    /// `mode` is the maximizer of `h` in portfolio coordinates; `samples`
    /// points are drawn per `α`.
    pub fn new(
        domain: &'a FullDimDomain<T>,
        h: &'a dyn ConcaveFn<T>,
        mode: Array1<T>,
        config: SamplerConfig,
        samples: usize,
    ) -> Self {
        Self {
            domain,
            h,
            mode,
            config,
            samples: samples.max(2),
            dim: domain.n_assets(),
            cache: Vec::new(),
            warm: None,
            streams: 0,
            level: None,
        }
    }

    /// Measures concentration by the distance `(h(mode) − h(x))/‖∇h‖` to the
    /// supporting hyperplane at the mode. For a linear `h` whose maximizer
    /// is a whole face, this is the distance to that face up to the
    /// polytope's angles; the mode ball would never hold the mass.
    pub fn with_level_distance(mut self) -> Self {
        // Portfolio coordinates are the leading rows of the lifted point.
        let n = self.domain.n_assets();
        let g = self.domain.basis().slice(s![..n, ..]).t().dot(&self.h.gradient(self.mode.view()));
        let norm = g.dot(&g).sqrt();
        if norm > T::zero() {
            self.level = Some((self.h.value(self.mode.view()), norm));
        }
        self
    }

    /// Overrides the schedule dimension (defaults to the asset count).
    pub fn with_schedule_dim(mut self, n: usize) -> Self {
        self.dim = n.max(2);
        self
    }

    /// Number of distinct `α` values sampled so far.
    pub fn batches(&self) -> usize {
        self.cache.len()
    }

    fn batch(&mut self, alpha: T) -> Result<&Batch<T>> {
        if let Some(i) = self.cache.iter().position(|b| b.alpha == alpha) {
            return Ok(&self.cache[i]);
        }
        self.streams += 1;
        let mut cfg = self.config.clone();
        cfg.seed = derive_seed(self.config.seed, self.streams);
        let flat_h: &dyn ConcaveFn<T> = &Flat;
        let density = if alpha == T::zero() {
            if self.domain.is_bare_simplex() {
                cfg.walk = Walk::ExactSimplex;
            }
            LogConcaveDensity::new(self.domain, flat_h, T::zero())?
        } else {
            LogConcaveDensity::new(self.domain, self.h, alpha)?
        };
        if self.warm.is_some() {
            cfg.burn_in = Some(cfg.burn_in.unwrap_or(2 * self.domain.dim()).min(self.domain.dim()));
        }
        let mut chain = Chain::new(density, &cfg, self.warm.clone())?;
        let mut h = Vec::with_capacity(self.samples);
        let mut dist = Vec::with_capacity(self.samples);
        for _ in 0..self.samples {
            let x = chain.next_portfolio()?;
            h.push(self.h.value(x.view()));
            dist.push(match self.level {
                Some((top, norm)) => (top - h[h.len() - 1]).max(T::zero()) / norm,
                None => {
                    let diff = &x - &self.mode;
                    diff.dot(&diff).sqrt()
                }
            });
        }
        if alpha > T::zero() {
            self.warm = Some(chain.position().clone());
        }
        self.cache.push(Batch { alpha, h, dist });
        Ok(self.cache.last().expect("just pushed"))
    }
}

impl<T: Scalar> AnnealModel<T> for McmcAnnealModel<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn is_flat(&mut self) -> Result<bool> {
        let b = self.batch(T::zero())?;
        let (lo, hi) = b.h.iter().fold((T::infinity(), T::neg_infinity()), |(l, u), &v| (l.min(v), u.max(v)));
        Ok(hi - lo <= T::tolerance() * (T::one() + hi.abs()))
    }

    fn norm_vs_uniform(&mut self, alpha: T) -> Result<T> {
        let b = self.batch(alpha)?;
        Ok(l2_norm_ratio(alpha, T::zero(), &b.h))
    }

    fn norm_between(&mut self, alpha_next: T, alpha_prev: T) -> Result<T> {
        let b = self.batch(alpha_prev)?;
        Ok(reweighted_norm(&b.h, alpha_prev, alpha_next, alpha_prev).max(T::one()))
    }

    fn ball_ratios(&mut self, alpha: T, delta: T, nu: usize) -> Result<Vec<f64>> {
        let b = self.batch(alpha)?;
        let size = (b.dist.len() / nu).max(1);
        Ok(b.dist
            .chunks(size)
            .take(nu)
            .map(|c| c.iter().filter(|&&d| d <= delta).count() as f64 / c.len() as f64)
            .collect())
    }
}
