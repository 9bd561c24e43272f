//! Statistical helpers: goodness-of-fit p-values, batch-means errors,
//! one-sided t-tests and a boundary-corrected kernel density on `[0, 1]`.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::Scalar;

/// One-sample Kolmogorov–Smirnov p-value (asymptotic with the Stephens
/// small-sample correction).
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    kolmogorov_q((en + 0.12 + 0.11 / en) * d)
}

/// `Q_KS(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Upper-tail p-value of a chi-square statistic.
pub fn chi_square_p(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    1.0 - dist.cdf(stat)
}

/// Chi-square goodness of fit of observed counts against expected
/// probabilities; cells with zero expectation are skipped.
pub fn chi_square_gof(observed: &[usize], probs: &[f64]) -> f64 {
    let total: usize = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e > 0.0 {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    chi_square_p(stat, cells.saturating_sub(1))
}

/// Chi-square homogeneity test of two count vectors over the same cells.
pub fn chi_square_homogeneity(a: &[usize], b: &[usize]) -> f64 {
    let na: usize = a.iter().sum();
    let nb: usize = b.iter().sum();
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let ea = col * na as f64 / n;
        let eb = col * nb as f64 / n;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    chi_square_p(stat, cells.saturating_sub(1))
}

/// Mean and batch-means standard error (at most `batches` batches).
pub fn batch_means<T: Scalar>(values: &[T], batches: usize) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let mean = values.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let b = batches.min(n);
    if b < 2 {
        return (mean, T::zero());
    }
    let size = n / b;
    let mut acc = T::zero();
    for k in 0..b {
        let chunk = &values[k * size..(k + 1) * size];
        let m = chunk.iter().copied().sum::<T>() / T::from_usize_lossy(size);
        acc += (m - mean) * (m - mean);
    }
    let var_of_batch_mean = acc / T::from_usize_lossy(b - 1);
    (mean, (var_of_batch_mean / T::from_usize_lossy(b)).sqrt())
}

/// p-value of the one-sided t-test `H₀: mean ≤ mu0` against `mean > mu0`.
pub fn t_test_greater(samples: &[f64], mu0: f64) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return if mean > mu0 { 0.0 } else { 1.0 };
    }
    let t = (mean - mu0) / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("positive dof");
    1.0 - dist.cdf(t)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gaussian kernel density on `[0, 1]` with reflection at both ends,
/// renormalized to integrate to one; degenerates to a point mass when all
/// samples coincide.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundedDensity {
    Kernel { samples: Vec<f64>, bandwidth: f64, mass: f64 },
    PointMass(f64),
}

impl BoundedDensity {
    /// Silverman's rule-of-thumb bandwidth.
    pub fn fit(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "density of an empty sample");
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
        let iqr = q(0.75) - q(0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = 0.9 * spread * n.powf(-0.2);
        if !(bandwidth > 1e-12) {
            return Self::PointMass(q(0.5));
        }
        Self::with_bandwidth(samples, bandwidth)
    }

    pub fn with_bandwidth(samples: &[f64], bandwidth: f64) -> Self {
        let h = bandwidth;
        let raw: f64 = samples
            .iter()
            .map(|&s| {
                (normal_cdf((1.0 - s) / h) - normal_cdf(-s / h))
                    + (normal_cdf((1.0 + s) / h) - normal_cdf(s / h))
                    + (normal_cdf((s - 1.0) / h) - normal_cdf((s - 2.0) / h))
            })
            .sum::<f64>()
            / samples.len() as f64;
        Self::Kernel { samples: samples.to_vec(), bandwidth, mass: raw }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::PointMass(_) => f64::NAN,
            Self::Kernel { samples, bandwidth: h, mass } => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                let s: f64 = samples
                    .iter()
                    .map(|&s| normal_pdf((x - s) / h) + normal_pdf((x + s) / h) + normal_pdf((x - 2.0 + s) / h))
                    .sum();
                s / (samples.len() as f64 * h * mass)
            }
        }
    }

    /// `(x, pdf(x))` on `points` equally spaced nodes covering `[0, 1]`.
    pub fn grid(&self, points: usize) -> Vec<(f64, f64)> {
        (0..points)
            .map(|i| {
                let x = i as f64 / (points - 1) as f64;
                (x, self.pdf(x))
            })
            .collect()
    }

    /// Trapezoidal integral over `[0, 1]`.
    pub fn integral(&self, points: usize) -> f64 {
        match self {
            Self::PointMass(_) => 1.0,
            Self::Kernel { .. } => {
                let g = self.grid(points);
                g.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum()
            }
        }
    }

    /// Interior local maxima of the density on a grid, as `(x, pdf)`.
    pub fn modes(&self, points: usize) -> Vec<(f64, f64)> {
        match self {
            Self::PointMass(x) => vec![(*x, f64::INFINITY)],
            Self::Kernel { .. } => {
                let g = self.grid(points);
                let mut out = Vec::new();
                for i in 0..g.len() {
                    let left = if i == 0 { f64::NEG_INFINITY } else { g[i - 1].1 };
                    let right = if i + 1 == g.len() { f64::NEG_INFINITY } else { g[i + 1].1 };
                    if g[i].1 > left && g[i].1 >= right {
                        out.push(g[i]);
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_accepts_uniform_and_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        assert!(ks_test(&xs, |x| x) > 0.01);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_test(&ys, |x| x) < 1e-6);
    }

    #[test]
    fn chi_square_tail() {
        // Median of chi-square with 2 dof is 2 ln 2.
        assert!((chi_square_p(2.0 * 2f64.ln(), 2) - 0.5).abs() < 1e-12);
        assert_eq!(chi_square_homogeneity(&[10, 20], &[10, 20]), 1.0);
    }

    #[test]
    fn batch_means_of_iid_matches_classical_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        let (m, se) = batch_means(&xs, 20);
        assert!((m - 0.5).abs() < 0.01);
        let classical = (1.0 / 12.0 / 20_000.0f64).sqrt();
        assert!(se > 0.5 * classical && se < 2.0 * classical);
    }

    #[test]
    fn t_test_directions() {
        let high = [0.99, 0.98, 1.0, 0.99, 0.97, 1.0, 0.99, 0.98, 1.0, 0.99];
        assert!(t_test_greater(&high, 0.95) < 0.05);
        let low = [0.90, 0.92, 0.91, 0.93, 0.90, 0.94, 0.92, 0.91, 0.93, 0.92];
        assert!(t_test_greater(&low, 0.95) > 0.5);
        assert_eq!(t_test_greater(&[1.0; 10], 0.95), 0.0);
    }

    #[test]
    fn bounded_density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>().powi(3)).collect();
        let d = BoundedDensity::fit(&xs);
        assert!((d.integral(20_001) - 1.0).abs() < 1e-6);
        assert!(d.pdf(-0.1) == 0.0 && d.pdf(1.1) == 0.0);
    }

    #[test]
    fn constant_sample_is_point_mass() {
        assert_eq!(BoundedDensity::fit(&[0.3; 50]), BoundedDensity::PointMass(0.3));
    }

    #[test]
    fn bimodal_sample_has_two_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..4000)
            .map(|i| {
                let c = if i % 2 == 0 { 0.2 } else { 0.8 };
                (c + 0.05 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)
            })
            .collect();
        let modes = BoundedDensity::fit(&xs).modes(501);
        assert_eq!(modes.len(), 2);
        assert!((modes[0].0 - 0.2).abs() < 0.03 && (modes[1].0 - 0.8).abs() < 0.03);
    }
}
