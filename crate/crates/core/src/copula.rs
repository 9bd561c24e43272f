//! Return/volatility copulae over the long-only simplex, the diagonal-band
//! crisis indicator and the rolling warning/crisis detector.
//!
//! Rows index return levels and columns volatility levels, both ascending.
//! Mass near the main diagonal pairs low return with low volatility (normal
//! markets); mass near the anti-diagonal pairs high return with low
//! volatility (crises).

use std::io::{Read, Write};

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::varsi_fraction;
use crate::market::{compound, shrinkage_covariance_of, ReturnsPanel};
use crate::sampler::{derive_seed, SimplexSampler};
use crate::{svg, Error, Result, Scalar};

const CHUNK: usize = 1 << 15;

/// `m × m` joint cell masses with the level boundaries that define the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Copula<T> {
    mass: Array2<T>,
    return_levels: Vec<T>,
    volatility_levels: Vec<T>,
    sample_count: usize,
    degenerate_volatility: bool,
}

impl<T: Scalar> Copula<T> {
    /// A copula from explicit cell masses; levels are set to `0, 1/m, …, 1`.
    pub fn from_mass(mass: Array2<T>) -> Result<Self> {
        let m = mass.nrows();
        if m == 0 || mass.ncols() != m {
            return Err(Error::InvalidDistribution(format!("copula must be square, got {:?}", mass.dim())));
        }
        if mass.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidDistribution("negative or non-finite cell".into()));
        }
        let total = mass.sum().as_f64();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("total mass {total} ≠ 1")));
        }
        let grid: Vec<T> = (0..=m).map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(m)).collect();
        Ok(Self { mass, return_levels: grid.clone(), volatility_levels: grid, sample_count: 0, degenerate_volatility: false })
    }

    /// Cell masses counted against explicit level boundaries (`m + 1` each).
    pub fn with_levels(mass: Array2<T>, return_levels: Vec<T>, volatility_levels: Vec<T>, sample_count: usize) -> Result<Self> {
        let mut out = Self::from_mass(mass)?;
        let m = out.m();
        if return_levels.len() != m + 1 || volatility_levels.len() != m + 1 {
            return Err(Error::DimensionMismatch { expected: m + 1, got: return_levels.len().min(volatility_levels.len()) });
        }
        out.degenerate_volatility = volatility_levels.windows(2).any(|w| w[0] >= w[1]);
        out.return_levels = return_levels;
        out.volatility_levels = volatility_levels;
        out.sample_count = sample_count;
        Ok(out)
    }

    /// The uniform copula, every cell `1/m²`.
    pub fn uniform(m: usize) -> Self {
        let cell = T::one() / T::from_usize_lossy(m * m);
        Self::from_mass(Array2::from_elem((m, m), cell)).expect("uniform mass is valid")
    }

    pub fn m(&self) -> usize {
        self.mass.nrows()
    }

    pub fn mass(&self) -> &Array2<T> {
        &self.mass
    }

    pub fn return_levels(&self) -> &[T] {
        &self.return_levels
    }

    pub fn volatility_levels(&self) -> &[T] {
        &self.volatility_levels
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Whether duplicate volatility quantiles collapsed columns together.
    pub fn degenerate_volatility(&self) -> bool {
        self.degenerate_volatility
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.mass.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<T> {
        self.mass.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// One line per return level, `m` comma-separated masses at 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        for row in self.mass.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Reads the format written by [`Copula::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(r);
        let mut values = Vec::new();
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Ingestion {
                    row: i + 1,
                    column: j + 1,
                    message: format!("unparseable number {cell:?}"),
                })?;
                values.push(T::lit(v));
            }
            rows += 1;
        }
        let mass = Array2::from_shape_vec((rows, values.len() / rows.max(1)), values)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Self::from_mass(mass)
    }

    /// Heatmap with return levels increasing upwards.
    pub fn to_svg(&self, title: &str, comment: Option<&str>) -> String {
        let values: Vec<f64> = self.mass.iter().map(|v| v.as_f64()).collect();
        svg::heatmap(self.m(), self.m(), &values, title, comment)
    }
}

/// Level boundaries `l_0 ≤ … ≤ l_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Levels<T> {
    pub values: Vec<T>,
    /// Some consecutive levels coincide.
    pub degenerate: bool,
}

/// Return levels `s_0 < … < s_m` with `varsi_fraction(R, s_i) = i/m`.
pub fn return_levels<T: Scalar>(r: ArrayView1<'_, T>, m: usize) -> Result<Vec<T>> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    if r.len() < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 assets, got {}", r.len())));
    }
    let lo = r.iter().copied().fold(T::infinity(), T::min);
    let hi = r.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return Err(Error::DegenerateReturns);
    }
    let tol = T::lit(1e-9).max(T::tolerance());
    let mf = T::from_usize_lossy(m);
    let mut levels = Vec::with_capacity(m + 1);
    levels.push(lo);
    let mut floor = lo;
    for i in 1..m {
        let target = T::from_usize_lossy(i) / mf;
        let (mut a, mut b) = (floor, hi);
        let mut mid = (a + b) * T::lit(0.5);
        for _ in 0..200 {
            mid = (a + b) * T::lit(0.5);
            let f = varsi_fraction(r, mid);
            if (f - target).abs() <= tol || b - a <= T::epsilon() * (hi - lo) {
                break;
            }
            if f < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        levels.push(mid);
        floor = mid;
    }
    levels.push(hi);
    Ok(levels)
}

/// In-sample quantiles `u_i` of `values` at `i/m`; `u_0` and `u_m` are the
/// sample extremes. Each half-open cell then holds `N/m` values when they
/// are distinct.
pub fn quantile_levels<T: Scalar>(values: &[T], m: usize) -> Result<Levels<T>> {
    if values.is_empty() || m == 0 {
        return Err(Error::InvalidParameter("quantile levels need a nonempty sample and m ≥ 1".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    let mut out: Vec<T> = (0..m).map(|i| sorted[(i * n / m).min(n - 1)]).collect();
    out.push(sorted[n - 1]);
    let degenerate = out.windows(2).any(|w| w[0] >= w[1]);
    Ok(Levels { values: out, degenerate })
}

/// Volatility levels: quantiles of `xᵀΣx` over `points`.
pub fn volatility_levels<T: Scalar>(sigma: ArrayView2<'_, T>, m: usize, points: &[ndarray::Array1<T>]) -> Result<Levels<T>> {
    let vols: Vec<T> = points.iter().map(|x| crate::linalg::quad_form(sigma, x.view())).collect();
    quantile_levels(&vols, m)
}

/// Cell index of `v` for half-open cells with the last closed.
#[inline]
fn cell<T: Scalar>(levels: &[T], v: T) -> usize {
    let m = levels.len() - 1;
    levels[1..m].partition_point(|l| *l <= v)
}

/// Counts `(return, volatility)` pairs into the cells of the given levels.
pub fn count_cells<T: Scalar>(pairs: &[(T, T)], return_levels: &[T], volatility_levels: &[T]) -> Result<Array2<T>> {
    let m = return_levels.len().saturating_sub(1);
    if m == 0 || volatility_levels.len() != m + 1 || pairs.is_empty() {
        return Err(Error::InvalidParameter("levels must have equal length ≥ 2 and samples be nonempty".into()));
    }
    let mut counts = Array2::<u64>::zeros((m, m));
    for &(r, v) in pairs {
        counts[[cell(return_levels, r), cell(volatility_levels, v)]] += 1;
    }
    let total = T::from_usize_lossy(pairs.len());
    Ok(counts.mapv(|c| T::from_u64(c).expect("count") / total))
}

/// Copula of arbitrary `(return, volatility)` samples with in-sample
/// quantile levels on both axes.
pub fn copula_from_pairs<T: Scalar>(pairs: &[(T, T)], m: usize) -> Result<Copula<T>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m must be ≥ 2, got {m}")));
    }
    let rets: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let vols: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let rl = quantile_levels(&rets, m)?;
    let vl = quantile_levels(&vols, m)?;
    let mass = count_cells(pairs, &rl.values, &vl.values)?;
    Ok(Copula {
        mass,
        return_levels: rl.values,
        volatility_levels: vl.values,
        sample_count: pairs.len(),
        degenerate_volatility: vl.degenerate,
    })
}

/// `(R·x, xᵀΣx)` for `count` uniform simplex points. Chunks use derived
/// seeds, so the result does not depend on the thread count.
pub fn sample_return_volatility<T: Scalar>(r: ArrayView1<'_, T>, sigma: ArrayView2<'_, T>, count: usize, seed: u64) -> Vec<(T, T)> {
    let n = r.len();
    let r: Vec<T> = r.to_vec();
    let s: Vec<T> = sigma.iter().copied().collect::<Vec<_>>();
    let s = if sigma.is_standard_layout() { s } else { sigma.to_owned().iter().copied().collect() };
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let len = CHUNK.min(count - c * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut sampler = SimplexSampler::new(n);
            let mut x = vec![T::zero(); n];
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                sampler.fill(&mut rng, &mut x);
                let ret = r.iter().zip(&x).map(|(a, b)| *a * *b).sum::<T>();
                let mut vol = T::zero();
                for i in 0..n {
                    let row = &s[i * n..(i + 1) * n];
                    let si = row.iter().zip(&x).map(|(a, b)| *a * *b).sum::<T>();
                    vol += x[i] * si;
                }
                out.push((ret, vol));
            }
            out
        })
        .collect()
}

/// Copula of uniform portfolios on the simplex: exact return levels by
/// bisection on [`varsi_fraction`], in-sample volatility quantiles.
pub fn estimate_copula<T: Scalar>(r: ArrayView1<'_, T>, sigma: ArrayView2<'_, T>, m: usize, sample_count: usize, seed: u64) -> Result<Copula<T>> {
    let n = r.len();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m must be ≥ 2, got {m}")));
    }
    if sample_count < 10 * m * m {
        return Err(Error::InvalidParameter(format!("sample count {sample_count} below 10·m² = {}", 10 * m * m)));
    }
    if sigma.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n * n, got: sigma.len() });
    }
    let rl = return_levels(r, m)?;
    let pairs = sample_return_volatility(r, sigma, sample_count, seed);
    let vols: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let vl = quantile_levels(&vols, m)?;
    let mass = count_cells(&pairs, &rl, &vl.values)?;
    Ok(Copula { mass, return_levels: rl, volatility_levels: vl.values, sample_count, degenerate_volatility: vl.degenerate })
}

/// Masses of the up-band `|i−j| ≤ band·m` and down-band
/// `|i+j−(m−1)| ≤ band·m`, each without their shared cells.
pub fn band_masses<T: Scalar>(mass: ArrayView2<'_, T>, band: f64) -> Result<(T, T)> {
    let m = mass.nrows();
    if !(band > 0.0 && band < 0.5) {
        return Err(Error::InvalidParameter(format!("band must lie in (0, 0.5), got {band}")));
    }
    if mass.ncols() != m {
        return Err(Error::InvalidDistribution("copula must be square".into()));
    }
    let width = band * m as f64;
    let (mut up, mut down) = (T::zero(), T::zero());
    for ((i, j), &v) in mass.indexed_iter() {
        let in_up = (i as f64 - j as f64).abs() <= width;
        let in_down = ((i + j) as f64 - (m - 1) as f64).abs() <= width;
        match (in_up, in_down) {
            (true, false) => up += v,
            (false, true) => down += v,
            _ => {}
        }
    }
    Ok((up, down))
}

/// Down-band over up-band mass, shared cells excluded from both. Returns
/// `+∞` when the up-band is empty (and `NaN` never: an empty pair gives `+∞`).
pub fn indicator<T: Scalar>(copula: &Copula<T>, band: f64) -> Result<T> {
    let (up, down) = band_masses(copula.mass.view(), band)?;
    Ok(if up > T::zero() { down / up } else { T::infinity() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Crisis,
}

/// A maximal run of indicator values above 1, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub start_index: usize,
    pub end_index: usize,
    pub severity: Severity,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub window: usize,
    pub m: usize,
    pub band: f64,
    /// Runs longer than this are warnings.
    pub warning_days: usize,
    /// Runs longer than this are crises.
    pub crisis_days: usize,
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { window: 60, m: 100, band: 0.1, warning_days: 60, crisis_days: 100, sample_count: 500_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries<T> {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<T>,
    pub intervals: Vec<Interval>,
}

impl<T: Scalar> IndicatorSeries<T> {
    /// Severity of the interval containing position `i`, if any.
    pub fn state(&self, i: usize) -> Option<Severity> {
        self.intervals.iter().find(|iv| iv.start_index <= i && i <= iv.end_index).map(|iv| iv.severity)
    }

    /// `date,value,state` rows, state one of `calm`, `warning`, `crisis`.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "date,value,state")?;
        for (i, (d, v)) in self.dates.iter().zip(&self.values).enumerate() {
            let state = match self.state(i) {
                None => "calm",
                Some(Severity::Warning) => "warning",
                Some(Severity::Crisis) => "crisis",
            };
            writeln!(w, "{},{:.16e},{state}", d.format("%Y-%m-%d"), v.as_f64())?;
        }
        Ok(())
    }

    /// Indicator time line with yellow warnings and red crises.
    pub fn to_svg(&self, title: &str, comment: Option<&str>) -> String {
        let labels: Vec<String> = self.dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect();
        let values: Vec<f64> = self.values.iter().map(|v| v.as_f64()).collect();
        let shades: Vec<svg::Shade> = self
            .intervals
            .iter()
            .map(|iv| svg::Shade {
                start: iv.start_index,
                end: iv.end_index,
                color: match iv.severity {
                    Severity::Warning => "#f5d000",
                    Severity::Crisis => "#d62728",
                },
            })
            .collect();
        svg::timeline(&labels, &values, &shades, Some(1.0), title, comment)
    }
}

/// Maximal runs of `value > 1` longer than `warning_days`.
pub fn classify_runs<T: Scalar>(dates: &[NaiveDate], values: &[T], warning_days: usize, crisis_days: usize) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i] > T::one() {
            let start = i;
            while i < values.len() && values[i] > T::one() {
                i += 1;
            }
            let len = i - start;
            let severity = if len > crisis_days {
                Some(Severity::Crisis)
            } else if len > warning_days {
                Some(Severity::Warning)
            } else {
                None
            };
            if let Some(severity) = severity {
                out.push(Interval { start: dates[start], end: dates[i - 1], start_index: start, end_index: i - 1, severity });
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Applies `f` to the copula of every trailing window, in date order.
/// Returned dates are the window end dates.
pub fn rolling_map<T, R, F>(panel: &ReturnsPanel<T>, config: &DetectConfig, f: F) -> Result<(Vec<NaiveDate>, Vec<R>)>
where
    T: Scalar,
    R: Send,
    F: Fn(usize, &Copula<T>) -> Result<R> + Sync,
{
    rolling_at(panel, config, 1, f)
}

/// Copulas of every `stride`-th trailing window, seeded exactly as in
/// [`rolling_map`].
pub fn rolling_copulas<T: Scalar>(panel: &ReturnsPanel<T>, config: &DetectConfig, stride: usize) -> Result<(Vec<NaiveDate>, Vec<Copula<T>>)> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be positive".into()));
    }
    rolling_at(panel, config, stride, |_, c| Ok(c.clone()))
}

/// Copula of the `config.window` returns ending at row `end` (inclusive):
/// compound returns against the shrinkage covariance of the window.
pub fn window_copula<T: Scalar>(panel: &ReturnsPanel<T>, config: &DetectConfig, end: usize) -> Result<Copula<T>> {
    let k = config.window;
    if k < 2 || end + 1 < k || end >= panel.len() {
        return Err(Error::Window { window: k, len: end + 1 });
    }
    let block = panel.returns().slice(ndarray::s![end + 1 - k..=end, ..]);
    let r = compound(block);
    let cov = shrinkage_covariance_of(block, panel.symbols())?;
    estimate_copula(r.view(), cov.sigma.view(), config.m, config.sample_count, derive_seed(config.seed, end as u64))
}

fn rolling_at<T, R, F>(panel: &ReturnsPanel<T>, config: &DetectConfig, stride: usize, f: F) -> Result<(Vec<NaiveDate>, Vec<R>)>
where
    T: Scalar,
    R: Send,
    F: Fn(usize, &Copula<T>) -> Result<R> + Sync,
{
    let k = config.window;
    if k < 2 || panel.len() <= k {
        return Err(Error::Window { window: k, len: panel.len() });
    }
    let ends: Vec<usize> = (k - 1..panel.len()).step_by(stride).collect();
    let results: Vec<R> = ends.par_iter().map(|&t| f(t, &window_copula(panel, config, t)?)).collect::<Result<_>>()?;
    Ok((ends.iter().map(|&t| panel.dates()[t]).collect(), results))
}

/// Rolling indicator with warning/crisis intervals.
pub fn detect<T: Scalar>(panel: &ReturnsPanel<T>, config: &DetectConfig) -> Result<IndicatorSeries<T>> {
    if config.crisis_days < config.warning_days {
        return Err(Error::InvalidParameter("crisis threshold below warning threshold".into()));
    }
    let (dates, values) = rolling_map(panel, config, |_, c| indicator(c, config.band))?;
    let intervals = classify_runs(&dates, &values, config.warning_days, config.crisis_days);
    Ok(IndicatorSeries { dates, values, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_mass(m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Array2::from_shape_fn((m, m), |_| rng.random::<f64>());
        let total = raw.sum();
        raw / total
    }

    #[test]
    fn two_asset_median_level() {
        let s = return_levels(array![0.0f64, 1.0].view(), 2).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s[1] - 0.5).abs() < 1e-9);
        assert_eq!((s[0], s[2]), (0.0, 1.0));
    }

    #[test]
    fn return_levels_are_quantiles() {
        let r = array![0.0f64, 1.0, 2.0];
        let s = return_levels(r.view(), 4).unwrap();
        for (i, w) in s.windows(2).enumerate() {
            assert!(w[0] < w[1], "{i}");
        }
        for (i, &l) in s.iter().enumerate().take(4).skip(1) {
            assert!((varsi_fraction(r.view(), l) - i as f64 / 4.0).abs() <= 1e-9);
        }
        // Empirical quartiles of 10⁶ uniform portfolios.
        let pts = sample_return_volatility(r.view(), Array2::<f64>::eye(3).view(), 1_000_000, 9);
        let mut rets: Vec<f64> = pts.iter().map(|p| p.0).collect();
        rets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 1..4 {
            let p = i as f64 / 4.0;
            let emp = rets[(p * rets.len() as f64) as usize];
            // Quantile standard error sqrt(p(1−p)/N)/f(q); f ≥ 0.5 on the inner range.
            let se = (p * (1.0 - p) / 1e6).sqrt() / 0.5;
            assert!((emp - s[i]).abs() < 3.0 * se, "{i}: {emp} vs {}", s[i]);
        }
    }

    #[test]
    fn constant_returns_rejected() {
        assert!(matches!(return_levels(array![0.3f64, 0.3, 0.3].view(), 4), Err(Error::DegenerateReturns)));
    }

    #[test]
    fn identity_volatility_levels_match_closed_form() {
        // n = 2, Σ = I: v = x² + (1−x)² with x ~ U(0,1), so
        // P(v ≤ t) = sqrt(2t − 1) for t ∈ [1/2, 1].
        let pts = crate::sampler::sample_simplex_uniform::<f64>(2, 200_000, 4).unwrap();
        let lv = volatility_levels(Array2::eye(2).view(), 5, &pts).unwrap();
        for i in 1..5 {
            let p = i as f64 / 5.0;
            let exact = (p * p + 1.0) / 2.0;
            assert!((lv.values[i] - exact).abs() < 5e-3, "{i}");
        }
        let one = volatility_levels(Array2::eye(2).view(), 1, &pts).unwrap();
        assert_eq!(one.values.len(), 2);
        let vols: Vec<f64> = pts.iter().map(|x| x[0] * x[0] + x[1] * x[1]).collect();
        assert_eq!(one.values[0], vols.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(one.values[1], vols.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn zero_covariance_is_flagged_degenerate() {
        let c = estimate_copula(array![0.0f64, 1.0, 2.0].view(), Array2::zeros((3, 3)).view(), 4, 1000, 1).unwrap();
        assert!(c.degenerate_volatility());
        let cols = c.column_sums();
        assert_eq!(cols.iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn small_grid_marginals() {
        let c = estimate_copula(array![0.1f64, -0.2, 0.3].view(), array![[1.0, 0.2, 0.0], [0.2, 2.0, 0.1], [0.0, 0.1, 0.5]].view(), 2, 40_000, 2).unwrap();
        assert!(c.mass().iter().all(|&v| (0.0..=1.0).contains(&v)));
        for s in c.row_sums().into_iter().chain(c.column_sums()) {
            assert!((s - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn uncorrelated_case_is_mirror_symmetric() {
        // Equal variances and mean-zero returns make R·x and ‖x‖² uncorrelated
        // under the uniform measure, but both return tails still favour
        // concentrated (high-variance) portfolios. What remains exact is the
        // symmetry between the two tails, so the indicator is 1.
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half = Array1::from_shape_fn(n / 2, |_| rng.random::<f64>());
        let r = Array1::from_shape_fn(n, |i| if i < n / 2 { half[i] } else { -half[i - n / 2] });
        let m = 5;
        let count = 200_000;
        let c = estimate_copula(r.view(), Array2::<f64>::eye(n).view(), m, count, 6).unwrap();
        let se = (1.0 / 25.0 / count as f64).sqrt();
        for i in 0..m {
            for j in 0..m {
                let mirrored = c.mass()[[m - 1 - i, j]];
                assert!((c.mass()[[i, j]] - mirrored).abs() < 6.0 * se, "({i},{j})");
            }
        }
        assert!((indicator(&c, 0.2).unwrap() - 1.0).abs() < 0.03);
        // Mild coupling only: every cell within 30% of 1/m².
        assert!(c.mass().iter().all(|v| (v * 25.0 - 1.0).abs() < 0.3));
    }

    #[test]
    fn coupled_case_concentrates_on_a_curve() {
        // Σ = R Rᵀ gives xᵀΣx = (R·x)², a monotone function of the return
        // on R·x ≥ 0; the copula collapses onto the diagonal.
        let r = array![0.1f64, 1.0];
        let sigma = array![[0.01, 0.1], [0.1, 1.0]];
        let c = estimate_copula(r.view(), sigma.view(), 10, 100_000, 7).unwrap();
        let off: f64 = c.mass().indexed_iter().filter(|((i, j), _)| i.abs_diff(*j) > 1).map(|(_, v)| v).sum();
        assert!(off < 0.02, "{off}");
    }

    #[test]
    fn indicator_examples() {
        let m = 100;
        let u = Copula::<f64>::uniform(m);
        assert!((indicator(&u, 0.1).unwrap() - 1.0).abs() < 1e-12);
        let diag = Copula::from_mass(Array2::from_diag(&Array1::from_elem(m, 1.0 / m as f64))).unwrap();
        assert_eq!(indicator(&diag, 0.1).unwrap(), 0.0);
        let anti = Copula::from_mass(Array2::from_shape_fn((m, m), |(i, j)| if i + j == m - 1 { 1.0 / m as f64 } else { 0.0 })).unwrap();
        assert!(indicator(&anti, 0.1).unwrap() >= 10.0);
        let mut only_down = Array2::zeros((m, m));
        only_down[[0, m - 1]] = 1.0;
        assert_eq!(indicator(&Copula::from_mass(only_down).unwrap(), 0.1).unwrap(), f64::INFINITY);
        assert!(indicator(&u, 0.5).is_err());
    }

    #[test]
    fn copula_csv_round_trip() {
        let c = Copula::from_mass(random_mass(7, 3)).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf, Some("config-hash: 0")).unwrap();
        assert_eq!(Copula::<f64>::read_csv(buf.as_slice()).unwrap().mass(), c.mass());
        assert!(c.to_svg("c", None).contains("<svg"));
    }

    #[test]
    fn run_classification() {
        let dates: Vec<NaiveDate> = (0..300).map(|i| NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i)).collect();
        let mut v = vec![0.5f64; 300];
        v[10..70].fill(2.0); // 60 days: discarded
        v[80..160].fill(2.0); // 80 days: warning
        v[170..271].fill(2.0); // 101 days: crisis
        let iv = classify_runs(&dates, &v, 60, 100);
        assert_eq!(iv.len(), 2);
        assert_eq!((iv[0].start_index, iv[0].end_index, iv[0].severity), (80, 159, Severity::Warning));
        assert_eq!((iv[1].len(), iv[1].severity), (101, Severity::Crisis));
    }

    /// Daily returns with volatility rising in the asset index; the drift is
    /// proportional to volatility, negative on `crash` days.
    fn regime_panel(len: usize, crash: std::ops::Range<usize>, seed: u64) -> ReturnsPanel<f64> {
        let n = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vol: Vec<f64> = (0..n).map(|j| 0.004 + 0.002 * j as f64).collect();
        let returns = Array2::from_shape_fn((len, n), |(t, j)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let drift = if crash.contains(&t) { -2.0 * vol[j] } else { 0.15 * vol[j] };
            drift + vol[j] * z
        });
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        ReturnsPanel::new(
            (0..n).map(|j| format!("S{j}")).collect(),
            (0..len).map(|i| start + chrono::Days::new(i as u64)).collect(),
            returns,
        )
        .unwrap()
    }

    fn fast_config() -> DetectConfig {
        DetectConfig { m: 20, sample_count: 8_000, ..DetectConfig::default() }
    }

    #[test]
    fn planted_crash_is_detected_and_calm_is_quiet() {
        let crashed = regime_panel(360, 150..270, 1);
        let s = detect(&crashed, &fast_config()).unwrap();
        assert_eq!(s.intervals.len(), 1, "{:?}", s.intervals);
        assert_eq!(s.intervals[0].severity, Severity::Crisis);
        let calm = regime_panel(360, 0..0, 1);
        assert!(detect(&calm, &fast_config()).unwrap().intervals.is_empty());
    }

    #[test]
    fn detect_is_deterministic_and_shift_invariant() {
        let p = regime_panel(140, 70..140, 2);
        let cfg = DetectConfig { warning_days: 5, crisis_days: 20, ..fast_config() };
        let a = detect(&p, &cfg).unwrap();
        assert_eq!(a, detect(&p, &cfg).unwrap());
        let shifted = ReturnsPanel::new(
            p.symbols().to_vec(),
            p.dates().iter().map(|d| *d + chrono::Days::new(31)).collect(),
            p.returns().clone(),
        )
        .unwrap();
        let b = detect(&shifted, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        assert!(!a.intervals.is_empty());
        for (x, y) in a.intervals.iter().zip(&b.intervals) {
            assert_eq!((x.start_index, x.end_index, x.severity), (y.start_index, y.end_index, y.severity));
            assert_eq!(y.start, x.start + chrono::Days::new(31));
        }
        let mut buf = Vec::new();
        a.write_csv(&mut buf, None).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), a.dates.len() + 1);
    }

    #[test]
    fn short_panel_rejected() {
        let p = regime_panel(60, 0..0, 3);
        assert!(matches!(detect(&p, &fast_config()), Err(Error::Window { .. })));
    }

    proptest! {
        #[test]
        fn row_reversal_inverts_indicator(seed in 0u64..1000, m in 4usize..40) {
            let mass = random_mass(m, seed);
            let c = Copula::from_mass(mass.clone()).unwrap();
            let flipped = Copula::from_mass(Array2::from_shape_fn((m, m), |(i, j)| mass[[m - 1 - i, j]])).unwrap();
            let a = indicator(&c, 0.1).unwrap();
            let b = indicator(&flipped, 0.1).unwrap();
            prop_assert!((a * b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn anti_transpose_preserves_indicator(seed in 0u64..1000, m in 4usize..40) {
            let mass = random_mass(m, seed);
            let c = Copula::from_mass(mass.clone()).unwrap();
            let t = Copula::from_mass(Array2::from_shape_fn((m, m), |(i, j)| mass[[m - 1 - j, m - 1 - i]])).unwrap();
            prop_assert!((indicator(&c, 0.1).unwrap() - indicator(&t, 0.1).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn estimated_copula_invariants(seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4;
            let r = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
            let a = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
            let sigma = a.t().dot(&a);
            let count = 20_000;
            let c = estimate_copula(r.view(), sigma.view(), 5, count, seed).unwrap();
            prop_assert!((c.mass().sum() - 1.0).abs() < 1e-9);
            let tol = 5.0 / (count as f64).sqrt();
            for s in c.row_sums().into_iter().chain(c.column_sums()) {
                prop_assert!((s - 0.2).abs() < tol);
            }
        }
    }
}
