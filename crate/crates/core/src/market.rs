//! Dated return panels: CSV ingestion, compound returns and the
//! constant-correlation shrinkage covariance estimator.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvFormat {
    /// Cells are prices; converted to simple returns `p_t/p_{t−1} − 1`.
    Prices,
    /// Cells are simple returns.
    Returns,
}

/// `T × n` simple returns with asset symbols and strictly increasing dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel<T> {
    symbols: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: Array2<T>,
}

impl<T: Scalar> ReturnsPanel<T> {
    pub fn new(symbols: Vec<String>, dates: Vec<NaiveDate>, returns: Array2<T>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::InsufficientData(format!("{} assets; need at least 2", symbols.len())));
        }
        if dates.len() < 2 {
            return Err(Error::InsufficientData(format!("{} dates; need at least 2", dates.len())));
        }
        if returns.dim() != (dates.len(), symbols.len()) {
            return Err(Error::DimensionMismatch { expected: dates.len() * symbols.len(), got: returns.len() });
        }
        if let Some(w) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("dates not strictly increasing at {}", dates[w + 1])));
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite return".into()));
        }
        Ok(Self { symbols, dates, returns })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn returns(&self) -> &Array2<T> {
        &self.returns
    }

    pub fn n_assets(&self) -> usize {
        self.symbols.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Rows `[start, end)` as a new panel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Window { window: end.saturating_sub(start), len: self.len() });
        }
        Self::new(
            self.symbols.clone(),
            self.dates[start..end].to_vec(),
            self.returns.slice(s![start..end, ..]).to_owned(),
        )
    }

    /// Index of the first date on or after `date`.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let i = self.dates.partition_point(|d| *d < date);
        (i < self.dates.len()).then_some(i)
    }

    /// Writes `date,SYM…` rows of returns at 17 significant digits; an
    /// optional comment line comes first.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "date,{}", self.symbols.join(","))?;
        for (t, d) in self.dates.iter().enumerate() {
            let cells: Vec<String> = self.returns.row(t).iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
            writeln!(w, "{},{}", d.format("%Y-%m-%d"), cells.join(","))?;
        }
        Ok(())
    }
}

/// Reads a panel from a CSV file; see [`read_panel`].
pub fn ingest_csv<T: Scalar>(path: &Path, format: CsvFormat) -> Result<ReturnsPanel<T>> {
    read_panel(std::fs::File::open(path)?, format)
}

/// Header row `date,SYM1,…`; first column ISO-8601 dates. Rows with an empty
/// or `NA`/`NaN` cell are dropped (with a logged count); any other
/// unparseable cell is an error naming its data row and column (1-based,
/// the date being column 1). Lines starting with `#` are comments.
pub fn read_panel<T: Scalar, R: Read>(reader: R, format: CsvFormat) -> Result<ReturnsPanel<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 {
        return Err(Error::InsufficientData(format!("{} asset columns; need at least 2", headers.len().saturating_sub(1))));
    }
    let symbols: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let n = symbols.len();
    let mut dates = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut dropped = 0usize;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(Error::Ingestion {
                row,
                column: rec.len().min(n + 1),
                message: format!("expected {} cells, found {}", n + 1, rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| Error::Ingestion {
            row,
            column: 1,
            message: format!("bad date {:?}: {e}", &rec[0]),
        })?;
        let mut cells = Vec::with_capacity(n);
        let mut missing = false;
        for j in 0..n {
            let raw = &rec[j + 1];
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                missing = true;
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| Error::Ingestion {
                row,
                column: j + 2,
                message: format!("unparseable number {raw:?}"),
            })?;
            if !v.is_finite() || (format == CsvFormat::Prices && v <= 0.0) {
                return Err(Error::Ingestion { row, column: j + 2, message: format!("invalid value {raw:?}") });
            }
            cells.push(T::lit(v));
        }
        if missing {
            dropped += 1;
            continue;
        }
        if let Some(last) = dates.last() {
            if date <= *last {
                return Err(Error::Ingestion { row, column: 1, message: format!("date {date} not after {last}") });
            }
        }
        dates.push(date);
        values.extend(cells);
    }
    if dropped > 0 {
        log::info!("dropped {dropped} rows with missing cells");
    }
    let t = dates.len();
    let raw = Array2::from_shape_vec((t, n), values).expect("row lengths checked");
    match format {
        CsvFormat::Returns => ReturnsPanel::new(symbols, dates, raw),
        CsvFormat::Prices => {
            if t < 3 {
                return Err(Error::InsufficientData(format!("{t} price rows give fewer than 2 returns")));
            }
            let prev = raw.slice(s![..t - 1, ..]);
            let next = raw.slice(s![1.., ..]);
            let returns = &next / &prev - T::one();
            ReturnsPanel::new(symbols, dates[1..].to_vec(), returns)
        }
    }
}

/// `R_j = Π_t (1 + r_{t,j}) − 1` over the trailing `k` observations.
pub fn compound_returns<T: Scalar>(panel: &ReturnsPanel<T>, k: usize) -> Result<Array1<T>> {
    compound_returns_at(panel, panel.len().saturating_sub(1), k)
}

/// Compound returns over the `k` observations ending at row `end`.
pub fn compound_returns_at<T: Scalar>(panel: &ReturnsPanel<T>, end: usize, k: usize) -> Result<Array1<T>> {
    if k == 0 || k > end + 1 || end >= panel.len() {
        return Err(Error::Window { window: k, len: panel.len() });
    }
    Ok(compound(panel.returns.slice(s![end + 1 - k..=end, ..])))
}

/// Compounds every column of a returns block.
pub fn compound<T: Scalar>(block: ArrayView2<'_, T>) -> Array1<T> {
    block.map_axis(Axis(0), |col| col.iter().fold(T::one(), |acc, &r| acc * (T::one() + r)) - T::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageTarget {
    ConstantCorrelation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate<T> {
    pub sigma: Array2<T>,
    /// Weight on the target, in `[0, 1]`.
    pub shrinkage: T,
    pub target: ShrinkageTarget,
}

/// Shrinkage covariance of a whole panel.
pub fn shrinkage_covariance<T: Scalar>(panel: &ReturnsPanel<T>) -> Result<CovarianceEstimate<T>> {
    shrinkage_covariance_of(panel.returns.view(), &panel.symbols)
}

/// Ledoit–Wolf shrinkage towards the constant-correlation target with the
/// plug-in intensity `clip((π̂ − ρ̂)/γ̂/T, 0, 1)`.
pub fn shrinkage_covariance_of<T: Scalar>(returns: ArrayView2<'_, T>, symbols: &[String]) -> Result<CovarianceEstimate<T>> {
    let (t, n) = returns.dim();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} assets; need at least 2")));
    }
    if t < 2 {
        return Err(Error::InsufficientData(format!("window of {t} observations; need at least 2")));
    }
    let tf = T::from_usize_lossy(t);
    let mean = returns.mean_axis(Axis(0)).expect("nonempty");
    let x = &returns - &mean;
    let sample = x.t().dot(&x) / tf;
    let var = sample.diag().to_owned();
    for (j, &v) in var.iter().enumerate() {
        if !(v > T::zero()) {
            let name = symbols.get(j).cloned().unwrap_or_else(|| format!("#{j}"));
            return Err(Error::DegenerateAsset(name));
        }
    }
    let sd = var.mapv(|v| v.sqrt());
    let nf = T::from_usize_lossy(n);
    let mut corr_sum = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                corr_sum += sample[[i, j]] / (sd[i] * sd[j]);
            }
        }
    }
    let rbar = corr_sum / (nf * (nf - T::one()));
    let prior = Array2::from_shape_fn((n, n), |(i, j)| if i == j { var[i] } else { rbar * sd[i] * sd[j] });

    let x2 = x.mapv(|v| v * v);
    let x3 = x.mapv(|v| v * v * v);
    let xtx = x.t().dot(&x);
    let phi_mat = x2.t().dot(&x2) / tf - &(&xtx * &sample * T::lit(2.0) / tf) + &sample.mapv(|v| v * v);
    let phi = phi_mat.sum();
    let term1 = x3.t().dot(&x) / tf;
    let term3 = Array2::from_shape_fn((n, n), |(i, j)| sample[[i, j]] * var[i]);
    let theta = &term1 - &term3;
    let mut rho = phi_mat.diag().sum();
    let mut off = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += sd[j] / sd[i] * theta[[i, j]];
            }
        }
    }
    rho += rbar * off;
    let gamma = (&sample - &prior).mapv(|v| v * v).sum();
    let shrinkage = if gamma > T::zero() {
        ((phi - rho) / gamma / tf).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let mut sigma = &prior * shrinkage + &sample * (T::one() - shrinkage);
    // Exact symmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (sigma[[i, j]] + sigma[[j, i]]) * T::lit(0.5);
            sigma[[i, j]] = m;
            sigma[[j, i]] = m;
        }
    }
    Ok(CovarianceEstimate { sigma, shrinkage, target: ShrinkageTarget::ConstantCorrelation })
}

/// Plain (biased, `1/T`) sample covariance.
pub fn sample_covariance<T: Scalar>(returns: ArrayView2<'_, T>) -> Array2<T> {
    let t = T::from_usize_lossy(returns.nrows());
    let mean = returns.mean_axis(Axis(0)).expect("nonempty");
    let x = &returns - &mean;
    x.t().dot(&x) / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn random_panel(t: usize, n: usize, seed: u64) -> ReturnsPanel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = d("2020-01-01");
        ReturnsPanel::new(
            (0..n).map(|i| format!("A{i}")).collect(),
            (0..t).map(|i| start + chrono::Days::new(i as u64)).collect(),
            Array2::from_shape_fn((t, n), |_| { let z: f64 = StandardNormal.sample(&mut rng); 0.01 * z }),
        )
        .unwrap()
    }

    #[test]
    fn constant_prices_give_zero_returns() {
        let csv = "date,A,B\n2020-01-01,10,20\n2020-01-02,10,20\n2020-01-03,10,20\n";
        let p: ReturnsPanel<f64> = read_panel(csv.as_bytes(), CsvFormat::Prices).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.returns().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn price_step_return() {
        let csv = "date,A,B\n2020-01-01,100,1\n2020-01-02,110,1\n2020-01-03,110,1\n";
        let p: ReturnsPanel<f64> = read_panel(csv.as_bytes(), CsvFormat::Prices).unwrap();
        assert!((p.returns()[[0, 0]] - 0.10).abs() < 1e-15);
    }

    #[test]
    fn missing_rows_dropped_and_bad_cells_located() {
        let csv = "date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,,0.1\n2020-01-03,0.0,NA\n2020-01-04,0.3,0.1\n";
        let p: ReturnsPanel<f64> = read_panel(csv.as_bytes(), CsvFormat::Returns).unwrap();
        assert_eq!(p.dates(), &[d("2020-01-01"), d("2020-01-04")]);
        let bad = "date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,0.1,x\n";
        match read_panel::<f64, _>(bad.as_bytes(), CsvFormat::Returns) {
            Err(Error::Ingestion { row: 2, column: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let truncated = "date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,0.1\n";
        assert!(matches!(
            read_panel::<f64, _>(truncated.as_bytes(), CsvFormat::Returns),
            Err(Error::Ingestion { row: 2, .. })
        ));
    }

    #[test]
    fn too_small_panels_rejected() {
        let one_asset = "date,A\n2020-01-01,0.1\n2020-01-02,0.2\n";
        assert!(matches!(read_panel::<f64, _>(one_asset.as_bytes(), CsvFormat::Returns), Err(Error::InsufficientData(_))));
        let one_date = "date,A,B\n2020-01-01,0.1,0.2\n";
        assert!(matches!(read_panel::<f64, _>(one_date.as_bytes(), CsvFormat::Returns), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let p = random_panel(30, 4, 1);
        let mut buf = Vec::new();
        p.write_csv(&mut buf, Some("config-hash: x")).unwrap();
        let back: ReturnsPanel<f64> = read_panel(buf.as_slice(), CsvFormat::Returns).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn compounding() {
        let p = ReturnsPanel::new(
            vec!["A".into(), "B".into()],
            vec![d("2020-01-01"), d("2020-01-02")],
            array![[0.1f64, 0.0], [0.1, 0.0]],
        )
        .unwrap();
        let r = compound_returns(&p, 2).unwrap();
        assert!((r[0] - 0.21).abs() < 1e-15 && r[1] == 0.0);
        assert!(matches!(compound_returns(&p, 3), Err(Error::Window { .. })));

        let q = random_panel(5, 3, 2);
        let r = compound_returns(&q, 5).unwrap();
        for j in 0..3 {
            let direct = (0..5).map(|t| 1.0 + q.returns()[[t, j]]).product::<f64>() - 1.0;
            assert!((r[j] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn shrinkage_vanishes_with_long_samples() {
        // Unequal correlations, so the target is misspecified.
        let base = random_panel(10_000, 3, 3);
        let mix = array![[1.0, 0.9, 0.0], [0.0, 0.4, 0.2], [0.0, 0.0, 1.0]];
        let p = ReturnsPanel::new(base.symbols().to_vec(), base.dates().to_vec(), base.returns().dot(&mix)).unwrap();
        let est = shrinkage_covariance(&p).unwrap();
        let sample = sample_covariance(p.returns().view());
        let diff = (&est.sigma - &sample).mapv(|v| v * v).sum().sqrt();
        let norm = sample.mapv(|v| v * v).sum().sqrt();
        assert!(diff / norm < 0.05);
        assert!(est.shrinkage < 0.05);
    }

    #[test]
    fn zero_variance_asset_named() {
        let mut p = random_panel(20, 3, 4);
        let mut r = p.returns().clone();
        r.column_mut(1).fill(0.0);
        p = ReturnsPanel::new(p.symbols().to_vec(), p.dates().to_vec(), r).unwrap();
        match shrinkage_covariance(&p) {
            Err(Error::DegenerateAsset(s)) => assert_eq!(s, "A1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_window_estimate_is_psd() {
        let p = random_panel(15, 8, 5);
        let est = shrinkage_covariance(&p).unwrap();
        assert!(est.shrinkage > 0.0 && est.shrinkage <= 1.0);
        let (vals, _) = symmetric_eigen(est.sigma.view()).unwrap();
        assert!(vals[0] >= -1e-10);
    }

    #[test]
    fn shrinkage_matches_reference_implementation() {
        // Frozen from an independent NumPy port of the reference covCor routine.
        let (t, n) = (12, 4);
        let r = Array2::from_shape_fn((t, n), |(i, j)| {
            (1.3 * i as f64 + 0.7 * (j * j) as f64).sin() * 0.02 + 0.001 * j as f64
        });
        let names: Vec<String> = (0..n).map(|j| format!("A{j}")).collect();
        let est = shrinkage_covariance_of(r.view(), &names).unwrap();
        assert!((est.shrinkage - 0.06641290323993337).abs() < 1e-12);
        assert!((est.sigma[[0, 1]] - 0.0001390818815623065).abs() < 1e-15);
        assert!((est.sigma[[2, 3]] + 0.00017150101336104348).abs() < 1e-15);
        assert!((est.sigma[[1, 1]] - 0.00019430159124647295).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn compounding_is_associative(seed in 0u64..500, split in 1usize..9) {
            let p = random_panel(10, 3, seed);
            let whole = compound_returns(&p, 10).unwrap();
            let first = compound_returns_at(&p, split - 1, split).unwrap();
            let second = compound_returns_at(&p, 9, 10 - split).unwrap();
            for j in 0..3 {
                let joined = (1.0 + first[j]) * (1.0 + second[j]) - 1.0;
                prop_assert!((joined - whole[j]).abs() < 1e-12);
            }
        }

        #[test]
        fn shrinkage_eigenvalue_floor(seed in 0u64..200) {
            let p = random_panel(12, 5, seed);
            let est = shrinkage_covariance(&p).unwrap();
            let sample = sample_covariance(p.returns().view());
            let var = sample.diag().to_owned();
            let sd = var.mapv(f64::sqrt);
            let n = 5.0;
            let rbar = (0..5).flat_map(|i| (0..5).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| sample[[i, j]] / (sd[i] * sd[j]))
                .sum::<f64>() / (n * (n - 1.0));
            let prior = Array2::from_shape_fn((5, 5), |(i, j)| if i == j { var[i] } else { rbar * sd[i] * sd[j] });
            let floor = symmetric_eigen(sample.view()).unwrap().0[0].min(symmetric_eigen(prior.view()).unwrap().0[0]);
            let got = symmetric_eigen(est.sigma.view()).unwrap().0[0];
            prop_assert!(got >= floor - 1e-10);
        }
    }
}
