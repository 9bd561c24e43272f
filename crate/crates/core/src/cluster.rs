//! Copula clustering: exact earth mover's distance, spectral clustering on
//! an EMD affinity, k-medoids and corner-mass features.

use std::collections::VecDeque;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::Copula;
use crate::linalg::symmetric_eigen;
use crate::{Error, Result, Scalar};

/// Default transport resolution.
pub const DEFAULT_DOWNSAMPLE: usize = 20;

/// Block boundaries splitting `m` cells into `d` nearly equal blocks.
fn blocks(m: usize, d: usize) -> Vec<usize> {
    (0..=d).map(|b| b * m / d).collect()
}

/// Aggregated block masses and block centers in original cell units.
fn downsample<T: Scalar>(mass: ArrayView2<'_, T>, d: usize) -> (Vec<T>, Vec<(f64, f64)>) {
    let m = mass.nrows();
    let bounds = blocks(m, d);
    let center = |b: usize| (bounds[b] + bounds[b + 1] - 1) as f64 / 2.0;
    let mut masses = Vec::with_capacity(d * d);
    let mut centers = Vec::with_capacity(d * d);
    for bi in 0..d {
        for bj in 0..d {
            let block = mass.slice(ndarray::s![bounds[bi]..bounds[bi + 1], bounds[bj]..bounds[bj + 1]]);
            masses.push(block.sum());
            centers.push((center(bi), center(bj)));
        }
    }
    (masses, centers)
}

/// Earth mover's distance between two equal-size copulae after aggregating
/// to a `downsample_to × downsample_to` grid. Ground distance is Euclidean
/// between block centers, measured in original cell widths.
pub fn emd<T: Scalar>(a: &Copula<T>, b: &Copula<T>, downsample_to: usize) -> Result<T> {
    emd_masses(a.mass().view(), b.mass().view(), downsample_to)
}

/// [`emd`] on raw mass matrices.
pub fn emd_masses<T: Scalar>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>, downsample_to: usize) -> Result<T> {
    let m = a.nrows();
    if a.dim() != (m, m) || b.dim() != (m, m) {
        return Err(Error::InvalidDistribution(format!("shapes {:?} and {:?} differ or are not square", a.dim(), b.dim())));
    }
    if downsample_to == 0 || downsample_to > m {
        return Err(Error::InvalidParameter(format!("downsample_to must lie in [1, {m}], got {downsample_to}")));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::InvalidDistribution("negative or non-finite mass".into()));
    }
    let (sa, sb) = (a.sum(), b.sum());
    if !(sa > T::zero() && sb > T::zero()) || (sa / sb - T::one()).abs().as_f64() > 1e-6 {
        return Err(Error::InvalidDistribution(format!("total masses {sa} and {sb} differ")));
    }
    let (ma, centers) = downsample(a, downsample_to);
    let (mb, _) = downsample(b, downsample_to);
    let (ma, mb): (Vec<f64>, Vec<f64>) = (ma.iter().map(|v| v.as_f64() / sa.as_f64()).collect(), mb.iter().map(|v| v.as_f64() / sb.as_f64()).collect());
    // Canonical argument order makes the result exactly symmetric.
    let (ma, mb) = if ma.partial_cmp(&mb) == Some(std::cmp::Ordering::Greater) { (mb, ma) } else { (ma, mb) };
    // Mass present in both stays in place at zero cost under a metric.
    let mut supply = Vec::new();
    let mut demand = Vec::new();
    for (k, (&x, &y)) in ma.iter().zip(&mb).enumerate() {
        let shared = x.min(y);
        if x - shared > 0.0 {
            supply.push((k, x - shared));
        }
        if y - shared > 0.0 {
            demand.push((k, y - shared));
        }
    }
    if supply.is_empty() || demand.is_empty() {
        return Ok(T::zero());
    }
    let cost: Vec<Vec<f64>> = supply
        .iter()
        .map(|&(i, _)| {
            demand
                .iter()
                .map(|&(j, _)| {
                    let (p, q) = (centers[i], centers[j]);
                    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
                })
                .collect()
        })
        .collect();
    let s: Vec<f64> = supply.iter().map(|p| p.1).collect();
    let d: Vec<f64> = demand.iter().map(|p| p.1).collect();
    Ok(T::lit(transport(&cost, &s, &d)?))
}

/// Minimum-cost transportation by the network simplex on the bipartite
/// supply/demand graph (MODI potentials, spanning-tree basis).
pub fn transport(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<f64> {
    let (p, q) = (supply.len(), demand.len());
    // Basis: exactly p + q − 1 cells forming a spanning tree (northwest corner).
    let mut flow = vec![vec![0.0; q]; p];
    let mut basic = vec![vec![false; q]; p];
    let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let f = s[i].min(d[j]).max(0.0);
        flow[i][j] = f;
        basic[i][j] = true;
        s[i] -= f;
        d[j] -= f;
        if i == p - 1 && j == q - 1 {
            break;
        }
        if i == p - 1 || (j < q - 1 && d[j] <= s[i]) {
            j += 1;
        } else {
            i += 1;
        }
    }
    let scale = cost.iter().flatten().fold(1.0f64, |a, &c| a.max(c));
    let tol = 1e-12 * scale;
    let max_iter = 50 * (p + q) * (p + q) + 1000;
    let mut degenerate_run = 0;
    for _ in 0..max_iter {
        // Potentials u_i + v_j = c_ij on basic cells, u_0 = 0.
        let mut u = vec![f64::NAN; p];
        let mut v = vec![f64::NAN; q];
        u[0] = 0.0;
        let mut queue = VecDeque::from([(true, 0usize)]);
        while let Some((is_row, k)) = queue.pop_front() {
            if is_row {
                for jj in 0..q {
                    if basic[k][jj] && v[jj].is_nan() {
                        v[jj] = cost[k][jj] - u[k];
                        queue.push_back((false, jj));
                    }
                }
            } else {
                for ii in 0..p {
                    if basic[ii][k] && u[ii].is_nan() {
                        u[ii] = cost[ii][k] - v[k];
                        queue.push_back((true, ii));
                    }
                }
            }
        }
        debug_assert!(u.iter().chain(&v).all(|x| x.is_finite()), "basis is a spanning tree");
        // Entering cell: most negative reduced cost, or the first negative
        // one (Bland) after a run of degenerate pivots.
        let bland = degenerate_run > p + q;
        let mut enter = None;
        let mut best = -tol;
        'scan: for ii in 0..p {
            for jj in 0..q {
                if basic[ii][jj] {
                    continue;
                }
                let rc = cost[ii][jj] - u[ii] - v[jj];
                if rc < best {
                    enter = Some((ii, jj));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = enter else {
            return Ok(flow.iter().zip(cost).map(|(fr, cr)| fr.iter().zip(cr).map(|(f, c)| f * c).sum::<f64>()).sum());
        };
        // Tree path from column ej back to row ei; with the entering cell it
        // closes the cycle.
        let cycle = tree_path(&basic, ei, ej, p, q);
        // cycle[0] = (ei, ej) gains flow, then signs alternate.
        let mut theta = f64::INFINITY;
        let mut leave = None;
        for (k, &(ci, cj)) in cycle.iter().enumerate() {
            if k % 2 == 1 && flow[ci][cj] < theta {
                theta = flow[ci][cj];
                leave = Some((ci, cj));
            }
        }
        let (li, lj) = leave.expect("cycle has a losing cell");
        for (k, &(ci, cj)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                flow[ci][cj] += theta;
            } else {
                flow[ci][cj] = (flow[ci][cj] - theta).max(0.0);
            }
        }
        flow[li][lj] = 0.0;
        basic[li][lj] = false;
        basic[ei][ej] = true;
        degenerate_run = if theta <= 0.0 { degenerate_run + 1 } else { 0 };
    }
    Err(Error::Numerical(format!("transport did not converge in {max_iter} pivots")))
}

/// Cells of the cycle closed by adding `(ei, ej)` to the basis tree, starting
/// with the entering cell and alternating between rows and columns.
fn tree_path(basic: &[Vec<bool>], ei: usize, ej: usize, p: usize, q: usize) -> Vec<(usize, usize)> {
    // Nodes 0..p are rows, p..p+q columns. BFS from column ej to row ei.
    let mut parent = vec![usize::MAX; p + q];
    let start = p + ej;
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == ei {
            break;
        }
        if node < p {
            for jj in 0..q {
                if basic[node][jj] && parent[p + jj] == usize::MAX {
                    parent[p + jj] = node;
                    queue.push_back(p + jj);
                }
            }
        } else {
            let jj = node - p;
            for ii in 0..p {
                if basic[ii][jj] && parent[ii] == usize::MAX {
                    parent[ii] = node;
                    queue.push_back(ii);
                }
            }
        }
    }
    let mut cycle = vec![(ei, ej)];
    let mut node = ei;
    while node != start {
        let prev = parent[node];
        let cell = if node < p { (node, prev - p) } else { (prev, node - p) };
        cycle.push(cell);
        node = prev;
    }
    cycle
}

/// Pairwise EMD matrix, computed in parallel.
pub fn emd_matrix<T: Scalar>(copulas: &[Copula<T>], downsample_to: usize) -> Result<Array2<T>> {
    let k = copulas.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let values: Vec<T> = pairs.par_iter().map(|&(i, j)| emd(&copulas[i], &copulas[j], downsample_to)).collect::<Result<_>>()?;
    let mut d = Array2::zeros((k, k));
    for (&(i, j), v) in pairs.iter().zip(values) {
        d[[i, j]] = v;
        d[[j, i]] = v;
    }
    Ok(d)
}

fn check_distances<T: Scalar>(d: ArrayView2<'_, T>) -> Result<()> {
    let k = d.nrows();
    if d.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: d.ncols() });
    }
    for i in 0..k {
        if d[[i, i]] != T::zero() {
            return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
        }
        for j in 0..i {
            let (a, b) = (d[[i, j]], d[[j, i]]);
            if !(a >= T::zero()) || (a - b).abs() > T::lit(1e-9) * (T::one() + a.abs()) {
                return Err(Error::InvalidInput(format!("distance matrix not symmetric nonnegative at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Result of [`spectral_cluster`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralClustering<T> {
    pub labels: Vec<usize>,
    pub medoids: Vec<usize>,
    pub sigma: T,
}

/// Spectral clustering on `A_ij = exp(−D_ij²/2σ²)` with σ the standard
/// deviation of the off-diagonal distances. The top `k` eigenvectors of
/// `Δ^{-1/2} A Δ^{-1/2}` (Δ the degrees) give row-normalized embeddings that
/// are split by k-medoids.
pub fn spectral_cluster<T: Scalar>(d: ArrayView2<'_, T>, k: usize, seed: u64) -> Result<SpectralClustering<T>> {
    check_distances(d)?;
    let n = d.nrows();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("need 2 ≤ k ≤ {n}, got {k}")));
    }
    let off: Vec<T> = (0..n).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| d[[i, j]]).collect();
    let cnt = T::from_usize_lossy(off.len().max(1));
    let mean = off.iter().copied().sum::<T>() / cnt;
    let var = off.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / cnt;
    let mut sigma = var.sqrt();
    if !(sigma > T::zero()) {
        sigma = T::one();
    }
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let a = d.mapv(|x| (-(x * x) / two_s2).exp());
    let deg = a.sum_axis(Axis(1));
    let inv_sqrt = deg.mapv(|x| T::one() / x.sqrt());
    let l = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] * inv_sqrt[i] * inv_sqrt[j]);
    let mut emb = top_eigenvectors(l.view(), k)?;
    for mut row in emb.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > T::zero() {
            row /= norm;
        }
    }
    let res = kmedoids(emb.view(), k, seed)?;
    Ok(SpectralClustering { labels: res.labels, medoids: res.medoids, sigma })
}

/// Above this size dense Jacobi is replaced by subspace iteration.
const DENSE_EIGEN_LIMIT: usize = 300;

/// Eigenvectors of the `k` largest eigenvalues of a symmetric matrix whose
/// spectrum lies in `[−1, 1]`, as columns in descending eigenvalue order.
fn top_eigenvectors<T: Scalar>(l: ArrayView2<'_, T>, k: usize) -> Result<Array2<T>> {
    let n = l.nrows();
    if n <= DENSE_EIGEN_LIMIT {
        let (vals, vecs) = symmetric_eigen(l)?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigenvalues not finite".into()));
        }
        let mut out = Array2::zeros((n, k));
        for c in 0..k {
            out.column_mut(c).assign(&vecs.column(n - 1 - c));
        }
        return Ok(out);
    }
    // Orthogonal iteration on L + I (spectrum in [0, 2]), then Rayleigh–Ritz.
    let shifted = &l + &Array2::<T>::eye(n);
    let mut q = Array2::from_shape_fn((n, k), |(i, j)| T::lit(((i * 7 + j * 13) % 17) as f64 + 1.0 + (i == j) as u8 as f64));
    orthonormalize(&mut q)?;
    let tol = T::lit(1e-10).max(T::tolerance());
    for _ in 0..10_000 {
        let mut z = shifted.dot(&q);
        orthonormalize(&mut z)?;
        // Subspace distance via projection residual.
        let proj = q.dot(&q.t().dot(&z));
        let diff = (&z - &proj).mapv(|v| v * v).sum().sqrt();
        q = z;
        if diff < tol {
            break;
        }
    }
    let small = q.t().dot(&l.dot(&q));
    let (_, w) = symmetric_eigen(small.view())?;
    let rotated = q.dot(&w);
    let mut out = Array2::zeros((n, k));
    for c in 0..k {
        out.column_mut(c).assign(&rotated.column(k - 1 - c));
    }
    Ok(out)
}

/// Modified Gram–Schmidt on the columns.
fn orthonormalize<T: Scalar>(q: &mut Array2<T>) -> Result<()> {
    for j in 0..q.ncols() {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let ci = q.column(i).to_owned();
            q.column_mut(j).scaled_add(-proj, &ci);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if !(norm > T::epsilon()) {
            return Err(Error::Numerical("subspace iteration lost rank".into()));
        }
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(())
}

/// Result of k-medoids: labels, medoid indices and total distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Medoids<T> {
    pub labels: Vec<usize>,
    pub medoids: Vec<usize>,
    pub cost: T,
}

/// k-medoids on the rows of `points` with Euclidean distance.
pub fn kmedoids<T: Scalar>(points: ArrayView2<'_, T>, k: usize, seed: u64) -> Result<Medoids<T>> {
    let n = points.nrows();
    let d = Array2::from_shape_fn((n, n), |(i, j)| {
        let diff = &points.row(i) - &points.row(j);
        diff.dot(&diff).sqrt()
    });
    kmedoids_distances(d.view(), k, seed)
}

/// PAM on a distance matrix: greedy build over a seeded candidate order,
/// then best-improvement swaps until none lowers the total distance.
pub fn kmedoids_distances<T: Scalar>(d: ArrayView2<'_, T>, k: usize, seed: u64) -> Result<Medoids<T>> {
    let n = d.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ k ≤ {n}, got {k}")));
    }
    let mut distinct: Vec<usize> = Vec::new();
    for i in 0..n {
        if distinct.iter().all(|&j| d[[i, j]] > T::zero()) {
            distinct.push(i);
            if distinct.len() >= k {
                break;
            }
        }
    }
    if distinct.len() < k {
        return Err(Error::DegenerateInput(format!("only {} distinct points for k = {k}", distinct.len())));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let total = |meds: &[usize]| -> T { (0..n).map(|i| meds.iter().map(|&m| d[[i, m]]).fold(T::infinity(), T::min)).sum() };
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(T, usize)> = None;
        for &c in &order {
            if medoids.contains(&c) || medoids.iter().any(|&m| d[[c, m]] == T::zero()) {
                continue;
            }
            medoids.push(c);
            let cost = total(&medoids);
            medoids.pop();
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, c));
            }
        }
        medoids.push(best.expect("enough distinct points").1);
    }
    let mut cost = total(&medoids);
    loop {
        let mut best: Option<(T, usize, usize)> = None;
        for slot in 0..k {
            for &c in &order {
                if medoids.contains(&c) {
                    continue;
                }
                let old = medoids[slot];
                medoids[slot] = c;
                let trial = total(&medoids);
                medoids[slot] = old;
                if trial < best.map_or(cost, |b| b.0) - T::epsilon() * (T::one() + cost.abs()) {
                    best = Some((trial, slot, c));
                }
            }
        }
        match best {
            Some((trial, slot, c)) => {
                debug_assert!(trial <= cost);
                medoids[slot] = c;
                cost = trial;
            }
            None => break,
        }
    }
    let labels = (0..n)
        .map(|i| {
            (0..k)
                .min_by(|&a, &b| d[[i, medoids[a]]].partial_cmp(&d[[i, medoids[b]]]).expect("finite"))
                .expect("k ≥ 1")
        })
        .collect();
    Ok(Medoids { labels, medoids, cost })
}

/// Smoothing added to both sides of every corner ratio.
pub const CORNER_EPS: f64 = 1e-6;

/// Corner masses and their six pairwise ratios
/// `[UL/UR, UL/LL, UL/LR, UR/LL, UR/LR, LL/LR]`. "Upper" is the
/// high-return end, "left" the low-volatility end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaFeatures {
    pub upper_left: f64,
    pub upper_right: f64,
    pub lower_left: f64,
    pub lower_right: f64,
    pub ratios: [f64; 6],
}

pub fn corner_features<T: Scalar>(copula: &Copula<T>, corner_size: f64) -> Result<CopulaFeatures> {
    if !(corner_size > 0.0 && corner_size < 0.5) {
        return Err(Error::InvalidParameter(format!("corner_size must lie in (0, 0.5), got {corner_size}")));
    }
    let m = copula.m();
    let c = ((corner_size * m as f64).round() as usize).clamp(1, m / 2);
    let mass = copula.mass();
    let block = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| mass.slice(ndarray::s![rows, cols]).sum().as_f64();
    let ul = block(m - c..m, 0..c);
    let ur = block(m - c..m, m - c..m);
    let ll = block(0..c, 0..c);
    let lr = block(0..c, m - c..m);
    let r = |a: f64, b: f64| (a + CORNER_EPS) / (b + CORNER_EPS);
    Ok(CopulaFeatures {
        upper_left: ul,
        upper_right: ur,
        lower_left: ll,
        lower_right: lr,
        ratios: [r(ul, ur), r(ul, ll), r(ul, lr), r(ur, ll), r(ur, lr), r(ll, lr)],
    })
}

/// Summary of a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub config_hash: String,
    pub k: usize,
    pub sigma: Option<f64>,
    pub labels: Vec<usize>,
    pub medoids: Vec<usize>,
    /// Mean indicator per cluster, when indicators are supplied.
    pub cluster_mean_indicator: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl ClusterReport {
    pub fn new(k: usize, sigma: Option<f64>, labels: Vec<usize>, medoids: Vec<usize>, indicators: Option<&[f64]>) -> Self {
        let mut sizes = vec![0usize; k];
        let mut sums = vec![0.0; k];
        for (i, &l) in labels.iter().enumerate() {
            sizes[l] += 1;
            if let Some(ind) = indicators {
                sums[l] += ind[i];
            }
        }
        let means = if indicators.is_some() {
            sums.iter().zip(&sizes).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect()
        } else {
            Vec::new()
        };
        Self { config_hash: String::new(), k, sigma, labels, medoids, cluster_mean_indicator: means, cluster_sizes: sizes }
    }
}

/// Writes a square matrix as CSV rows at 17 significant digits.
pub fn write_matrix_csv<T: Scalar, W: Write>(d: ArrayView2<'_, T>, mut w: W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    for row in d.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Feature matrix, one row of six ratios per copula.
pub fn feature_matrix(features: &[CopulaFeatures]) -> Array2<f64> {
    let mut out = Array2::zeros((features.len(), 6));
    for (i, f) in features.iter().enumerate() {
        out.row_mut(i).assign(&Array1::from(f.ratios.to_vec()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::indicator;
    use crate::lp::LinearProgram;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_copula(m: usize, rng: &mut ChaCha8Rng) -> Copula<f64> {
        let raw = Array2::from_shape_fn((m, m), |_| rng.random::<f64>());
        let s = raw.sum();
        Copula::from_mass(raw / s).unwrap()
    }

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
            b_eq[p] = a.as_slice().unwrap()[p];
            b_eq[cells + p] = b.as_slice().unwrap()[p];
        }
        LinearProgram::new(cost).with_equalities(a_eq, b_eq).solve().unwrap().objective
    }

    #[test]
    fn emd_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_copula(6, &mut rng);
        assert_eq!(emd(&c, &c, 6).unwrap(), 0.0);
        let mut a = Array2::zeros((2, 2));
        a[[0, 0]] = 1.0;
        let mut b = Array2::zeros((2, 2));
        b[[0, 1]] = 1.0;
        assert!((emd_masses(a.view(), b.view(), 2).unwrap() - 1.0f64).abs() < 1e-15);
        let mut half = Array2::zeros((2, 2));
        half[[0, 0]] = 0.6;
        assert!(matches!(emd_masses(a.view(), half.view(), 2), Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn emd_matches_frozen_reference() {
        // Frozen from SciPy's HiGHS linprog on the dense formulation.
        let dist = |k: f64| {
            let a = Array2::from_shape_fn((4, 4), |(i, j)| (1.7 * i as f64 + 2.3 * j as f64 + k).sin() + 1.1);
            let s = a.sum();
            a / s
        };
        let got = emd_masses(dist(0.0).view(), dist(1.0).view(), 4).unwrap();
        assert!((got - 0.29041331461788766f64).abs() < 1e-10, "{got}");
    }

    #[test]
    fn emd_matches_dense_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let a = random_copula(4, &mut rng);
            let b = random_copula(4, &mut rng);
            let exact = emd(&a, &b, 4).unwrap();
            let oracle = lp_emd(a.mass(), b.mass());
            assert!((exact - oracle).abs() < 1e-8, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn downsampling_conserves_mass_and_scales_distance() {
        let mut a = Array2::zeros((10, 10));
        a[[0, 0]] = 1.0;
        let mut b = Array2::zeros((10, 10));
        b[[0, 9]] = 1.0;
        // Blocks of 2 cells: centers 0.5 and 8.5 apart by 8 cell widths.
        assert!((emd_masses(a.view(), b.view(), 5).unwrap() - 8.0f64).abs() < 1e-12);
        assert!((emd_masses(a.view(), b.view(), 10).unwrap() - 9.0f64).abs() < 1e-12);
    }

    #[test]
    fn kmedoids_single_cluster_is_exhaustive_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = Array2::from_shape_fn((40, 3), |_| rng.random::<f64>());
        let res = kmedoids(pts.view(), 1, 0).unwrap();
        let cost = |c: usize| (0..40).map(|i| { let d = &pts.row(i) - &pts.row(c); d.dot(&d).sqrt() }).sum::<f64>();
        let best = (0..40).min_by(|&a, &b| cost(a).partial_cmp(&cost(b)).unwrap()).unwrap();
        assert_eq!(res.medoids, vec![best]);
        let all = kmedoids(pts.view(), 40, 0).unwrap();
        assert_eq!(all.cost, 0.0);
    }

    #[test]
    fn kmedoids_planted_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = Array2::from_shape_fn((30, 6), |(i, _)| if i < 15 { 0.0 } else { 5.0 } + 0.3 * rng.random::<f64>());
        let res = kmedoids(pts.view(), 2, 1).unwrap();
        assert!(res.labels[..15].iter().all(|&l| l == res.labels[0]));
        assert!(res.labels[15..].iter().all(|&l| l == res.labels[15]));
        assert_ne!(res.labels[0], res.labels[15]);
        let dup = Array2::from_shape_fn((5, 2), |(i, _)| (i % 2) as f64);
        assert!(matches!(kmedoids(dup.view(), 3, 0), Err(Error::DegenerateInput(_))));
        assert_eq!(kmedoids(pts.view(), 2, 1).unwrap(), res);
    }

    fn band_copula(anti: bool, rng: &mut ChaCha8Rng) -> Copula<f64> {
        let m = 20;
        let raw = Array2::from_shape_fn((m, m), |(i, j)| {
            let off = if anti { (i + j) as f64 - (m - 1) as f64 } else { i as f64 - j as f64 };
            (-(off * off) / 8.0).exp() + 0.02 * rng.random::<f64>()
        });
        let s = raw.sum();
        Copula::from_mass(raw / s).unwrap()
    }

    #[test]
    fn spectral_splits_planted_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cs: Vec<Copula<f64>> = (0..16).map(|i| band_copula(i % 2 == 1, &mut rng)).collect();
        let d = emd_matrix(&cs, 10).unwrap();
        let res = spectral_cluster(d.view(), 2, 0).unwrap();
        for i in 0..16 {
            assert_eq!(res.labels[i] == res.labels[0], i % 2 == 0);
        }
        // Cluster/indicator consistency.
        let ind: Vec<f64> = cs.iter().map(|c| indicator(c, 0.1).unwrap()).collect();
        let report = ClusterReport::new(2, Some(res.sigma), res.labels.clone(), res.medoids.clone(), Some(&ind));
        let mean = ind.iter().sum::<f64>() / 16.0;
        let sd = (ind.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 16.0).sqrt();
        let gap = (report.cluster_mean_indicator[0] - report.cluster_mean_indicator[1]).abs();
        assert!(gap >= sd, "{gap} < {sd}");
        assert!(serde_json::to_string(&report).unwrap().contains("cluster_mean_indicator"));
    }

    #[test]
    fn spectral_with_k_equal_to_count() {
        let d = ndarray::array![[0.0, 1.0, 4.0], [1.0, 0.0, 3.0], [4.0, 3.0, 0.0]];
        let res = spectral_cluster(d.view(), 3, 0).unwrap();
        let mut l = res.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn spectral_relabeling_permutes_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cs: Vec<Copula<f64>> = (0..10).map(|i| band_copula(i < 4, &mut rng)).collect();
        let d = emd_matrix(&cs, 10).unwrap();
        let perm: Vec<usize> = vec![3, 7, 0, 9, 1, 5, 2, 8, 4, 6];
        let dp = Array2::from_shape_fn((10, 10), |(i, j)| d[[perm[i], perm[j]]]);
        let a = spectral_cluster(d.view(), 2, 0).unwrap();
        let b = spectral_cluster(dp.view(), 2, 0).unwrap();
        // Same partition up to label names.
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(a.labels[perm[i]] == a.labels[perm[j]], b.labels[i] == b.labels[j]);
            }
        }
    }

    #[test]
    fn corner_feature_cases() {
        let u = Copula::<f64>::uniform(10);
        let f = corner_features(&u, 0.1).unwrap();
        assert!(f.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
        let mut ll = Array2::zeros((10, 10));
        ll[[0, 0]] = 1.0;
        let f = corner_features(&Copula::from_mass(ll).unwrap(), 0.1).unwrap();
        let [ul_ur, ul_ll, ul_lr, ur_ll, ur_lr, ll_lr] = f.ratios;
        assert_eq!((ul_ur, ul_lr, ur_lr), (1.0, 1.0, 1.0));
        assert!(ul_ll < 1.1e-6 && ur_ll < 1.1e-6 && ll_lr > 0.9e6);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = random_copula(20, &mut rng);
        let f = corner_features(&c, 0.15).unwrap();
        let m = c.mass();
        let sum = |r0: usize, c0: usize| (r0..r0 + 3).flat_map(|i| (c0..c0 + 3).map(move |j| (i, j))).map(|(i, j)| m[[i, j]]).sum::<f64>();
        let (ul, ur, lo_l, lo_r) = (sum(17, 0), sum(17, 17), sum(0, 0), sum(0, 17));
        let e = CORNER_EPS;
        assert!((f.ratios[0] - (ul + e) / (ur + e)).abs() < 1e-12);
        assert!((f.ratios[5] - (lo_l + e) / (lo_r + e)).abs() < 1e-12);
        assert!((f.ratios[3] - (ur + e) / (lo_l + e)).abs() < 1e-12);
    }

    #[test]
    fn subspace_iteration_matches_dense() {
        let n = DENSE_EIGEN_LIMIT + 20;
        // Normalized affinity of three planted groups.
        let a = Array2::from_shape_fn((n, n), |(i, j)| if i % 3 == j % 3 { 0.9 } else { 0.05 } + 0.01 * ((i * j) % 5) as f64);
        let a = (&a + &a.t()) / 2.0;
        let deg = a.sum_axis(Axis(1));
        let l = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (deg[i] * deg[j]).sqrt());
        let fast = top_eigenvectors(l.view(), 3).unwrap();
        let (_, vecs) = symmetric_eigen(l.view()).unwrap();
        // Same top-3 subspace.
        let dense = vecs.slice(ndarray::s![.., n - 3..]).to_owned();
        let proj = dense.dot(&dense.t().dot(&fast));
        assert!((&fast - &proj).mapv(|v| v * v).sum().sqrt() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn emd_metric_axioms(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_copula(8, &mut rng), random_copula(8, &mut rng), random_copula(8, &mut rng));
            let ab = emd(&a, &b, 8).unwrap();
            prop_assert_eq!(ab, emd(&b, &a, 8).unwrap());
            prop_assert!(ab <= emd(&a, &c, 8).unwrap() + emd(&c, &b, 8).unwrap() + 1e-8);
            prop_assert!(ab > 0.0);
        }
    }
}
