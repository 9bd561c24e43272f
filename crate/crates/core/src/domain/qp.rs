use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{DomainKind, PortfolioDomain};
use crate::linalg::{gershgorin_bound, is_symmetric, quad_form, solve};
use crate::{Error, Result, Scalar};

const MAX_ITERATIONS: usize = 200_000;
const POLISH_EVERY: usize = 25;

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    /// Optimal portfolio (not lifted).
    pub x: Array1<T>,
    /// `φ_q(x) = xᵀΣx − q·μᵀx`.
    pub value: T,
    /// Frank–Wolfe duality gap at `x`; an upper bound on `value − min φ_q`.
    pub gap: T,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct VolatilityRange<T> {
    pub v_min: T,
    pub v_max: T,
    /// Global minimum-variance portfolio.
    pub gmv: Array1<T>,
    /// Portfolio attaining `v_max`.
    pub argmax: Array1<T>,
}

/// Minimizes `φ_q(x) = xᵀΣx − q·μᵀx` over the portfolios of `domain` by
/// projected gradient; stops once the Frank–Wolfe gap is at most `tol`.
pub fn minimize_quadratic_utility<T: Scalar>(
    domain: &PortfolioDomain<T>,
    sigma: ArrayView2<'_, T>,
    mu: ArrayView1<'_, T>,
    q: T,
    tol: T,
) -> Result<QpSolution<T>> {
    let n = domain.n_assets();
    check_inputs(n, sigma, mu)?;
    if !(tol > T::zero()) || !(q >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "need tol > 0 and q ≥ 0, got tol={tol}, q={q}"
        )));
    }
    let lin: Array1<T> = mu.mapv(|m| m * q);
    let objective = |x: &Array1<T>| quad_form(sigma, x.view()) - lin.dot(x);
    let gradient = |x: &Array1<T>| sigma.dot(x) * T::lit(2.0) - &lin;
    let lipschitz = T::lit(2.0) * gershgorin_bound(sigma);
    let step = if lipschitz > T::zero() {
        lipschitz.recip()
    } else {
        T::one() / (T::one() + lin.iter().fold(T::zero(), |m, v| m.max(v.abs())))
            * T::lit(1e6)
    };

    let mut x = domain.interior_point().slice(ndarray::s![..n]).to_owned();
    let mut fx = objective(&x);
    let mut gap = T::infinity();
    let mut iterations = 0;
    // Objective comparisons tolerate rounding at the optimum.
    let slack = |f: T| T::epsilon() * T::lit(16.0) * (f.abs() + T::one());
    for it in 0..MAX_ITERATIONS {
        iterations = it;
        let g = gradient(&x);
        gap = frank_wolfe_gap(domain, &x, &g);
        if gap <= tol {
            return Ok(QpSolution { value: fx, x, gap, iterations: it });
        }
        if domain.is_simplex() && it % POLISH_EVERY == POLISH_EVERY - 1 {
            if let Some(p) = polish_on_support(sigma, &lin, &x) {
                let fp = objective(&p);
                let gp = frank_wolfe_gap(domain, &p, &gradient(&p));
                if fp <= fx + slack(fx) && gp < gap {
                    x = p;
                    fx = fp;
                    gap = gp;
                    if gap <= tol {
                        return Ok(QpSolution { value: fx, x, gap, iterations: it });
                    }
                    continue;
                }
            }
        }
        let trial = project(domain, &(&x - &(g * step)));
        let ft = objective(&trial);
        // A 1/L step never increases the objective beyond rounding.
        if ft <= fx + slack(fx) {
            x = trial;
            fx = ft;
        } else {
            break;
        }
    }
    if gap <= tol {
        return Ok(QpSolution { value: fx, x, gap, iterations });
    }
    Err(Error::Convergence {
        iterations,
        residual: gap.as_f64(),
        best: x.iter().map(|v| v.as_f64()).collect(),
    })
}

/// Minimum variance (the GMV portfolio) and maximum variance over a domain.
///
/// The maximum of a convex function is attained at a vertex; the portfolio
/// projection of either domain kind has closed-form vertices, so both values
/// are exact.
pub fn min_max_volatility<T: Scalar>(
    domain: &PortfolioDomain<T>,
    sigma: ArrayView2<'_, T>,
) -> Result<VolatilityRange<T>> {
    let n = domain.n_assets();
    let zero = Array1::zeros(n);
    check_inputs(n, sigma, zero.view())?;
    let scale = sigma.iter().fold(T::zero(), |m, v| m.max(v.abs())).max(T::min_positive_value());
    let tol = scale * T::tolerance() * T::lit(1e-2);
    let gmv = minimize_quadratic_utility(domain, sigma, zero.view(), T::zero(), tol)?;
    let (v_max, argmax) = domain
        .portfolio_vertices()
        .into_iter()
        .map(|v| (quad_form(sigma, v.view()), v))
        .fold((T::neg_infinity(), zero.clone()), |best, cand| {
            if cand.0 > best.0 {
                cand
            } else {
                best
            }
        });
    Ok(VolatilityRange {
        v_min: quad_form(sigma, gmv.x.view()),
        v_max,
        gmv: gmv.x,
        argmax,
    })
}

fn check_inputs<T: Scalar>(n: usize, sigma: ArrayView2<'_, T>, mu: ArrayView1<'_, T>) -> Result<()> {
    if sigma.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.nrows() });
    }
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    if !is_symmetric(sigma, T::tolerance()) {
        return Err(Error::InvalidInput("covariance matrix is not symmetric".into()));
    }
    if sigma.iter().chain(mu.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite covariance or mean".into()));
    }
    Ok(())
}

/// `gᵀx − min_{v ∈ vertices} gᵀv`.
fn frank_wolfe_gap<T: Scalar>(domain: &PortfolioDomain<T>, x: &Array1<T>, g: &Array1<T>) -> T {
    gradient_dot(x, g) - linear_minimum(domain, g)
}

fn gradient_dot<T: Scalar>(x: &Array1<T>, g: &Array1<T>) -> T {
    x.dot(g)
}

/// `min_{x ∈ domain} gᵀx`.
pub(crate) fn linear_minimum<T: Scalar>(domain: &PortfolioDomain<T>, g: &Array1<T>) -> T {
    let (imin, gmin) = g
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::infinity()), |b, (i, v)| if v < b.1 { (i, v) } else { b });
    match domain.kind() {
        DomainKind::Simplex => gmin,
        DomainKind::NormConstrained { gamma } => {
            let half = T::lit(0.5);
            let long = (T::one() + gamma) * half;
            let short = (gamma - T::one()) * half;
            let (jmax, gmax) = g
                .iter()
                .copied()
                .enumerate()
                .fold((0, T::neg_infinity()), |b, (i, v)| if v > b.1 { (i, v) } else { b });
            if imin != jmax {
                return long * gmin - short * gmax;
            }
            let second_max = g
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != imin)
                .fold(T::neg_infinity(), |m, (_, &v)| m.max(v));
            let second_min = g
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != jmax)
                .fold(T::infinity(), |m, (_, &v)| m.min(v));
            (long * gmin - short * second_max).min(long * second_min - short * gmax)
        }
    }
}

/// Euclidean projection of a portfolio onto the domain's portfolio set.
pub(crate) fn project<T: Scalar>(domain: &PortfolioDomain<T>, v: &Array1<T>) -> Array1<T> {
    match domain.kind() {
        DomainKind::Simplex => project_simplex(v),
        DomainKind::NormConstrained { gamma } => project_norm_ball(v, gamma),
    }
}

/// Projection onto `{x ≥ 0, Σx = 1}` by sorting.
pub(crate) fn project_simplex<T: Scalar>(v: &Array1<T>) -> Array1<T> {
    let mut u: Vec<T> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - T::one()) / T::from_usize_lossy(k + 1);
        if uk - t > T::zero() {
            theta = t;
        }
    }
    v.mapv(|x| (x - theta).max(T::zero()))
}

/// Projection onto `{Σx = 1, ‖x‖₁ ≤ γ}`: `x = soft(v − λ, θ)` with `λ`
/// solving the sum constraint exactly and `θ ≥ 0` found by bisection.
pub(crate) fn project_norm_ball<T: Scalar>(v: &Array1<T>, gamma: T) -> Array1<T> {
    let l1 = |x: &Array1<T>| x.iter().map(|t| t.abs()).sum::<T>();
    let at = |theta: T| {
        let lambda = sum_shift(v, theta);
        v.mapv(|x| soft(x - lambda, theta))
    };
    let x0 = at(T::zero());
    if l1(&x0) <= gamma {
        return x0;
    }
    let mut lo = T::zero();
    let mut hi = v.iter().fold(T::zero(), |m, t| m.max(t.abs())).max(T::one());
    while l1(&at(hi)) > gamma {
        hi = hi * T::lit(2.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if l1(&at(mid)) > gamma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

fn soft<T: Scalar>(u: T, theta: T) -> T {
    if u > theta {
        u - theta
    } else if u < -theta {
        u + theta
    } else {
        T::zero()
    }
}

/// The `λ` with `Σ soft(v_i − λ, θ) = 1`; the sum is piecewise linear and
/// nonincreasing in `λ`, so the root is found between sorted breakpoints.
fn sum_shift<T: Scalar>(v: &Array1<T>, theta: T) -> T {
    let g = |lambda: T| v.iter().map(|&x| soft(x - lambda, theta)).sum::<T>() - T::one();
    let mut bps: Vec<T> = v.iter().flat_map(|&x| [x - theta, x + theta]).collect();
    bps.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    bps.dedup();
    let n = T::from_usize_lossy(v.len());
    // Left of every breakpoint g has slope −n.
    let first = bps[0];
    let g_first = g(first);
    if g_first <= T::zero() {
        return first + g_first / n;
    }
    let mut prev = (first, g_first);
    for &b in &bps[1..] {
        let gb = g(b);
        if gb <= T::zero() {
            let (a, ga) = prev;
            return a + (b - a) * ga / (ga - gb);
        }
        prev = (b, gb);
    }
    // Right of the last breakpoint g has slope −n as well.
    prev.0 + prev.1 / n
}

/// Solves the equality-constrained KKT system on the support of `x`
/// (simplex only); returns `None` unless the solution is nonnegative.
fn polish_on_support<T: Scalar>(
    sigma: ArrayView2<'_, T>,
    lin: &Array1<T>,
    x: &Array1<T>,
) -> Option<Array1<T>> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > T::zero()).collect();
    let k = support.len();
    if k == 0 {
        return None;
    }
    let mut kkt = Array2::zeros((k + 1, k + 1));
    let mut rhs = Array1::zeros(k + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[[a, b]] = sigma[[i, j]] * T::lit(2.0);
        }
        kkt[[a, k]] = T::one();
        kkt[[k, a]] = T::one();
        rhs[a] = lin[i];
    }
    rhs[k] = T::one();
    let sol = solve(kkt.view(), rhs.view()).ok()?;
    let mut out = Array1::zeros(x.len());
    for (a, &i) in support.iter().enumerate() {
        if !(sol[a] >= T::zero()) {
            return None;
        }
        out[i] = sol[a];
    }
    Some(out)
}
