//! Small dense linear-algebra kernels generic over [`Scalar`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::{Error, Result, Scalar};

/// `xᵀ Σ x`.
pub fn quad_form<T: Scalar>(sigma: ArrayView2<'_, T>, x: ArrayView1<'_, T>) -> T {
    let n = x.len();
    let mut acc = T::zero();
    for i in 0..n {
        let xi = x[i];
        if xi == T::zero() {
            continue;
        }
        let row = sigma.row(i);
        let mut s = T::zero();
        for j in 0..n {
            s += row[j] * x[j];
        }
        acc += xi * s;
    }
    acc
}

pub fn dot<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Scalar>(a: ArrayView1<'_, T>) -> T {
    dot(a, a).sqrt()
}

pub fn is_symmetric<T: Scalar>(a: ArrayView2<'_, T>, tol: T) -> bool {
    let (r, c) = a.dim();
    if r != c {
        return false;
    }
    for i in 0..r {
        for j in (i + 1)..r {
            let scale = T::one().max(a[[i, j]].abs()).max(a[[j, i]].abs());
            if (a[[i, j]] - a[[j, i]]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Gershgorin bound on the spectral radius of a square matrix.
pub fn gershgorin_bound<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    a.axis_iter(Axis(0))
        .map(|row| row.iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// Orthonormal basis of the right null space of `a_eq` together with the
/// minimum-norm solution of `a_eq x = b_eq`.
///
/// Uses a Householder QR factorization of `a_eqᵀ`, so the returned basis
/// columns are orthonormal to working precision.
pub fn null_space<T: Scalar>(
    a_eq: ArrayView2<'_, T>,
    b_eq: ArrayView1<'_, T>,
) -> Result<(Array2<T>, Array1<T>)> {
    let (l, n) = a_eq.dim();
    if b_eq.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: b_eq.len(),
        });
    }
    if l > n {
        return Err(Error::DegenerateEqualities { rank: n, rows: l });
    }
    // m = a_eqᵀ (n × l), overwritten by R in its upper triangle.
    let mut m = a_eq.t().to_owned();
    let mut reflectors: Vec<Array1<T>> = Vec::with_capacity(l);
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    for k in 0..l {
        let mut v = Array1::<T>::zeros(n);
        let mut alpha = T::zero();
        for i in k..n {
            v[i] = m[[i, k]];
            alpha += m[[i, k]] * m[[i, k]];
        }
        alpha = alpha.sqrt();
        if alpha <= T::tolerance() * scale.max(T::one()) {
            return Err(Error::DegenerateEqualities { rank: k, rows: l });
        }
        if v[k] > T::zero() {
            alpha = -alpha;
        }
        v[k] -= alpha;
        let vnorm = norm2(v.view());
        if vnorm > T::zero() {
            v.mapv_inplace(|x| x / vnorm);
        }
        // Apply H = I − 2 v vᵀ to the remaining columns.
        for j in k..l {
            let mut s = T::zero();
            for i in k..n {
                s += v[i] * m[[i, j]];
            }
            let two_s = s + s;
            for i in k..n {
                m[[i, j]] -= two_s * v[i];
            }
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{l-1}; build it by applying reflectors to I in reverse.
    let mut q = Array2::<T>::eye(n);
    for v in reflectors.iter().rev() {
        for j in 0..n {
            let mut s = T::zero();
            for i in 0..n {
                s += v[i] * q[[i, j]];
            }
            let two_s = s + s;
            for i in 0..n {
                q[[i, j]] -= two_s * v[i];
            }
        }
    }
    // Solve Rᵀ u = b_eq by forward substitution, then x* = Q₁ u.
    let mut u = Array1::<T>::zeros(l);
    for i in 0..l {
        let mut s = b_eq[i];
        for j in 0..i {
            s -= m[[j, i]] * u[j];
        }
        u[i] = s / m[[i, i]];
    }
    let mut x_star = Array1::<T>::zeros(n);
    for j in 0..l {
        for i in 0..n {
            x_star[i] += q[[i, j]] * u[j];
        }
    }
    let basis = q.slice(ndarray::s![.., l..]).to_owned();
    Ok((basis, x_star))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let total: T = m.iter().map(|x| *x * *x).sum::<T>();
    let eps = T::epsilon();
    let mut converged = n < 2;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (apq + apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi eigen-solver did not converge".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok((values, vectors))
}

/// Symmetric square root of a positive semidefinite matrix; negative
/// eigenvalues from round-off are clipped to zero.
pub fn psd_sqrt<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let n = vals.len();
    let mut out = Array2::<T>::zeros((n, n));
    for k in 0..n {
        let s = vals[k].max(T::zero()).sqrt();
        if s == T::zero() {
            continue;
        }
        for i in 0..n {
            let vik = vecs[[i, k]] * s;
            for j in 0..n {
                out[[i, j]] += vik * vecs[[j, k]];
            }
        }
    }
    Ok(out)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Result<Array1<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut m = a.to_owned();
    let mut rhs = b.to_owned();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs())).max(T::min_positive_value());
    for k in 0..n {
        let (piv, pval) = (k..n)
            .map(|i| (i, m[[i, k]].abs()))
            .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= T::epsilon() * scale * T::from_usize_lossy(n) {
            return Err(Error::Numerical("singular linear system".into()));
        }
        if piv != k {
            for j in 0..n {
                m.swap([k, j], [piv, j]);
            }
            rhs.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[[i, k]] / m[[k, k]];
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let mkj = m[[k, j]];
                m[[i, j]] -= f * mkj;
            }
            let rk = rhs[k];
            rhs[i] -= f * rk;
        }
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..n {
            s -= m[[i, j]] * x[j];
        }
        x[i] = s / m[[i, i]];
    }
    Ok(x)
}
