use ndarray::{s, Array1, Array2, ArrayView1};

use crate::domain::FullDimDomain;
use crate::linalg::{gershgorin_bound, quad_form};
use crate::{Error, Result, Scalar};

/// A concave function of the portfolio coordinates.
pub trait ConcaveFn<T: Scalar>: Send + Sync {
    fn value(&self, x: ArrayView1<'_, T>) -> T;
    fn gradient(&self, x: ArrayView1<'_, T>) -> Array1<T>;
    /// Upper bound on the spectral norm of `−∇²h`; zero for affine `h`.
    fn curvature(&self) -> T;
}

/// `h ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl<T: Scalar> ConcaveFn<T> for Flat {
    fn value(&self, _x: ArrayView1<'_, T>) -> T {
        T::zero()
    }
    fn gradient(&self, x: ArrayView1<'_, T>) -> Array1<T> {
        Array1::zeros(x.len())
    }
    fn curvature(&self) -> T {
        T::zero()
    }
}

/// `h(x) = ⟨r, x⟩`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub r: Array1<T>,
}

impl<T: Scalar> ConcaveFn<T> for Linear<T> {
    fn value(&self, x: ArrayView1<'_, T>) -> T {
        self.r.dot(&x)
    }
    fn gradient(&self, _x: ArrayView1<'_, T>) -> Array1<T> {
        self.r.clone()
    }
    fn curvature(&self) -> T {
        T::zero()
    }
}

/// `h(x) = φ_q(x̃) − φ_q(x)` with `φ_q(x) = xᵀΣx − q·μᵀx`; the offset makes
/// `h ≤ 0` on the domain with equality at the minimizer `x̃`.
#[derive(Debug, Clone)]
pub struct NegUtility<T> {
    pub sigma: Array2<T>,
    pub mu: Array1<T>,
    pub q: T,
    pub offset: T,
    curvature: T,
}

impl<T: Scalar> NegUtility<T> {
    pub fn new(sigma: Array2<T>, mu: Array1<T>, q: T, offset: T) -> Self {
        let curvature = T::lit(2.0) * gershgorin_bound(sigma.view());
        Self { sigma, mu, q, offset, curvature }
    }

    /// `φ_q(x)`.
    pub fn utility(&self, x: ArrayView1<'_, T>) -> T {
        quad_form(self.sigma.view(), x) - self.q * self.mu.dot(&x)
    }
}

impl<T: Scalar> ConcaveFn<T> for NegUtility<T> {
    fn value(&self, x: ArrayView1<'_, T>) -> T {
        self.offset - self.utility(x)
    }
    fn gradient(&self, x: ArrayView1<'_, T>) -> Array1<T> {
        &self.mu * self.q - self.sigma.dot(&x) * T::lit(2.0)
    }
    fn curvature(&self) -> T {
        self.curvature
    }
}

/// `h(x) = −‖x − c‖²`.
#[derive(Debug, Clone)]
pub struct SquaredDistance<T> {
    pub center: Array1<T>,
}

impl<T: Scalar> ConcaveFn<T> for SquaredDistance<T> {
    fn value(&self, x: ArrayView1<'_, T>) -> T {
        let d = &x - &self.center;
        -d.dot(&d)
    }
    fn gradient(&self, x: ArrayView1<'_, T>) -> Array1<T> {
        (&self.center - &x) * T::lit(2.0)
    }
    fn curvature(&self) -> T {
        T::lit(2.0)
    }
}

/// Density `∝ exp(α·h(x))` truncated to a full-dimensional domain.
#[derive(Clone, Copy)]
pub struct LogConcaveDensity<'a, T: Scalar> {
    pub domain: &'a FullDimDomain<T>,
    pub h: &'a dyn ConcaveFn<T>,
    pub alpha: T,
}

impl<'a, T: Scalar> LogConcaveDensity<'a, T> {
    pub fn new(domain: &'a FullDimDomain<T>, h: &'a dyn ConcaveFn<T>, alpha: T) -> Result<Self> {
        if !(alpha >= T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite and ≥ 0, got {alpha}")));
        }
        Ok(Self { domain, h, alpha })
    }

    /// `α·h(f(y))`.
    pub fn log_density(&self, y: ArrayView1<'_, T>) -> T {
        if self.alpha == T::zero() {
            return T::zero();
        }
        self.alpha * self.h.value(self.domain.portfolio(y).view())
    }

    /// Gradient of [`Self::log_density`] in `y`.
    pub fn grad_log_density(&self, y: ArrayView1<'_, T>) -> Array1<T> {
        let d = self.domain.dim();
        if self.alpha == T::zero() {
            return Array1::zeros(d);
        }
        let n = self.domain.n_assets();
        let g = self.h.gradient(self.domain.portfolio(y).view());
        self.domain.basis().slice(s![..n, ..]).t().dot(&g) * self.alpha
    }

    pub fn is_flat(&self) -> bool {
        self.alpha == T::zero()
    }

    /// Checks midpoint concavity of `h` on random feasible pairs.
    pub fn spot_check_concavity(&self, points: &[Array1<T>]) -> bool {
        points.windows(2).all(|w| {
            let mid = (&w[0] + &w[1]) * T::lit(0.5);
            let hv = |p: &Array1<T>| self.h.value(p.view());
            let lhs = hv(&mid);
            let rhs = (hv(&w[0]) + hv(&w[1])) * T::lit(0.5);
            lhs >= rhs - T::tolerance() * (T::one() + rhs.abs())
        })
    }
}
