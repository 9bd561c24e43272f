use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{HalfspaceSection, PortfolioDomain};
use crate::linalg::null_space;
use crate::lp::LinearProgram;
use crate::{Error, Result, Scalar};

/// `{y : B·y ≤ z}` with the isometry `f(y) = N·y + x*` onto the affine hull
/// of a [`PortfolioDomain`].
#[derive(Debug, Clone)]
pub struct FullDimDomain<T> {
    n_assets: usize,
    b_mat: Array2<T>,
    z: Array1<T>,
    basis: Array2<T>,
    x_star: Array1<T>,
    row_norms: Array1<T>,
    center: Array1<T>,
    inradius: T,
    bare_simplex: bool,
}

impl<T: Scalar> FullDimDomain<T> {
    pub fn new(domain: &PortfolioDomain<T>) -> Result<Self> {
        let interior = domain.interior_point();
        Self::from_hrep(
            domain.n_assets(),
            domain.a().clone(),
            domain.b().clone(),
            domain.a_eq().view(),
            domain.b_eq().view(),
            Some(interior.view()),
            domain.is_simplex(),
        )
    }

    /// Reduction of a general bounded H-representation whose first
    /// `n_assets` variables are the coordinates of interest.
    ///
    /// `interior` is a known strictly feasible point; with `is_simplex` it is
    /// taken as the Chebyshev center, otherwise the center comes from a
    /// linear program.
    pub fn from_hrep(
        n_assets: usize,
        a: Array2<T>,
        b: Array1<T>,
        a_eq: ArrayView2<'_, T>,
        b_eq: ArrayView1<'_, T>,
        interior: Option<ArrayView1<'_, T>>,
        is_simplex: bool,
    ) -> Result<Self> {
        if a.ncols() != a_eq.ncols() || a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a_eq.ncols(), got: a.ncols() });
        }
        let (basis, x_star) = null_space(a_eq, b_eq)?;
        let b_mat = a.dot(&basis);
        let z = &b - &a.dot(&x_star);
        let mut out = Self::assemble(n_assets, b_mat, z, basis, x_star);
        let from_interior = |out: &Self, p: ArrayView1<'_, T>| {
            let y = out.project(p);
            let r = out.ball_radius(y.view());
            (y, r)
        };
        let (center, radius) = match (interior, is_simplex) {
            (Some(p), true) => from_interior(&out, p),
            (Some(p), false) => out.chebyshev_center().unwrap_or_else(|_| from_interior(&out, p)),
            (None, _) => out.chebyshev_center()?,
        };
        if !(radius > T::tolerance()) {
            return Err(Error::Region("polytope has empty interior".into()));
        }
        out.center = center;
        out.inradius = radius;
        out.bare_simplex = is_simplex;
        Ok(out)
    }

    fn assemble(
        n_assets: usize,
        b_mat: Array2<T>,
        z: Array1<T>,
        basis: Array2<T>,
        x_star: Array1<T>,
    ) -> Self {
        let row_norms = b_mat.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        let d = basis.ncols();
        Self {
            n_assets,
            b_mat,
            z,
            basis,
            x_star,
            row_norms,
            center: Array1::zeros(d),
            inradius: T::zero(),
            bare_simplex: false,
        }
    }

    /// Restriction to `H(R*)`; errors with [`Error::Region`] when the cut
    /// leaves no interior.
    pub fn intersect(&self, domain: &PortfolioDomain<T>, section: &HalfspaceSection<T>) -> Result<Self> {
        let row = section.lifted_row(domain);
        let new_row = self.basis.t().dot(&row);
        let offset = section.offset - row.dot(&self.x_star);
        let m = self.b_mat.nrows();
        let mut b_mat = Array2::zeros((m + 1, self.dim()));
        b_mat.slice_mut(s![..m, ..]).assign(&self.b_mat);
        b_mat.row_mut(m).assign(&new_row);
        let mut z = Array1::zeros(m + 1);
        z.slice_mut(s![..m]).assign(&self.z);
        z[m] = offset;
        let mut out = Self::assemble(self.n_assets, b_mat, z, self.basis.clone(), self.x_star.clone());
        let (center, radius) = out.chebyshev_center()?;
        if radius <= T::tolerance() {
            return Err(Error::Region("halfspace section has empty interior".into()));
        }
        out.center = center;
        out.inradius = radius;
        Ok(out)
    }

    /// Intrinsic dimension `d`.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn b_mat(&self) -> &Array2<T> {
        &self.b_mat
    }

    pub fn z(&self) -> &Array1<T> {
        &self.z
    }

    pub fn basis(&self) -> &Array2<T> {
        &self.basis
    }

    pub fn x_star(&self) -> &Array1<T> {
        &self.x_star
    }

    pub fn row_norms(&self) -> &Array1<T> {
        &self.row_norms
    }

    /// Center of the inscribed ball.
    pub fn center(&self) -> &Array1<T> {
        &self.center
    }

    pub fn inradius(&self) -> T {
        self.inradius
    }

    /// Whether this is the reduction of an uncut simplex, where exact
    /// uniform sampling is available.
    pub fn is_bare_simplex(&self) -> bool {
        self.bare_simplex
    }

    /// `f(y) = N·y + x*`, in the domain's lifted variables.
    pub fn lift(&self, y: ArrayView1<'_, T>) -> Array1<T> {
        self.basis.dot(&y) + &self.x_star
    }

    /// Portfolio coordinates of `f(y)`.
    pub fn portfolio(&self, y: ArrayView1<'_, T>) -> Array1<T> {
        let n = self.n_assets;
        self.basis.slice(s![..n, ..]).dot(&y) + &self.x_star.slice(s![..n])
    }

    /// Inverse of [`Self::lift`] on the affine hull.
    pub fn project(&self, lifted: ArrayView1<'_, T>) -> Array1<T> {
        self.basis.t().dot(&(&lifted - &self.x_star))
    }

    pub fn slack(&self, y: ArrayView1<'_, T>) -> Array1<T> {
        &self.z - &self.b_mat.dot(&y)
    }

    pub fn contains(&self, y: ArrayView1<'_, T>, tol: T) -> bool {
        self.slack(y).iter().all(|&s| s >= -tol)
    }

    fn ball_radius(&self, y: ArrayView1<'_, T>) -> T {
        self.slack(y)
            .iter()
            .zip(self.row_norms.iter())
            .filter(|(_, &nrm)| nrm > T::tolerance())
            .map(|(&s, &nrm)| s / nrm)
            .fold(T::infinity(), T::min)
    }

    /// Largest inscribed ball, by linear programming.
    pub fn chebyshev_center(&self) -> Result<(Array1<T>, T)> {
        let d = self.dim();
        let m = self.b_mat.nrows();
        let mut a = Array2::zeros((m, d + 1));
        a.slice_mut(s![.., ..d]).assign(&self.b_mat);
        a.slice_mut(s![.., d]).assign(&self.row_norms);
        let mut c = Array1::zeros(d + 1);
        c[d] = -T::one();
        let mut free = vec![true; d + 1];
        free[d] = false;
        let sol = LinearProgram::new(c)
            .with_inequalities(a, self.z.clone())
            .with_free(free)
            .solve()
            .map_err(|e| Error::Region(e.to_string()))?;
        Ok((sol.x.slice(s![..d]).to_owned(), sol.x[d]))
    }
}
