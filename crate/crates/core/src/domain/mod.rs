//! Portfolio feasible sets as convex polytopes.
//!
//! A [`PortfolioDomain`] is an H-representation `A·z ≤ b, A_eq·z = b_eq`.
//! For the long-only simplex `z = x`; for the norm-constrained set the
//! variables are lifted to `z = (x, y)` with `|x_i| ≤ y_i` and `Σy ≤ γ`, so the
//! portfolio is always the first `n_assets` coordinates of `z`.

mod fulldim;
mod qp;
mod varsi;

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use fulldim::FullDimDomain;
pub use qp::{min_max_volatility, minimize_quadratic_utility, QpSolution, VolatilityRange};
pub use varsi::varsi_fraction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind<T> {
    Simplex,
    NormConstrained { gamma: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioDomain<T> {
    n_assets: usize,
    kind: DomainKind<T>,
    a: Array2<T>,
    b: Array1<T>,
    a_eq: Array2<T>,
    b_eq: Array1<T>,
}

impl<T: Scalar> PortfolioDomain<T> {
    /// The simplex when `gamma` is absent or 1, otherwise the lifted
    /// `‖x‖₁ ≤ γ` polytope in `2n` variables.
    pub fn build(n_assets: usize, gamma: Option<T>) -> Result<Self> {
        if n_assets < 2 {
            return Err(Error::InvalidParameter(format!(
                "a portfolio domain needs at least 2 assets, got {n_assets}"
            )));
        }
        match gamma {
            Some(g) if !(g >= T::one()) => Err(Error::InvalidParameter(format!(
                "gamma must be at least 1, got {g}"
            ))),
            Some(g) if g > T::one() => Ok(Self::norm_constrained(n_assets, g)),
            _ => Ok(Self::simplex(n_assets)),
        }
    }

    pub fn simplex(n: usize) -> Self {
        Self {
            n_assets: n,
            kind: DomainKind::Simplex,
            a: -Array2::eye(n),
            b: Array1::zeros(n),
            a_eq: Array2::ones((1, n)),
            b_eq: Array1::ones(1),
        }
    }

    fn norm_constrained(n: usize, gamma: T) -> Self {
        let mut a = Array2::zeros((2 * n + 1, 2 * n));
        for i in 0..n {
            a[[i, i]] = T::one();
            a[[i, n + i]] = -T::one();
            a[[n + i, i]] = -T::one();
            a[[n + i, n + i]] = -T::one();
            a[[2 * n, n + i]] = T::one();
        }
        let mut b = Array1::zeros(2 * n + 1);
        b[2 * n] = gamma;
        let mut a_eq = Array2::zeros((1, 2 * n));
        a_eq.slice_mut(s![0, ..n]).fill(T::one());
        Self {
            n_assets: n,
            kind: DomainKind::NormConstrained { gamma },
            a,
            b,
            a_eq,
            b_eq: Array1::ones(1),
        }
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    /// Number of variables of the H-representation (`n` or `2n`).
    pub fn n_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn kind(&self) -> DomainKind<T> {
        self.kind
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self.kind, DomainKind::Simplex)
    }

    pub fn a(&self) -> &Array2<T> {
        &self.a
    }

    pub fn b(&self) -> &Array1<T> {
        &self.b
    }

    pub fn a_eq(&self) -> &Array2<T> {
        &self.a_eq
    }

    pub fn b_eq(&self) -> &Array1<T> {
        &self.b_eq
    }

    /// Largest constraint violation of `z` (a lifted point).
    pub fn residual(&self, z: ArrayView1<'_, T>) -> T {
        let ineq = (self.a.dot(&z) - &self.b).fold(T::zero(), |m, &v| m.max(v));
        let eq = (self.a_eq.dot(&z) - &self.b_eq).fold(T::zero(), |m, &v| m.max(v.abs()));
        ineq.max(eq)
    }

    pub fn contains(&self, z: ArrayView1<'_, T>, tol: T) -> bool {
        z.len() == self.n_vars() && self.residual(z) <= tol
    }

    /// Lifts a portfolio to the domain's variables (`y = |x|`).
    pub fn lift(&self, x: ArrayView1<'_, T>) -> Array1<T> {
        match self.kind {
            DomainKind::Simplex => x.to_owned(),
            DomainKind::NormConstrained { .. } => {
                let mut z = Array1::zeros(2 * self.n_assets);
                z.slice_mut(s![..self.n_assets]).assign(&x);
                z.slice_mut(s![self.n_assets..]).assign(&x.mapv(|v| v.abs()));
                z
            }
        }
    }

    /// Whether a portfolio (not lifted) is feasible.
    pub fn contains_portfolio(&self, x: ArrayView1<'_, T>, tol: T) -> bool {
        x.len() == self.n_assets && self.contains(self.lift(x).view(), tol)
    }

    /// A strictly interior lifted point.
    pub fn interior_point(&self) -> Array1<T> {
        let n = self.n_assets;
        let nf = T::from_usize_lossy(n);
        match self.kind {
            DomainKind::Simplex => Array1::from_elem(n, nf.recip()),
            DomainKind::NormConstrained { gamma } => {
                let mut z = Array1::from_elem(2 * n, nf.recip());
                let extra = (gamma - T::one()) / (T::lit(2.0) * nf);
                z.slice_mut(s![n..]).mapv_inplace(|v| v + extra);
                z
            }
        }
    }

    /// Polytope vertices projected to portfolio space, where known in closed
    /// form: `e_i` on the simplex, `((1+γ)/2)e_i − ((γ−1)/2)e_j` otherwise.
    pub fn portfolio_vertices(&self) -> Vec<Array1<T>> {
        let n = self.n_assets;
        match self.kind {
            DomainKind::Simplex => (0..n)
                .map(|i| {
                    let mut v = Array1::zeros(n);
                    v[i] = T::one();
                    v
                })
                .collect(),
            DomainKind::NormConstrained { gamma } => {
                let half = T::lit(0.5);
                let long = (T::one() + gamma) * half;
                let short = (gamma - T::one()) * half;
                let mut out = Vec::with_capacity(n * (n - 1));
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            let mut v = Array1::zeros(n);
                            v[i] = long;
                            v[j] = -short;
                            out.push(v);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn full_dimensionalize(&self) -> Result<FullDimDomain<T>> {
        FullDimDomain::new(self)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = DomainDocument {
            n: self.n_assets,
            kind: match self.kind {
                DomainKind::Simplex => "simplex".into(),
                DomainKind::NormConstrained { .. } => "norm_constrained".into(),
            },
            gamma: match self.kind {
                DomainKind::Simplex => None,
                DomainKind::NormConstrained { gamma } => Some(gamma.as_f64()),
            },
            a: rows(&self.a),
            b: self.b.iter().map(|v| v.as_f64()).collect(),
            a_eq: rows(&self.a_eq),
            b_eq: self.b_eq.iter().map(|v| v.as_f64()).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses the JSON document and checks it against the canonical
    /// constraints for its `n` and `kind`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DomainDocument = serde_json::from_str(text)?;
        let gamma = match doc.kind.as_str() {
            "simplex" => None,
            "norm_constrained" => Some(T::lit(doc.gamma.ok_or_else(|| {
                Error::InvalidInput("norm_constrained domain without gamma".into())
            })?)),
            other => return Err(Error::InvalidInput(format!("unknown domain kind {other:?}"))),
        };
        let domain = Self::build(doc.n, gamma)?;
        let parsed_a = from_rows::<T>(&doc.a, domain.n_vars())?;
        let parsed_eq = from_rows::<T>(&doc.a_eq, domain.n_vars())?;
        let same = |x: &Array2<T>, y: &Array2<T>| {
            x.dim() == y.dim() && x.iter().zip(y.iter()).all(|(p, q)| (*p - *q).abs() <= T::tolerance())
        };
        let same_v = |x: &[f64], y: &Array1<T>| {
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| (T::lit(*p) - *q).abs() <= T::tolerance())
        };
        if !same(&parsed_a, &domain.a)
            || !same(&parsed_eq, &domain.a_eq)
            || !same_v(&doc.b, &domain.b)
            || !same_v(&doc.b_eq, &domain.b_eq)
        {
            return Err(Error::InvalidInput(
                "constraint matrices do not match the declared domain kind".into(),
            ));
        }
        Ok(domain)
    }
}

#[derive(Serialize, Deserialize)]
struct DomainDocument {
    n: usize,
    kind: String,
    gamma: Option<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(rename = "A_eq")]
    a_eq: Vec<Vec<f64>>,
    b_eq: Vec<f64>,
}

fn rows<T: Scalar>(m: &Array2<T>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn from_rows<T: Scalar>(rows: &[Vec<f64>], cols: usize) -> Result<Array2<T>> {
    let mut out = Array2::zeros((rows.len(), cols));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
        }
        for (j, v) in r.iter().enumerate() {
            out[[i, j]] = T::lit(*v);
        }
    }
    Ok(out)
}

/// The halfspace `H(R*) = {x : R·x ≤ R*}` cutting a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSection<T> {
    pub normal: Array1<T>,
    pub offset: T,
}

impl<T: Scalar> HalfspaceSection<T> {
    pub fn new(normal: Array1<T>, offset: T) -> Self {
        Self { normal, offset }
    }

    /// Membership of a lifted point in `domain ∩ H(R*)`.
    pub fn contains(&self, domain: &PortfolioDomain<T>, z: ArrayView1<'_, T>, tol: T) -> bool {
        let x = z.slice(s![..domain.n_assets()]);
        domain.contains(z, tol) && crate::linalg::dot(self.normal.view(), x) <= self.offset + tol
    }

    /// The cut as a row over the lifted variables.
    pub fn lifted_row(&self, domain: &PortfolioDomain<T>) -> Array1<T> {
        let mut row = Array1::zeros(domain.n_vars());
        row.slice_mut(s![..domain.n_assets()]).assign(&self.normal);
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn simplex_structure() {
        let d = PortfolioDomain::<f64>::build(3, None).unwrap();
        assert!(d.is_simplex());
        assert_eq!(d.a().nrows(), 3);
        assert_eq!(d.a_eq().nrows(), 1);
        assert!(d.contains_portfolio(array![0.2, 0.3, 0.5].view(), 1e-12));
        assert!(!d.contains_portfolio(array![1.2, -0.2, 0.0].view(), 1e-12));
        assert_eq!(PortfolioDomain::<f64>::build(3, Some(1.0)).unwrap(), d);
    }

    #[test]
    fn norm_constrained_150_50() {
        let d = PortfolioDomain::<f64>::build(2, Some(2.0)).unwrap();
        assert_eq!(d.n_vars(), 4);
        assert!(d.contains(array![1.5, -0.5, 1.5, 0.5].view(), 1e-12));
        let tight = PortfolioDomain::<f64>::build(2, Some(1.6)).unwrap();
        assert!(!tight.contains_portfolio(array![1.4, -0.4].view(), 1e-12));
        assert!(tight.contains_portfolio(array![1.3, -0.3].view(), 1e-12));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            PortfolioDomain::<f64>::build(3, Some(0.9)),
            Err(Error::InvalidParameter(_))
        ));
        assert!(PortfolioDomain::<f64>::build(1, None).is_err());
    }

    #[test]
    fn interior_point_is_strict() {
        for d in [
            PortfolioDomain::<f64>::build(5, None).unwrap(),
            PortfolioDomain::<f64>::build(5, Some(1.6)).unwrap(),
        ] {
            let z = d.interior_point();
            let slack = d.b() - &d.a().dot(&z);
            assert!(slack.iter().all(|&s| s > 1e-6));
            assert!(d.residual(z.view()) < 1e-12);
        }
    }

    #[test]
    fn vertices_are_feasible() {
        let d = PortfolioDomain::<f64>::build(4, Some(1.6)).unwrap();
        let v = d.portfolio_vertices();
        assert_eq!(v.len(), 12);
        for x in &v {
            assert!(d.contains_portfolio(x.view(), 1e-12));
            assert!((x.iter().map(|t| t.abs()).sum::<f64>() - 1.6).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        for d in [
            PortfolioDomain::<f64>::build(3, None).unwrap(),
            PortfolioDomain::<f64>::build(3, Some(1.6)).unwrap(),
        ] {
            let text = d.to_json().unwrap();
            assert_eq!(PortfolioDomain::<f64>::from_json(&text).unwrap(), d);
        }
        let bad = r#"{"n":2,"kind":"simplex","gamma":null,"A":[[1,0],[0,-1]],"b":[0,0],"A_eq":[[1,1]],"b_eq":[1]}"#;
        assert!(PortfolioDomain::<f64>::from_json(bad).is_err());
    }

    #[test]
    fn halfspace_membership() {
        let d = PortfolioDomain::<f64>::simplex(3);
        let h = HalfspaceSection::new(array![0.0, 1.0, 2.0], 1.0);
        assert!(h.contains(&d, array![0.5, 0.5, 0.0].view(), 1e-12));
        assert!(!h.contains(&d, array![0.0, 0.5, 0.5].view(), 1e-12));
    }
}
