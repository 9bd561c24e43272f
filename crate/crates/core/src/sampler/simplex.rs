use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, Scalar};

/// Uniform sampler on the canonical simplex by sorted-uniform spacings.
#[derive(Debug, Clone)]
pub struct SimplexSampler<T> {
    n: usize,
    cuts: Vec<T>,
}

impl<T: Scalar> SimplexSampler<T> {
    pub fn new(n: usize) -> Self {
        Self { n, cuts: Vec::with_capacity(n + 1) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Writes one uniform point into `out` (length `n`).
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.n);
        self.cuts.clear();
        self.cuts.push(T::zero());
        for _ in 1..self.n {
            self.cuts.push(T::lit(rng.random::<f64>()));
        }
        self.cuts[1..].sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
        self.cuts.push(T::one());
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.cuts[i + 1] - self.cuts[i];
        }
    }
}

/// `count` i.i.d. uniform points on `Δ^{n−1}`.
pub fn sample_simplex_uniform<T: Scalar>(n: usize, count: usize, seed: u64) -> Result<Vec<Array1<T>>> {
    if n < 2 || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "simplex sampling needs n ≥ 2 and count ≥ 1, got n={n}, count={count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = SimplexSampler::new(n);
    let mut out = Vec::with_capacity(count);
    let mut buf = vec![T::zero(); n];
    for _ in 0..count {
        sampler.fill(&mut rng, &mut buf);
        out.push(Array1::from(buf.clone()));
    }
    Ok(out)
}
