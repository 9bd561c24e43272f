use ndarray::ArrayView1;

use crate::Scalar;

/// Fraction of the simplex volume with `R·x ≤ c`.
///
/// With `x` uniform on the simplex, `x = E/ΣE` for i.i.d. unit exponentials,
/// so the fraction is `P(Σ_{a_i>0} a_i E_i ≤ Σ_{a_i≤0} −a_i E_i)` with
/// `a_i = R_i − c`. Both sides are sums of exponential phases; resolving the
/// phases one at a time gives an `O(JK)` recurrence whose weights are convex
/// combinations, so it is stable and needs no tie perturbation.
pub fn varsi_fraction<T: Scalar>(r: ArrayView1<'_, T>, c: T) -> T {
    let mut pos = Vec::with_capacity(r.len());
    let mut neg = Vec::with_capacity(r.len());
    for &ri in r.iter() {
        let a = ri - c;
        if a > T::zero() {
            pos.push(a);
        } else {
            neg.push(-a);
        }
    }
    if pos.is_empty() {
        return T::one();
    }
    if neg.is_empty() {
        return T::zero();
    }
    // row[k] = P(j, k) for the current j; P(J, k) = 1, P(j, K) = 0.
    let k_len = neg.len();
    let mut row = vec![T::one(); k_len + 1];
    row[k_len] = T::one();
    for &p in pos.iter().rev() {
        row[k_len] = T::zero();
        for k in (0..k_len).rev() {
            let q = neg[k];
            let total = p + q;
            row[k] = (q * row[k] + p * row[k + 1]) / total;
        }
    }
    row[0].max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_segment() {
        assert!((varsi_fraction(array![0.0f64, 1.0].view(), 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_and_empty_cuts() {
        let r = array![0.3f64, -1.0, 2.0, 0.7];
        assert_eq!(varsi_fraction(r.view(), 2.0), 1.0);
        assert_eq!(varsi_fraction(r.view(), 5.0), 1.0);
        assert_eq!(varsi_fraction(r.view(), -1.0 - 1e-9), 0.0);
        assert_eq!(varsi_fraction(array![1.0f64, 1.0, 1.0].view(), 1.0), 1.0);
        assert_eq!(varsi_fraction(array![1.0f64, 1.0, 1.0].view(), 0.5), 0.0);
    }

    #[test]
    fn closed_form_two_and_three_assets() {
        // n = 2: x₁ ~ U(0,1), R·x = R₂ + (R₁−R₂)x₁.
        let f = varsi_fraction(array![0.0f64, 4.0].view(), 1.0);
        assert!((f - 0.25).abs() < 1e-15);
        // n = 3, R = (0,1,2): P(x₂ + 2x₃ ≤ c) = c²/2 for c ≤ 1 (triangle area ratio).
        for c in [0.1, 0.5, 0.9] {
            let f = varsi_fraction(array![0.0f64, 1.0, 2.0].view(), c);
            assert!((f - c * c / 2.0).abs() < 1e-14, "{c}: {f}");
        }
    }

    #[test]
    fn f32_agrees_with_f64() {
        let r64 = array![0.1, -0.3, 0.25, 0.0, 0.4];
        let r32 = r64.mapv(|v| v as f32);
        let a = varsi_fraction(r64.view(), 0.05);
        let b = varsi_fraction(r32.view(), 0.05f32);
        assert!((a - b as f64).abs() < 1e-5);
    }

    #[test]
    fn matches_rejection_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = array![0.0, 1.0, 2.0];
        let n = 200_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let mut u = [rng.random::<f64>(), rng.random::<f64>()];
            u.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let x = [u[0], u[1] - u[0], 1.0 - u[1]];
            if x[1] + 2.0 * x[2] <= 1.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((varsi_fraction(r.view(), 1.0) - p).abs() < 3.0 * se);
    }

    proptest! {
        #[test]
        fn complement_identity(r in prop::collection::vec(-1.0f64..1.0, 2..9), c in -1.0f64..1.0) {
            let neg = r.iter().map(|v| -v).collect::<Vec<_>>();
            let a = varsi_fraction(ArrayView1::from(&r), c);
            let b = varsi_fraction(ArrayView1::from(&neg), -c);
            prop_assert!((a + b - 1.0).abs() < 1e-10);
        }

        #[test]
        fn monotone_in_offset(r in prop::collection::vec(-1.0f64..1.0, 2..9), c in -1.0f64..1.0, dc in 0.0f64..0.5) {
            let v = ArrayView1::from(&r);
            prop_assert!(varsi_fraction(v, c) <= varsi_fraction(v, c + dc) + 1e-14);
        }

        #[test]
        fn permutation_invariant(mut r in prop::collection::vec(-1.0f64..1.0, 2..9), c in -1.0f64..1.0) {
            let a = varsi_fraction(ArrayView1::from(&r), c);
            r.reverse();
            let b = varsi_fraction(ArrayView1::from(&r), c);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
