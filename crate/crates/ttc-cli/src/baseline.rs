// SPDX-License-Identifier: Apache-2.0

//! Full-spectrum factorization baseline for timing comparisons.
//!
//! Computes the top right singular vector by a complete dense SVD. This
//! is the slow path the iterative solvers are measured against; it is
//! cubic in `n` and materializes the whole matrix, so it is capped at
//! [`BASELINE_MAX_N`] agents.

use nalgebra::DMatrix;
use ttc_core::{canonicalize_sign, StochasticMatrix};

/// Largest market the dense factorization accepts.
pub const BASELINE_MAX_N: usize = 2000;

/// Baseline failures.
#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    /// The dense factorization refuses markets beyond its cubic budget.
    #[error("market of {n} agents exceeds the dense factorization cap of {max}")]
    TooLarge {
        /// Number of agents requested.
        n: usize,
        /// The cap.
        max: usize,
    },
    /// The factorization did not converge (exceedingly rare on
    /// row-stochastic input).
    #[error("dense factorization failed to converge")]
    NoConvergence,
}

/// A dense-factorization solve: the canonicalized top right singular
/// vector and its singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSolve {
    /// Unit-norm canonicalized top right singular vector.
    pub values: Vec<f64>,
    /// Leading singular value.
    pub sigma: f64,
}

/// Computes the top right singular vector through a full dense SVD.
pub fn full_svd_top_right(m: &StochasticMatrix) -> Result<BaselineSolve, BaselineError> {
    let n = m.n();
    if n > BASELINE_MAX_N {
        return Err(BaselineError::TooLarge { n, max: BASELINE_MAX_N });
    }
    let dense = DMatrix::from_row_slice(n, n, &m.to_dense());
    let svd = dense.try_svd(false, true, f64::EPSILON, 0).ok_or(BaselineError::NoConvergence)?;
    let v_t = svd.v_t.expect("right singular vectors were requested");
    // Singular values come back sorted, but select the max defensively.
    let top = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("n >= 1");
    let mut values: Vec<f64> = v_t.row(top).iter().copied().collect();
    canonicalize_sign(&mut values);
    Ok(BaselineSolve { values, sigma: svd.singular_values[top] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use ttc_core::{
        build_scores, normalize_rows, right_singular_power, PreferenceProfile, SolverOptions,
    };

    #[test]
    fn matches_power_iteration_on_small_market() {
        let p = PreferenceProfile::new(3, 0, vec![vec![2, 1, 3], vec![1, 2, 3], vec![1, 3, 2]])
            .unwrap();
        let m = normalize_rows(&build_scores(&p).unwrap()).unwrap();
        let b = full_svd_top_right(&m).unwrap();
        let mut s = right_singular_power(&m, &SolverOptions::default()).unwrap();
        ttc_core::canonicalize_sign(&mut s.values);
        for i in 0..3 {
            assert!(
                (b.values[i] - s.values[i]).abs() <= 1e-9,
                "entry {i}: {} vs {}",
                b.values[i],
                s.values[i]
            );
        }
        assert!(b.sigma > 1.0, "stochastic matrices have sigma_1 >= 1, got {}", b.sigma);
    }

    #[test]
    fn matches_power_iteration_on_random_market() {
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.01..1.0)).collect();
        let m = normalize_rows(&ttc_core::ScoreMatrix::from_dense(n, data).unwrap()).unwrap();
        let b = full_svd_top_right(&m).unwrap();
        let mut s = right_singular_power(&m, &SolverOptions::default()).unwrap();
        ttc_core::canonicalize_sign(&mut s.values);
        let cos: f64 = b.values.iter().zip(s.values.iter()).map(|(x, y)| x * y).sum();
        assert!(cos.abs() >= 1.0 - 1e-10, "cosine {cos}");
    }

    #[test]
    fn refuses_oversized_markets() {
        // Short lists keep the rejected matrix compressed, so nothing
        // quadratic is ever allocated; the cap fires before densifying.
        let p = ttc_core::generate_random(BASELINE_MAX_N + 1, 2, 1).unwrap();
        let m = normalize_rows(&build_scores(&p).unwrap()).unwrap();
        match full_svd_top_right(&m) {
            Err(BaselineError::TooLarge { n, max }) => {
                assert_eq!(n, BASELINE_MAX_N + 1);
                assert_eq!(max, BASELINE_MAX_N);
            }
            other => panic!("expected cap refusal, got {other:?}"),
        }
    }
}
