// SPDX-License-Identifier: Apache-2.0

//! Leading-vector solvers for row-stochastic preference matrices.
//!
//! Two spectral summaries of the same chain:
//!
//! * [`stationary_power`]: the stationary distribution, found by power
//!   iteration on the lazy chain `(I + M) / 2`. Laziness shifts every
//!   eigenvalue into the right half plane, so the iteration cannot cycle
//!   on periodic chains and converges whenever a stationary distribution
//!   is reachable from the uniform start; the fixed points of `M` and of
//!   the lazy chain coincide.
//! * [`right_singular_power`] and [`randomized_rank1`]: the top right
//!   singular vector, either by iterating the normal operator `M^T M` or
//!   by a seeded one-pass randomized range sketch with oversampling and
//!   optional power refinement.
//!
//! Solvers touch the matrix only through matrix-vector products, so cost
//! per iteration is O(listed entries + n) on compressed storage. Iteration
//! counts and final residuals are recorded on every result.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::markov::{kahan_sum, StochasticMatrix};

/// Default oversampling columns beyond rank 1 for the randomized sketch.
pub const DEFAULT_OVERSAMPLE: usize = 7;
/// Default power-refinement steps for the randomized sketch.
pub const DEFAULT_POWER_STEPS: usize = 2;
/// Iterations of deflated power iteration used to probe spectral
/// separation after the main solve.
const SEPARATION_PROBE_ITERS: usize = 50;
/// Relative column-collapse threshold in Gram-Schmidt.
const ORTHO_DROP: f64 = 1e-12;

/// Which spectral summary a score vector is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// Stationary distribution of the chain (left eigenvector, sum 1).
    Stationary,
    /// Top right singular vector (unit Euclidean norm).
    RightSingular,
}

impl ScoreMode {
    /// Stable lowercase name used in serialized output.
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Stationary => "stationary",
            ScoreMode::RightSingular => "right-singular",
        }
    }
}

/// Which algorithm produced a score vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Deterministic power iteration.
    Power,
    /// Seeded randomized rank-1 sketch.
    Randomized,
}

impl SolverKind {
    /// Stable lowercase name used in serialized output.
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Power => "power",
            SolverKind::Randomized => "randomized",
        }
    }
}

/// Convergence controls shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Successive-change tolerance (L1 for stationary, L2 for singular).
    pub tol: f64,
    /// Iteration cap before giving up.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 10_000 }
    }
}

/// A solved leading vector plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScore {
    /// Dimension.
    pub n: usize,
    /// The vector itself; normalization depends on `mode`.
    pub values: Vec<f64>,
    /// Which summary this is.
    pub mode: ScoreMode,
    /// Which algorithm produced it.
    pub solver: SolverKind,
    /// Final residual: `||x^T M - x^T||_1` for stationary,
    /// `||M^T M v - lambda v||_2` for singular modes.
    pub residual: f64,
    /// Iterations of the main loop (power refinement steps for the
    /// randomized solver).
    pub iterations: usize,
}

/// Solver failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralError {
    /// The iteration cap was reached; carries the last residual seen.
    NotConverged {
        /// Iterations performed (the cap).
        iterations: usize,
        /// Residual of the final iterate.
        residual: f64,
    },
    /// Top two singular values are within tolerance of each other; the
    /// leading vector is not well defined.
    IllSeparated {
        /// Estimated difference between the top two singular values.
        gap: f64,
    },
    /// Randomized sampling produced no usable range direction.
    SampleBreakdown {
        /// Seeds tried before giving up.
        attempts: usize,
    },
    /// Nonsensical options or parameters.
    BadOptions {
        /// Which option was rejected, and why.
        what: &'static str,
    },
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SpectralError::NotConverged { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
            SpectralError::IllSeparated { gap } => {
                write!(f, "ill-separated spectrum: top singular values within {gap:e}")
            }
            SpectralError::SampleBreakdown { attempts } => {
                write!(f, "randomized sample was rank-deficient in all {attempts} attempts")
            }
            SpectralError::BadOptions { what } => write!(f, "bad solver options: {what}"),
        }
    }
}

impl core::error::Error for SpectralError {}

fn check_options(opts: &SolverOptions) -> Result<(), SpectralError> {
    if !opts.tol.is_finite() || opts.tol <= 0.0 {
        return Err(SpectralError::BadOptions { what: "tol must be positive and finite" });
    }
    if opts.max_iter == 0 {
        return Err(SpectralError::BadOptions { what: "max_iter must be at least 1" });
    }
    Ok(())
}

fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(kahan_sum(v.iter().map(|x| x * x)))
}

/// Flips the vector's sign, in place, onto the canonical representative:
/// the entry sum is nonnegative, and an exactly zero sum is broken by
/// making the first largest-magnitude entry nonnegative. Idempotent, and
/// maps `v` and `-v` to the same output.
pub fn canonicalize_sign(values: &mut [f64]) {
    let sum = kahan_sum(values.iter().copied());
    let flip = if sum > 0.0 {
        false
    } else if sum < 0.0 {
        true
    } else {
        let mut lead = 0.0f64;
        let mut lead_val = 0.0f64;
        for &x in values.iter() {
            if x.abs() > lead {
                lead = x.abs();
                lead_val = x;
            }
        }
        lead_val < 0.0
    };
    if flip {
        for x in values.iter_mut() {
            *x = -*x;
        }
    }
}

/// Stationary distribution by lazy power iteration.
///
/// Iterates `x <- x^T (I + M) / 2` with L1 renormalization from the
/// uniform start until the successive L1 change drops below `tol`. The
/// recorded residual is the exact fixed-point defect `||x^T M - x^T||_1`
/// of the returned vector.
pub fn stationary_power(
    m: &StochasticMatrix,
    opts: &SolverOptions,
) -> Result<SpectralScore, SpectralError> {
    check_options(opts)?;
    let n = m.n();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];

    let mut converged_at = None;
    for it in 1..=opts.max_iter {
        m.mul_left(&x, &mut y);
        for j in 0..n {
            y[j] = 0.5 * (x[j] + y[j]);
        }
        let mass = kahan_sum(y.iter().copied());
        debug_assert!(mass > 0.0, "stochastic rows cannot lose all mass");
        for v in y.iter_mut() {
            *v /= mass;
        }
        let delta = kahan_sum(x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()));
        core::mem::swap(&mut x, &mut y);
        if delta < opts.tol {
            converged_at = Some(it);
            break;
        }
    }

    m.mul_left(&x, &mut y);
    let residual = kahan_sum(x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()));
    match converged_at {
        Some(iterations) => Ok(SpectralScore {
            n,
            values: x,
            mode: ScoreMode::Stationary,
            solver: SolverKind::Power,
            residual,
            iterations,
        }),
        None => Err(SpectralError::NotConverged { iterations: opts.max_iter, residual }),
    }
}

/// Applies `M^T M` through two matrix-vector products.
fn normal_apply(m: &StochasticMatrix, v: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    m.mul_right(v, tmp);
    m.mul_left(tmp, out);
}

/// Top right singular vector by power iteration on `M^T M`.
///
/// Converges when the successive L2 change of the unit iterate drops below
/// `tol`; afterwards a short deflated probe estimates the second singular
/// value, and a spectrum whose top two singular values sit within `tol`
/// of each other is rejected as ill separated (the leading direction is
/// arbitrary there, the identity matrix being the canonical offender).
pub fn right_singular_power(
    m: &StochasticMatrix,
    opts: &SolverOptions,
) -> Result<SpectralScore, SpectralError> {
    check_options(opts)?;
    let n = m.n();
    let mut v = vec![1.0 / libm::sqrt(n as f64); n];
    let mut tmp = vec![0.0; n];
    let mut z = vec![0.0; n];

    let mut converged_at = None;
    for it in 1..=opts.max_iter {
        normal_apply(m, &v, &mut tmp, &mut z);
        let norm = l2_norm(&z);
        debug_assert!(norm > 0.0, "stochastic matrices have positive top singular value");
        for x in z.iter_mut() {
            *x /= norm;
        }
        let delta = l2_norm_diff(&v, &z);
        v.copy_from_slice(&z);
        if delta < opts.tol {
            converged_at = Some(it);
            break;
        }
    }

    // lambda = v^T M^T M v = ||M v||^2; residual in the normal operator.
    m.mul_right(&v, &mut tmp);
    let lambda = kahan_sum(tmp.iter().map(|x| x * x));
    m.mul_left(&tmp, &mut z);
    let residual = libm::sqrt(kahan_sum(
        v.iter().zip(z.iter()).map(|(vi, zi)| (zi - lambda * vi) * (zi - lambda * vi)),
    ));

    let iterations = match converged_at {
        Some(it) => it,
        None => return Err(SpectralError::NotConverged { iterations: opts.max_iter, residual }),
    };

    if n > 1 {
        let sigma1 = libm::sqrt(lambda);
        let sigma2 = libm::sqrt(second_singular_sq(m, &v));
        let gap = sigma1 - sigma2;
        if gap <= opts.tol {
            return Err(SpectralError::IllSeparated { gap });
        }
    }

    Ok(SpectralScore {
        n,
        values: v,
        mode: ScoreMode::RightSingular,
        solver: SolverKind::Power,
        residual,
        iterations,
    })
}

fn l2_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(kahan_sum(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y))))
}

/// Best-effort estimate of the second-largest eigenvalue of `M^T M` by a
/// fixed number of power steps deflated against the converged vector `v`.
/// Exact multiplicity is detected in one step; a merely close second value
/// is approached from below, which errs on the permissive side.
fn second_singular_sq(m: &StochasticMatrix, v: &[f64]) -> f64 {
    let n = m.n();
    let mut w = vec![0.0; n];
    // Start from the basis vector least aligned with v, deflated.
    let k = v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    for i in 0..n {
        w[i] = -v[k] * v[i];
    }
    w[k] += 1.0;
    let norm = l2_norm(&w);
    if norm == 0.0 {
        return 0.0;
    }
    for x in w.iter_mut() {
        *x /= norm;
    }

    let mut tmp = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..SEPARATION_PROBE_ITERS {
        normal_apply(m, &w, &mut tmp, &mut t);
        let along = kahan_sum(v.iter().zip(t.iter()).map(|(a, b)| a * b));
        for i in 0..n {
            t[i] -= along * v[i];
        }
        let norm = l2_norm(&t);
        if norm == 0.0 {
            return 0.0;
        }
        for x in t.iter_mut() {
            *x /= norm;
        }
        w.copy_from_slice(&t);
    }
    normal_apply(m, &w, &mut tmp, &mut t);
    kahan_sum(w.iter().zip(t.iter()).map(|(a, b)| a * b)).max(0.0)
}

/// Top right singular vector by a seeded randomized rank-1 sketch.
///
/// Draws a standard normal test matrix with `1 + oversample` columns,
/// forms `Y = (M M^T)^power_steps M Omega`, orthonormalizes `Y` dropping
/// collapsed columns, and reads the top right singular vector off the
/// small factor `Q^T M`. A fully collapsed sample is retried with a fresh
/// seed up to three times before erroring; surviving with fewer columns
/// is normal (a rank-1 matrix leaves exactly one).
pub fn randomized_rank1(
    m: &StochasticMatrix,
    oversample: usize,
    power_steps: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<SpectralScore, SpectralError> {
    check_options(opts)?;
    if oversample == 0 {
        return Err(SpectralError::BadOptions { what: "oversample must be at least 1" });
    }
    let n = m.n();
    let k = 1 + oversample;
    const ATTEMPTS: usize = 4;

    for attempt in 0..ATTEMPTS as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut q_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut tmp = vec![0.0; n];

        for _ in 0..k {
            let omega: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mut y = vec![0.0; n];
            m.mul_right(&omega, &mut y);
            for _ in 0..power_steps {
                m.mul_left(&y, &mut tmp);
                m.mul_right(&tmp, &mut y);
            }
            let norm0 = l2_norm(&y);
            if norm0 == 0.0 {
                continue;
            }
            // Modified Gram-Schmidt, repeated once for numerical safety.
            for _ in 0..2 {
                for q in &q_cols {
                    let along = kahan_sum(q.iter().zip(y.iter()).map(|(a, b)| a * b));
                    for i in 0..n {
                        y[i] -= along * q[i];
                    }
                }
            }
            let norm = l2_norm(&y);
            if norm <= ORTHO_DROP * norm0 {
                continue;
            }
            for x in y.iter_mut() {
                *x /= norm;
            }
            q_cols.push(y);
        }

        if q_cols.is_empty() {
            continue;
        }

        // B = Q^T M, row j = M^T q_j; then the top eigenpair of the small
        // Gram matrix B B^T lifts back to the right singular vector.
        let r = q_cols.len();
        let b_rows: Vec<Vec<f64>> = q_cols
            .iter()
            .map(|q| {
                let mut row = vec![0.0; n];
                m.mul_left(q, &mut row);
                row
            })
            .collect();
        let mut gram = vec![0.0; r * r];
        for a in 0..r {
            for b in a..r {
                let dot = kahan_sum(b_rows[a].iter().zip(b_rows[b].iter()).map(|(x, y)| x * y));
                gram[a * r + b] = dot;
                gram[b * r + a] = dot;
            }
        }
        let mut u = vec![1.0 / libm::sqrt(r as f64); r];
        let mut t = vec![0.0; r];
        for _ in 0..500 {
            for a in 0..r {
                t[a] = (0..r).map(|b| gram[a * r + b] * u[b]).sum();
            }
            let norm = l2_norm(&t);
            if norm == 0.0 {
                break;
            }
            for x in t.iter_mut() {
                *x /= norm;
            }
            let delta = l2_norm_diff(&u, &t);
            u.copy_from_slice(&t);
            if delta < 1e-15 {
                break;
            }
        }

        let mut v = vec![0.0; n];
        for (j, row) in b_rows.iter().enumerate() {
            let uj = u[j];
            for i in 0..n {
                v[i] += uj * row[i];
            }
        }
        let norm = l2_norm(&v);
        if norm == 0.0 {
            continue;
        }
        for x in v.iter_mut() {
            *x /= norm;
        }

        let mut z = vec![0.0; n];
        m.mul_right(&v, &mut tmp);
        let lambda = kahan_sum(tmp.iter().map(|x| x * x));
        m.mul_left(&tmp, &mut z);
        let residual = libm::sqrt(kahan_sum(
            v.iter().zip(z.iter()).map(|(vi, zi)| (zi - lambda * vi) * (zi - lambda * vi)),
        ));

        return Ok(SpectralScore {
            n,
            values: v,
            mode: ScoreMode::RightSingular,
            solver: SolverKind::Randomized,
            residual,
            iterations: power_steps,
        });
    }
    Err(SpectralError::SampleBreakdown { attempts: ATTEMPTS })
}
