// SPDX-License-Identifier: Apache-2.0

//! Preference matrices: ranked lists to row-stochastic chains.
//!
//! Agent `i`'s regard for object `j` is the normalized rank score
//! `(n - pos + 1) / n` (1-based list position `pos`, so the top choice
//! scores 1 and the last possible rank scores `1/n`); unlisted objects
//! score 0. Row-normalizing the score matrix yields the transition matrix
//! whose leading vectors the spectral pipeline consumes.
//!
//! Truncated profiles produce structurally sparse rows. Storage switches to
//! a compressed layout when listed entries fill less than half the matrix,
//! and smoothing is then represented as a shared per-row background value
//! rather than materialized zeros, keeping matrix-vector products at
//! O(listed entries + n) and the downstream solvers near linear.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::profile::{PreferenceProfile, ProfileError};

/// Row-sum drift tolerated before a row is rescaled; keeps normalization
/// exactly idempotent instead of grinding low bits on every pass.
const NORMALIZE_SKIP: f64 = 1e-15;

/// Errors from matrix construction and transformation.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkovError {
    /// Null-padded profiles have no square score matrix.
    NullsUnsupported {
        /// Number of null objects in the profile.
        null_count: usize,
    },
    /// A row with no mass cannot be normalized; smooth the matrix first.
    ZeroRow {
        /// 1-based id of the agent whose row is empty.
        agent: u32,
    },
    /// Smoothing constant must be positive and finite.
    BadEps {
        /// The rejected constant.
        eps: f64,
    },
    /// Noise level must lie in `[0, 1]`.
    BadNoise {
        /// The rejected level.
        eta: f64,
    },
    /// Dense data length does not match the declared dimension.
    BadShape {
        /// Declared dimension.
        n: usize,
        /// Length of the data slice (expected `n * n`).
        len: usize,
    },
    /// Scores and transition probabilities are nonnegative.
    NegativeEntry {
        /// 0-based row of the offending entry.
        row: u32,
        /// 0-based column of the offending entry.
        col: u32,
    },
    /// Matrix entries must be finite.
    NonFinite {
        /// 0-based row of the offending entry.
        row: u32,
        /// 0-based column of the offending entry.
        col: u32,
    },
    /// A row of a stochastic matrix must sum to 1 within 1e-12.
    NotStochastic {
        /// 0-based index of the offending row.
        row: u32,
        /// That row's actual sum.
        sum: f64,
    },
    /// Underlying profile violation (from rank perturbation).
    Profile(ProfileError),
}

impl fmt::Display for MarkovError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            MarkovError::NullsUnsupported { null_count } => {
                write!(f, "profile has {null_count} null objects; scores need a real-object market")
            }
            MarkovError::ZeroRow { agent } => {
                write!(f, "agent {agent} has an all-zero row; smooth the matrix first")
            }
            MarkovError::BadEps { eps } => write!(f, "smoothing eps {eps:e} must be positive and finite"),
            MarkovError::BadNoise { eta } => write!(f, "noise level {eta} outside [0, 1]"),
            MarkovError::BadShape { n, len } => {
                write!(f, "dense data length {len} does not match {n}x{n}")
            }
            MarkovError::NegativeEntry { row, col } => {
                write!(f, "negative entry at row {row}, column {col}")
            }
            MarkovError::NonFinite { row, col } => {
                write!(f, "non-finite entry at row {row}, column {col}")
            }
            MarkovError::NotStochastic { row, sum } => {
                write!(f, "row {row} sums to {sum}, not 1 within 1e-12")
            }
            MarkovError::Profile(ref e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for MarkovError {}

impl From<ProfileError> for MarkovError {
    fn from(e: ProfileError) -> Self {
        MarkovError::Profile(e)
    }
}

/// Compensated (Kahan) sum; row-sum checks at 1e-12 need better than naive
/// accumulation once n reaches a few thousand.
pub(crate) fn kahan_sum<I: Iterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for x in iter {
        let y = x - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Row-major dense or compressed-sparse-rows with a per-row background
/// value standing in for every column not stored explicitly.
#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense {
        data: Vec<f64>,
    },
    Sparse {
        row_ptr: Vec<usize>,
        col: Vec<u32>,
        val: Vec<f64>,
        background: Vec<f64>,
    },
}

impl Storage {
    fn entry(&self, n: usize, i: usize, j: usize) -> f64 {
        match self {
            Storage::Dense { data } => data[i * n + j],
            Storage::Sparse { row_ptr, col, val, background } => {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    if col[k] as usize == j {
                        return val[k];
                    }
                }
                background[i]
            }
        }
    }

    fn row_sum(&self, n: usize, i: usize) -> f64 {
        match self {
            Storage::Dense { data } => kahan_sum(data[i * n..(i + 1) * n].iter().copied()),
            Storage::Sparse { row_ptr, val, background, .. } => {
                let nnz = row_ptr[i + 1] - row_ptr[i];
                kahan_sum(val[row_ptr[i]..row_ptr[i + 1]].iter().copied())
                    + background[i] * (n - nnz) as f64
            }
        }
    }

    fn min_entry(&self, n: usize) -> f64 {
        match self {
            Storage::Dense { data } => data.iter().copied().fold(f64::INFINITY, f64::min),
            Storage::Sparse { row_ptr, val, background, .. } => {
                let mut min = f64::INFINITY;
                for i in 0..n {
                    let nnz = row_ptr[i + 1] - row_ptr[i];
                    if nnz < n {
                        min = min.min(background[i]);
                    }
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        min = min.min(val[k]);
                    }
                }
                min
            }
        }
    }

    /// out = M v.
    fn mul_right(&self, n: usize, v: &[f64], out: &mut [f64]) {
        match self {
            Storage::Dense { data } => {
                for i in 0..n {
                    let row = &data[i * n..(i + 1) * n];
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += row[j] * v[j];
                    }
                    out[i] = acc;
                }
            }
            Storage::Sparse { row_ptr, col, val, background } => {
                let total = kahan_sum(v.iter().copied());
                for i in 0..n {
                    let mut dot = 0.0;
                    let mut listed = 0.0;
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        let vj = v[col[k] as usize];
                        dot += val[k] * vj;
                        listed += vj;
                    }
                    out[i] = dot + background[i] * (total - listed);
                }
            }
        }
    }

    /// out = M^T x (the left product x^T M read as a column vector).
    fn mul_left(&self, n: usize, x: &[f64], out: &mut [f64]) {
        match self {
            Storage::Dense { data } => {
                out.fill(0.0);
                for i in 0..n {
                    let xi = x[i];
                    if xi == 0.0 {
                        continue;
                    }
                    let row = &data[i * n..(i + 1) * n];
                    for j in 0..n {
                        out[j] += row[j] * xi;
                    }
                }
            }
            Storage::Sparse { row_ptr, col, val, background } => {
                let base = kahan_sum((0..n).map(|i| background[i] * x[i]));
                out.fill(base);
                for i in 0..n {
                    let xi = x[i];
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        out[col[k] as usize] += (val[k] - background[i]) * xi;
                    }
                }
            }
        }
    }

    fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            Storage::Dense { data } => data.clone(),
            Storage::Sparse { row_ptr, col, val, background } => {
                let mut data = vec![0.0; n * n];
                for i in 0..n {
                    let row = &mut data[i * n..(i + 1) * n];
                    row.fill(background[i]);
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        row[col[k] as usize] = val[k];
                    }
                }
                data
            }
        }
    }

    fn drop_index(&self, n: usize, idx: usize) -> Storage {
        match self {
            Storage::Dense { data } => {
                let m = n - 1;
                let mut out = Vec::with_capacity(m * m);
                for i in 0..n {
                    if i == idx {
                        continue;
                    }
                    for j in 0..n {
                        if j == idx {
                            continue;
                        }
                        out.push(data[i * n + j]);
                    }
                }
                Storage::Dense { data: out }
            }
            Storage::Sparse { row_ptr, col, val, background } => {
                let mut new_ptr = Vec::with_capacity(n);
                let mut new_col = Vec::new();
                let mut new_val = Vec::new();
                let mut new_bg = Vec::with_capacity(n - 1);
                new_ptr.push(0);
                for i in 0..n {
                    if i == idx {
                        continue;
                    }
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        let j = col[k] as usize;
                        if j == idx {
                            continue;
                        }
                        new_col.push(if j > idx { (j - 1) as u32 } else { j as u32 });
                        new_val.push(val[k]);
                    }
                    new_ptr.push(new_col.len());
                    new_bg.push(background[i]);
                }
                Storage::Sparse { row_ptr: new_ptr, col: new_col, val: new_val, background: new_bg }
            }
        }
    }

    fn validate_dense(n: usize, data: &[f64]) -> Result<(), MarkovError> {
        if data.len() != n * n {
            return Err(MarkovError::BadShape { n, len: data.len() });
        }
        for i in 0..n {
            for j in 0..n {
                let x = data[i * n + j];
                if !x.is_finite() {
                    return Err(MarkovError::NonFinite { row: i as u32 + 1, col: j as u32 + 1 });
                }
                if x < 0.0 {
                    return Err(MarkovError::NegativeEntry { row: i as u32 + 1, col: j as u32 + 1 });
                }
            }
        }
        Ok(())
    }
}

/// Nonnegative rank-score matrix; rows need not sum to anything.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    storage: Storage,
}

/// Row-stochastic transition matrix (each row sums to 1 within 1e-12).
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    n: usize,
    storage: Storage,
}

impl ScoreMatrix {
    /// Dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at 0-based `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.storage.entry(self.n, i, j)
    }

    /// True when the compressed layout is in use.
    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Wraps row-major dense data after checking shape, finiteness, and
    /// nonnegativity.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self, MarkovError> {
        Storage::validate_dense(n, &data)?;
        Ok(Self { n, storage: Storage::Dense { data } })
    }

    /// Smallest entry (background included for sparse storage).
    pub fn min_entry(&self) -> f64 {
        self.storage.min_entry(self.n)
    }

    /// Kahan row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.storage.row_sum(self.n, i)).collect()
    }

    /// Row-major dense copy (materializes any background).
    pub fn to_dense(&self) -> Vec<f64> {
        self.storage.to_dense(self.n)
    }
}

impl StochasticMatrix {
    /// Dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at 0-based `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.storage.entry(self.n, i, j)
    }

    /// True when the compressed layout is in use.
    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Wraps row-major dense data after checking shape, sign, and row sums.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self, MarkovError> {
        Storage::validate_dense(n, &data)?;
        for i in 0..n {
            let sum = kahan_sum(data[i * n..(i + 1) * n].iter().copied());
            if (sum - 1.0).abs() > 1e-12 {
                return Err(MarkovError::NotStochastic { row: i as u32 + 1, sum });
            }
        }
        Ok(Self { n, storage: Storage::Dense { data } })
    }

    /// out = M v.
    pub fn mul_right(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n);
        assert_eq!(out.len(), self.n);
        self.storage.mul_right(self.n, v, out);
    }

    /// out = M^T x, equivalently the left product x^T M.
    pub fn mul_left(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        self.storage.mul_left(self.n, x, out);
    }

    /// Largest deviation of any row sum from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.storage.row_sum(self.n, i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Reinterprets the transition weights as plain scores (for
    /// renormalization pipelines).
    pub fn into_scores(self) -> ScoreMatrix {
        ScoreMatrix { n: self.n, storage: self.storage }
    }

    /// Submatrix with agent `idx` (0-based) removed from rows and columns;
    /// surviving weights are untouched, so rows want renormalizing.
    ///
    /// # Panics
    ///
    /// Panics if `idx` is out of range or the matrix is 1x1.
    pub fn drop_index(&self, idx: usize) -> ScoreMatrix {
        assert!(idx < self.n, "index {idx} outside 0..{}", self.n);
        assert!(self.n > 1, "cannot shrink a 1x1 matrix");
        ScoreMatrix { n: self.n - 1, storage: self.storage.drop_index(self.n, idx) }
    }

    /// Row-major dense copy (materializes any background).
    pub fn to_dense(&self) -> Vec<f64> {
        self.storage.to_dense(self.n)
    }
}

/// Default smoothing constant, `1e-6 / n`.
pub fn default_eps(n: usize) -> f64 {
    1e-6 / n as f64
}

/// Rank-score matrix of a real-object profile.
///
/// Listed object at 1-based position `pos` scores `(n - pos + 1) / n`;
/// unlisted objects score 0. Storage goes sparse when listed entries fill
/// less than half of the matrix.
pub fn build_scores(profile: &PreferenceProfile) -> Result<ScoreMatrix, MarkovError> {
    if profile.null_count() > 0 {
        return Err(MarkovError::NullsUnsupported { null_count: profile.null_count() });
    }
    let n = profile.n();
    let nf = n as f64;
    let nnz: usize = profile.lists().iter().map(|l| l.len()).sum();
    let storage = if 2 * nnz < n * n {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for list in profile.lists() {
            for (pos, &obj) in list.iter().enumerate() {
                col.push(obj - 1);
                val.push((nf - pos as f64) / nf);
            }
            row_ptr.push(col.len());
        }
        Storage::Sparse { row_ptr, col, val, background: vec![0.0; n] }
    } else {
        let mut data = vec![0.0; n * n];
        for (i, list) in profile.lists().iter().enumerate() {
            for (pos, &obj) in list.iter().enumerate() {
                data[i * n + obj as usize - 1] = (nf - pos as f64) / nf;
            }
        }
        Storage::Dense { data }
    };
    Ok(ScoreMatrix { n, storage })
}

/// Divides every row by its sum.
///
/// Rows already summing to 1 within 1e-15 are left untouched, which makes
/// the operation idempotent. A row with no mass is an error: truncated
/// profiles must be smoothed first.
pub fn normalize_rows(scores: &ScoreMatrix) -> Result<StochasticMatrix, MarkovError> {
    let n = scores.n;
    let mut storage = scores.storage.clone();
    match &mut storage {
        Storage::Dense { data } => {
            for i in 0..n {
                let row = &mut data[i * n..(i + 1) * n];
                let sum = kahan_sum(row.iter().copied());
                if sum == 0.0 {
                    return Err(MarkovError::ZeroRow { agent: i as u32 + 1 });
                }
                if (sum - 1.0).abs() > NORMALIZE_SKIP {
                    for x in row.iter_mut() {
                        *x /= sum;
                    }
                }
            }
        }
        Storage::Sparse { row_ptr, val, background, .. } => {
            for i in 0..n {
                let nnz = row_ptr[i + 1] - row_ptr[i];
                let sum = kahan_sum(val[row_ptr[i]..row_ptr[i + 1]].iter().copied())
                    + background[i] * (n - nnz) as f64;
                if sum == 0.0 {
                    return Err(MarkovError::ZeroRow { agent: i as u32 + 1 });
                }
                if (sum - 1.0).abs() > NORMALIZE_SKIP {
                    for x in val[row_ptr[i]..row_ptr[i + 1]].iter_mut() {
                        *x /= sum;
                    }
                    background[i] /= sum;
                }
            }
        }
    }
    Ok(StochasticMatrix { n, storage })
}

/// Replaces every zero entry by `eps` (default `1e-6 / n`), making the
/// matrix strictly positive and the induced chain irreducible. Sparse
/// storage absorbs the constant into the per-row background, so truncated
/// matrices stay compressed.
pub fn smooth_truncated(scores: &ScoreMatrix, eps: Option<f64>) -> Result<ScoreMatrix, MarkovError> {
    let n = scores.n;
    let eps = eps.unwrap_or_else(|| default_eps(n));
    if !eps.is_finite() || eps <= 0.0 {
        return Err(MarkovError::BadEps { eps });
    }
    let mut storage = scores.storage.clone();
    match &mut storage {
        Storage::Dense { data } => {
            for x in data.iter_mut() {
                if *x == 0.0 {
                    *x = eps;
                }
            }
        }
        Storage::Sparse { val, background, .. } => {
            for x in val.iter_mut() {
                if *x == 0.0 {
                    *x = eps;
                }
            }
            for b in background.iter_mut() {
                if *b == 0.0 {
                    *b = eps;
                }
            }
        }
    }
    Ok(ScoreMatrix { n, storage })
}

/// Multiplicative score noise: every entry is scaled by `1 + z` with
/// `z ~ U(-eta, eta)` drawn i.i.d. from a ChaCha8 stream, then rows are
/// renormalized. `eta == 0` returns the matrix unchanged, bit for bit.
///
/// The i.i.d. draws break the shared-background trick, so the result is
/// dense; perturb before scaling up, not after.
pub fn perturb_scores(
    m: &StochasticMatrix,
    eta: f64,
    seed: u64,
) -> Result<StochasticMatrix, MarkovError> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(MarkovError::BadNoise { eta });
    }
    if eta == 0.0 {
        return Ok(m.clone());
    }
    let n = m.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = m.to_dense();
    for x in data.iter_mut() {
        let z: f64 = rng.random_range(-eta..eta);
        *x *= 1.0 + z;
    }
    normalize_rows(&ScoreMatrix { n, storage: Storage::Dense { data } })
}

/// Rank noise: `floor(eta * n)` uniformly random adjacent transpositions
/// applied to each agent's list (independently, same ChaCha8 stream).
/// Rebuild scores from the returned profile to get the perturbed matrix.
/// `eta == 0` returns the profile unchanged.
pub fn perturb_ranks(
    profile: &PreferenceProfile,
    eta: f64,
    seed: u64,
) -> Result<PreferenceProfile, MarkovError> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(MarkovError::BadNoise { eta });
    }
    let n = profile.n();
    let swaps = (eta * n as f64) as usize;
    if swaps == 0 {
        return Ok(profile.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lists: Vec<Vec<u32>> = profile.lists().to_vec();
    for list in lists.iter_mut() {
        if list.len() < 2 {
            continue;
        }
        for _ in 0..swaps {
            let pos = rng.random_range(0..list.len() - 1);
            list.swap(pos, pos + 1);
        }
    }
    Ok(PreferenceProfile::new(n, profile.null_count(), lists)?)
}
