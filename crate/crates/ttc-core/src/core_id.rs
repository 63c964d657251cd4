// SPDX-License-Identifier: Apache-2.0

//! Turning spectral score vectors into core membership estimates.
//!
//! A solved leading vector is first mapped to per-agent scores in [0, 1]
//! under one of two linear conventions that disagree about orientation:
//!
//! * [`Convention::ExampleConsistent`]: `s_i = (v_max - v_i) / spread`,
//!   the smallest raw entry scoring highest.
//! * [`Convention::TheoremConsistent`]: `s_i = (v_i - v_min) / spread`,
//!   the largest raw entry scoring highest.
//!
//! Estimation then takes the top k agents by score, either in one shot
//! ([`identify_core_topk`]) or by repeatedly extracting the top agent and
//! re-solving the reduced matrix ([`identify_core_iterative`]).
//! [`compare_to_truth`] grades an estimate against the exact benchmark
//! from the trading algorithm.

use alloc::vec::Vec;
use core::fmt;

use crate::markov::{default_eps, kahan_sum, normalize_rows, smooth_truncated, MarkovError, StochasticMatrix};
use crate::spectral::{
    canonicalize_sign, right_singular_power, stationary_power, ScoreMode, SolverOptions,
    SpectralError, SpectralScore,
};
use crate::ttc::CoreSet;

/// Raw score spreads at or below this are treated as degenerate.
const SPREAD_FLOOR: f64 = 1e-14;

/// Orientation of the score map from raw vector entries to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Smallest raw entry maps to score 1.
    ExampleConsistent,
    /// Largest raw entry maps to score 1.
    TheoremConsistent,
}

impl Convention {
    /// Stable lowercase name used in serialized output.
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::ExampleConsistent => "example",
            Convention::TheoremConsistent => "theorem",
        }
    }
}

/// An estimated core: the chosen agents plus the scores that chose them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreEstimate {
    /// Estimated members, ascending 1-based agent ids.
    pub members: Vec<u32>,
    /// Per-agent scores in [0, 1], indexed by agent - 1.
    pub scores: Vec<f64>,
    /// Which spectral summary the scores came from.
    pub mode: ScoreMode,
    /// Which orientation produced the scores.
    pub convention: Convention,
}

/// How an estimate compares against the exact core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchMetrics {
    /// |estimate ∩ truth| / |estimate|.
    pub precision: f64,
    /// |estimate ∩ truth| / |truth|.
    pub recall: f64,
    /// Whether the two sets are identical.
    pub exact_match: bool,
    /// Rank correlation between scores and removal rounds; NaN when
    /// either side is constant.
    pub rank_correlation: f64,
}

/// Failures while turning vectors into core estimates.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreIdError {
    /// All raw entries coincide to within the spread floor, so relative
    /// ordering is meaningless.
    DegenerateScores {
        /// The max-minus-min spread observed.
        spread: f64,
    },
    /// Requested k outside 1..=n.
    BadK {
        /// The rejected size.
        k: usize,
        /// Number of agents.
        n: usize,
    },
    /// A spectral solve failed.
    Spectral(SpectralError),
    /// A matrix-construction step failed.
    Markov(MarkovError),
}

impl fmt::Display for CoreIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreIdError::DegenerateScores { spread } => {
                write!(f, "degenerate score vector: spread {spread:e} carries no ordering")
            }
            CoreIdError::BadK { k, n } => write!(f, "k = {k} is outside 1..={n}"),
            CoreIdError::Spectral(e) => write!(f, "spectral solve failed: {e}"),
            CoreIdError::Markov(e) => write!(f, "matrix construction failed: {e}"),
        }
    }
}

impl core::error::Error for CoreIdError {}

impl From<SpectralError> for CoreIdError {
    fn from(e: SpectralError) -> Self {
        CoreIdError::Spectral(e)
    }
}

impl From<MarkovError> for CoreIdError {
    fn from(e: MarkovError) -> Self {
        CoreIdError::Markov(e)
    }
}

/// Maps a solved vector to per-agent scores in [0, 1].
///
/// The vector is sign-canonicalized first so both solvers land on the
/// same representative. A spread at or below 1e-14 is rejected; nothing
/// can be ranked off a constant vector.
pub fn score_agents(
    score: &SpectralScore,
    convention: Convention,
) -> Result<Vec<f64>, CoreIdError> {
    score_values(&score.values, convention)
}

/// Same mapping applied to a bare vector, for callers holding raw solver
/// output rather than a [`SpectralScore`].
pub fn score_values(values: &[f64], convention: Convention) -> Result<Vec<f64>, CoreIdError> {
    let mut v = values.to_vec();
    canonicalize_sign(&mut v);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in &v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let spread = hi - lo;
    if !(spread > SPREAD_FLOOR) {
        return Err(CoreIdError::DegenerateScores { spread });
    }
    let out = match convention {
        Convention::ExampleConsistent => v.iter().map(|&x| (hi - x) / spread).collect(),
        Convention::TheoremConsistent => v.iter().map(|&x| (x - lo) / spread).collect(),
    };
    Ok(out)
}

/// Picks the k highest-scoring agents in one shot.
///
/// Ties in score break toward the smaller agent id. Members come back
/// sorted ascending regardless of score order.
pub fn identify_core_topk(
    score: &SpectralScore,
    convention: Convention,
    k: usize,
) -> Result<CoreEstimate, CoreIdError> {
    let n = score.n;
    if k == 0 || k > n {
        return Err(CoreIdError::BadK { k, n });
    }
    let scores = score_agents(score, convention)?;
    let mut order: Vec<u32> = (1..=n as u32).collect();
    order.sort_by(|&a, &b| {
        let sa = scores[(a - 1) as usize];
        let sb = scores[(b - 1) as usize];
        sb.total_cmp(&sa).then(a.cmp(&b))
    });
    let mut members: Vec<u32> = order[..k].to_vec();
    members.sort_unstable();
    Ok(CoreEstimate { members, scores, mode: score.mode, convention })
}

fn solve_by_mode(
    m: &StochasticMatrix,
    mode: ScoreMode,
    opts: &SolverOptions,
) -> Result<SpectralScore, SpectralError> {
    match mode {
        ScoreMode::Stationary => stationary_power(m, opts),
        ScoreMode::RightSingular => right_singular_power(m, opts),
    }
}

/// Extracts k agents one at a time, re-solving after each removal.
///
/// Each round solves the current matrix, takes the top-scoring live
/// agent, deletes its row and column, renormalizes (re-smoothing when
/// deletion leaves a zero somewhere), and repeats. The reported scores
/// are the first round's full-market scores; later rounds only decide
/// membership order. The last agent standing is taken without a solve.
pub fn identify_core_iterative(
    m: &StochasticMatrix,
    mode: ScoreMode,
    convention: Convention,
    k: usize,
    opts: &SolverOptions,
) -> Result<CoreEstimate, CoreIdError> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(CoreIdError::BadK { k, n });
    }

    let mut live: Vec<u32> = (1..=n as u32).collect();
    let mut current = m.clone();
    let mut members: Vec<u32> = Vec::with_capacity(k);
    let mut first_scores: Option<Vec<f64>> = None;

    for _ in 0..k {
        if live.len() == 1 {
            members.push(live[0]);
            break;
        }
        let solved = solve_by_mode(&current, mode, opts)?;
        let scores = score_agents(&solved, convention)?;
        if first_scores.is_none() {
            first_scores = Some(scores.clone());
        }
        let mut best = 0usize;
        for i in 1..scores.len() {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        members.push(live[best]);
        live.remove(best);

        let reduced = current.drop_index(best);
        let reduced = if reduced.min_entry() == 0.0 {
            smooth_truncated(&reduced, Some(default_eps(reduced.n())))?
        } else {
            reduced
        };
        current = normalize_rows(&reduced)?;
    }

    members.sort_unstable();
    let scores = match first_scores {
        Some(s) => s,
        // k = 1 on a one-agent market: no solve happened, score is fixed.
        None => alloc::vec![1.0; n],
    };
    Ok(CoreEstimate { members, scores, mode, convention })
}

/// Average-rank Spearman correlation.
///
/// Ties share the mean of the ranks they occupy; the result is the
/// Pearson correlation of the two rank vectors. Returns NaN when either
/// side is constant or fewer than two points are given.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "length mismatch: {} vs {}", x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mx = kahan_sum(rx.iter().copied()) / n as f64;
    let my = kahan_sum(ry.iter().copied()) / n as f64;
    let cov = kahan_sum(rx.iter().zip(ry.iter()).map(|(a, b)| (a - mx) * (b - my)));
    let vx = kahan_sum(rx.iter().map(|a| (a - mx) * (a - mx)));
    let vy = kahan_sum(ry.iter().map(|b| (b - my) * (b - my)));
    if vx <= 0.0 || vy <= 0.0 {
        return f64::NAN;
    }
    cov / libm::sqrt(vx * vy)
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 averaged across the tie block.
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Grades an estimate against the exact core and removal schedule.
///
/// `removal_round` is indexed by agent - 1 and holds the round each agent
/// traded in; later rounds mean closer to the core under the orientation
/// both conventions aim for, so the rank correlation pairs estimate
/// scores with rounds directly.
pub fn compare_to_truth(
    estimate: &CoreEstimate,
    truth: &CoreSet,
    removal_round: &[u32],
) -> MatchMetrics {
    let inter = estimate
        .members
        .iter()
        .filter(|&&a| truth.contains(a))
        .count();
    let precision = if estimate.members.is_empty() {
        0.0
    } else {
        inter as f64 / estimate.members.len() as f64
    };
    let recall = if truth.members().is_empty() {
        0.0
    } else {
        inter as f64 / truth.members().len() as f64
    };
    let exact_match = estimate.members.len() == truth.members().len()
        && inter == truth.members().len();
    let rounds: Vec<f64> = removal_round.iter().map(|&r| r as f64).collect();
    let rank_correlation = spearman(&estimate.scores, &rounds);
    MatchMetrics { precision, recall, exact_match, rank_correlation }
}
