// SPDX-License-Identifier: Apache-2.0

//! Seeded experiment harness: accuracy tables, noise sweeps, and timing
//! comparisons, all emitted as CSV.
//!
//! Every run is a pure function of its [`ExperimentConfig`]: trial t of a
//! grid point draws its profile from `seed + t`, perturbations draw from
//! a derived stream, and rows are emitted in a fixed (n, level, trial,
//! mode, convention) order, so a repeated run reproduces the output byte
//! for byte once wall-clock columns are disabled via `record_times`.
//! Solver failures are recorded in their rows as NaN metrics rather than
//! aborting the run. Everything executes serially; the recorded thread
//! count is 1.

use std::collections::BTreeMap;
use std::time::Instant;

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ttc_core::{
    build_scores, compare_to_truth, generate_random, ground_truth_core, identify_core_topk,
    normalize_rows, perturb_ranks, perturb_scores, randomized_rank1, right_singular_power, run_ttc,
    score_values, smooth_truncated, stationary_power, Allocation, Convention, CoreIdError,
    MarkovError,
    PreferenceProfile, ProfileError, ScoreMode, SolverOptions, SpectralScore, StochasticMatrix,
    TtcError,
};

use crate::baseline::{full_svd_top_right, BaselineError, BASELINE_MAX_N};

/// Seed offset separating the perturbation stream from the profile
/// stream (the 64-bit golden-ratio constant).
const PERTURB_STREAM: u64 = 0x9E3779B97F4A7C15;

/// Recorded thread count; the harness executes serially.
pub const THREADS: usize = 1;

/// Spectral summary selector, as it appears on flags and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Stationary distribution of the preference chain.
    Stationary,
    /// Top right singular vector.
    Singular,
}

impl ModeArg {
    /// The solver-level mode this flag selects.
    pub fn to_core(self) -> ScoreMode {
        match self {
            ModeArg::Stationary => ScoreMode::Stationary,
            ModeArg::Singular => ScoreMode::RightSingular,
        }
    }
}

/// Score orientation selector, as it appears on flags and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    /// Smallest raw entry scores highest.
    Example,
    /// Largest raw entry scores highest.
    Theorem,
}

impl ConventionArg {
    /// The scoring convention this flag selects.
    pub fn to_core(self) -> Convention {
        match self {
            ConventionArg::Example => Convention::ExampleConsistent,
            ConventionArg::Theorem => Convention::TheoremConsistent,
        }
    }
}

/// Spectral solver selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    /// Deterministic power iteration.
    Power,
    /// Seeded randomized rank-1 sketch.
    Randomized,
}

/// Which perturbation a noise sweep applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Multiplicative noise on matrix entries.
    Score,
    /// Random adjacent transpositions in preference lists.
    Rank,
}

/// How the estimate size k is chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KPolicy {
    /// Match the exact core's size from the trading procedure.
    GroundTruth,
    /// Always ask for this many agents.
    Fixed(usize),
}

/// Full description of an experiment; every run is a pure function of
/// one of these. Mirrored by the JSON accepted via `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Market sizes to sweep.
    pub n_values: Vec<usize>,
    /// Preference list truncation; full lists when absent.
    pub l: Option<usize>,
    /// Trials per grid point.
    pub trials: usize,
    /// Base seed; trial t uses `seed + t`.
    pub seed: u64,
    /// Spectral summaries to run.
    pub modes: Vec<ModeArg>,
    /// Score orientations to report.
    pub conventions: Vec<ConventionArg>,
    /// Noise levels for sweeps, each in [0, 1].
    pub noise_levels: Vec<f64>,
    /// Perturbation model for sweeps.
    pub noise_model: NoiseModel,
    /// Fixed estimate size; ground-truth size when absent.
    pub k: Option<usize>,
    /// Which spectral solver produces the leading vector.
    pub solver: SolverArg,
    /// When false, wall-clock columns are NaN and reruns are
    /// byte-identical.
    pub record_times: bool,
    /// Whether timing runs include the dense factorization baseline
    /// (skipped anyway above its size cap).
    pub include_baseline: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![10, 50, 100],
            l: None,
            trials: 100,
            seed: 42,
            modes: vec![ModeArg::Stationary, ModeArg::Singular],
            conventions: vec![ConventionArg::Example, ConventionArg::Theorem],
            noise_levels: vec![0.0, 0.05, 0.1, 0.2],
            noise_model: NoiseModel::Score,
            k: None,
            solver: SolverArg::Power,
            record_times: true,
            include_baseline: true,
        }
    }
}

impl ExperimentConfig {
    /// Effective truncation at a given market size.
    pub fn l_eff(&self, n: usize) -> usize {
        self.l.unwrap_or(n)
    }

    /// The estimate-size policy this config encodes.
    pub fn k_policy(&self) -> KPolicy {
        match self.k {
            Some(k) => KPolicy::Fixed(k),
            None => KPolicy::GroundTruth,
        }
    }

    /// Rejects configs that cannot run.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_values.is_empty() {
            return Err(HarnessError::BadConfig("n_values must be nonempty".into()));
        }
        if self.n_values.iter().any(|&n| n == 0) {
            return Err(HarnessError::BadConfig("market sizes must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::BadConfig("trials must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(HarnessError::BadConfig("modes must be nonempty".into()));
        }
        if self.conventions.is_empty() {
            return Err(HarnessError::BadConfig("conventions must be nonempty".into()));
        }
        if self
            .noise_levels
            .iter()
            .any(|&e| !e.is_finite() || !(0.0..=1.0).contains(&e))
        {
            return Err(HarnessError::BadConfig("noise levels must lie in [0, 1]".into()));
        }
        if let Some(l) = self.l {
            let smallest = *self.n_values.iter().min().expect("nonempty");
            if l == 0 || l > smallest {
                return Err(HarnessError::BadConfig(format!(
                    "truncation L = {l} must lie in 1..={smallest} (the smallest market)"
                )));
            }
        }
        if self.k == Some(0) {
            return Err(HarnessError::BadConfig("fixed k must be at least 1".into()));
        }
        Ok(())
    }
}

/// One emitted CSV row. Field order is the frozen column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// Market size.
    pub n: usize,
    /// Preference list truncation in force.
    #[serde(rename = "L")]
    pub l: usize,
    /// Trial index within the grid point.
    pub trial: usize,
    /// Seed this trial's profile was generated from.
    pub seed: u64,
    /// Spectral summary ("stationary" or "right-singular").
    pub mode: String,
    /// Score orientation ("example" or "theorem").
    pub convention: String,
    /// Noise level applied (0 in accuracy runs).
    pub noise: f64,
    /// Fraction of estimated members in the exact core; NaN when the
    /// solve failed.
    pub precision: f64,
    /// Fraction of the exact core recovered; NaN when the solve failed.
    pub recall: f64,
    /// 1 when the sets match exactly, else 0 (failures count 0).
    pub exact: u8,
    /// Tie-aware rank correlation of scores against removal rounds.
    pub rank_corr: f64,
    /// Matrix build + solve + identification time; NaN when timing is
    /// disabled or the solve failed.
    pub time_spectral_ms: f64,
    /// Trading-procedure time; NaN when timing is disabled.
    pub time_ttc_ms: f64,
    /// Iterations the spectral solver reported (0 on failure).
    pub solver_iters: usize,
    /// Worker threads used (always 1).
    pub threads: usize,
}

/// One row of the aggregate table, grouped per
/// (n, L, mode, convention, noise).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    /// Market size.
    pub n: usize,
    /// Preference list truncation in force.
    #[serde(rename = "L")]
    pub l: usize,
    /// Spectral summary.
    pub mode: String,
    /// Score orientation.
    pub convention: String,
    /// Noise level.
    pub noise: f64,
    /// Rows aggregated.
    pub trials: usize,
    /// Mean of the exact column.
    pub match_rate: f64,
    /// Lower 95% binomial (Wilson) bound on the match rate.
    pub ci_low: f64,
    /// Upper 95% binomial (Wilson) bound on the match rate.
    pub ci_high: f64,
    /// Mean precision over rows whose solve succeeded.
    pub mean_precision: f64,
    /// Mean recall over rows whose solve succeeded.
    pub mean_recall: f64,
    /// Mean rank correlation over rows where it is defined.
    pub mean_rank_corr: f64,
    /// Mean normalized assigned-object rank under the exact trading
    /// allocation, recomputed from recorded seeds; an ordinal stand-in
    /// for average welfare.
    pub mean_welfare: f64,
    /// Mean spectral time over timed rows (NaN when timing was off).
    pub mean_time_spectral_ms: f64,
    /// Mean trading time over timed rows (NaN when timing was off).
    pub mean_time_ttc_ms: f64,
    /// mean_time_ttc_ms / mean_time_spectral_ms; NaN unless both raw
    /// time columns are present.
    pub speedup: f64,
}

/// One timing row: the median wall-clock time of a solve path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRecord {
    /// Market size.
    pub n: usize,
    /// Preference list truncation in force.
    #[serde(rename = "L")]
    pub l: usize,
    /// Which path was timed: "ttc", "power", "randomized", "full_svd".
    pub path: String,
    /// Base seed; trial t regenerates its profile from `seed + t`.
    pub seed: u64,
    /// Spectral summary the path solves ("-" for the trading path).
    pub mode: String,
    /// Score orientation used for identification ("-" for paths that do
    /// not score).
    pub convention: String,
    /// Timed trials behind the median (one warmup excluded).
    pub trials: usize,
    /// Median wall-clock milliseconds.
    pub median_ms: f64,
    /// Smallest positive timer increment observed, nanoseconds.
    pub timer_res_ns: u64,
    /// Worker threads used (always 1).
    pub threads: usize,
}

/// Fatal harness failures. Per-trial solver failures are not here; they
/// land in their rows as NaN metrics.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// The config cannot run as given.
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    /// Profile generation failed.
    #[error("profile generation failed: {0}")]
    Profile(#[from] ProfileError),
    /// The exact trading procedure failed, so there is no ground truth.
    #[error("trading procedure failed: {0}")]
    Ttc(#[from] TtcError),
    /// Matrix construction failed for a whole trial.
    #[error("matrix construction failed: {0}")]
    Markov(#[from] MarkovError),
    /// The dense factorization baseline failed.
    #[error("dense baseline failed: {0}")]
    Baseline(#[from] BaselineError),
    /// Record serialization failed.
    #[error("csv serialization failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Mean normalized rank of each agent's assigned object: listed objects
/// contribute `(n - pos + 1) / n`, unlisted assignments contribute 0.
pub fn welfare(profile: &PreferenceProfile, allocation: &Allocation) -> f64 {
    let n = profile.n();
    let nf = n as f64;
    let mut total = 0.0;
    for agent in 1..=n as u32 {
        if let Some(pos) = profile.position_of(agent, allocation.object_of(agent)) {
            total += (nf - pos as f64 + 1.0) / nf;
        }
    }
    total / nf
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: usize, trials: usize) -> (f64, f64) {
    const Z: f64 = 1.959963984540054;
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center - half, center + half)
}

/// Median with total-order f64 comparison; even lengths average the two
/// middle values. NaN for empty input.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Smallest positive `Instant` increment observed, in nanoseconds.
pub fn timer_resolution_ns() -> u64 {
    let mut best = u64::MAX;
    for _ in 0..200 {
        let t0 = Instant::now();
        let mut d = t0.elapsed();
        while d.is_zero() {
            d = t0.elapsed();
        }
        let ns = d.as_nanos() as u64;
        if ns < best {
            best = ns;
        }
    }
    if best == u64::MAX {
        1
    } else {
        best
    }
}

fn mean_finite(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        if v.is_finite() {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn chain_from_profile(p: &PreferenceProfile) -> Result<StochasticMatrix, MarkovError> {
    let scores = smooth_truncated(&build_scores(p)?, None)?;
    normalize_rows(&scores)
}

fn solve(
    m: &StochasticMatrix,
    mode: ScoreMode,
    solver: SolverArg,
    seed: u64,
) -> Result<SpectralScore, ttc_core::SpectralError> {
    let opts = SolverOptions::default();
    match (mode, solver) {
        (ScoreMode::Stationary, _) => stationary_power(m, &opts),
        (ScoreMode::RightSingular, SolverArg::Power) => right_singular_power(m, &opts),
        (ScoreMode::RightSingular, SolverArg::Randomized) => randomized_rank1(
            m,
            ttc_core::spectral::DEFAULT_OVERSAMPLE,
            ttc_core::spectral::DEFAULT_POWER_STEPS,
            seed,
            &opts,
        ),
    }
}

/// Runs every (mode, convention) cell of one trial and returns its rows.
///
/// This is the worker behind [`run_accuracy`] and [`run_noise_sweep`];
/// it is public so a known profile can be injected as a trial directly.
/// `noise: Some(eta)` perturbs the market per the config's noise model
/// with a stream derived from `trial_seed` before solving; the exact
/// benchmark always comes from the unperturbed profile.
pub fn run_trial(
    profile: &PreferenceProfile,
    trial: usize,
    trial_seed: u64,
    cfg: &ExperimentConfig,
    noise: Option<f64>,
) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let n = profile.n();
    let l = profile.lists().iter().map(|l| l.len()).max().unwrap_or(0);

    let t0 = Instant::now();
    let outcome = run_ttc(profile)?;
    let time_ttc_ms = if cfg.record_times {
        t0.elapsed().as_secs_f64() * 1e3
    } else {
        f64::NAN
    };
    let truth = ground_truth_core(&outcome);
    let k = match cfg.k_policy() {
        KPolicy::GroundTruth => truth.k(),
        KPolicy::Fixed(k) => k,
    };

    let perturb_seed = trial_seed.wrapping_add(PERTURB_STREAM);
    let tb = Instant::now();
    let (m, build_ms) = match noise {
        None => {
            let m = chain_from_profile(profile)?;
            (m, tb.elapsed().as_secs_f64() * 1e3)
        }
        Some(eta) => match cfg.noise_model {
            NoiseModel::Score => {
                let clean = chain_from_profile(profile)?;
                let build_ms = tb.elapsed().as_secs_f64() * 1e3;
                (perturb_scores(&clean, eta, perturb_seed)?, build_ms)
            }
            NoiseModel::Rank => {
                let shuffled = perturb_ranks(profile, eta, perturb_seed)?;
                let tb2 = Instant::now();
                let m = chain_from_profile(&shuffled)?;
                (m, tb2.elapsed().as_secs_f64() * 1e3)
            }
        },
    };

    let noise_level = noise.unwrap_or(0.0);
    let mut rows = Vec::with_capacity(cfg.modes.len() * cfg.conventions.len());
    for &mode_arg in &cfg.modes {
        let mode = mode_arg.to_core();
        let ts = Instant::now();
        let solved = solve(&m, mode, cfg.solver, trial_seed);
        let solve_ms = ts.elapsed().as_secs_f64() * 1e3;
        for &conv_arg in &cfg.conventions {
            let convention = conv_arg.to_core();
            let mut row = ExperimentRecord {
                n,
                l,
                trial,
                seed: trial_seed,
                mode: mode.as_str().to_string(),
                convention: convention.as_str().to_string(),
                noise: noise_level,
                precision: f64::NAN,
                recall: f64::NAN,
                exact: 0,
                rank_corr: f64::NAN,
                time_spectral_ms: f64::NAN,
                time_ttc_ms,
                solver_iters: 0,
                threads: THREADS,
            };
            if let Ok(solved) = &solved {
                row.solver_iters = solved.iterations;
                let ti = Instant::now();
                if let Ok(estimate) = identify_core_topk(solved, convention, k) {
                    let identify_ms = ti.elapsed().as_secs_f64() * 1e3;
                    let metrics = compare_to_truth(&estimate, &truth, outcome.removal_round());
                    row.precision = metrics.precision;
                    row.recall = metrics.recall;
                    row.exact = u8::from(metrics.exact_match);
                    row.rank_corr = metrics.rank_correlation;
                    if cfg.record_times {
                        row.time_spectral_ms = build_ms + solve_ms + identify_ms;
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Sweeps (n, trial) over generated markets without noise.
pub fn run_accuracy(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>, HarnessError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let l = cfg.l_eff(n);
        for trial in 0..cfg.trials {
            let trial_seed = cfg.seed.wrapping_add(trial as u64);
            let profile = generate_random(n, l, trial_seed)?;
            rows.extend(run_trial(&profile, trial, trial_seed, cfg, None)?);
        }
    }
    Ok(rows)
}

/// Sweeps (n, level, trial); level 0 rows coincide with [`run_accuracy`]
/// rows bit for bit when timing is disabled.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>, HarnessError> {
    cfg.validate()?;
    if cfg.noise_levels.is_empty() {
        return Err(HarnessError::BadConfig("noise_levels must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let l = cfg.l_eff(n);
        for &eta in &cfg.noise_levels {
            for trial in 0..cfg.trials {
                let trial_seed = cfg.seed.wrapping_add(trial as u64);
                let profile = generate_random(n, l, trial_seed)?;
                rows.extend(run_trial(&profile, trial, trial_seed, cfg, Some(eta))?);
            }
        }
    }
    Ok(rows)
}

/// Groups rows per (n, L, mode, convention, noise) and reduces them to
/// the aggregate table.
///
/// Deterministic, so an aggregate recomputed from a parsed raw CSV is
/// identical to the one emitted alongside it. The welfare column is
/// recomputed here from each row group's recorded (n, L, seed) triples,
/// which assumes the rows came from generated profiles.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut groups: BTreeMap<(usize, usize, String, String, u64), Vec<&ExperimentRecord>> =
        BTreeMap::new();
    for r in records {
        groups
            .entry((r.n, r.l, r.mode.clone(), r.convention.clone(), r.noise.to_bits()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((n, l, mode, convention, noise_bits), rows) in groups {
        let trials = rows.len();
        let successes = rows.iter().filter(|r| r.exact == 1).count();
        let (ci_low, ci_high) = wilson_ci(successes, trials);

        let mut welfare_sum = 0.0;
        let mut welfare_count = 0usize;
        let mut seen = std::collections::BTreeSet::new();
        for r in rows.iter() {
            if seen.insert(r.seed) {
                let profile = generate_random(n, l, r.seed)?;
                let outcome = run_ttc(&profile)?;
                welfare_sum += welfare(&profile, outcome.allocation());
                welfare_count += 1;
            }
        }

        let mean_time_spectral_ms = mean_finite(rows.iter().map(|r| r.time_spectral_ms));
        let mean_time_ttc_ms = mean_finite(rows.iter().map(|r| r.time_ttc_ms));
        let speedup = if mean_time_spectral_ms.is_finite() && mean_time_ttc_ms.is_finite() {
            mean_time_ttc_ms / mean_time_spectral_ms
        } else {
            f64::NAN
        };
        out.push(AggregateRow {
            n,
            l,
            mode,
            convention,
            noise: f64::from_bits(noise_bits),
            trials,
            match_rate: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            mean_precision: mean_finite(rows.iter().map(|r| r.precision)),
            mean_recall: mean_finite(rows.iter().map(|r| r.recall)),
            mean_rank_corr: mean_finite(rows.iter().map(|r| r.rank_corr)),
            mean_welfare: welfare_sum / welfare_count.max(1) as f64,
            mean_time_spectral_ms,
            mean_time_ttc_ms,
            speedup,
        });
    }
    Ok(out)
}

const TIMING_PATHS: [&str; 4] = ["ttc", "power", "randomized", "full_svd"];

fn run_timing_path(
    path: &str,
    profile: &PreferenceProfile,
    k: usize,
    trial_seed: u64,
) -> Result<(), HarnessError> {
    match path {
        "ttc" => {
            let outcome = run_ttc(profile)?;
            let core = ground_truth_core(&outcome);
            std::hint::black_box(core.k());
        }
        "power" | "randomized" => {
            let m = chain_from_profile(profile)?;
            let solver = if path == "power" {
                SolverArg::Power
            } else {
                SolverArg::Randomized
            };
            // An ill-separated spectrum or failed sample would make the
            // timing meaningless, so solve failures are fatal here. A
            // degenerate score spread is not: the solve completed and
            // was measured; only the final ranking is undefined (tiny
            // markets hit this routinely).
            let solved = solve(&m, ScoreMode::RightSingular, solver, trial_seed)
                .map_err(|e| HarnessError::BadConfig(format!("timing solve failed: {e}")))?;
            match identify_core_topk(&solved, Convention::ExampleConsistent, k) {
                Ok(est) => {
                    std::hint::black_box(est.members.len());
                }
                Err(CoreIdError::DegenerateScores { .. }) => {}
                Err(e) => {
                    return Err(HarnessError::BadConfig(format!("timing identify failed: {e}")))
                }
            }
        }
        "full_svd" => {
            let m = chain_from_profile(profile)?;
            let solved = full_svd_top_right(&m)?;
            match score_values(&solved.values, Convention::ExampleConsistent) {
                Ok(scores) => {
                    let mut order: Vec<u32> = (1..=profile.n() as u32).collect();
                    order.sort_by(|&a, &b| {
                        scores[(b - 1) as usize]
                            .total_cmp(&scores[(a - 1) as usize])
                            .then(a.cmp(&b))
                    });
                    order.truncate(k);
                    std::hint::black_box(order.len());
                }
                Err(CoreIdError::DegenerateScores { .. }) => {}
                Err(e) => {
                    return Err(HarnessError::BadConfig(format!("timing scoring failed: {e}")))
                }
            }
        }
        other => unreachable!("unknown timing path {other}"),
    }
    Ok(())
}

/// Times each solve path per market size: medians of per-trial
/// wall-clock, one warmup excluded, run strictly serially. The dense
/// baseline is included only when configured and within its size cap.
pub fn run_timing(cfg: &ExperimentConfig) -> Result<Vec<TimingRecord>, HarnessError> {
    cfg.validate()?;
    let timer_res_ns = timer_resolution_ns();
    let mut out = Vec::new();
    for &n in &cfg.n_values {
        let l = cfg.l_eff(n);
        let mut profiles = Vec::with_capacity(cfg.trials);
        for trial in 0..cfg.trials {
            let trial_seed = cfg.seed.wrapping_add(trial as u64);
            let profile = generate_random(n, l, trial_seed)?;
            let outcome = run_ttc(&profile)?;
            let k = match cfg.k_policy() {
                KPolicy::GroundTruth => ground_truth_core(&outcome).k(),
                KPolicy::Fixed(k) => k,
            };
            profiles.push((profile, k, trial_seed));
        }
        for &path in &TIMING_PATHS {
            if path == "full_svd" && (!cfg.include_baseline || n > BASELINE_MAX_N) {
                continue;
            }
            let (p0, k0, s0) = &profiles[0];
            run_timing_path(path, p0, *k0, *s0)?;
            let mut samples = Vec::with_capacity(cfg.trials);
            for (profile, k, trial_seed) in &profiles {
                let t0 = Instant::now();
                run_timing_path(path, profile, *k, *trial_seed)?;
                samples.push(t0.elapsed().as_secs_f64() * 1e3);
            }
            let (mode, convention) = match path {
                "ttc" => ("-", "-"),
                _ => (ScoreMode::RightSingular.as_str(), Convention::ExampleConsistent.as_str()),
            };
            out.push(TimingRecord {
                n,
                l,
                path: path.to_string(),
                seed: cfg.seed,
                mode: mode.to_string(),
                convention: convention.to_string(),
                trials: cfg.trials,
                median_ms: median(&samples),
                timer_res_ns,
                threads: THREADS,
            });
        }
    }
    Ok(out)
}

/// Human-readable per-n timing summary. Ratios appear only when both
/// paths of a pair are present.
pub fn speedup_lines(records: &[TimingRecord]) -> Vec<String> {
    let mut by_n: BTreeMap<(usize, usize), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        by_n.entry((r.n, r.l)).or_default().insert(r.path.as_str(), r.median_ms);
    }
    let mut lines = Vec::with_capacity(by_n.len());
    for ((n, l), paths) in by_n {
        let mut parts = Vec::new();
        for &p in &TIMING_PATHS {
            if let Some(ms) = paths.get(p) {
                parts.push(format!("{p}={ms:.3}ms"));
            }
        }
        if let (Some(t), Some(r)) = (paths.get("ttc"), paths.get("randomized")) {
            parts.push(format!("ttc/randomized={:.2}x", t / r));
        }
        if let (Some(f), Some(r)) = (paths.get("full_svd"), paths.get("randomized")) {
            parts.push(format!("full_svd/randomized={:.2}x", f / r));
        }
        lines.push(format!("n={n} L={l}: {}", parts.join(" ")));
    }
    lines
}

/// Serializes rows as CSV with the header derived from the record type.
pub fn records_to_csv<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().expect("in-memory csv writer cannot fail to flush");
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Parses rows from CSV produced by [`records_to_csv`].
pub fn records_from_csv<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
