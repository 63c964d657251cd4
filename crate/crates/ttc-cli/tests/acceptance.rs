// SPDX-License-Identifier: Apache-2.0

//! Acceptance gate: one test per release criterion, each printing a
//! single `ACCEPTANCE <name>: PASS/FAIL` line with its headline numbers
//! and runtime. Criteria share a lock so wall-clock budgets are measured
//! without interference; run with `--nocapture` to see the lines as they
//! complete.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttc_cli::experiment::{
    aggregate, median, records_to_csv, run_accuracy, run_noise_sweep, run_timing, speedup_lines,
    ExperimentConfig, ExperimentRecord,
};
use ttc_core::spectral::{DEFAULT_OVERSAMPLE, DEFAULT_POWER_STEPS};
use ttc_core::{
    build_scores, check_individual_rationality, check_pareto_bruteforce, generate_random,
    ground_truth_core, identify_core_topk, normalize_rows, perturb_scores, randomized_rank1,
    right_singular_power, run_ttc, score_values, smooth_truncated, stationary_power, Convention,
    PreferenceProfile, ScoreMatrix, SolverOptions, StochasticMatrix,
};

static LOCK: Mutex<()> = Mutex::new(());

/// Runs one criterion under the shared lock, prints its verdict line,
/// and fails the test on any violated check or blown budget.
fn criterion<F>(name: &str, budget_s: f64, body: F)
where
    F: FnOnce() -> Result<String, String>,
{
    let _guard = LOCK.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let secs = start.elapsed().as_secs_f64();
    let verdict = match outcome {
        Ok(Ok(detail)) if secs <= budget_s => Ok(detail),
        Ok(Ok(detail)) => Err(format!("{detail}; over budget")),
        Ok(Err(why)) => Err(why),
        Err(payload) => Err(payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panicked".into())),
    };
    match verdict {
        Ok(detail) => println!("ACCEPTANCE {name}: PASS ({detail}; {secs:.1}s/{budget_s:.0}s)"),
        Err(why) => {
            println!("ACCEPTANCE {name}: FAIL ({why}; {secs:.1}s/{budget_s:.0}s)");
            panic!("acceptance criterion {name} failed: {why}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($why:tt)+) => {
        if !$cond {
            return Err(format!($($why)+));
        }
    };
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn close(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

#[test]
fn criterion_golden_walkthrough() {
    criterion("golden-walkthrough", 1.0, || {
        let p = PreferenceProfile::new(3, 0, vec![vec![2, 1, 3], vec![1, 2, 3], vec![1, 3, 2]])
            .map_err(s)?;
        let m = normalize_rows(&build_scores(&p).map_err(s)?).map_err(s)?;

        let third = 1.0 / 3.0;
        let sixth = 1.0 / 6.0;
        let want_m = [
            third, 0.5, sixth, 0.5, third, sixth, 0.5, sixth, third,
        ];
        ensure!(close(&m.to_dense(), &want_m, 1e-12), "matrix differs from hand normalization");

        let opts = SolverOptions::default();
        let st = stationary_power(&m, &opts).map_err(s)?;
        let want_pi = [3.0 / 7.0, 13.0 / 35.0, 0.2];
        ensure!(close(&st.values, &want_pi, 1e-10), "stationary {:?} != {want_pi:?}", st.values);

        let sv = right_singular_power(&m, &opts).map_err(s)?;
        let want_v = [0.7439474406184104, 0.5567509834999917, 0.3695545263815729];
        ensure!(close(&sv.values, &want_v, 1e-9), "singular vector {:?} != {want_v:?}", sv.values);

        let scores = score_values(&sv.values, Convention::ExampleConsistent).map_err(s)?;
        ensure!(close(&scores, &[0.0, 0.5, 1.0], 1e-6), "scores {scores:?} != [0, 0.5, 1]");

        let outcome = run_ttc(&p).map_err(s)?;
        ensure!(
            outcome.allocation().as_slice() == [2, 1, 3],
            "allocation {:?} != [2, 1, 3]",
            outcome.allocation().as_slice()
        );
        let truth = ground_truth_core(&outcome);
        ensure!(truth.members() == [3], "exact core {:?} != [3]", truth.members());

        let est = identify_core_topk(&sv, Convention::ExampleConsistent, truth.k()).map_err(s)?;
        ensure!(est.members == [3], "estimate {:?} != [3]", est.members);

        Ok("matrix, stationary, singular vector, scores, estimate, and exact outcome all match"
            .into())
    });
}

#[test]
fn criterion_exact_procedure_validity() {
    criterion("exact-procedure-validity", 120.0, || {
        let mut markets = 0usize;
        let mut pareto_checked = 0usize;
        for n in 2..=8usize {
            for t in 0..1000u64 {
                let seed = 1_000_000 * n as u64 + t;
                let p = generate_random(n, n, seed).map_err(s)?;
                let o = run_ttc(&p).map_err(s)?;

                let mut alloc = o.allocation().as_slice().to_vec();
                alloc.sort_unstable();
                ensure!(
                    alloc.iter().enumerate().all(|(i, &x)| x == i as u32 + 1),
                    "n={n} seed={seed}: allocation is not a bijection"
                );
                ensure!(
                    check_individual_rationality(&p, o.allocation()).map_err(s)?,
                    "n={n} seed={seed}: individual rationality violated"
                );
                if n <= 6 {
                    ensure!(
                        check_pareto_bruteforce(&p, o.allocation()).map_err(s)?,
                        "n={n} seed={seed}: Pareto efficiency violated"
                    );
                    pareto_checked += 1;
                }
                markets += 1;
            }
        }
        Ok(format!(
            "{markets} markets bijective and rational, {pareto_checked} Pareto-verified"
        ))
    });
}

#[test]
fn criterion_solver_agreement() {
    criterion("solver-agreement", 120.0, || {
        let opts = SolverOptions::default();
        let mut worst_cos: f64 = 1.0;
        let mut worst_resid: f64 = 0.0;
        let mut worst_lazy: f64 = 0.0;
        for &n in &[10usize, 50, 200, 500] {
            for i in 0..100u64 {
                let mseed = 3_000_000 + (n as u64) * 1_000 + i;
                let mut rng = ChaCha8Rng::seed_from_u64(mseed);
                let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.01..1.0)).collect();
                let m =
                    normalize_rows(&ScoreMatrix::from_dense(n, data).map_err(s)?).map_err(s)?;

                let pw = right_singular_power(&m, &opts)
                    .map_err(|e| format!("power solve n={n} i={i}: {e}"))?;
                let rd = randomized_rank1(
                    &m,
                    DEFAULT_OVERSAMPLE,
                    DEFAULT_POWER_STEPS,
                    mseed ^ 0x5EED,
                    &opts,
                )
                .map_err(|e| format!("randomized solve n={n} i={i}: {e}"))?;
                let cos = dot(&pw.values, &rd.values).abs();
                worst_cos = worst_cos.min(cos);
                ensure!(cos >= 0.999, "n={n} i={i}: |cos| {cos} < 0.999");

                let st = stationary_power(&m, &opts)
                    .map_err(|e| format!("stationary solve n={n} i={i}: {e}"))?;
                let mut xm = vec![0.0; n];
                m.mul_left(&st.values, &mut xm);
                let resid: f64 = xm.iter().zip(&st.values).map(|(a, b)| (a - b).abs()).sum();
                worst_resid = worst_resid.max(resid);
                ensure!(resid <= 1e-10, "n={n} i={i}: stationary residual {resid:.3e} > 1e-10");

                let dense = m.to_dense();
                let mut lazy = vec![0.0; n * n];
                for r in 0..n {
                    for c in 0..n {
                        lazy[r * n + c] =
                            0.5 * dense[r * n + c] + if r == c { 0.5 } else { 0.0 };
                    }
                }
                let lm = StochasticMatrix::from_dense(n, lazy).map_err(s)?;
                let lst = stationary_power(&lm, &opts)
                    .map_err(|e| format!("lazy stationary n={n} i={i}: {e}"))?;
                let diff: f64 =
                    st.values.iter().zip(&lst.values).map(|(a, b)| (a - b).abs()).sum();
                worst_lazy = worst_lazy.max(diff);
                ensure!(diff <= 1e-10, "n={n} i={i}: lazy-chain gap {diff:.3e} > 1e-10");
            }
        }
        Ok(format!(
            "400 matrices: worst |cos| {worst_cos:.6}, worst residual {worst_resid:.2e}, \
             worst lazy gap {worst_lazy:.2e}"
        ))
    });
}

#[test]
fn criterion_accuracy_harness() {
    criterion("accuracy-harness", 600.0, || {
        let cfg = ExperimentConfig {
            n_values: vec![10, 50, 100, 500, 1000],
            trials: 100,
            seed: 42,
            record_times: false,
            ..ExperimentConfig::default()
        };
        let r1 = run_accuracy(&cfg).map_err(s)?;
        let r2 = run_accuracy(&cfg).map_err(s)?;
        let csv1 = records_to_csv(&r1).map_err(s)?;
        let csv2 = records_to_csv(&r2).map_err(s)?;
        ensure!(csv1 == csv2, "reruns are not byte-identical");

        let combos: BTreeSet<(&str, &str)> = r1
            .iter()
            .map(|r| (r.mode.as_str(), r.convention.as_str()))
            .collect();
        ensure!(
            combos.len() == 4,
            "expected 4 (mode, convention) pairs, saw {combos:?}"
        );

        let agg = aggregate(&r1).map_err(s)?;
        let best = agg
            .iter()
            .filter(|row| row.n == 10)
            .max_by(|a, b| a.match_rate.total_cmp(&b.match_rate))
            .ok_or("no n=10 aggregate rows")?;
        Ok(format!(
            "{} rows byte-identical across reruns; best n=10 config {}/{}: \
             match rate {:.3}, 95% CI [{:.3}, {:.3}]",
            r1.len(),
            best.mode,
            best.convention,
            best.match_rate,
            best.ci_low,
            best.ci_high
        ))
    });
}

#[test]
fn criterion_noise_stability() {
    criterion("noise-stability", 300.0, || {
        let cfg = ExperimentConfig {
            n_values: vec![100, 500],
            trials: 200,
            seed: 42,
            noise_levels: vec![0.0, 0.05, 0.1, 0.2],
            record_times: false,
            ..ExperimentConfig::default()
        };
        let noisy = run_noise_sweep(&cfg).map_err(s)?;
        let clean = run_accuracy(&cfg).map_err(s)?;
        let zero: Vec<ExperimentRecord> =
            noisy.iter().filter(|r| r.noise == 0.0).cloned().collect();
        ensure!(
            records_to_csv(&zero).map_err(s)? == records_to_csv(&clean).map_err(s)?,
            "zero-noise rows differ from the noiseless run"
        );

        let opts = SolverOptions::default();
        let mut medians = Vec::new();
        for &n in &[100usize, 500, 1000] {
            let mut angles = Vec::new();
            for t in 0..50u64 {
                let p = generate_random(n, n, 505_000 + (n as u64) * 100 + t).map_err(s)?;
                let scores = build_scores(&p).map_err(s)?;
                let m = normalize_rows(&smooth_truncated(&scores, None).map_err(s)?).map_err(s)?;
                let base = right_singular_power(&m, &opts)
                    .map_err(|e| format!("clean solve n={n} t={t}: {e}"))?;
                let pm = perturb_scores(&m, 0.05, 9_000 + t).map_err(s)?;
                let pert = right_singular_power(&pm, &opts)
                    .map_err(|e| format!("perturbed solve n={n} t={t}: {e}"))?;
                let cos = dot(&base.values, &pert.values).abs().min(1.0);
                angles.push(cos.acos());
            }
            medians.push(median(&angles));
        }
        ensure!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "median angles not decreasing in n: {medians:?}"
        );
        Ok(format!(
            "zero-noise rows byte-identical; median angles at 0.05 noise: \
             {:.3e} > {:.3e} > {:.3e} for n=100, 500, 1000",
            medians[0], medians[1], medians[2]
        ))
    });
}

#[test]
fn criterion_scaling() {
    criterion("scaling", 600.0, || {
        let ns = [500usize, 1000, 2000, 5000];
        let cfg = ExperimentConfig {
            n_values: ns.to_vec(),
            l: Some(12),
            trials: 5,
            seed: 6001,
            include_baseline: false,
            ..ExperimentConfig::default()
        };
        let recs = run_timing(&cfg).map_err(s)?;
        for line in speedup_lines(&recs) {
            println!("{line}");
        }

        let med = |path: &str, n: usize| {
            recs.iter()
                .find(|r| r.path == path && r.n == n)
                .map(|r| r.median_ms)
                .ok_or_else(|| format!("missing {path} row for n={n}"))
        };

        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &n in &ns {
            xs.push((n as f64).ln());
            ys.push(med("randomized", n)?.ln());
        }
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
        let den: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let slope = num / den;
        ensure!(slope < 1.5, "log-log slope {slope:.3} >= 1.5");

        let mut ratios = Vec::new();
        for &n in &ns {
            ratios.push(med("ttc", n)? / med("randomized", n)?);
        }
        ensure!(
            ratios.windows(2).all(|w| w[1] > w[0]),
            "exact/spectral time ratios not increasing: {ratios:?}"
        );
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
        Ok(format!(
            "randomized-path log-log slope {slope:.3} < 1.5; exact/spectral ratios rise {}",
            shown.join(" -> ")
        ))
    });
}
