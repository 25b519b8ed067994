//! Seeded Monte Carlo estimation of the race walk's hitting probability.
//!
//! Trial `k` of a run with master seed `s` draws from ChaCha8 seeded with
//! `s` on stream `k`, so every trial is reproducible on its own and the
//! aggregate does not depend on how trials are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::Step;
use crate::error::{Error, Result};
use crate::probability::{check_hash_rate, AttackScenario, DeficitState};

/// Random stream for trial `trial` under master seed `seed`.
pub fn trial_stream(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws who mines the next block. Shared by the walk and the block-level
/// race so both consume their streams identically.
pub fn draw_step<R: Rng + ?Sized>(rng: &mut R, hash_rate: f64) -> Step {
    if rng.random_bool(hash_rate) {
        Step::Attacker
    } else {
        Step::Honest
    }
}

/// Upper bound on the number of steps a race starting at `(m0, n0)` can take.
pub fn max_walk_len(initial_deficit: i64, n0: usize, final_length: usize) -> usize {
    initial_deficit as usize + 2 * (final_length - n0) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub steps_taken: usize,
    pub final_state: DeficitState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub runs: u64,
    pub seed: u64,
    pub successes: u64,
}

impl MonteCarloEstimate {
    pub fn from_counts(successes: u64, runs: u64, seed: u64) -> Self {
        let p_hat = successes as f64 / runs as f64;
        Self {
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / runs as f64).sqrt(),
            runs,
            seed,
            successes,
        }
    }

    /// `(p_hat − p_exact) / stderr`. When every trial agreed (plug-in
    /// stderr of zero) the binomial spread at `p_exact` is used instead.
    pub fn standardized_error(&self, p_exact: f64) -> f64 {
        let diff = self.p_hat - p_exact;
        if diff == 0.0 {
            return 0.0;
        }
        let spread = if self.stderr > 0.0 {
            self.stderr
        } else {
            (p_exact * (1.0 - p_exact) / self.runs as f64).sqrt()
        };
        if spread > 0.0 {
            diff / spread
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

fn check_start(m0: i64, n0: usize, final_length: usize, hash_rate: f64) -> Result<()> {
    check_hash_rate(hash_rate)?;
    if m0 < 0 {
        return Err(Error::domain("m0", format!("{m0} is negative")));
    }
    if n0 == 0 || n0 >= final_length {
        return Err(Error::domain(
            "n0",
            format!("need 0 < n0 < L, got n0 = {n0}, L = {final_length}"),
        ));
    }
    Ok(())
}

/// Runs one walk to absorption, reporting every visited state (including
/// the start) to `visit`.
pub fn simulate_walk_observed<R: Rng + ?Sized>(
    m0: i64,
    n0: usize,
    final_length: usize,
    hash_rate: f64,
    rng: &mut R,
    mut visit: impl FnMut(DeficitState),
) -> Result<TrialOutcome> {
    check_start(m0, n0, final_length, hash_rate)?;
    let cap = max_walk_len(m0, n0, final_length);
    let mut state = DeficitState {
        deficit: m0,
        authentic_length: n0,
    };
    visit(state);
    let mut steps = 0;
    while !state.is_absorbing(final_length) {
        let step = draw_step(rng, hash_rate);
        state.deficit += step.deficit_delta();
        state.authentic_length += step.length_delta();
        steps += 1;
        assert!(steps <= cap, "walk exceeded its maximum length {cap}");
        visit(state);
    }
    Ok(TrialOutcome {
        success: state.is_success(final_length),
        steps_taken: steps,
        final_state: state,
    })
}

/// Runs one walk from `(m0, n0)` until it hits `m = −1` or `n = L`.
pub fn simulate_walk<R: Rng + ?Sized>(
    m0: i64,
    n0: usize,
    final_length: usize,
    hash_rate: f64,
    rng: &mut R,
) -> Result<TrialOutcome> {
    simulate_walk_observed(m0, n0, final_length, hash_rate, rng, |_| {})
}

/// Outcome of trial `trial` for `scenario`.
pub fn run_trial(scenario: &AttackScenario, seed: u64, trial: u64) -> Result<TrialOutcome> {
    let mut rng = trial_stream(seed, trial);
    simulate_walk(
        scenario.initial_deficit(),
        scenario.authentic_length,
        scenario.final_length,
        scenario.hash_rate,
        &mut rng,
    )
}

/// Per-trial outcomes `0..runs`, in trial order.
pub fn trial_outcomes(
    scenario: &AttackScenario,
    runs: u64,
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    scenario.validate()?;
    (0..runs)
        .into_par_iter()
        .map(|k| run_trial(scenario, seed, k))
        .collect()
}

/// Estimates the success probability of `scenario` from `runs` trials.
pub fn estimate(scenario: &AttackScenario, runs: u64, seed: u64) -> Result<MonteCarloEstimate> {
    scenario.validate()?;
    if runs == 0 {
        return Err(Error::domain("runs", "need at least one run"));
    }
    let successes = (0..runs)
        .into_par_iter()
        .map(|k| run_trial(scenario, seed, k).map(|o| o.success as u64))
        .sum::<Result<u64>>()?;
    Ok(MonteCarloEstimate::from_counts(successes, runs, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_attacker_wins_in_m0_plus_one_steps() {
        let mut rng = trial_stream(1, 0);
        let out = simulate_walk(2, 5, 10, 1.0, &mut rng).unwrap();
        assert!(out.success);
        assert_eq!(out.steps_taken, 3);
        assert_eq!(
            out.final_state,
            DeficitState {
                deficit: -1,
                authentic_length: 5
            }
        );
    }

    #[test]
    fn powerless_attacker_loses_when_chain_completes() {
        let mut rng = trial_stream(1, 0);
        let out = simulate_walk(1, 5, 10, 0.0, &mut rng).unwrap();
        assert!(!out.success);
        assert_eq!(out.steps_taken, 5);
        assert_eq!(out.final_state.authentic_length, 10);
        assert_eq!(out.final_state.deficit, 6);
    }

    #[test]
    fn frequency_near_exact_value() {
        // exact P_100(0, 98) at I = 0.4 is 0.496
        let hits = (0..20_000u64)
            .filter(|k| {
                let mut rng = trial_stream(7, *k);
                simulate_walk(0, 98, 100, 0.4, &mut rng).unwrap().success
            })
            .count();
        let p = hits as f64 / 20_000.0;
        let se = (0.496f64 * 0.504 / 20_000.0).sqrt();
        assert!((p - 0.496).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn degenerate_estimates_are_exact() {
        let s = AttackScenario::new(0.0, 30, 10, 4).unwrap();
        let e = estimate(&s, 10_000, 3).unwrap();
        assert_eq!((e.p_hat, e.successes, e.stderr), (0.0, 0, 0.0));
        let s = AttackScenario::new(1.0, 30, 10, 4).unwrap();
        let e = estimate(&s, 10_000, 3).unwrap();
        assert_eq!((e.p_hat, e.successes), (1.0, 10_000));
    }

    #[test]
    fn estimate_is_independent_of_thread_count() {
        let s = AttackScenario::new(0.35, 50, 20, 15).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate(&s, 4_000, 99).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = trial_stream(0, 0);
        assert!(simulate_walk(-1, 5, 10, 0.5, &mut rng).is_err());
        assert!(simulate_walk(1, 10, 10, 0.5, &mut rng).is_err());
        assert!(simulate_walk(1, 5, 10, 1.2, &mut rng).is_err());
        let s = AttackScenario::new(0.3, 10, 5, 2).unwrap();
        assert!(estimate(&s, 0, 1).is_err());
    }

    #[test]
    fn standardized_error_handles_zero_spread() {
        let e = MonteCarloEstimate::from_counts(0, 10_000, 0);
        assert_eq!(e.standardized_error(0.0), 0.0);
        assert!(e.standardized_error(1e-9).abs() < 1e-2);
        assert!(e.standardized_error(0.01) < -9.0);
    }
}
