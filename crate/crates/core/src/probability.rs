//! Success probability of a double-spending attack on a chain that stops
//! growing at length `L`.
//!
//! `P_L(m, n)` is the probability that a counterfeit branch trailing by `m`
//! blocks, with the authentic branch at length `n`, becomes strictly longer
//! than the authentic branch before the latter reaches `L` blocks. It
//! satisfies
//!
//! ```text
//! P(m, n) = I·P(m − 1, n) + (1 − I)·P(m + 1, n + 1)
//! P(−1, n) = 1   for 0 < n < L
//! P(m, L)  = 0   for m > 0
//! ```
//!
//! and has the closed form `Σ_{i=0}^{L−n−1} a(i, m) (1 − I)^i I^{m+1+i}`.
//!
//! Production evaluation goes through [`ProbabilityGrid`] (backward
//! induction, every intermediate is a probability). The closed form is the
//! cross-check path and is also available in exact rational arithmetic for
//! short chains.

use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::combinatorics::CoefficientTable;
use crate::error::{Error, Result};
use crate::scaled::{CompensatedSum, ScaledFloat};

/// Largest `L` accepted by [`success_probability_exact`].
pub const EXACT_MODE_MAX_LENGTH: usize = 64;

/// Clamping a result by more than this much is reported as a diagnostic.
const CLAMP_TOLERANCE: f64 = 1e-12;

/// One double-spending attack instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackScenario {
    /// Probability that the next block is mined by the attacker.
    #[serde(rename = "I")]
    pub hash_rate: f64,
    /// Length at which the chain stops growing.
    #[serde(rename = "L")]
    pub final_length: usize,
    /// Authentic branch length when the attack is launched.
    #[serde(rename = "L0")]
    pub authentic_length: usize,
    /// Index of the block being falsified.
    #[serde(rename = "La")]
    pub target_block: usize,
}

impl AttackScenario {
    pub fn new(
        hash_rate: f64,
        final_length: usize,
        authentic_length: usize,
        target_block: usize,
    ) -> Result<Self> {
        let scenario = Self {
            hash_rate,
            final_length,
            authentic_length,
            target_block,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        check_hash_rate(self.hash_rate)?;
        if self.authentic_length == 0 || self.authentic_length >= self.final_length {
            return Err(Error::domain(
                "L0",
                format!(
                    "need 0 < L0 < L, got L0 = {}, L = {}",
                    self.authentic_length, self.final_length
                ),
            ));
        }
        if self.target_block == 0 || self.target_block > self.authentic_length {
            return Err(Error::domain(
                "La",
                format!(
                    "need 1 <= La <= L0, got La = {}, L0 = {}",
                    self.target_block, self.authentic_length
                ),
            ));
        }
        Ok(())
    }

    /// Initial deficit `L0 − La + 1`: the counterfeit branch still has to
    /// mine block `La` itself.
    pub fn initial_deficit(&self) -> i64 {
        (self.authentic_length - self.target_block + 1) as i64
    }

    pub fn initial_state(&self) -> DeficitState {
        DeficitState {
            deficit: self.initial_deficit(),
            authentic_length: self.authentic_length,
        }
    }
}

/// Position of the race walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DeficitState {
    /// Blocks by which the counterfeit branch trails; −1 means it leads.
    #[serde(rename = "m")]
    pub deficit: i64,
    #[serde(rename = "n")]
    pub authentic_length: usize,
}

impl DeficitState {
    pub fn is_success(&self, final_length: usize) -> bool {
        self.deficit == -1 && self.authentic_length < final_length
    }

    pub fn is_failure(&self, final_length: usize) -> bool {
        self.authentic_length == final_length && self.deficit > 0
    }

    pub fn is_absorbing(&self, final_length: usize) -> bool {
        self.is_success(final_length) || self.is_failure(final_length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    ClosedForm,
    #[default]
    Dp,
}

pub(crate) fn check_hash_rate(hash_rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&hash_rate) {
        Ok(())
    } else {
        Err(Error::domain("I", format!("{hash_rate} is outside [0, 1]")))
    }
}

/// Boundary handling shared by every evaluation route. `Ok(Some(p))` means
/// the state is absorbing or trivially decided.
fn check_state(deficit: i64, n: usize, final_length: usize, hash_rate: f64) -> Result<Option<f64>> {
    check_hash_rate(hash_rate)?;
    if deficit < -1 {
        return Err(Error::domain("m", format!("{deficit} is below -1")));
    }
    if n == 0 || n > final_length {
        return Err(Error::domain(
            "n",
            format!("need 0 < n <= L, got n = {n}, L = {final_length}"),
        ));
    }
    if n == final_length {
        return if deficit > 0 {
            Ok(Some(0.0))
        } else {
            Err(Error::domain(
                "m",
                format!(
                    "state (m = {deficit}, n = L) is never reached; the race ends at m = -1 first"
                ),
            ))
        };
    }
    if deficit == -1 || hash_rate == 1.0 {
        return Ok(Some(1.0));
    }
    Ok(None)
}

fn clamp_probability(p: f64, what: &str) -> f64 {
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&p) {
        log::warn!("{what}: value {p:e} clamped into [0, 1]");
    }
    p.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// closed form

/// Exact coefficients together with their extended-range float images.
struct CoefficientSnapshot {
    exact: CoefficientTable,
    scaled: Vec<Vec<ScaledFloat>>,
}

impl CoefficientSnapshot {
    fn new(exact: CoefficientTable) -> Self {
        let scaled = (0..=exact.max_i())
            .map(|i| exact.row(i).iter().map(ScaledFloat::from_biguint).collect())
            .collect();
        Self { exact, scaled }
    }
}

fn coefficient_cache() -> &'static RwLock<Arc<CoefficientSnapshot>> {
    static CACHE: OnceLock<RwLock<Arc<CoefficientSnapshot>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        RwLock::new(Arc::new(CoefficientSnapshot::new(CoefficientTable::build(
            32, 32,
        ))))
    })
}

/// Snapshot covering `a(i, m)` for `i <= max_i`, `m <= max_m`. Snapshots are
/// never mutated; growing publishes a new one.
fn coefficients(max_i: usize, max_m: usize) -> Arc<CoefficientSnapshot> {
    let cache = coefficient_cache();
    {
        let current = cache.read().expect("coefficient cache poisoned");
        if current.exact.covers(max_i, max_m) {
            return Arc::clone(&current);
        }
    }
    let mut slot = cache.write().expect("coefficient cache poisoned");
    if !slot.exact.covers(max_i, max_m) {
        let grown = slot.exact.grow(max_i, max_m);
        *slot = Arc::new(CoefficientSnapshot::new(grown));
    }
    Arc::clone(&slot)
}

/// Evaluates the closed-form sum for one `(L, I)` pair.
///
/// Each term is an exact integer coefficient times a power product, both
/// carried with an extended exponent so nothing overflows or underflows
/// before the product is formed; terms are accumulated with compensated
/// summation in increasing `i`.
pub struct ClosedFormEvaluator {
    final_length: usize,
    hash_rate: f64,
    max_deficit: usize,
    coeffs: Arc<CoefficientSnapshot>,
    /// `(I(1 − I))^i` for `i < L`.
    pair_powers: Vec<ScaledFloat>,
}

impl ClosedFormEvaluator {
    /// Prepares an evaluator for deficits up to `max_deficit`.
    pub fn new(final_length: usize, hash_rate: f64, max_deficit: usize) -> Result<Self> {
        check_hash_rate(hash_rate)?;
        if final_length == 0 {
            return Err(Error::domain("L", "must be positive"));
        }
        let max_i = final_length.saturating_sub(2);
        let coeffs = coefficients(max_i, max_deficit);
        let pair = ScaledFloat::from_f64(hash_rate).mul(ScaledFloat::from_f64(1.0 - hash_rate));
        let pair_powers = (0..final_length as u64).map(|i| pair.powi(i)).collect();
        Ok(Self {
            final_length,
            hash_rate,
            max_deficit,
            coeffs,
            pair_powers,
        })
    }

    pub fn probability(&self, deficit: i64, n: usize) -> Result<f64> {
        if let Some(p) = check_state(deficit, n, self.final_length, self.hash_rate)? {
            return Ok(p);
        }
        let m = deficit as usize;
        if m > self.max_deficit {
            return Err(Error::domain(
                "m",
                format!(
                    "{m} exceeds the evaluator's prepared range {}",
                    self.max_deficit
                ),
            ));
        }
        let lead = ScaledFloat::from_f64(self.hash_rate).powi(m as u64 + 1);
        let mut sum = CompensatedSum::default();
        for i in 0..self.final_length - n {
            let term = self.coeffs.scaled[i][m].mul(lead).mul(self.pair_powers[i]);
            sum.add(term.to_f64());
        }
        Ok(clamp_probability(sum.value(), "closed form"))
    }

    /// The term `a(L − n, m) (1 − I)^{L−n} I^{m+1+L−n}` by which
    /// `P_{L+1}(m, n)` exceeds `P_L(m, n)`.
    pub fn next_length_increment(&self, deficit: i64, n: usize) -> Result<f64> {
        self.increment_term(deficit, n).map(ScaledFloat::to_f64)
    }

    /// Base-2 logarithm of [`Self::next_length_increment`], finite whenever
    /// the increment is positive even if it underflows an `f64`.
    pub fn next_length_increment_log2(&self, deficit: i64, n: usize) -> Result<f64> {
        self.increment_term(deficit, n).map(ScaledFloat::log2)
    }

    fn increment_term(&self, deficit: i64, n: usize) -> Result<ScaledFloat> {
        if deficit < 0 || n == 0 || n >= self.final_length {
            return Err(Error::domain("(m, n)", "need m >= 0 and 0 < n < L"));
        }
        let i = self.final_length - n;
        let m = deficit as usize;
        let coeffs = coefficients(i, m);
        let pair =
            ScaledFloat::from_f64(self.hash_rate).mul(ScaledFloat::from_f64(1.0 - self.hash_rate));
        Ok(coeffs.scaled[i][m]
            .mul(ScaledFloat::from_f64(self.hash_rate).powi(m as u64 + 1))
            .mul(pair.powi(i as u64)))
    }
}

/// `P_L(m, n)` from the closed-form sum.
pub fn success_probability_closed_form(
    deficit: i64,
    n: usize,
    final_length: usize,
    hash_rate: f64,
) -> Result<f64> {
    if let Some(p) = check_state(deficit, n, final_length, hash_rate)? {
        return Ok(p);
    }
    ClosedFormEvaluator::new(final_length, hash_rate, deficit as usize)?.probability(deficit, n)
}

/// `P_L(m, n)` in exact rational arithmetic. The hash rate is taken as the
/// exact binary value of the `f64`.
pub fn success_probability_exact(
    deficit: i64,
    n: usize,
    final_length: usize,
    hash_rate: f64,
) -> Result<BigRational> {
    if final_length > EXACT_MODE_MAX_LENGTH {
        return Err(Error::ExactModeLimit {
            final_length,
            limit: EXACT_MODE_MAX_LENGTH,
        });
    }
    if let Some(p) = check_state(deficit, n, final_length, hash_rate)? {
        return Ok(BigRational::from_integer(BigInt::from(p as i64)));
    }
    let m = deficit as usize;
    let table = CoefficientTable::build(final_length - n, m);
    let rate = BigRational::from_float(hash_rate).expect("finite hash rate");
    let rest = BigRational::one() - &rate;
    let mut weight = pow_rational(&rate, m + 1);
    let pair = &rate * &rest;
    let mut sum = BigRational::zero();
    for i in 0..final_length - n {
        let coeff = BigInt::from(table.get(i, m).unwrap().clone());
        sum += &weight * BigRational::from_integer(coeff);
        weight *= &pair;
    }
    Ok(sum)
}

fn pow_rational(x: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x)
}

// ---------------------------------------------------------------------------
// backward induction

/// Solution of the recurrence on every state reachable from `(m_top, n_min)`
/// or below: layer `n` covers `m ∈ [−1, m_top + (n − n_min)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid {
    final_length: usize,
    hash_rate: f64,
    n_min: usize,
    m_top: usize,
    /// `layers[n − n_min][m + 1]`.
    layers: Vec<Vec<f64>>,
}

impl ProbabilityGrid {
    pub fn solve(final_length: usize, hash_rate: f64, n_min: usize, m_top: usize) -> Result<Self> {
        check_hash_rate(hash_rate)?;
        if n_min == 0 || n_min > final_length {
            return Err(Error::domain(
                "n",
                format!("need 0 < n <= L, got n = {n_min}, L = {final_length}"),
            ));
        }
        let depth = final_length - n_min;
        let rest = 1.0 - hash_rate;
        let width = |n: usize| m_top + (n - n_min) + 2;

        let mut layers: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
        // P(m, L) = 0 for m > 0; (−1, L) and (0, L) are never reached.
        let mut last = vec![0.0; width(final_length)];
        last[0] = f64::NAN;
        last[1] = f64::NAN;
        layers[depth] = last;

        for n in (n_min..final_length).rev() {
            let next = &layers[n + 1 - n_min];
            let mut layer = Vec::with_capacity(width(n));
            layer.push(1.0);
            for idx in 1..width(n) {
                // idx = m + 1, so P(m − 1, n) = layer[idx − 1] and
                // P(m + 1, n + 1) = next[idx + 1].
                let ahead = next[idx + 1];
                debug_assert!(!ahead.is_nan(), "queried an unreachable state");
                layer.push(hash_rate * layer[idx - 1] + rest * ahead);
            }
            layers[n - n_min] = layer;
        }
        Ok(Self {
            final_length,
            hash_rate,
            n_min,
            m_top,
            layers,
        })
    }

    pub fn final_length(&self) -> usize {
        self.final_length
    }

    pub fn hash_rate(&self) -> f64 {
        self.hash_rate
    }

    pub fn min_length(&self) -> usize {
        self.n_min
    }

    /// Largest deficit stored at authentic length `n`.
    pub fn max_deficit(&self, n: usize) -> Option<i64> {
        (self.n_min..=self.final_length)
            .contains(&n)
            .then(|| (self.m_top + (n - self.n_min)) as i64)
    }

    pub fn get(&self, deficit: i64, n: usize) -> Option<f64> {
        if n < self.n_min || n > self.final_length || deficit < -1 {
            return None;
        }
        let v = *self.layers[n - self.n_min].get((deficit + 1) as usize)?;
        (!v.is_nan()).then_some(v)
    }

    /// Every defined cell as `(m, n, P)`.
    pub fn cells(&self) -> impl Iterator<Item = (i64, usize, f64)> + '_ {
        self.layers.iter().enumerate().flat_map(move |(k, layer)| {
            let n = self.n_min + k;
            layer
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_nan())
                .map(move |(idx, v)| (idx as i64 - 1, n, *v))
        })
    }

    /// Largest `|P(m, n) − I·P(m − 1, n) − (1 − I)·P(m + 1, n + 1)|` over
    /// interior cells.
    pub fn max_recurrence_residual(&self) -> f64 {
        let rest = 1.0 - self.hash_rate;
        let mut worst: f64 = 0.0;
        for n in self.n_min..self.final_length {
            let top = self.max_deficit(n).unwrap();
            for m in 0..=top {
                let p = self.get(m, n).unwrap();
                let back = self.get(m - 1, n).unwrap();
                let ahead = self.get(m + 1, n + 1).unwrap();
                worst = worst.max((p - self.hash_rate * back - rest * ahead).abs());
            }
        }
        worst
    }
}

/// `P_L(m, n)` by backward induction.
pub fn success_probability_dp(
    deficit: i64,
    n: usize,
    final_length: usize,
    hash_rate: f64,
) -> Result<f64> {
    if let Some(p) = check_state(deficit, n, final_length, hash_rate)? {
        return Ok(p);
    }
    let grid = ProbabilityGrid::solve(final_length, hash_rate, n, deficit as usize)?;
    let p = grid
        .get(deficit, n)
        .ok_or_else(|| Error::Invariant(format!("grid lacks ({deficit}, {n})")))?;
    Ok(clamp_probability(p, "backward induction"))
}

/// Success probability on a chain that never stops growing:
/// `(I / (1 − I))^{m+1}` below one half, otherwise 1.
pub fn asymptotic_limit(deficit: i64, hash_rate: f64) -> f64 {
    debug_assert!(deficit >= -1);
    debug_assert!((0.0..=1.0).contains(&hash_rate));
    if hash_rate >= 0.5 {
        1.0
    } else {
        (hash_rate / (1.0 - hash_rate)).powi((deficit + 1) as i32)
    }
}

/// `P_L(L0 − La + 1, L0)` for a scenario.
pub fn dsa_success_probability(scenario: &AttackScenario, method: Method) -> Result<f64> {
    scenario.validate()?;
    let m = scenario.initial_deficit();
    let n = scenario.authentic_length;
    let (l, i) = (scenario.final_length, scenario.hash_rate);
    match method {
        Method::ClosedForm => success_probability_closed_form(m, n, l, i),
        Method::Dp => success_probability_dp(m, n, l, i),
    }
}

/// How far the finite-chain probability sits below the infinite-chain one.
pub fn convergence_gap(deficit: i64, n: usize, hash_rate: f64, final_length: usize) -> Result<f64> {
    if n == 0 || n >= final_length {
        return Err(Error::domain(
            "n",
            format!("need 0 < n < L, got n = {n}, L = {final_length}"),
        ));
    }
    let exact = success_probability_dp(deficit, n, final_length, hash_rate)?;
    let gap = asymptotic_limit(deficit, hash_rate) - exact;
    if gap < -CLAMP_TOLERANCE {
        log::warn!("convergence gap {gap:e} is negative beyond tolerance");
    }
    Ok(gap.max(0.0))
}
