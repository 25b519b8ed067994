//! Catalan numbers and the path-count coefficients `a(i, m)`.
//!
//! `a(i, m)` counts the walks that start at deficit `m`, take `m + 1 + i`
//! attacker steps (deficit −1) and `i` honest steps (deficit +1), and touch
//! deficit −1 for the first time on their final step. The success
//! probability of a double-spending race is a polynomial in the attacker's
//! hash rate whose coefficients are exactly these counts.
//!
//! Three independent evaluations are provided:
//!
//! * [`CoefficientTable`] / [`coeff_recursive`]: the row recursion
//!   `a(i, m) = a(i, m − 1) + a(i − 1, m + 1)`. This is the production path.
//! * [`coeff_closed_form`]: the nested-sum expression, evaluated literally.
//!   Its cost is exponential in `i`, so it only serves as a cross-check.
//! * [`coeff_bruteforce`]: exhaustive enumeration of step orderings.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// One move of the two-dimensional race walk.
///
/// `Attacker` moves the state by (−1, 0), `Honest` by (+1, +1) in
/// (deficit, authentic length) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Attacker,
    Honest,
}

impl Step {
    /// Change in the counterfeit branch's deficit.
    pub fn deficit_delta(self) -> i64 {
        match self {
            Step::Attacker => -1,
            Step::Honest => 1,
        }
    }

    /// Change in the authentic branch's length.
    pub fn length_delta(self) -> usize {
        match self {
            Step::Attacker => 0,
            Step::Honest => 1,
        }
    }
}

/// An ordered sequence of walk steps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkPath {
    pub steps: Vec<Step>,
}

impl WalkPath {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn honest_steps(&self) -> usize {
        self.steps.iter().filter(|s| **s == Step::Honest).count()
    }

    pub fn attacker_steps(&self) -> usize {
        self.steps.len() - self.honest_steps()
    }

    /// True if, starting from `deficit`, the running deficit reaches −1 on
    /// the last step and never before. Such paths are the ones counted by
    /// `a(i, m)`.
    pub fn is_first_passage_from(&self, deficit: i64) -> bool {
        let mut d = deficit;
        let last = self.steps.len().wrapping_sub(1);
        for (t, step) in self.steps.iter().enumerate() {
            d += step.deficit_delta();
            if d == -1 {
                return t == last;
            }
        }
        false
    }
}

/// The `i`-th Catalan number, `(2i)! / ((i + 1)! i!)`.
pub fn catalan(i: usize) -> BigUint {
    // binom(2i, i) / (i + 1) via the multiplicative form; every partial
    // product binom(i + k, k) is an integer so the division is exact.
    let mut binom = BigUint::one();
    for k in 1..=i {
        binom *= BigUint::from(i + k);
        binom /= BigUint::from(k);
    }
    binom / BigUint::from(i + 1)
}

/// Catalan numbers `C_0 ..= C_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalanTable {
    values: Vec<BigUint>,
}

impl CatalanTable {
    pub fn new(max_index: usize) -> Self {
        Self {
            values: (0..=max_index).map(catalan).collect(),
        }
    }

    pub fn get(&self, i: usize) -> Option<&BigUint> {
        self.values.get(i)
    }

    pub fn values(&self) -> &[BigUint] {
        &self.values
    }

    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }
}

/// Exact table of `a(i, m)`.
///
/// Row `i` is stored for `m` in `0 ..= max_m + (max_i − i)`, which is
/// exactly what the recursion for rows below `max_i` needs. The table is
/// immutable once built; [`CoefficientTable::grow`] returns a larger copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientTable {
    max_i: usize,
    max_m: usize,
    rows: Vec<Vec<BigUint>>,
}

impl CoefficientTable {
    /// Builds every `a(i, m)` with `i <= max_i` and `m <= max_m`.
    pub fn build(max_i: usize, max_m: usize) -> Self {
        let width = |i: usize| max_m + (max_i - i) + 1;
        let catalans = CatalanTable::new(max_i + 1);
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_i + 1);
        rows.push(vec![BigUint::one(); width(0)]);
        for i in 1..=max_i {
            let w = width(i);
            let mut row = Vec::with_capacity(w);
            row.push(catalans.values[i].clone());
            if w > 1 {
                row.push(catalans.values[i + 1].clone());
            }
            for m in 2..w {
                let next = &row[m - 1] + &rows[i - 1][m + 1];
                row.push(next);
            }
            rows.push(row);
        }
        Self { max_i, max_m, rows }
    }

    /// Returns a table covering at least `max_i` x `max_m`, reusing `self`
    /// when it is already large enough.
    pub fn grow(&self, max_i: usize, max_m: usize) -> Self {
        if max_i <= self.max_i && max_m <= self.max_m {
            return self.clone();
        }
        Self::build(max_i.max(self.max_i), max_m.max(self.max_m))
    }

    pub fn covers(&self, i: usize, m: usize) -> bool {
        i <= self.max_i && m < self.rows[i].len()
    }

    pub fn get(&self, i: usize, m: usize) -> Option<&BigUint> {
        self.rows.get(i).and_then(|row| row.get(m))
    }

    pub fn max_i(&self) -> usize {
        self.max_i
    }

    pub fn max_m(&self) -> usize {
        self.max_m
    }

    /// Row `i` as stored (may extend past `max_m`).
    pub fn row(&self, i: usize) -> &[BigUint] {
        &self.rows[i]
    }
}

/// `a(i, m)` through the row recursion.
pub fn coeff_recursive(i: usize, m: usize) -> BigUint {
    CoefficientTable::build(i, m)
        .get(i, m)
        .cloned()
        .expect("table covers its own bounds")
}

/// `a(i, m)` from the branch-wise closed form.
///
/// For `i > 1` and `m > 1` the value is
///
/// ```text
/// C(i+1) + Σ_{j1=3}^{m+1} C(i) + Σ_{j1=3}^{m+1} Σ_{j2=3}^{j1+1} C(i−1) + …
///        + Σ_{j1} … Σ_{j(i−2)} C(3)
///        + Σ_{j1} … Σ_{j(i−1)=3}^{j(i−2)+1} (1 + j(i−1))
/// ```
///
/// and every nested sum is enumerated term by term.
pub fn coeff_closed_form(i: usize, m: usize) -> BigUint {
    match (i, m) {
        (0, _) => BigUint::one(),
        (1, _) => BigUint::from(1 + m),
        (_, 0) => catalan(i),
        (_, 1) => catalan(i + 1),
        _ => {
            let top = (m + 1) as u64;
            let mut total = catalan(i + 1);
            for depth in 1..=i - 2 {
                let c = catalan(i + 1 - depth);
                total += nested_sum(depth, top, &|_| c.clone());
            }
            total += nested_sum(i - 1, top, &|j| BigUint::from(1 + j));
            total
        }
    }
}

/// `Σ_{j1=3}^{upper} Σ_{j2=3}^{j1+1} … Σ_{jd=3}^{j(d−1)+1} leaf(jd)`.
fn nested_sum(depth: usize, upper: u64, leaf: &dyn Fn(u64) -> BigUint) -> BigUint {
    let mut acc = BigUint::zero();
    for j in 3..=upper {
        if depth == 1 {
            acc += leaf(j);
        } else {
            acc += nested_sum(depth - 1, j + 1, leaf);
        }
    }
    acc
}

/// Longest walk [`coeff_bruteforce`] agrees to enumerate.
pub const BRUTEFORCE_MAX_STEPS: usize = 26;

/// `a(i, m)` by enumerating every ordering of `i` honest and `m + 1 + i`
/// attacker steps and counting first-passage paths.
pub fn coeff_bruteforce(i: usize, m: usize) -> Result<BigUint> {
    let len = m + 2 * i + 1;
    if len > BRUTEFORCE_MAX_STEPS {
        return Err(Error::EnumerationBudget {
            steps: len,
            limit: BRUTEFORCE_MAX_STEPS,
        });
    }
    let mut count: u64 = 0;
    for mask in 0u32..(1u32 << len) {
        if mask.count_ones() as usize != i {
            continue;
        }
        let path = WalkPath::new(
            (0..len)
                .map(|t| {
                    if mask >> t & 1 == 1 {
                        Step::Honest
                    } else {
                        Step::Attacker
                    }
                })
                .collect(),
        );
        if path.is_first_passage_from(m as i64) {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

/// Partial sum `Σ_{i<terms} C_i x^i` of the Catalan generating function.
///
/// Converges to `(1 − √(1 − 4x)) / (2x)` on `(0, 1/4]`.
pub fn catalan_generating_partial(x: f64, terms: usize) -> Result<f64> {
    if !(x > 0.0 && x <= 0.25) {
        return Err(Error::domain("x", format!("{x} is outside (0, 0.25]")));
    }
    if terms == 0 {
        return Err(Error::domain("terms", "need at least one term"));
    }
    // C_{i+1} x^{i+1} = C_i x^i * x * 2(2i + 1) / (i + 2), which avoids
    // overflowing C_i for large i.
    let mut term = 1.0;
    let mut sum = 0.0;
    for i in 0..terms {
        sum += term;
        let i = i as f64;
        term *= x * 2.0 * (2.0 * i + 1.0) / (i + 2.0);
    }
    Ok(sum)
}
