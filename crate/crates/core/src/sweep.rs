//! Parameter sweeps over `(I, L, L0, La)` emitted as CSV tables.
//!
//! Presets cover four standard parameter studies. Their hash-rate and
//! length families are illustrative defaults; every list can be
//! overridden.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo;
use crate::probability::{
    asymptotic_limit, check_hash_rate, success_probability_dp, AttackScenario, ProbabilityGrid,
};

pub const CSV_HEADER: &str = "La,L0,L,I,m0,p_exact,p_asymptotic,p_mc,mc_stderr,runs,seed";

pub const DEFAULT_RUNS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `L0 = 60`, `L = 100`, `La = 1..=60`, one curve per hash rate.
    Fig4,
    /// `L0 = 10`, `I = 0.4`, `La = 1..=10`, one curve per final length.
    Fig5,
    /// `L = 100`, `I = 0.4`, `La = 1..=70`, one curve per `L0`.
    Fig6,
    /// `La = 1`, `L0 = 3`, `I ∈ {0.4, 0.6}`, `L` increasing.
    Fig7,
    Custom,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            "fig6" => Ok(Preset::Fig6),
            "fig7" => Ok(Preset::Fig7),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::domain("preset", format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub preset: Preset,
    pub target_blocks: Vec<usize>,
    pub authentic_lengths: Vec<usize>,
    pub final_lengths: Vec<usize>,
    pub hash_rates: Vec<f64>,
    pub runs: u64,
    pub seed: u64,
    pub include_mc: bool,
}

impl SweepSpec {
    pub fn preset(preset: Preset) -> Self {
        let (la, l0, l, i): (Vec<usize>, Vec<usize>, Vec<usize>, Vec<f64>) = match preset {
            Preset::Fig4 => (
                (1..=60).collect(),
                vec![60],
                vec![100],
                vec![0.1, 0.2, 0.3, 0.4],
            ),
            Preset::Fig5 => (
                (1..=10).collect(),
                vec![10],
                vec![20, 30, 50, 100],
                vec![0.4],
            ),
            Preset::Fig6 => (
                (1..=70).collect(),
                vec![40, 50, 60, 70],
                vec![100],
                vec![0.4],
            ),
            Preset::Fig7 => (
                vec![1],
                vec![3],
                (1..=60).map(|k| 5 * k).collect(),
                vec![0.4, 0.6],
            ),
            Preset::Custom => (vec![], vec![], vec![], vec![]),
        };
        Self {
            preset,
            target_blocks: la,
            authentic_lengths: l0,
            final_lengths: l,
            hash_rates: i,
            runs: DEFAULT_RUNS,
            seed: 0,
            include_mc: false,
        }
    }

    /// Every scenario of the sweep, ordered by `(I, L, L0, La)`.
    ///
    /// Presets drop combinations with `La > L0`; a custom sweep rejects them.
    pub fn scenarios(&self) -> Result<Vec<AttackScenario>> {
        for (name, empty) in [
            ("La", self.target_blocks.is_empty()),
            ("L0", self.authentic_lengths.is_empty()),
            ("L", self.final_lengths.is_empty()),
            ("I", self.hash_rates.is_empty()),
        ] {
            if empty {
                return Err(Error::domain(name, "sweep range is empty"));
            }
        }
        if self.include_mc && self.runs == 0 {
            return Err(Error::domain("runs", "need at least one run"));
        }
        for &i in &self.hash_rates {
            check_hash_rate(i)?;
        }
        let mut out = Vec::new();
        for &i in &self.hash_rates {
            for &l in &self.final_lengths {
                for &l0 in &self.authentic_lengths {
                    for &la in &self.target_blocks {
                        if la > l0 && self.preset != Preset::Custom {
                            continue;
                        }
                        out.push(AttackScenario::new(i, l, l0, la)?);
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            a.hash_rate
                .total_cmp(&b.hash_rate)
                .then(a.final_length.cmp(&b.final_length))
                .then(a.authentic_length.cmp(&b.authentic_length))
                .then(a.target_block.cmp(&b.target_block))
        });
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "La")]
    pub target_block: usize,
    #[serde(rename = "L0")]
    pub authentic_length: usize,
    #[serde(rename = "L")]
    pub final_length: usize,
    #[serde(rename = "I")]
    pub hash_rate: f64,
    pub m0: i64,
    pub p_exact: f64,
    pub p_asymptotic: f64,
    pub p_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub runs: u64,
    pub seed: u64,
}

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.target_block,
            self.authentic_length,
            self.final_length,
            format_float(self.hash_rate),
            self.m0,
            format_float(self.p_exact),
            format_float(self.p_asymptotic),
            opt(self.p_mc),
            opt(self.mc_stderr),
            self.runs,
            self.seed
        )
    }
}

/// Evaluates every row of `spec`. Cells sharing `(I, L, L0)` share one
/// backward-induction grid; the order is that of [`SweepSpec::scenarios`].
pub fn sweep_rows(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let scenarios = spec.scenarios()?;

    let mut groups: BTreeMap<(u64, usize, usize), i64> = BTreeMap::new();
    for s in &scenarios {
        let key = (s.hash_rate.to_bits(), s.final_length, s.authentic_length);
        let top = groups.entry(key).or_insert(0);
        *top = (*top).max(s.initial_deficit());
    }
    let grids: BTreeMap<_, ProbabilityGrid> = groups
        .into_par_iter()
        .map(|((bits, l, l0), top)| {
            ProbabilityGrid::solve(l, f64::from_bits(bits), l0, top as usize)
                .map(|g| ((bits, l, l0), g))
        })
        .collect::<Result<_>>()?;

    scenarios
        .par_iter()
        .map(|s| {
            let m0 = s.initial_deficit();
            let grid = &grids[&(s.hash_rate.to_bits(), s.final_length, s.authentic_length)];
            let p_exact = grid
                .get(m0, s.authentic_length)
                .ok_or_else(|| Error::Invariant(format!("grid lacks cell for {s:?}")))?
                .clamp(0.0, 1.0);
            let (p_mc, mc_stderr) = if spec.include_mc {
                let e = montecarlo::estimate(s, spec.runs, spec.seed)?;
                (Some(e.p_hat), Some(e.stderr))
            } else {
                (None, None)
            };
            Ok(SweepRow {
                target_block: s.target_block,
                authentic_length: s.authentic_length,
                final_length: s.final_length,
                hash_rate: s.hash_rate,
                m0,
                p_exact,
                p_asymptotic: asymptotic_limit(m0, s.hash_rate),
                p_mc,
                mc_stderr,
                runs: spec.runs,
                seed: spec.seed,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], sink: &mut W) -> std::io::Result<()> {
    writeln!(sink, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(sink, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// Evaluates `spec` and writes it as CSV. Nothing is written if the spec is
/// invalid. Returns the number of data rows.
pub fn run_sweep<W: Write>(spec: &SweepSpec, sink: &mut W) -> Result<usize> {
    let rows = sweep_rows(spec)?;
    write_csv(&rows, sink).map_err(|e| Error::Invariant(format!("write failed: {e}")))?;
    Ok(rows.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRow {
    #[serde(rename = "L")]
    pub final_length: usize,
    pub p_exact: f64,
    pub p_asymptotic: f64,
    pub gap: f64,
}

/// Finite-chain probability against its infinite-chain limit for each `L`.
pub fn compare_asymptotic(
    deficit: i64,
    n: usize,
    hash_rate: f64,
    lengths: &[usize],
) -> Result<Vec<AsymptoticRow>> {
    check_hash_rate(hash_rate)?;
    if deficit < 0 {
        return Err(Error::domain("m", format!("{deficit} is negative")));
    }
    if let Some(&l) = lengths.iter().find(|&&l| n == 0 || n >= l) {
        return Err(Error::domain(
            "L",
            format!("need 0 < n < L, got n = {n}, L = {l}"),
        ));
    }
    let limit = asymptotic_limit(deficit, hash_rate);
    lengths
        .par_iter()
        .map(|&l| {
            let p = success_probability_dp(deficit, n, l, hash_rate)?;
            Ok(AsymptoticRow {
                final_length: l,
                p_exact: p,
                p_asymptotic: limit,
                gap: (limit - p).max(0.0),
            })
        })
        .collect()
}

/// Twelve significant digits, fixed notation for moderate exponents and
/// scientific otherwise, without trailing zeros.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.496), "0.496");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_float(1.5e-7), "1.5e-7");
        assert_eq!(format_float(1.23456789012345e-3), "0.00123456789012");
        assert_eq!(format_float(0.1), "0.1");
    }

    #[test]
    fn preset_sizes() {
        assert_eq!(
            SweepSpec::preset(Preset::Fig4).scenarios().unwrap().len(),
            240
        );
        assert_eq!(
            SweepSpec::preset(Preset::Fig5).scenarios().unwrap().len(),
            40
        );
        assert_eq!(
            SweepSpec::preset(Preset::Fig6).scenarios().unwrap().len(),
            40 + 50 + 60 + 70
        );
        assert_eq!(
            SweepSpec::preset(Preset::Fig7).scenarios().unwrap().len(),
            120
        );
    }

    #[test]
    fn custom_rejects_target_past_authentic_length() {
        let mut spec = SweepSpec::preset(Preset::Custom);
        spec.target_blocks = vec![1, 12];
        spec.authentic_lengths = vec![10];
        spec.final_lengths = vec![30];
        spec.hash_rates = vec![0.3];
        let mut out = Vec::new();
        assert!(run_sweep(&spec, &mut out).is_err());
        assert!(out.is_empty());
    }

    #[test]
    fn rows_are_sorted_and_match_dp() {
        let mut spec = SweepSpec::preset(Preset::Custom);
        spec.target_blocks = vec![3, 1, 2];
        spec.authentic_lengths = vec![5, 4];
        spec.final_lengths = vec![12, 9];
        spec.hash_rates = vec![0.45, 0.2];
        let rows = sweep_rows(&spec).unwrap();
        assert_eq!(rows.len(), 24);
        let keys: Vec<_> = rows
            .iter()
            .map(|r| {
                (
                    r.hash_rate,
                    r.final_length,
                    r.authentic_length,
                    r.target_block,
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
        for r in &rows {
            let dp = success_probability_dp(r.m0, r.authentic_length, r.final_length, r.hash_rate)
                .unwrap();
            assert_eq!(r.p_exact.to_bits(), dp.to_bits());
        }
    }

    #[test]
    fn compare_asymptotic_domains() {
        assert!(compare_asymptotic(3, 3, 0.4, &[3]).is_err());
        assert!(compare_asymptotic(3, 3, 1.4, &[10]).is_err());
        let rows = compare_asymptotic(3, 3, 1.0, &[5, 50]).unwrap();
        assert!(rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn preset_names() {
        assert_eq!("FIG6".parse::<Preset>().unwrap(), Preset::Fig6);
        assert!("fig8".parse::<Preset>().is_err());
    }
}
