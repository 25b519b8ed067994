use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finitechain_core::chainsim::{race_estimate, RaceSetup};
use finitechain_core::montecarlo;
use finitechain_core::sweep::{
    compare_asymptotic, format_float, sweep_rows, Preset, SweepSpec, CSV_HEADER, DEFAULT_RUNS,
};
use finitechain_core::{
    coeff_bruteforce, coeff_closed_form, coeff_recursive, dsa_success_probability, AttackScenario,
    Error, Method,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "finitechain",
    version,
    about = "Double-spending attack analysis on finitely-long blockchains"
)]
struct Cli {
    /// Emit JSON instead of plain text or CSV.
    #[arg(long, global = true)]
    json: bool,

    /// Write output to PATH instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Master seed for Monte Carlo and chain races.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (speed only; results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ScenarioArgs {
    /// Attacker's normalized hash rate, in [0, 1].
    #[arg(long = "I", value_name = "x")]
    hash_rate: f64,
    /// Final chain length.
    #[arg(long = "L", value_name = "n")]
    final_length: usize,
    /// Authentic chain length when the attack starts.
    #[arg(long = "L0", value_name = "n")]
    authentic_length: usize,
    /// Index of the block the attacker falsifies.
    #[arg(long = "La", value_name = "n")]
    target_block: usize,
}

impl ScenarioArgs {
    fn scenario(self) -> Result<AttackScenario, Error> {
        AttackScenario::new(
            self.hash_rate,
            self.final_length,
            self.authentic_length,
            self.target_block,
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ComputeMethod {
    Dp,
    Closed,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Oracle {
    Recursive,
    Closed,
    Brute,
}

#[derive(Subcommand)]
enum Command {
    /// Exact success probability of one attack.
    Compute {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum, default_value_t = ComputeMethod::Both)]
        method: ComputeMethod,
    },
    /// Monte Carlo estimate from the race walk.
    Mc {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: u64,
    },
    /// Block-level race simulation.
    ChainRace {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: u64,
    },
    /// Exact path-count coefficients a(i, m).
    Coeffs {
        #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = parse_count_range, required = true)]
        i: Vec<Vec<usize>>,
        #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = parse_count_range, required = true)]
        m: Vec<Vec<usize>>,
        #[arg(long, value_enum, default_value_t = Oracle::Recursive)]
        oracle: Oracle,
    },
    /// CSV table over a parameter grid.
    Sweep {
        #[arg(long, default_value = "custom", value_parser = parse_preset)]
        preset: Preset,
        /// Target blocks, e.g. `1:60` or `1,5,10`.
        #[arg(long = "La", value_delimiter = ',', value_parser = parse_count_range)]
        target_blocks: Vec<Vec<usize>>,
        #[arg(long = "L0", value_delimiter = ',', value_parser = parse_count_range)]
        authentic_lengths: Vec<Vec<usize>>,
        #[arg(long = "L", value_delimiter = ',', value_parser = parse_count_range)]
        final_lengths: Vec<Vec<usize>>,
        #[arg(long = "I", value_delimiter = ',')]
        hash_rates: Vec<f64>,
        /// Add a Monte Carlo column.
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: u64,
    },
    /// Finite-chain probability against the infinite-chain limit.
    CompareAsymptotic {
        #[arg(long)]
        m: i64,
        #[arg(long)]
        n: usize,
        #[arg(long = "I", value_name = "x")]
        hash_rate: f64,
        #[arg(long = "L", value_delimiter = ',', num_args = 1.., value_parser = parse_count_range, required = true)]
        final_lengths: Vec<Vec<usize>>,
    },
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// `n`, `a:b` (inclusive) or `a:b:step`.
fn parse_count_range(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [n] => Ok(vec![num(n)?]),
        [a, b] => Ok((num(a)?..=num(b)?).collect()),
        [a, b, step] => {
            let step = num(step)?;
            if step == 0 {
                return Err("range step must be positive".into());
            }
            Ok((num(a)?..=num(b)?).step_by(step).collect())
        }
        _ => Err(format!("bad range {s:?}")),
    }
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. }
            | Error::EnumerationBudget { .. }
            | Error::ExactModeLimit { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Internal(e.to_string()))
}

#[derive(Serialize)]
struct ComputeReport {
    #[serde(rename = "I")]
    hash_rate: f64,
    #[serde(rename = "L")]
    final_length: usize,
    #[serde(rename = "L0")]
    authentic_length: usize,
    #[serde(rename = "La")]
    target_block: usize,
    m0: i64,
    p_dp: Option<f64>,
    p_closed: Option<f64>,
    abs_diff: Option<f64>,
}

#[derive(Serialize)]
struct CoeffEntry {
    i: usize,
    m: usize,
    /// Decimal string, since values exceed every fixed-width integer.
    value: String,
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Compute { scenario, method } => {
            let s = scenario.scenario()?;
            let p_dp = match method {
                ComputeMethod::Closed => None,
                _ => Some(dsa_success_probability(&s, Method::Dp)?),
            };
            let p_closed = match method {
                ComputeMethod::Dp => None,
                _ => Some(dsa_success_probability(&s, Method::ClosedForm)?),
            };
            let report = ComputeReport {
                hash_rate: s.hash_rate,
                final_length: s.final_length,
                authentic_length: s.authentic_length,
                target_block: s.target_block,
                m0: s.initial_deficit(),
                p_dp,
                p_closed,
                abs_diff: p_dp.zip(p_closed).map(|(a, b)| (a - b).abs()),
            };
            if cli.json {
                return to_json(&report);
            }
            Ok(format!(
                "m0 {}\np_dp {}\np_closed {}\nabs_diff {}\n",
                report.m0,
                opt(report.p_dp),
                opt(report.p_closed),
                opt(report.abs_diff)
            ))
        }
        Command::Mc { scenario, runs } => {
            let e = montecarlo::estimate(&scenario.scenario()?, *runs, cli.seed)?;
            if cli.json {
                return to_json(&e);
            }
            Ok(format!(
                "p_hat {}\nstderr {}\nruns {}\nseed {}\nsuccesses {}\n",
                format_float(e.p_hat),
                format_float(e.stderr),
                e.runs,
                e.seed,
                e.successes
            ))
        }
        Command::ChainRace { scenario, runs } => {
            let r = race_estimate(
                &scenario.scenario()?,
                *runs,
                cli.seed,
                &RaceSetup::standard(),
            )?;
            if cli.json {
                return to_json(&r);
            }
            Ok(format!(
                "wins {}\nruns {}\np_hat {}\nstderr {}\nmean_steps {}\n",
                r.wins,
                r.runs,
                format_float(r.p_hat),
                format_float(r.stderr),
                format_float(r.mean_steps)
            ))
        }
        Command::Coeffs { i, m, oracle } => {
            let mut entries = Vec::new();
            for &i in i.iter().flatten() {
                for &m in m.iter().flatten() {
                    let value = match oracle {
                        Oracle::Recursive => coeff_recursive(i, m),
                        Oracle::Closed => coeff_closed_form(i, m),
                        Oracle::Brute => coeff_bruteforce(i, m)?,
                    };
                    entries.push(CoeffEntry {
                        i,
                        m,
                        value: value.to_string(),
                    });
                }
            }
            if cli.json {
                return to_json(&entries);
            }
            Ok(entries.iter().map(|e| e.value.clone() + "\n").collect())
        }
        Command::Sweep {
            preset,
            target_blocks,
            authentic_lengths,
            final_lengths,
            hash_rates,
            mc,
            runs,
        } => {
            let mut spec = SweepSpec::preset(*preset);
            let flat = |v: &Vec<Vec<usize>>| v.iter().flatten().copied().collect::<Vec<_>>();
            if !target_blocks.is_empty() {
                spec.target_blocks = flat(target_blocks);
            }
            if !authentic_lengths.is_empty() {
                spec.authentic_lengths = flat(authentic_lengths);
            }
            if !final_lengths.is_empty() {
                spec.final_lengths = flat(final_lengths);
            }
            if !hash_rates.is_empty() {
                spec.hash_rates = hash_rates.clone();
            }
            spec.include_mc = *mc;
            spec.runs = *runs;
            spec.seed = cli.seed;
            let rows = sweep_rows(&spec)?;
            if cli.json {
                return to_json(&rows);
            }
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for row in &rows {
                out.push_str(&row.to_csv_line());
                out.push('\n');
            }
            Ok(out)
        }
        Command::CompareAsymptotic {
            m,
            n,
            hash_rate,
            final_lengths,
        } => {
            let lengths: Vec<usize> = final_lengths.iter().flatten().copied().collect();
            let rows = compare_asymptotic(*m, *n, *hash_rate, &lengths)?;
            if cli.json {
                return to_json(&rows);
            }
            let mut out = String::from("L,p_exact,p_asymptotic,gap\n");
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.final_length,
                    format_float(r.p_exact),
                    format_float(r.p_asymptotic),
                    format_float(r.gap)
                ));
            }
            Ok(out)
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Internal(format!("stdout: {e}"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }

    match run(&cli).and_then(|text| emit(&cli, &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}
