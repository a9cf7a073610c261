//! Argument definitions and command dispatch for the `onebit` binary.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use onebit_core::balance::{
    count_unbalanced_sets, invalidity_pipeline, is_balanced, BalanceSpec, VectorFamily,
    DEFAULT_ENUMERATION_BUDGET,
};
use onebit_core::bounds::{m_thresholds, BoundConstants, BoundParams};
use onebit_core::ensembles::{gen_matrix, RngSpec};
use onebit_core::lp::FeasibilityMethod;
use onebit_core::probability::{
    gaussian_joint_bound, gaussian_joint_exact, gaussian_single_exact, gaussian_small_ball_bounds,
    mc_failure_prob, mc_joint_small_ball, overlap_from_beta, rademacher_joint_general,
    rademacher_single_general, FailureModel,
};
use onebit_core::validity::{decode_support, validate_universal, ValidityOptions, DEFAULT_LP_BUDGET};
use onebit_core::{
    sign_measure, Ensemble, MeasurementMatrix, SignPattern, SignalClassSpec, SparseSignal,
    SupportSizeMode,
};
use serde::Serialize;
use serde_json::json;

use crate::matrix_io::{read_matrix, write_matrix};
use crate::persist::{load, write_csv, RecordWriter};
use crate::record::ExperimentRecord;
use crate::sweep::{run_decaen_report, sweep_balanced_failure, sweep_invalidity, SweepResult};

pub const DEFAULT_TRIAL_BUDGET: u64 = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "onebit", version, about = "Universal 1-bit sensing lower-bound laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Gaussian,
    Rademacher,
}

impl From<EnsembleArg> for Ensemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::Gaussian => Ensemble::Gaussian,
            EnsembleArg::Rademacher => Ensemble::Rademacher,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Simplex,
    Vertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    /// Pr[one vector balances a k-subset].
    Single,
    /// Pr[one vector balances two k-subsets with overlap beta k].
    Joint,
    /// The closed-form joint bound r^2 / (1 - beta).
    JointBound,
    /// Gaussian small-ball bounds at delta = d / sqrt(k).
    SmallBall,
    /// Monte Carlo Pr[F_s], or Pr[F_s and F_t] with --beta.
    FailureMc,
    /// Monte Carlo of the joint kernel.
    JointMc,
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    RngSpec::parse_seed(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Decimal or 0x-prefixed hexadecimal.
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: u64,
}

/// A matrix read from `--matrix`, or sampled from the ensemble.
#[derive(Debug, Clone, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
    pub ensemble: EnsembleArg,
    #[arg(long, default_value = "0", value_parser = parse_seed)]
    pub seed: u64,
}

impl MatrixArgs {
    fn load(&self) -> Result<MeasurementMatrix> {
        if let Some(path) = &self.matrix {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            return read_matrix(BufReader::new(file))
                .with_context(|| format!("reading {}", path.display()));
        }
        let (Some(m), Some(n)) = (self.m, self.n) else {
            bail!("give --matrix, or --m and --n to sample one");
        };
        Ok(gen_matrix(self.ensemble.into(), RngSpec::new(self.seed), m, n)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConstantArgs {
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_prime: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_doubleprime: f64,
    #[arg(long, default_value_t = 1.0)]
    pub big_c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_upper: f64,
}

impl From<&ConstantArgs> for BoundConstants {
    fn from(c: &ConstantArgs) -> Self {
        BoundConstants {
            c: c.c,
            c_prime: c.c_prime,
            c_doubleprime: c.c_doubleprime,
            big_c: c.big_c,
            c_upper: c.c_upper,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a measurement matrix and write it in the text format.
    GenMatrix {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
        ensemble: EnsembleArg,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sign pattern of a signal given as 1-based `index:value` pairs.
    Measure {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        signal: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Is the row family (n, k, d)-balanced?
    CheckBalanced {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Subset size.
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        /// Also count every unbalanced subset.
        #[arg(long)]
        count: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the reduction pipeline and print any confusable pair.
    Witness {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        k: usize,
        #[arg(long = "r-range", default_value_t = 1.0)]
        r_range: f64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exhaustive universal-validity check.
    Validate {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long)]
        k: usize,
        #[arg(long = "r-range", default_value_t = 1.0)]
        r_range: f64,
        /// Admit supports of every size up to k.
        #[arg(long)]
        at_most: bool,
        /// Maximum number of LP solves.
        #[arg(long, default_value_t = DEFAULT_LP_BUDGET)]
        budget: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::Simplex)]
        method: MethodArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Every support consistent with a sign pattern.
    Decode {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Pattern of `+`/`-` characters.
        #[arg(long, conflicts_with = "signal")]
        pattern: Option<String>,
        /// Measure this signal and decode its pattern.
        #[arg(long)]
        signal: Option<String>,
        #[arg(long)]
        k: usize,
        #[arg(long = "r-range", default_value_t = 1.0)]
        r_range: f64,
        #[arg(long)]
        at_most: bool,
        #[arg(long, default_value_t = DEFAULT_LP_BUDGET)]
        budget: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate a balancing-probability kernel.
    Prob {
        #[arg(long, value_enum)]
        kernel: Kernel,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_TRIAL_BUDGET)]
        trial_budget: u64,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// De Caen bound next to a Monte Carlo estimate of the same probability.
    Decaen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long = "r-range", default_value_t = 1.0)]
        r_range: f64,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_TRIAL_BUDGET)]
        trial_budget: u64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[command(flatten)]
        constants: ConstantArgs,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Measurement thresholds and their scaling assumptions.
    Thresholds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "r-range", default_value_t = 1.0)]
        r_range: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[command(flatten)]
        constants: ConstantArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Empirical Pr[not (n, k, d)-balanced] for each m.
    SweepBalance {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: f64,
        /// Comma-separated list.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_TRIAL_BUDGET)]
        trial_budget: u64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Certificate rate of the reduction pipeline for each m.
    SweepInvalidity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long = "r-range")]
        r_range: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_TRIAL_BUDGET)]
        trial_budget: u64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u128,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Summarize a records file as a table, CSV or normalized JSONL.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to a text table.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

fn check_trial_budget(trials: u64, budget: u64) -> Result<()> {
    if trials > budget {
        bail!("{trials} trials exceed the trial budget {budget}; raise --trial-budget");
    }
    Ok(())
}

/// Parses `1:2.5,3:1` (1-based indices) into a signal of dimension `n`.
pub fn parse_signal(text: &str, n: usize) -> Result<SparseSignal> {
    let mut entries = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (i, v) = part
            .split_once(':')
            .with_context(|| format!("signal entry '{part}' is not index:value"))?;
        let i: usize = i.trim().parse().with_context(|| format!("bad index in '{part}'"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("bad value in '{part}'"))?;
        if i == 0 {
            bail!("signal indices are 1-based");
        }
        entries.push((i - 1, v));
    }
    Ok(SparseSignal::from_entries(n, entries)?)
}

/// Destination for command output.
struct Sink<'a> {
    file: Option<File>,
    stdout: &'a mut dyn Write,
}

impl<'a> Sink<'a> {
    fn open(out: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Self> {
        let file = match out {
            Some(p) => Some(File::create(p).with_context(|| format!("creating {}", p.display()))?),
            None => None,
        };
        Ok(Self { file, stdout })
    }

    fn writer(&mut self) -> &mut dyn Write {
        match &mut self.file {
            Some(f) => f,
            None => self.stdout,
        }
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let w = self.writer();
        serde_json::to_writer(&mut *w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn emit_json<T: Serialize>(output: &OutputArgs, stdout: &mut dyn Write, value: &T) -> Result<()> {
    if output.format == Format::Csv {
        bail!("csv output is only available for experiment records");
    }
    Sink::open(&output.out, stdout)?.json(value)
}

/// Streams sweep records to the output as they finish.
fn run_sweep(
    output: &OutputArgs,
    stdout: &mut dyn Write,
    sweep: impl FnOnce(&mut dyn FnMut(&ExperimentRecord) -> SweepResult<()>) -> SweepResult<Vec<ExperimentRecord>>,
) -> Result<()> {
    match (output.format, &output.out) {
        (Format::Jsonl, Some(path)) => {
            let mut w = RecordWriter::create(path)?;
            sweep(&mut |r| Ok(w.append(r)?))?;
        }
        (Format::Jsonl, None) => {
            let mut failed = None;
            sweep(&mut |r| {
                let line = serde_json::to_string(r).expect("records serialize");
                if let Err(e) = writeln!(stdout, "{line}").and_then(|_| stdout.flush()) {
                    failed.get_or_insert(e);
                }
                Ok(())
            })?;
            if let Some(e) = failed {
                return Err(e.into());
            }
        }
        (Format::Csv, _) => {
            let records = sweep(&mut |_| Ok(()))?;
            let mut sink = Sink::open(&output.out, stdout)?;
            write_csv(&records, sink.writer())?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenMatrix {
            m,
            n,
            ensemble,
            seed,
            out,
        } => {
            let a = gen_matrix(ensemble.into(), RngSpec::new(seed.seed), m, n)?;
            let mut sink = Sink::open(&out, stdout)?;
            write_matrix(&a, sink.writer())?;
        }
        Command::Measure {
            matrix,
            signal,
            output,
        } => {
            let a = matrix.load()?;
            let x = parse_signal(&signal, a.n())?;
            let b = sign_measure(&a, &x)?;
            emit_json(&output, stdout, &json!({ "pattern": b.to_string() }))?;
        }
        Command::CheckBalanced {
            matrix,
            k,
            d,
            budget,
            count,
            output,
        } => {
            let a = matrix.load()?;
            let family = VectorFamily::from_matrix(&a, a.n())?;
            let spec = BalanceSpec::new(a.n(), k, d)?;
            let outcome = is_balanced(&family, &spec, budget)?;
            let unbalanced = if count {
                Some(count_unbalanced_sets(&family, &spec, budget)?)
            } else {
                None
            };
            emit_json(
                &output,
                stdout,
                &json!({ "spec": spec, "outcome": outcome, "unbalanced_count": unbalanced }),
            )?;
        }
        Command::Witness {
            matrix,
            k,
            r_range,
            budget,
            output,
        } => {
            let a = matrix.load()?;
            let report = invalidity_pipeline(&a, k, r_range, budget)?;
            emit_json(&output, stdout, &report)?;
        }
        Command::Validate {
            matrix,
            k,
            r_range,
            at_most,
            budget,
            method,
            output,
        } => {
            let a = matrix.load()?;
            let spec = class_spec(a.n(), k, r_range, at_most)?;
            let options = ValidityOptions {
                budget,
                method: method.into(),
                include_empty_support: false,
            };
            let report = validate_universal(&a, &spec, &options)?;
            emit_json(&output, stdout, &report)?;
        }
        Command::Decode {
            matrix,
            pattern,
            signal,
            k,
            r_range,
            at_most,
            budget,
            output,
        } => {
            let a = matrix.load()?;
            let b: SignPattern = match (pattern, signal) {
                (Some(p), _) => p.parse()?,
                (None, Some(s)) => sign_measure(&a, &parse_signal(&s, a.n())?)?,
                (None, None) => bail!("give --pattern or --signal"),
            };
            let spec = class_spec(a.n(), k, r_range, at_most)?;
            let options = ValidityOptions {
                budget,
                ..Default::default()
            };
            let report = decode_support(&a, &b, &spec, &options)?;
            emit_json(&output, stdout, &report)?;
        }
        Command::Prob {
            kernel,
            k,
            d,
            beta,
            m,
            ensemble,
            trials,
            trial_budget,
            seed,
            output,
        } => {
            let ensemble: Ensemble = ensemble.into();
            let t = overlap_from_beta(k, beta)?;
            let rng = RngSpec::new(seed.seed);
            let value = match kernel {
                Kernel::Single => match ensemble {
                    Ensemble::Rademacher => json!(rademacher_single_general(k, d)?),
                    _ => json!(gaussian_single_exact(k, d)?),
                },
                Kernel::Joint => match ensemble {
                    Ensemble::Rademacher => json!(rademacher_joint_general(k, d, t)?),
                    _ => json!(gaussian_joint_exact(k, d, t)?),
                },
                Kernel::JointBound => json!({ "value": gaussian_joint_bound(k, d, t) }),
                Kernel::SmallBall => {
                    let (lower, upper) = gaussian_small_ball_bounds(d / (k as f64).sqrt())?;
                    json!({ "lower": lower, "upper": upper })
                }
                Kernel::FailureMc => {
                    check_trial_budget(trials, trial_budget)?;
                    let model = FailureModel::new(k, d, m, ensemble)?;
                    let overlap = (beta > 0.0).then_some(t);
                    json!(mc_failure_prob(&model, overlap, rng, trials)?)
                }
                Kernel::JointMc => {
                    check_trial_budget(trials, trial_budget)?;
                    json!(mc_joint_small_ball(k, d, t, ensemble, rng, trials)?)
                }
            };
            emit_json(&output, stdout, &value)?;
        }
        Command::Decaen {
            n,
            k,
            d,
            m,
            epsilon,
            r_range,
            ensemble,
            trials,
            trial_budget,
            budget,
            constants,
            seed,
            output,
        } => {
            check_trial_budget(trials, trial_budget)?;
            let params = BoundParams::new(n, k, m, d, ensemble.into())?
                .with_epsilon(epsilon)?
                .with_dynamic_range(r_range)?
                .with_constants((&constants).into())?;
            let report = run_decaen_report(&params, trials, RngSpec::new(seed.seed), budget)?;
            match output.format {
                Format::Jsonl => Sink::open(&output.out, stdout)?.json(&report)?,
                Format::Csv => {
                    let mut sink = Sink::open(&output.out, stdout)?;
                    write_csv(std::slice::from_ref(&report.record), sink.writer())?;
                }
            }
        }
        Command::Thresholds {
            n,
            k,
            r_range,
            epsilon,
            constants,
            output,
        } => {
            let report = m_thresholds(n, k, r_range, epsilon, &(&constants).into())?;
            emit_json(&output, stdout, &report)?;
        }
        Command::SweepBalance {
            n,
            k,
            d,
            m,
            ensemble,
            trials,
            trial_budget,
            budget,
            seed,
            output,
        } => {
            check_trial_budget(trials, trial_budget)?;
            let rng = RngSpec::new(seed.seed);
            run_sweep(&output, stdout, |sink| {
                sweep_balanced_failure(n, k, d, ensemble.into(), &m, trials, rng, budget, sink)
            })?;
        }
        Command::SweepInvalidity {
            n,
            k,
            r_range,
            m,
            ensemble,
            trials,
            trial_budget,
            budget,
            seed,
            output,
        } => {
            check_trial_budget(trials, trial_budget)?;
            let rng = RngSpec::new(seed.seed);
            run_sweep(&output, stdout, |sink| {
                sweep_invalidity(n, k, r_range, ensemble.into(), &m, trials, rng, budget, sink)
            })?;
        }
        Command::Report { input, out, format } => {
            let records = load(&input)?;
            let mut sink = Sink::open(&out, stdout)?;
            match format {
                Some(Format::Csv) => write_csv(&records, sink.writer())?,
                Some(Format::Jsonl) => {
                    for r in &records {
                        sink.json(r)?;
                    }
                }
                None => write_table(&records, sink.writer())?,
            }
        }
    }
    Ok(())
}

impl From<MethodArg> for FeasibilityMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Simplex => FeasibilityMethod::Simplex,
            MethodArg::Vertices => FeasibilityMethod::VertexEnumeration,
        }
    }
}

fn class_spec(n: usize, k: usize, r: f64, at_most: bool) -> Result<SignalClassSpec> {
    let mode = if at_most {
        SupportSizeMode::AtMostK
    } else {
        SupportSizeMode::ExactlyK
    };
    Ok(SignalClassSpec::new(n, k, r, mode)?)
}

fn write_table(records: &[ExperimentRecord], w: &mut dyn Write) -> Result<()> {
    writeln!(
        w,
        "{:<40} {:>6} {:>8} {:>8} {:>10} {:>10} {:>21}",
        "experiment", "m", "trials", "hits", "estimate", "stderr", "wilson 95%"
    )?;
    for r in records {
        writeln!(
            w,
            "{:<40} {:>6} {:>8} {:>8} {:>10.6} {:>10.6} [{:>8.6}, {:>8.6}]",
            r.experiment_id,
            r.params.m,
            r.trials,
            r.successes,
            r.estimate,
            r.stderr,
            r.wilson_low,
            r.wilson_high
        )?;
    }
    w.flush()?;
    Ok(())
}
