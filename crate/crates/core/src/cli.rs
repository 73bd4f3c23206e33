//! Command-line front end: argument parsing, run configurations and the
//! text reports printed by the `naffo` binary.
//!
//! Exit codes: `0` success, `2` input error, `3` numerical failure, `4` the
//! refinement did not converge (including divergence out of the admissible
//! set).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::integrator::{sample_trajectory, IntegrateError, OdeProblem};
use crate::models::{
    forced_prey_predator, system_from_config, DynamicalSystem, ModelConfig, ModelError,
};
use crate::naff::{decompose, Decomposition, NaffError, NaffOptions};
use crate::naffo::{
    estimate_convergence_rate, refine, NaffoError, RefineOptions, RefinementLog, StopCriterion,
};
use crate::signal::{format_real, read_signal, write_signal, Signal, SignalError, WindowOrder};

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

/// A failed command: the message for standard error and the exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<SignalError> for Failure {
    fn from(e: SignalError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<NaffError> for Failure {
    fn from(e: NaffError) -> Self {
        match e {
            NaffError::InvalidOptions(_) => Failure::input(e.to_string()),
            _ => Failure::numerical(e.to_string()),
        }
    }
}

impl From<IntegrateError> for Failure {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::InvalidProblem(_) | IntegrateError::InvalidOptions(_) => {
                Failure::input(e.to_string())
            }
            _ => Failure::numerical(e.to_string()),
        }
    }
}

impl From<NaffoError> for Failure {
    fn from(e: NaffoError) -> Self {
        let code = match &e {
            NaffoError::Integration(
                IntegrateError::InvalidProblem(_) | IntegrateError::InvalidOptions(_),
            )
            | NaffoError::Analysis(NaffError::InvalidOptions(_))
            | NaffoError::InvalidBasis(_)
            | NaffoError::InvalidOptions(_)
            | NaffoError::Inadmissible(_) => EXIT_INPUT,
            NaffoError::Divergence { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::input(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "naffo",
    version,
    about = "Frequency analysis of quasi-periodic orbits and refinement of initial conditions onto forced orbits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose a signal file into frequencies and complex amplitudes.
    Analyze(AnalyzeArgs),
    /// Refine an initial condition until the free oscillations are removed.
    Search(SearchArgs),
    /// Write time series from the raw and the refined initial condition.
    Plotdata(PlotdataArgs),
    /// Write a signal synthesized from a list of terms.
    Synth(SynthArgs),
    /// Run the search on the forced prey-predator model (α = 4.539,
    /// β = 1.068, γ = 0.25, η = 0) from (1, 1).
    #[command(name = "reproduce-table1")]
    ReproduceTable1(Table1Args),
}

#[derive(Debug, Clone, Args)]
pub struct NaffArgs {
    /// Window order p of the Hann-power weight (0..=3).
    #[arg(long, default_value_t = 2)]
    pub window: u32,
    /// Maximal number of extracted terms.
    #[arg(long, default_value_t = NaffOptions::default().max_terms)]
    pub max_terms: usize,
    /// Minimal distance between two frequencies [default: 2π/T].
    #[arg(long)]
    pub min_separation: Option<f64>,
    /// Stop when a term falls below this fraction of the largest amplitude.
    #[arg(long, default_value_t = NaffOptions::default().amplitude_floor)]
    pub amplitude_floor: f64,
    /// Relative tolerance of the frequency refinement.
    #[arg(long, default_value_t = NaffOptions::default().peak_tolerance)]
    pub peak_tolerance: f64,
}

impl NaffArgs {
    fn options(&self) -> Result<NaffOptions, Failure> {
        Ok(NaffOptions {
            window: WindowOrder::new(self.window)?,
            max_terms: self.max_terms,
            min_separation: self.min_separation,
            amplitude_floor: self.amplitude_floor,
            peak_tolerance: self.peak_tolerance,
        })
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Signal CSV with header `t,re` or `t,re,im`.
    pub signal: PathBuf,
    /// Also write the terms as CSV (`rank,frequency,amp_re,amp_im,amp_modulus`).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub naff: NaffArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopArg {
    /// Stop when the largest free amplitude falls below the amplitude floor.
    Detect,
    /// Stop when the largest free amplitude is below 1e-6 times the smallest
    /// forced amplitude.
    ForcedPurity,
}

impl From<StopArg> for StopCriterion {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::Detect => StopCriterion::Detect,
            StopArg::ForcedPurity => StopCriterion::ForcedPurity,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Stopping criterion [default: the configuration's, else detect].
    #[arg(long, value_enum)]
    pub stop: Option<StopArg>,
    /// Directory for the output files [default: the configuration's, else `.`].
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Run configuration (JSON).
    pub config: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Before,
    After,
    Both,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    /// Run configuration (JSON).
    pub config: PathBuf,
    /// Series to write: from the configured initial condition, from the
    /// refined one, or both.
    #[arg(long, value_enum, default_value_t = Which::Both)]
    pub which: Which,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// A term `FREQUENCY:RE[:IM]`, i.e. `(RE + i·IM)·exp(i·FREQUENCY·t)`;
    /// repeat for several terms.
    #[arg(long = "term", value_parser = parse_term, allow_hyphen_values = true)]
    pub terms: Vec<(f64, Complex64)>,
    /// Half-span T of the window [-T, T].
    #[arg(long)]
    pub half_span: f64,
    /// Number of samples.
    #[arg(long, default_value_t = 1 << 16)]
    pub count: usize,
    /// Write a real signal: every term of nonzero frequency is completed by
    /// its complex conjugate at the opposite frequency.
    #[arg(long)]
    pub real: bool,
    /// Output CSV path.
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Parses `FREQUENCY:RE[:IM]`.
pub fn parse_term(text: &str) -> Result<(f64, Complex64), String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("'{s}' is not a finite number"))
    };
    match parts.as_slice() {
        [f, re] => Ok((num(f)?, Complex64::new(num(re)?, 0.0))),
        [f, re, im] => Ok((num(f)?, Complex64::new(num(re)?, num(im)?))),
        _ => Err(format!("expected FREQUENCY:RE[:IM], got '{text}'")),
    }
}

/// Where the model of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    /// Path to a model configuration file, relative to the run configuration.
    Path(PathBuf),
    Inline(Box<ModelConfig>),
}

/// Everything a `search` or `plotdata` run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Starting point `X_0`; falls back to the model's own.
    #[serde(default)]
    pub initial_condition: Option<Vec<f64>>,
    /// Integration span `2T`; overrides `refine.span`.
    #[serde(default)]
    pub span: Option<f64>,
    /// Samples per integration; overrides `refine.integrator.output_count`.
    #[serde(default)]
    pub sample_count: Option<usize>,
    /// Frequency analysis settings; override `refine.naff`.
    #[serde(default)]
    pub naff: Option<NaffOptions>,
    #[serde(default)]
    pub refine: RefineOptions,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A run configuration resolved against its model.
pub struct Run {
    pub system: DynamicalSystem,
    pub initial_condition: Vec<f64>,
    pub options: RefineOptions,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(io_failure(path))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        if let ModelSpec::Path(model) = &mut config.model {
            if model.is_relative() {
                if let Some(dir) = path.parent() {
                    *model = dir.join(&*model);
                }
            }
        }
        Ok(config)
    }

    /// The configuration of the forced prey-predator run.
    pub fn table1() -> Self {
        let model = ModelConfig {
            name: None,
            model: Some("forced_prey_predator".into()),
            dimension: None,
            parameters: BTreeMap::from([
                ("alpha".to_string(), 4.539),
                ("beta".to_string(), 1.068),
                ("gamma".to_string(), 0.25),
                ("eta".to_string(), 0.0),
            ]),
            variables: None,
            rhs: None,
            forcing: None,
            max_order: None,
            match_tolerance: None,
            admissible: None,
            initial_condition: None,
        };
        RunConfig {
            model: ModelSpec::Inline(Box::new(model)),
            initial_condition: Some(vec![1.0, 1.0]),
            span: None,
            sample_count: None,
            naff: None,
            refine: RefineOptions::default(),
            output_dir: None,
        }
    }

    pub fn resolve(&self, args: &RunArgs) -> Result<Run, Failure> {
        let system = match &self.model {
            ModelSpec::Path(path) => {
                let text = fs::read_to_string(path).map_err(io_failure(path))?;
                let config: ModelConfig = serde_json::from_str(&text)
                    .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                system_from_config(&config)?
            }
            ModelSpec::Inline(config) => system_from_config(config)?,
        };
        let initial_condition = match (&self.initial_condition, system.initial_condition()) {
            (Some(x), _) => x.clone(),
            (None, Some(x)) => x.to_vec(),
            (None, None) => {
                return Err(Failure::input(
                    "no initial condition in the run or the model",
                ))
            }
        };
        if initial_condition.len() != system.dimension() {
            return Err(Failure::input(format!(
                "initial condition has {} components, the model has dimension {}",
                initial_condition.len(),
                system.dimension()
            )));
        }
        let mut options = self.refine.clone();
        if let Some(span) = self.span {
            options.span = Some(span);
        }
        if let Some(count) = self.sample_count {
            options.integrator.output_count = count;
        }
        if let Some(naff) = self.naff {
            options.naff = naff;
        }
        if let Some(stop) = args.stop {
            options.stop = stop.into();
        }
        let output_dir = args
            .output_dir
            .clone()
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Run {
            system,
            initial_condition,
            options,
            output_dir,
        })
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing the report to `out`.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write) -> Result<(), Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() {
            EXIT_INPUT
        } else {
            EXIT_SUCCESS
        };
        Failure {
            code,
            message: e.render().to_string(),
        }
    })?;
    run(cli.command, out)
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let write_err = |e: io::Error| Failure::input(format!("cannot write output: {e}"));
    match command {
        Command::Analyze(args) => {
            let text = cmd_analyze(&args)?;
            out.write_all(text.as_bytes()).map_err(write_err)
        }
        Command::Search(args) => {
            let config = RunConfig::from_path(&args.config)?;
            search(&config, &args.run, out)
        }
        Command::ReproduceTable1(args) => search(&RunConfig::table1(), &args.run, out),
        Command::Plotdata(args) => {
            let config = RunConfig::from_path(&args.config)?;
            let written = cmd_plotdata(&config, args.which, &args.run)?;
            for path in written {
                writeln!(out, "wrote {}", path.display()).map_err(write_err)?;
            }
            Ok(())
        }
        Command::Synth(args) => {
            cmd_synth(&args)?;
            writeln!(out, "wrote {}", args.output.display()).map_err(write_err)
        }
    }
}

/// Decomposes the signal file and returns the ranked term table.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String, Failure> {
    let signal = read_signal(&args.signal)
        .map_err(|e| Failure::input(format!("{}: {e}", args.signal.display())))?;
    let options = args.naff.options()?;
    let d = decompose(&signal, &options)?;
    if let Some(path) = &args.output {
        let file = fs::File::create(path).map_err(io_failure(path))?;
        d.write_csv(io::BufWriter::new(file))
            .map_err(io_failure(path))?;
    }
    Ok(term_table(&d))
}

/// `rank, frequency, modulus, phase` of every term, phases measured from
/// the window centre.
pub fn term_table(d: &Decomposition) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# T = {}, {} samples, window p = {}, {} terms, residual {:.3e}, stop: {:?}",
        d.half_span,
        d.count,
        d.window,
        d.terms.len(),
        d.residual_norm,
        d.stop
    );
    let _ = writeln!(
        s,
        "{:>5}  {:>24}  {:>24}  {:>24}",
        "rank", "frequency", "modulus", "phase"
    );
    for (i, term) in d.terms.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>5}  {:>24}  {:>24}  {:>24}",
            i + 1,
            format_real(term.frequency),
            format_real(term.amplitude.norm()),
            format_real(term.amplitude.arg())
        );
    }
    s
}

fn search(config: &RunConfig, args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let run = config.resolve(args)?;
    let log = refine(&run.system, &run.initial_condition, &run.options)?;
    fs::create_dir_all(&run.output_dir).map_err(io_failure(&run.output_dir))?;
    let json = run.output_dir.join("refinement.json");
    let file = fs::File::create(&json).map_err(io_failure(&json))?;
    log.write_json(io::BufWriter::new(file))
        .map_err(|e| Failure::input(format!("{}: {e}", json.display())))?;
    let csv = run.output_dir.join("refinement.csv");
    let file = fs::File::create(&csv).map_err(io_failure(&csv))?;
    log.write_csv(io::BufWriter::new(file))
        .map_err(io_failure(&csv))?;

    let report = table_report(&log, &run);
    out.write_all(report.as_bytes())
        .map_err(|e| Failure::input(format!("cannot write output: {e}")))?;
    if log.converged {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NOT_CONVERGED,
            message: format!(
                "refinement did not converge (stop reason: {:?}, last free amplitude {:.3e})",
                log.stop_reason,
                log.amplitudes().last().copied().unwrap_or(f64::NAN)
            ),
        })
    }
}

/// The per-iteration text report of a refinement.
pub fn table_report(log: &RefinementLog, run: &Run) -> String {
    let o = &run.options;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# {}: span {}, {} samples, window p = {}, stop {:?}, floor {:e}",
        log.system, log.span, o.integrator.output_count, o.naff.window, o.stop, o.amplitude_floor
    );
    let _ = writeln!(
        s,
        "{:>3}  {:>4}  {:>24}  {:>6}  {:>4}  {:>12}  {:>10}",
        "n", "dim", "I.C.", "#freq", "rank", "amplitude", "ω•"
    );
    let names = variable_names(log.final_condition.len());
    for row in log.summary() {
        for (i, name) in names.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:>3}  {:>4}  {:>24}  {:>6}  {:>4}  {:>12.6e}  {:>10}",
                if i == 0 {
                    row.n.to_string()
                } else {
                    String::new()
                },
                name,
                format!("{:.18}", row.initial_condition[i]),
                row.frequency_counts[i],
                row.ranks[i].map_or("-".to_string(), |r| r.to_string()),
                row.amplitudes[i],
                row.proper_frequency
                    .map_or("-".to_string(), |w| format!("{w:.6}")),
            );
        }
    }
    let n = log.iterations.len();
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:>3}  {:>4}  {:>24}",
            if i == 0 { n.to_string() } else { String::new() },
            name,
            format!("{:.18}", log.final_condition[i])
        );
    }
    let _ = writeln!(
        s,
        "# stop: {:?}, converged: {}",
        log.stop_reason, log.converged
    );
    match estimate_convergence_rate(log) {
        Ok(q) => {
            let _ = writeln!(s, "# convergence exponent: {q:.3}");
        }
        Err(e) => {
            let _ = writeln!(s, "# convergence exponent: n/a ({e})");
        }
    }
    s
}

fn variable_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// Writes `t,x1,...,xn` series from the configured and/or the refined
/// initial condition; returns the paths written.
pub fn cmd_plotdata(
    config: &RunConfig,
    which: Which,
    args: &RunArgs,
) -> Result<Vec<PathBuf>, Failure> {
    let run = config.resolve(args)?;
    let span = run.options.span_for(&run.system)?;
    let integrator = run.options.integrator_for(&run.system);
    fs::create_dir_all(&run.output_dir).map_err(io_failure(&run.output_dir))?;
    let mut written = Vec::new();
    let mut series = |x0: &[f64], file: &str| -> Result<(), Failure> {
        let problem = OdeProblem::new(&run.system, 0.0, span, x0);
        let trajectory = sample_trajectory(&problem, &integrator)?;
        let path = run.output_dir.join(file);
        let mut w = io::BufWriter::new(fs::File::create(&path).map_err(io_failure(&path))?);
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain(variable_names(x0.len()))
            .collect();
        writeln!(w, "{}", header.join(",")).map_err(io_failure(&path))?;
        for (k, state) in trajectory.states.iter().enumerate() {
            let row: Vec<String> = std::iter::once(trajectory.time(k))
                .chain(state.iter().copied())
                .map(format_real)
                .collect();
            writeln!(w, "{}", row.join(",")).map_err(io_failure(&path))?;
        }
        w.flush().map_err(io_failure(&path))?;
        written.push(path);
        Ok(())
    };
    if matches!(which, Which::Before | Which::Both) {
        series(&run.initial_condition, "before.csv")?;
    }
    if matches!(which, Which::After | Which::Both) {
        let log = refine(&run.system, &run.initial_condition, &run.options)?;
        series(&log.final_condition, "after.csv")?;
    }
    Ok(written)
}

/// Samples `Σ a_l exp(i f_l t)` on the grid of `[-T, T]`.
pub fn synthesize(
    terms: &[(f64, Complex64)],
    half_span: f64,
    count: usize,
    real: bool,
) -> Result<Signal, Failure> {
    let signal = Signal::from_fn(half_span, count, |t| {
        terms
            .iter()
            .map(|&(f, a)| {
                let z = a * Complex64::cis(f * t);
                match (real, f == 0.0) {
                    (false, _) => z,
                    (true, true) => Complex64::new(z.re, 0.0),
                    (true, false) => Complex64::new(2.0 * z.re, 0.0),
                }
            })
            .sum()
    })?;
    Ok(signal)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let signal = synthesize(&args.terms, args.half_span, args.count, args.real)?;
    write_signal(&signal, &args.output)
        .map_err(|e| Failure::input(format!("{}: {e}", args.output.display())))
}

/// The forced prey-predator model run by `reproduce-table1`.
pub fn table1_system() -> DynamicalSystem {
    forced_prey_predator(4.539, 1.068, 0.25, 0.0).expect("reference parameters are valid")
}
