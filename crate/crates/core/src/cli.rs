//! The `motorfault` command line: one subcommand per workflow step.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{table1_fixture, Dataset, PhaseSample, CLASS_COUNT, INPUT_DIM};
use crate::error::{Error, Result};
use crate::evaluation::{classify, evaluate, frequency_report, regression_fit, DecisionRule};
use crate::faultgen::{
    generate_paper_scale_with_noise, generate_train_test, GeneratorSpec, DEFAULT_RELATIVE_NOISE,
    PAPER_TRAIN_COUNTS, REFERENCE_TEST_COUNTS,
};
use crate::neuralnet::{load_model, save_model, train, Network, NetworkConfig};
use crate::stream::{self, load_frames, replay, ReplayOptions, Response, ShutdownHandle, StreamConfig};

const EXIT_STATUS_HELP: &str = "\
Exit status:
  0  success
  1  other failure
  2  invalid usage or arguments
  3  file or network I/O failure
  4  malformed input file (dataset CSV, model, frame log)
  5  training diverged
  6  protocol error (ERR replies during replay, unexpected server reply)
  7  cannot bind or connect";

#[derive(Debug, Parser)]
#[command(name = "motorfault", version, about = "Induction motor fault classification", after_help = EXIT_STATUS_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/test CSVs.
    Gen(GenArgs),
    /// Train a network on a dataset CSV and write a model file.
    Train(TrainArgs),
    /// Evaluate a model: confusion matrix, frequency report, accuracy, regression fit.
    Eval(EvalArgs),
    /// Classify a single sample.
    Classify(ClassifyArgs),
    /// Serve live classification over TCP.
    Serve(ServeArgs),
    /// Replay a dataset CSV or frame log against a running server.
    Replay(ReplayArgs),
    /// Print the embedded 14-row reference table as CSV.
    Table1(Table1Args),
}

fn parse_counts(s: &str) -> std::result::Result<[usize; CLASS_COUNT], String> {
    let counts: Vec<usize> = s
        .split(',')
        .map(|c| c.parse().map_err(|_| format!("`{c}` is not a count")))
        .collect::<std::result::Result<_, _>>()?;
    counts
        .try_into()
        .map_err(|v: Vec<usize>| format!("expected {CLASS_COUNT} counts, got {}", v.len()))
}

fn parse_width(w: &str) -> std::result::Result<usize, String> {
    match w.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("`{w}` is not a positive layer width")),
        Ok(n) => Ok(n),
    }
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_STATUS_HELP)]
pub struct GenArgs {
    /// Output path for the training CSV.
    #[arg(long)]
    pub train: PathBuf,
    /// Output path for the test CSV.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// 800 training samples and the 66-sample test composition.
    #[arg(long, conflicts_with_all = ["counts", "test_counts"])]
    pub paper_scale: bool,
    /// Training samples per class, C1,...,C7.
    #[arg(long, value_parser = parse_counts)]
    pub counts: Option<[usize; CLASS_COUNT]>,
    /// Test samples per class, C1,...,C7.
    #[arg(long, value_parser = parse_counts)]
    pub test_counts: Option<[usize; CLASS_COUNT]>,
    /// Noise standard deviation relative to each class centroid.
    #[arg(long, default_value_t = DEFAULT_RELATIVE_NOISE)]
    pub noise: f64,
    /// Centre draws on individual reference rows instead of class means.
    #[arg(long)]
    pub two_component: bool,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_STATUS_HELP)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Where to write the model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Loss history CSV (defaults to <model>.loss.csv).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Hidden layer widths, W[,W...].
    #[arg(long, default_value = "10", value_delimiter = ',', value_parser = parse_width)]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub target_loss: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Min-max scale inputs (scaler is stored in the model).
    #[arg(long)]
    pub normalize: bool,
    /// Keep the dataset order fixed across epochs.
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Argmax,
    Threshold,
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    #[arg(long, value_enum, default_value_t = RuleArg::Argmax)]
    pub rule: RuleArg,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl RuleArgs {
    fn to_rule(&self) -> Result<DecisionRule> {
        match self.rule {
            RuleArg::Argmax => Ok(DecisionRule::argmax()),
            RuleArg::Threshold => DecisionRule::threshold(self.threshold),
        }
    }
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_STATUS_HELP)]
pub struct EvalArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Compute the regression fit on this training CSV instead of the test set.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Directory for confusion.csv, frequency.txt and regression.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub rule: RuleArgs,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_STATUS_HELP)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Six values v1,v2,v3,i1,i2,i3.
    #[arg(long, conflicts_with = "row", required_unless_present = "row")]
    pub sample: Option<String>,
    /// One dataset CSV row (class,v1,...,i3); the class column is ignored.
    #[arg(long)]
    pub row: Option<String>,
    #[command(flatten)]
    pub rule: RuleArgs,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_STATUS_HELP)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    /// Consecutive fault frames required before notifying.
    #[arg(long, default_value_t = 3)]
    pub debounce: usize,
    #[arg(long, default_value_t = 16)]
    pub max_connections: usize,
    /// Append-only event log.
    #[arg(long, default_value = "events.log")]
    pub event_log: PathBuf,
    #[command(flatten)]
    pub rule: RuleArgs,
}

#[derive(Debug, Args)]
#[command(after_help = EXIT_STATUS_HELP)]
pub struct ReplayArgs {
    /// Dataset CSV or frame log.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 7878)]
    pub port: u16,
    /// Frames per second.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Source id for frames built from dataset rows.
    #[arg(long, default_value = "replay")]
    pub source: String,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    /// Write to a file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for an error, as listed in the help text.
pub fn exit_status(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Dimension { .. } | Error::Length { .. } => 2,
        Error::Io(_) => 3,
        Error::Parse { .. } => 4,
        Error::Divergence { .. } => 5,
        Error::Protocol(_) => 6,
        Error::Connect { .. } | Error::Bind { .. } => 7,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command, &mut io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("motorfault: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Gen(args) => run_gen(&args, out),
        Command::Train(args) => run_train(&args, out),
        Command::Eval(args) => run_eval(&args, out),
        Command::Classify(args) => run_classify(&args, out),
        Command::Serve(args) => run_serve(&args, out),
        Command::Replay(args) => run_replay(&args, out),
        Command::Table1(args) => run_table1(&args, out),
    }
}

fn with_path(path: &Path, e: io::Error) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| with_path(path, e))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::parse_csv(&read_text(path)?, &path.display().to_string())
}

fn read_model(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).map_err(|e| with_path(path, e))?;
    load_model(&bytes).map_err(|e| match e {
        Error::Parse { line, reason, .. } => Error::Parse {
            source_name: path.display().to_string(),
            line,
            reason,
        },
        other => other,
    })
}

fn run_gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(Error::usage(format!("noise must be non-negative, got {}", args.noise)));
    }
    let (train, test) = if args.paper_scale && !args.two_component {
        generate_paper_scale_with_noise(args.seed, args.noise)?
    } else {
        let mut spec = GeneratorSpec::new(args.counts.unwrap_or(PAPER_TRAIN_COUNTS), args.seed)
            .with_relative_noise(args.noise);
        spec.two_component = args.two_component;
        generate_train_test(&spec, args.test_counts.unwrap_or(REFERENCE_TEST_COUNTS))?
    };
    write_file(&args.train, train.to_csv())?;
    writeln!(out, "wrote {} training samples to {}", train.len(), args.train.display())?;
    if let Some(path) = &args.test {
        write_file(path, test.to_csv())?;
        writeln!(out, "wrote {} test samples to {}", test.len(), path.display())?;
    }
    Ok(())
}

fn run_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_dataset(&args.train)?;
    let config = NetworkConfig {
        hidden_layers: args.hidden.clone(),
        learning_rate: args.lr,
        max_epochs: args.epochs,
        target_loss: args.target_loss,
        seed: args.seed,
        shuffle_each_epoch: !args.no_shuffle,
        normalize_inputs: args.normalize,
        ..NetworkConfig::motor()
    };
    let (net, report) = train(&config, &data)?;
    write_file(&args.model, save_model(&net))?;
    let report_path = args.report.clone().unwrap_or_else(|| {
        let mut p = args.model.clone().into_os_string();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    write_file(&report_path, report.loss_history_csv())?;
    writeln!(
        out,
        "trained {} on {} samples: {} epochs, final loss {}{}",
        layout(&net),
        data.len(),
        report.epochs_run,
        report.final_loss,
        if report.stopped_early { " (target reached)" } else { "" }
    )?;
    writeln!(out, "model written to {}", args.model.display())?;
    writeln!(out, "loss history written to {}", report_path.display())?;
    Ok(())
}

fn layout(net: &Network) -> String {
    let mut widths = vec![net.input_dim().to_string()];
    widths.extend(net.layers().iter().map(|l| l.out_dim().to_string()));
    widths.join("-")
}

fn run_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let rule = args.rule.to_rule()?;
    let net = read_model(&args.model)?;
    let test = read_dataset(&args.test)?;
    let (matrix, accuracy) = evaluate(&net, &test, &rule)?;
    let report = frequency_report(&matrix);
    let fit_data = match &args.train {
        Some(path) => read_dataset(path)?,
        None => test.clone(),
    };
    let fit = regression_fit(&net, &fit_data)?;

    write!(out, "{report}")?;
    writeln!(out)?;
    writeln!(out, "confusion matrix (rows: true class, columns: predicted)")?;
    write!(out, "{}", matrix.to_csv())?;
    writeln!(out)?;
    writeln!(out, "accuracy {accuracy:.6}")?;
    writeln!(
        out,
        "regression r {:.6} over {} points{}",
        fit.r,
        fit.points.len(),
        if fit.degenerate { " (degenerate)" } else { "" }
    )?;

    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|e| with_path(dir, e))?;
        write_file(&dir.join("confusion.csv"), matrix.to_csv())?;
        write_file(
            &dir.join("frequency.txt"),
            format!("{report}\naccuracy {accuracy:.6}\nregression r {:.6}\n", fit.r),
        )?;
        write_file(&dir.join("regression.csv"), fit.to_csv())?;
        writeln!(out, "reports written to {}", dir.display())?;
    }
    Ok(())
}

fn parse_sample_fields(text: &str) -> Result<PhaseSample> {
    let fields: Vec<&str> = text.trim().split(',').collect();
    let values = match fields.len() {
        n if n == INPUT_DIM => &fields[..],
        n if n == INPUT_DIM + 1 => &fields[1..],
        n => return Err(Error::usage(format!("expected {INPUT_DIM} values (or a CSV row), got {n} fields"))),
    };
    let values: Vec<f64> = values
        .iter()
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::usage(format!("`{v}` is not a number"))))
        .collect::<Result<_>>()?;
    PhaseSample::try_from_slice(&values)
}

fn run_classify(args: &ClassifyArgs, out: &mut dyn Write) -> Result<()> {
    let rule = args.rule.to_rule()?;
    let net = read_model(&args.model)?;
    let text = args.sample.as_deref().or(args.row.as_deref()).unwrap_or_default();
    let sample = parse_sample_fields(text)?;
    let result = classify(&net, &sample, &rule)?;
    writeln!(out, "{}", result.predicted)?;
    let activations: Vec<String> = result.outputs.iter().map(|a| format!("{a:.6}")).collect();
    writeln!(out, "activations {}", activations.join(" "))?;
    writeln!(out, "margin {:.6}", result.margin)?;
    Ok(())
}

fn run_serve(args: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let net = read_model(&args.model)?;
    let cfg = StreamConfig {
        host: args.host.clone(),
        port: args.port,
        debounce_frames: args.debounce,
        rule: args.rule.to_rule()?,
        max_connections: args.max_connections,
        event_log: Some(args.event_log.clone()),
        echo_events: true,
    };
    let server = stream::Server::bind(Arc::new(net), cfg)?;
    let handle: ShutdownHandle = server.shutdown_handle();
    ctrlc::set_handler(move || handle.shutdown())
        .map_err(|e| Error::usage(format!("cannot install interrupt handler: {e}")))?;
    writeln!(out, "listening on {}", server.local_addr())?;
    out.flush()?;
    let summary = server.run()?;
    writeln!(
        out,
        "shut down: {} connections, {} frames, {} errors, {} events",
        summary.connections, summary.frames, summary.errors, summary.events
    )?;
    Ok(())
}

fn run_replay(args: &ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let opts = ReplayOptions {
        rate_hz: args.rate,
        source_id: args.source.clone(),
        start_timestamp: 0,
    };
    let frames = load_frames(&read_text(&args.input)?, &args.input.display().to_string(), &opts)?;
    let mut write_err = None;
    let report = replay(&frames, (args.host.as_str(), args.port), args.rate, |frame, response| {
        let line = match response {
            Response::Ok { code, activation } => format!("{} OK {code} {activation}", frame.timestamp),
            Response::Err(reason) => format!("{} ERR {reason}", frame.timestamp),
        };
        if let Err(e) = writeln!(out, "{line}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    writeln!(out, "{} frames sent, {} errors", report.responses.len(), report.protocol_errors())?;
    match report.protocol_errors() {
        0 => Ok(()),
        n => Err(Error::Protocol(format!("{n} frames were rejected by the server"))),
    }
}

fn run_table1(args: &Table1Args, out: &mut dyn Write) -> Result<()> {
    let csv = table1_fixture().to_csv_fixed(6);
    match &args.out {
        Some(path) => write_file(path, csv),
        None => Ok(out.write_all(csv.as_bytes())?),
    }
}
