use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinbath::harness::{
    self, Agreement, ExperimentConfig, ModelSource, OutputFormat, OutputSpec, TimeGrid,
};
use spinbath::model::{CouplingLaw, PhaseLaw, RandomModelSpec};
use spinbath::Error;

/// Decoherence of a central spin coupled to a spin bath: closed-form
/// simulation, lemma-based prediction and a state-vector oracle.
#[derive(Parser)]
#[command(name = "spinbath", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample r(t), |r(t)|^2 and an optional observable on a time grid.
    Simulate(ExperimentArgs),
    /// Run the lemma checks and report a verdict.
    Predict(ExperimentArgs),
    /// Run simulation and prediction and check that they agree.
    Compare(ExperimentArgs),
    /// Dump the merged spectrum of r(t) as CSV.
    Spectrum(ExperimentArgs),
    /// Check closed-form expectations against the brute-force state vector.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config. Flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON model document {a, b, spins: [{alpha, beta, g}]}.
    #[arg(long, conflicts_with_all = ["n", "seed", "equal_coupling", "g_max", "uniform_phase"])]
    model: Option<PathBuf>,
    /// Number of bath spins for a random model.
    #[arg(long)]
    n: Option<usize>,
    /// Seed of the random model.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the same coupling g for every spin.
    #[arg(long, value_name = "G", conflicts_with = "g_max")]
    equal_coupling: Option<f64>,
    /// Draw couplings uniformly on (0, G_MAX] (the default, with G_MAX = 1).
    #[arg(long)]
    g_max: Option<f64>,
    /// Draw uniform phases for the amplitudes.
    #[arg(long)]
    uniform_phase: bool,
    #[arg(long)]
    t_start: Option<f64>,
    /// End of the time grid; defaults to 20 / mean|g|.
    #[arg(long)]
    t_end: Option<f64>,
    /// Number of grid points; defaults to 2000.
    #[arg(long)]
    steps: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct OracleArgs {
    /// Largest bath size drawn.
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Simulate,
    Predict,
    Compare,
    Spectrum,
}

fn build_config(
    args: &ExperimentArgs,
    kind: Kind,
) -> spinbath::Result<(ExperimentConfig, Option<OutputFormat>)> {
    let mut config = match &args.config {
        Some(path) => Some(ExperimentConfig::from_file(path)?),
        None => None,
    };

    let random_flags = args.n.is_some()
        || args.seed.is_some()
        || args.equal_coupling.is_some()
        || args.g_max.is_some()
        || args.uniform_phase;
    let source = if let Some(path) = &args.model {
        Some(ModelSource::Inline(harness::load_model_document(path)?))
    } else if random_flags {
        let mut spec = match config.as_ref().map(|c| &c.model) {
            Some(ModelSource::Random(spec)) => *spec,
            _ => RandomModelSpec::new(0, 0, CouplingLaw::default(), PhaseLaw::default()),
        };
        if let Some(n) = args.n {
            spec.n = n;
        }
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        if let Some(g) = args.equal_coupling {
            spec.coupling = CouplingLaw::Equal { g };
        }
        if let Some(g_max) = args.g_max {
            spec.coupling = CouplingLaw::UniformPositive { g_max };
        }
        if args.uniform_phase {
            spec.phase = PhaseLaw::Uniform;
        }
        if spec.n == 0 {
            return Err(Error::Config {
                path: "--n".into(),
                message: "a random model needs --n of at least 1".into(),
            });
        }
        Some(ModelSource::Random(spec))
    } else {
        None
    };
    let mut config = match (config.take(), source) {
        (Some(mut c), Some(s)) => {
            c.model = s;
            c
        }
        (Some(c), None) => c,
        (None, Some(s)) => ExperimentConfig::new(s),
        (None, None) => {
            return Err(Error::Config {
                path: "model".into(),
                message: "give --config, --model or --n".into(),
            })
        }
    };

    if args.t_start.is_some() || args.t_end.is_some() || args.steps.is_some() {
        let base = match config.time_grid {
            Some(grid) => grid,
            None => config.resolve()?.grid,
        };
        config.time_grid = Some(TimeGrid {
            t_start: args.t_start.unwrap_or(base.t_start),
            t_end: args.t_end.unwrap_or(base.t_end),
            steps: args.steps.unwrap_or(base.steps),
        });
    }

    let default_format = match kind {
        Kind::Simulate | Kind::Spectrum => OutputFormat::Csv,
        Kind::Predict | Kind::Compare => OutputFormat::Json,
    };
    let format = args.format.map(|f| match f {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    });
    if let Some(path) = &args.output {
        let format = format
            .or(config.output.as_ref().map(|o| o.format))
            .unwrap_or(default_format);
        config.output = Some(OutputSpec {
            format,
            path: path.clone(),
        });
    } else if let (Some(format), Some(out)) = (format, config.output.as_mut()) {
        out.format = format;
    }
    let stdout_format = match &config.output {
        Some(_) => None,
        None => Some(format.unwrap_or(default_format)),
    };
    Ok((config, stdout_format))
}

fn run_experiment(args: &ExperimentArgs, kind: Kind) -> spinbath::Result<ExitCode> {
    let (config, stdout_format) = build_config(args, kind)?;
    let exp = config.resolve()?;
    if let Some(format) = stdout_format {
        let available = match kind {
            Kind::Simulate => true,
            Kind::Predict | Kind::Compare => format == OutputFormat::Json,
            Kind::Spectrum => format == OutputFormat::Csv,
        };
        if !available {
            return Err(Error::Config {
                path: "--format".into(),
                message: "format not available for this subcommand".into(),
            });
        }
    }

    let mut code = ExitCode::SUCCESS;
    let text = match kind {
        Kind::Simulate => {
            let series = harness::run_simulate(&exp)?;
            match stdout_format {
                Some(OutputFormat::Json) => harness::series_to_json(&series),
                _ => harness::series_to_csv(&series),
            }
        }
        Kind::Predict => harness::report_to_json(&harness::run_predict(&exp)?),
        Kind::Compare => {
            let report = harness::run_compare(&exp)?;
            if let Agreement::Tension(msg) = &report.agreement {
                eprintln!("tension: {msg}");
                code = ExitCode::from(1);
            }
            harness::report_to_json(&report)
        }
        Kind::Spectrum => harness::run_spectrum(&exp)?.to_csv(),
    };
    if stdout_format.is_some() {
        print!("{text}");
    }
    Ok(code)
}

fn run_oracle(args: &OracleArgs) -> spinbath::Result<ExitCode> {
    let summary = harness::run_oracle_check(args.n_max, args.cases, args.seed)?;
    match &summary.failure {
        None => {
            println!(
                "oracle-check passed: {} cases, max |error| = {:e}",
                summary.cases, summary.max_abs_error
            );
            Ok(ExitCode::SUCCESS)
        }
        Some(failure) => {
            eprintln!(
                "oracle-check FAILED at case {} (case seed {}): closed form {:e}, oracle {:e}",
                failure.case, failure.case_seed, failure.closed_form, failure.oracle
            );
            println!("{}", harness::report_to_json(failure).trim_end());
            Ok(ExitCode::from(1))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run_experiment(a, Kind::Simulate),
        Command::Predict(a) => run_experiment(a, Kind::Predict),
        Command::Compare(a) => run_experiment(a, Kind::Compare),
        Command::Spectrum(a) => run_experiment(a, Kind::Spectrum),
        Command::OracleCheck(a) => run_oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
