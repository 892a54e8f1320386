use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coopreg::config::{self, ConfigError, ExperimentConfig, OutputConfig};
use coopreg::examples;
use coopreg::linalg::Tolerances;
use coopreg::pipeline::{self, PipelineError, RunOptions, Status};
use coopreg::scenario::Scenario;
use coopreg::sim::SimError;

const EXIT_CONFIG: u8 = 2;
const EXIT_CERTIFICATION: u8 = 3;
const EXIT_THRESHOLD: u8 = 4;

/// Robust output regulation with cooperating parallel actuators.
#[derive(Debug, Parser)]
#[command(name = "coopreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a built-in experiment (exp1-single, exp1-multi, exp2-single, exp2-multi).
    Example {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the experiment described by a TOML file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Certify a configuration (file or built-in name) without simulating.
    Certify {
        config: String,
        /// Directory for the certification report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the TOML configuration of a built-in experiment.
    DumpConfig { name: String },
}

#[derive(Debug, Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// `vertex`, `center` or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    /// Output directory for the CSV, report and metrics files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulate even when certification fails.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    decimate: Option<usize>,
    /// Include every state coordinate in the CSV.
    #[arg(long)]
    full_state: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::CertificationFailed(_) => EXIT_CERTIFICATION,
            PipelineError::Simulation(SimError::Diverged { .. }) => EXIT_THRESHOLD,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn builtin(name: &str) -> Result<Scenario, Failure> {
    examples::scenario(name).map_err(|e| config_failure(e.to_string()))
}

fn apply(scenario: &mut Scenario, flags: &RunFlags) -> Result<(), Failure> {
    let s = &mut scenario.sim;
    if let Some(seed) = flags.seed {
        s.seed = seed;
    }
    if let Some(dt) = flags.dt {
        s.dt = dt;
    }
    if let Some(h) = flags.horizon {
        s.horizon = h;
    }
    if let Some(d) = flags.decimate {
        s.decimate = d;
    }
    if let Some(w) = &flags.w {
        s.w = config::parse_w(w).map_err(|e| config_failure(format!("--w: {e}")))?;
    }
    if !(s.dt > 0.0) || !(s.horizon >= 0.0) || s.decimate == 0 {
        return Err(config_failure("dt must be positive, horizon nonnegative and decimate at least 1"));
    }
    Ok(())
}

fn run_scenario(scenario: &Scenario, flags: &RunFlags, default_out: PathBuf, full_state: bool) -> Result<(), Failure> {
    let options = RunOptions {
        force: flags.force,
        out: Some(flags.out.clone().unwrap_or(default_out)),
        full_state: full_state || flags.full_state,
    };
    let outcome = pipeline::run(scenario, &options)?;
    let s = &outcome.summary;
    println!(
        "{}: tail_max_error = {:.6e}, tail_max_sharing = {:.6e}, status = {:?}",
        s.name, s.tail_max_error, s.tail_max_sharing, s.status
    );
    for path in &outcome.artifacts {
        println!("wrote {}", path.display());
    }
    match s.status {
        Status::Pass => Ok(()),
        Status::CertificationFailed => Err(Failure {
            code: EXIT_CERTIFICATION,
            message: "simulation met the thresholds but the design is not certified".into(),
        }),
        Status::ThresholdFailed => Err(Failure {
            code: EXIT_THRESHOLD,
            message: format!(
                "thresholds violated (regulation {}, sharing {})",
                if s.regulation_pass { "ok" } else { "failed" },
                if s.sharing_pass { "ok" } else { "failed" }
            ),
        }),
    }
}

fn load_config_or_example(source: &str) -> Result<Scenario, Failure> {
    let path = Path::new(source);
    if path.exists() {
        Ok(ExperimentConfig::load(path)?.to_scenario()?)
    } else {
        builtin(source)
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Example { name, flags } => {
            let mut scenario = builtin(&name)?;
            apply(&mut scenario, &flags)?;
            run_scenario(&scenario, &flags, PathBuf::from(OutputConfig::default().dir), false)
        }
        Command::Run { config, flags } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mut scenario = cfg.to_scenario()?;
            apply(&mut scenario, &flags)?;
            run_scenario(&scenario, &flags, PathBuf::from(&cfg.output.dir), cfg.output.full_state)
        }
        Command::Certify { config, out } => {
            let scenario = load_config_or_example(&config)?;
            pipeline::check_assumptions(&scenario)?;
            let (_, report) = pipeline::certify_scenario(&scenario, &Tolerances::default())?;
            print!("{report}");
            if let Some(dir) = out {
                let path = pipeline::write_report(&dir, &scenario.name, &report)?;
                println!("wrote {}", path.display());
            }
            if report.passed() {
                Ok(())
            } else {
                Err(PipelineError::CertificationFailed(report).into())
            }
        }
        Command::DumpConfig { name } => {
            let scenario = builtin(&name)?;
            print!("{}", ExperimentConfig::from_scenario(&scenario, OutputConfig::default()).to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
