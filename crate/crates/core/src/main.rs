use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use microgrid_dse::scenario::{self, ScenarioConfig, TRACE_FILE};
use microgrid_dse::{plot, Error, Result};

const EXIT_UNRESOLVED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "microgrid-dse",
    version,
    about = "Dynamic state estimation protection for microgrids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config or a built-in case.
    Run {
        /// Scenario config (JSON).
        config: Option<PathBuf>,
        /// Built-in case instead of a config file.
        #[arg(long, conflicts_with = "config")]
        case: Option<String>,
        /// Output directory.
        #[arg(long, env = "MICROGRID_DSE_OUT")]
        out: Option<PathBuf>,
        /// Override the noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the run duration (seconds); events past it are dropped.
        #[arg(long)]
        duration: Option<f64>,
        /// Exit with code 3 if any window ends UNRESOLVED.
        #[arg(long)]
        strict: bool,
        /// Also write confidence.svg.
        #[arg(long)]
        plot: bool,
        /// Also write the raw merging-unit streams.
        #[arg(long)]
        streams: bool,
        /// Print nothing but errors.
        #[arg(long, short)]
        quiet: bool,
    },
    /// List the built-in case studies.
    ListCases,
    /// Print the JSON config of a built-in case.
    Config { case: String },
    /// Render a trace CSV as an SVG confidence plot.
    Plot {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
    },
}

fn builtin(name: &str) -> Result<ScenarioConfig> {
    scenario::case(name).ok_or_else(|| {
        let names: Vec<&str> = scenario::list_cases().iter().map(|c| c.name).collect();
        Error::Config(format!("unknown case `{name}` (available: {})", names.join(", ")))
    })
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    case: Option<String>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    duration: Option<f64>,
    strict: bool,
    with_plot: bool,
    streams: bool,
    quiet: bool,
) -> Result<u8> {
    let mut cfg = match (&config, &case) {
        (Some(p), _) => ScenarioConfig::load(p)?,
        (None, Some(c)) => builtin(c)?,
        (None, None) => return Err(Error::Config("give a config file or --case".into())),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration = d;
        cfg.events.retain(|e| e.end() <= d);
    }
    cfg.strict |= strict;
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));

    let result = scenario::run(&cfg)?;
    scenario::write_outputs(&result, &dir, streams)?;
    if with_plot {
        plot::emit_plot(&dir.join(TRACE_FILE), &dir.join("confidence.svg"), cfg.thresholds.c_min)?;
    }
    if !quiet {
        print!("{}", result.report.summary());
        println!("outputs in {}", dir.display());
    }
    if cfg.strict && result.report.has_unresolved() {
        eprintln!("unresolved anomaly present (strict mode)");
        return Ok(EXIT_UNRESOLVED);
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            config,
            case,
            out,
            seed,
            duration,
            strict,
            plot,
            streams,
            quiet,
        } => run(config, case, out, seed, duration, strict, plot, streams, quiet),
        Command::ListCases => {
            for c in scenario::list_cases() {
                println!("{:<6}  {}", c.name, c.description);
            }
            Ok(0)
        }
        Command::Config { case } => {
            println!("{}", builtin(&case)?.to_json());
            Ok(0)
        }
        Command::Plot { trace, out, threshold } => {
            let out = out.unwrap_or_else(|| trace.with_extension("svg"));
            plot::emit_plot(&trace, &out, threshold)?;
            println!("{}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(scenario::exit_code(&e) as u8)
        }
    }
}
