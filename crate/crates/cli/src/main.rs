use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use isf_cli::config::parse_with_overrides;
use isf_cli::error::CliError;
use isf_cli::pipeline::{self, CompareOptions};
use isf_cli::{io, presets};
use isf_core::analysis::Window;
use isf_core::units::thermal_time;

#[derive(Parser)]
#[command(name = "isf", version, about = "Intermediate scattering functions from stochastic thermal wave packets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble and exact ISF traces for a configuration.
    Simulate {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(presets::NAMES))]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reject a q that does not fit the ring instead of snapping it.
        #[arg(long)]
        strict_q: bool,
    },
    /// Analytic ISF of a free particle.
    Oracle {
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[arg(long, default_value_t = 300.0)]
        temperature: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, conflicts_with = "t_max_tau")]
        t_max_ps: Option<f64>,
        /// End time in units of ħ/(k_B T).
        #[arg(long, default_value_t = 5.0)]
        t_max_tau: f64,
        #[arg(long, default_value_t = 1001)]
        n_times: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit the two-component model to a trace.
    Fit {
        trace: PathBuf,
        /// End of the fit window, ps; defaults to the end of the trace.
        #[arg(long)]
        t_fit_max: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dynamical structure factor of a trace.
    Dsf {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = WindowArg::Hann)]
        window: WindowArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deviation between two traces on the same time grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Absolute bound on |ΔI|.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Standard errors allowed when a trace carries them.
        #[arg(long, default_value_t = 5.0)]
        sigmas: f64,
        /// Compare traces with different q.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    None,
    Hann,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into())
}

fn out_dir(out: Option<PathBuf>, input: &Path) -> PathBuf {
    out.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Simulate { config, preset, seed, workers, out, strict_q } => {
            let (text, base) = match (&config, &preset) {
                (Some(path), _) => (
                    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                    path.parent().map(Path::to_path_buf).unwrap_or_default(),
                ),
                (None, Some(name)) => (presets::by_name(name).expect("validated by clap").to_string(), PathBuf::new()),
                (None, None) => return Err(CliError::Usage("give --config or --preset".into())),
            };
            let mut overrides: Vec<(String, String)> = std::env::vars().collect();
            if let Some(s) = seed {
                overrides.push(("ISF_ENSEMBLE__SEED".into(), s.to_string()));
            }
            if strict_q {
                overrides.push(("ISF_SCATTERING__STRICT_COMMENSURATE".into(), "true".into()));
            }
            let cfg = parse_with_overrides(&text, overrides)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_directory));
            let sim = pipeline::simulate(&cfg, &base, workers)?;
            for path in pipeline::write_simulation(&sim, &dir, &cfg.formats)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Oracle { mass, temperature, q, t_max_ps, t_max_tau, n_times, out } => {
            let t_max = match t_max_ps {
                Some(t) => t,
                None => t_max_tau * thermal_time(temperature)?,
            };
            let times = pipeline::oracle_times(t_max, n_times)?;
            let trace = pipeline::oracle(mass, temperature, q, &times)?;
            let path = out.join("isf_oracle.csv");
            io::write_file(&path, &io::format_trace_csv(&trace))?;
            eprintln!("wrote {}", path.display());
            Ok(true)
        }
        Command::Fit { trace, t_fit_max, out } => {
            let tr = io::read_trace(&trace)?;
            let t_fit_max = t_fit_max.unwrap_or(*tr.times.last().expect("parser rejects empty traces"));
            let result = pipeline::fit(&tr, t_fit_max)?;
            let dir = out_dir(out, &trace);
            let name = stem(&trace);
            let block = io::format_fit(&result.fit, t_fit_max, &tr.digest);
            io::write_file(&dir.join(format!("{name}_fit.txt")), &block)?;
            io::write_file(
                &dir.join(format!("{name}_model.csv")),
                &io::format_model_csv(&tr.times, &result.model, &tr.digest),
            )?;
            print!("{block}");
            Ok(true)
        }
        Command::Dsf { trace, window, out } => {
            let tr = io::read_trace(&trace)?;
            let w = match window {
                WindowArg::None => Window::None,
                WindowArg::Hann => Window::Hann,
            };
            let d = pipeline::structure_factor(&tr, w)?;
            let path = out_dir(out, &trace).join(format!("{}_dsf.csv", stem(&trace)));
            io::write_file(&path, &io::format_dsf_csv(&d, &tr.digest))?;
            eprintln!("wrote {}", path.display());
            Ok(true)
        }
        Command::Compare { a, b, tolerance, sigmas, force } => {
            let (ta, tb) = (io::read_trace(&a)?, io::read_trace(&b)?);
            let opts = CompareOptions { tolerance, sigmas, force, ..CompareOptions::default() };
            let report = pipeline::compare(&ta, &tb, opts)?;
            print!("{}", report.to_text());
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
