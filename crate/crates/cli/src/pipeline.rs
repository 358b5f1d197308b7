//! Orchestration of the CLI commands on top of `isf-core`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use isf_core::analysis::{ballistic_isf, dsf, eval_isf_model, fit_isf_model, DsfTrace, FitResult, Window};
use isf_core::dynamics::{is_commensurate, kick_matrix, snap_q, working_basis_size, KickMatrix, WorkingBasis};
use isf_core::isf::{check_time_step, isf_ensemble, isf_exact_trace, max_time_step, EnsembleSpec, IsfTrace, TimeGrid};
use isf_core::spectrum::{band_report, diagonalize, thermal_weights, Spectrum, ThermalWeights};
use isf_core::system::{build_hamiltonian, eval_potential, read_tabulated, Boundary, Grid, PotentialSpec};
use serde_json::{json, Map, Value};

use crate::config::{OutputFormat, PotentialConfig, RunConfig};
use crate::error::{io_error, CliError};
use crate::io;

/// Everything that does not depend on the random phases.
pub struct Prepared {
    pub grid: Grid<f64>,
    pub spectrum: Spectrum<f64>,
    pub weights: ThermalWeights<f64>,
    pub kick: KickMatrix<f64>,
    pub times: TimeGrid<f64>,
    pub q_requested: f64,
    pub q_used: f64,
    /// Winding number of `exp(iqx)` on a ring.
    pub q_harmonic: Option<i64>,
    pub notes: Vec<String>,
}

fn potential_spec(config: &RunConfig, grid: &Grid<f64>, base: &Path) -> Result<PotentialSpec<f64>, CliError> {
    Ok(match &config.potential {
        PotentialConfig::Free => PotentialSpec::Free,
        PotentialConfig::Harmonic { hbar_omega_mev, center_a } => {
            let mut spec = PotentialSpec::harmonic_from_quantum(*hbar_omega_mev, config.mass_u);
            if let PotentialSpec::Harmonic { center, .. } = &mut spec {
                *center = *center_a;
            }
            spec
        }
        PotentialConfig::Cosine { amplitude_mev, cell_a } => {
            PotentialSpec::PeriodicCosine { amplitude: *amplitude_mev, cell_length: *cell_a }
        }
        PotentialConfig::Tabulated { file } => {
            let path = base.join(file);
            let f = std::fs::File::open(&path).map_err(|e| io_error(&path, e))?;
            let samples = read_tabulated(std::io::BufReader::new(f), grid)?;
            PotentialSpec::Tabulated { samples }
        }
    })
}

/// Builds the spectrum, thermal weights and kick matrix; `base` resolves
/// relative file names in the configuration.
pub fn prepare(config: &RunConfig, base: &Path) -> Result<Prepared, CliError> {
    let grid =
        Grid::new(config.boundary, config.length_a, config.points).map_err(|e| CliError::from(e).context("grid"))?;
    let spec = potential_spec(config, &grid, base).map_err(|e| e.context("potential"))?;
    let v = eval_potential(&spec, &grid).map_err(|e| CliError::from(e).context("potential"))?;
    let h = build_hamiltonian(&grid, &v, config.mass_u).map_err(|e| CliError::from(e).context("hamiltonian"))?;
    let spectrum = diagonalize(&h).map_err(|e| CliError::from(e).context("spectrum"))?;
    let weights = thermal_weights(&spectrum, config.temperature_k, config.weight_threshold)
        .map_err(|e| CliError::from(e).context("thermal weights"))?;

    let mut notes = Vec::new();
    let (q_used, q_harmonic) = match grid.boundary() {
        Boundary::Box => (config.q_inv_a, None),
        Boundary::Periodic => {
            if !is_commensurate(config.q_inv_a, &grid) && config.strict_commensurate {
                return Err(CliError::Config(format!(
                    "scattering.q_invA = {} is not a multiple of 2π/L = {} 1/Å and strict commensurability is on",
                    config.q_inv_a,
                    std::f64::consts::TAU / grid.length()
                )));
            }
            let s = snap_q(config.q_inv_a, &grid).map_err(|e| CliError::from(e).context("scattering"))?;
            if s.snapped != s.requested {
                notes.push(format!(
                    "q snapped from {} to {} 1/Å (winding {}, relative shift {:.3e})",
                    s.requested, s.snapped, s.harmonic, s.relative_shift
                ));
            }
            (s.snapped, Some(s.harmonic))
        }
    };
    let rows = working_basis_size(&spectrum, &weights, q_used, config.mass_u, config.working_basis);
    let kick = kick_matrix(&spectrum, q_used, rows, weights.retained(), config.spill_tolerance)
        .map_err(|e| CliError::from(e).context("kick matrix"))?;
    let times = TimeGrid::new(config.t_max_ps, config.n_times).map_err(|e| CliError::from(e).context("time grid"))?;
    check_time_step(&times, &spectrum.energies()[..rows]).map_err(|e| CliError::from(e).context("time grid"))?;
    Ok(Prepared { grid, spectrum, weights, kick, times, q_requested: config.q_inv_a, q_used, q_harmonic, notes })
}

/// Ordered key/value run record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest(pub Vec<(String, String)>);

impl Manifest {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect::<Map<_, _>>())
    }
}

pub struct Simulation {
    pub ensemble: IsfTrace<f64>,
    pub exact: IsfTrace<f64>,
    pub manifest: Manifest,
    pub spectrum_csv: String,
}

/// Ensemble and exact traces for a configuration.
pub fn simulate(config: &RunConfig, base: &Path, workers: usize) -> Result<Simulation, CliError> {
    let start = Instant::now();
    let p = prepare(config, base)?;
    let spec = EnsembleSpec { n_samples: config.n_samples, seed: config.seed, workers };
    let mut ensemble = isf_ensemble(&p.weights, &p.kick, p.q_requested, &p.times, spec)
        .map_err(|e| CliError::from(e).context("ensemble"))?;
    let mut exact = isf_exact_trace(&p.weights, &p.kick, p.q_requested, &p.times)
        .map_err(|e| CliError::from(e).context("exact trace"))?;
    ensemble.digest = config.digest.clone();
    exact.digest = config.digest.clone();

    let mut m = Manifest::default();
    m.push("config_digest", &config.digest);
    m.push("seed", config.seed);
    m.push("n_samples", config.n_samples);
    m.push("workers", if workers == 0 { "auto".to_string() } else { workers.to_string() });
    m.push(
        "boundary",
        match config.boundary {
            Boundary::Box => "box",
            Boundary::Periodic => "periodic",
        },
    );
    m.push("length_A", io::num(p.grid.length()));
    m.push("points", p.grid.n_points());
    m.push("spacing_A", io::num(p.grid.spacing()));
    m.push("q_requested_invA", io::num(p.q_requested));
    m.push("q_used_invA", io::num(p.q_used));
    if let Some(k) = p.q_harmonic {
        m.push("q_winding", k);
    }
    m.push("retained_states", p.weights.retained());
    m.push(
        "working_basis",
        match config.working_basis {
            WorkingBasis::Full => "full",
            WorkingBasis::KickEnergy => "kick_energy",
        },
    );
    m.push("working_basis_states", p.kick.rows());
    m.push("spill_column_norm_defect", io::num(p.kick.unitarity_defect()));
    m.push("spill_tolerance", io::num(config.spill_tolerance));
    m.push("log_partition_function", io::num(p.weights.log_partition_function()));
    m.push("t_max_ps", io::num(p.times.t_max()));
    m.push("n_times", p.times.len());
    m.push("dt_ps", io::num(p.times.step()));
    m.push("dt_bound_ps", io::num(max_time_step(&p.spectrum.energies()[..p.kick.rows()])));
    if config.boundary == Boundary::Periodic {
        if let PotentialConfig::Cosine { amplitude_mev, .. } = config.potential {
            if let Ok(report) = band_report(&p.spectrum, amplitude_mev) {
                m.push("bands_below_barrier", report.count());
            }
        }
    }
    for (i, n) in p.notes.iter().enumerate() {
        m.push(&format!("note_{i}"), n);
    }
    m.push("wall_time_s", format!("{:.3}", start.elapsed().as_secs_f64()));

    let pops = p.weights.populations();
    let mut spectrum_csv = format!("# config_digest={}\nindex,energy_meV,population\n", config.digest);
    for (i, e) in p.spectrum.energies().iter().enumerate() {
        spectrum_csv.push_str(&format!("{i},{},{}\n", io::num(*e), io::num(pops.get(i).copied().unwrap_or(0.0))));
    }
    Ok(Simulation { ensemble, exact, manifest: m, spectrum_csv })
}

pub const ENSEMBLE_FILE: &str = "isf_ensemble.csv";
pub const EXACT_FILE: &str = "isf_exact.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const JSON_FILE: &str = "run.json";

fn trace_json(t: &IsfTrace<f64>) -> Value {
    json!({
        "q_requested_invA": t.q_requested,
        "q_used_invA": t.q_used,
        "n_samples": t.n_samples,
        "t_ps": t.times,
        "re_I": t.values.iter().map(|v| v.re).collect::<Vec<_>>(),
        "im_I": t.values.iter().map(|v| v.im).collect::<Vec<_>>(),
        "std_err": t.std_err,
    })
}

pub fn write_simulation(sim: &Simulation, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        io::write_file(&path, text)?;
        written.push(path);
        Ok(())
    };
    put(ENSEMBLE_FILE, &io::format_trace_csv(&sim.ensemble))?;
    put(EXACT_FILE, &io::format_trace_csv(&sim.exact))?;
    put(SPECTRUM_FILE, &sim.spectrum_csv)?;
    put(MANIFEST_FILE, &sim.manifest.to_text())?;
    if formats.contains(&OutputFormat::Json) {
        let doc = json!({
            "manifest": sim.manifest.to_json(),
            "ensemble": trace_json(&sim.ensemble),
            "exact": trace_json(&sim.exact),
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        put(JSON_FILE, &text)?;
    }
    Ok(written)
}

/// Uniform times on `[0, t_max]`; a single point means `t = 0` only.
pub fn oracle_times(t_max: f64, n_times: usize) -> Result<Vec<f64>, CliError> {
    match n_times {
        0 => Err(CliError::Usage("at least one time point is needed".into())),
        1 => Ok(vec![0.0]),
        _ => Ok(TimeGrid::new(t_max, n_times)?.times().to_vec()),
    }
}

pub fn oracle(mass: f64, temperature: f64, q: f64, times: &[f64]) -> Result<IsfTrace<f64>, CliError> {
    Ok(ballistic_isf(mass, temperature, q, times)?)
}

pub struct FitOutput {
    pub fit: FitResult<f64>,
    pub model: Vec<f64>,
}

pub fn fit(trace: &IsfTrace<f64>, t_fit_max: f64) -> Result<FitOutput, CliError> {
    let fit = fit_isf_model(trace, t_fit_max)?;
    let model =
        trace.times.iter().map(|&t| if fit.degenerate { 1.0 } else { eval_isf_model(&fit.params, t) }).collect();
    Ok(FitOutput { fit, model })
}

pub fn structure_factor(trace: &IsfTrace<f64>, window: Window) -> Result<DsfTrace<f64>, CliError> {
    Ok(dsf(trace, window)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareOptions {
    /// Absolute bound on `|ΔI|`; when absent, statistical traces are judged
    /// against `sigmas` standard errors.
    pub tolerance: Option<f64>,
    pub sigmas: f64,
    /// Share of time points that must pass in the statistical mode.
    pub coverage: f64,
    /// Compare even when `q_used` differs.
    pub force: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { tolerance: None, sigmas: 5.0, coverage: 0.95, force: false }
    }
}

/// Default absolute tolerance when neither trace carries standard errors.
pub const DEFAULT_COMPARE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub max_deviation: f64,
    pub rms_deviation: f64,
    pub n_points: usize,
    /// Share of points within the statistical bound, when one applies.
    pub within_fraction: Option<f64>,
    pub criterion: String,
    pub pass: bool,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "n_points = {}\nmax_abs_deviation = {}\nrms_abs_deviation = {}\n",
            self.n_points,
            io::num(self.max_deviation),
            io::num(self.rms_deviation)
        );
        if let Some(f) = self.within_fraction {
            s.push_str(&format!("within_fraction = {f:.6}\n"));
        }
        s.push_str(&format!("criterion = {}\nresult = {}\n", self.criterion, if self.pass { "PASS" } else { "FAIL" }));
        s
    }
}

pub fn compare(a: &IsfTrace<f64>, b: &IsfTrace<f64>, opts: CompareOptions) -> Result<CompareReport, CliError> {
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1e-12))
    {
        return Err(CliError::Usage("traces are sampled on different time grids".into()));
    }
    if (a.q_used - b.q_used).abs() > 1e-9 * a.q_used.abs() && !opts.force {
        return Err(CliError::Usage(format!(
            "traces use different q ({} vs {} 1/Å); pass --force to compare anyway",
            a.q_used, b.q_used
        )));
    }
    let dev: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).collect();
    let n = dev.len();
    let max_deviation = dev.iter().copied().fold(0.0, f64::max);
    let rms_deviation = (dev.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
    let se: Option<Vec<f64>> = match (&a.std_err, &b.std_err) {
        (Some(x), Some(y)) => Some(x.iter().zip(y).map(|(p, q)| (p * p + q * q).sqrt()).collect()),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    };
    let (within_fraction, criterion, pass) = match (opts.tolerance, se) {
        (Some(tol), _) => (None, format!("max |dI| <= {tol:e}"), max_deviation <= tol),
        (None, Some(se)) => {
            // Rounding-level slack for points where the standard error vanishes.
            let ok = dev.iter().zip(&se).filter(|(d, s)| **d <= opts.sigmas * **s + 1e-12).count();
            let frac = ok as f64 / n as f64;
            (
                Some(frac),
                format!("|dI| <= {} std_err at >= {} of points", opts.sigmas, opts.coverage),
                frac >= opts.coverage,
            )
        }
        (None, None) => {
            (None, format!("max |dI| <= {DEFAULT_COMPARE_TOLERANCE:e}"), max_deviation <= DEFAULT_COMPARE_TOLERANCE)
        }
    };
    Ok(CompareReport { max_deviation, rms_deviation, n_points: n, within_fraction, criterion, pass })
}
