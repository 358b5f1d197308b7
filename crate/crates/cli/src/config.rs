//! Flat `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;

use isf_core::dynamics::{WorkingBasis, DEFAULT_SPILL_TOLERANCE};
use isf_core::ensemble::DEFAULT_SEED;
use isf_core::spectrum::DEFAULT_WEIGHT_THRESHOLD;
use isf_core::system::Boundary;
use isf_core::units::thermal_wavelength;
use sha2::{Digest, Sha256};

/// Prefix of environment variables that override configuration keys, e.g.
/// `ISF_ENSEMBLE__N_SAMPLES=5` for `ensemble.n_samples`.
pub const ENV_PREFIX: &str = "ISF_";

const KEYS: &[&str] = &[
    "system.mass_u",
    "system.temperature_K",
    "grid.boundary",
    "grid.length_A",
    "grid.length_lambda_th",
    "grid.cells",
    "grid.cell_A",
    "grid.points",
    "potential.kind",
    "potential.hbar_omega_meV",
    "potential.center_A",
    "potential.amplitude_meV",
    "potential.cell_A",
    "potential.file",
    "scattering.q_invA",
    "scattering.strict_commensurate",
    "time.t_max_ps",
    "time.t_max_tau_th",
    "time.n_times",
    "ensemble.n_samples",
    "ensemble.seed",
    "numerics.weight_threshold",
    "numerics.spill_tolerance",
    "numerics.working_basis",
    "output.directory",
    "output.formats",
];

/// One problem found while reading a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    /// 1-based line in the configuration text; `None` for missing keys and
    /// environment overrides.
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}: {k}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "{k}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

/// Every problem found in a configuration, in line order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration problem(s):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialConfig {
    Free,
    Harmonic { hbar_omega_mev: f64, center_a: Option<f64> },
    Cosine { amplitude_mev: f64, cell_a: f64 },
    Tabulated { file: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mass_u: f64,
    pub temperature_k: f64,
    pub boundary: Boundary,
    /// Resolved grid length, Å.
    pub length_a: f64,
    pub points: usize,
    pub potential: PotentialConfig,
    pub q_inv_a: f64,
    pub strict_commensurate: bool,
    /// Resolved end time, ps.
    pub t_max_ps: f64,
    pub n_times: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub weight_threshold: f64,
    pub spill_tolerance: f64,
    pub working_basis: WorkingBasis,
    pub output_directory: String,
    pub formats: Vec<OutputFormat>,
    /// SHA-256 of the effective settings, hex.
    pub digest: String,
}

struct Entry {
    value: String,
    line: Option<usize>,
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_with_overrides(text, std::iter::empty::<(String, String)>())
}

/// Parses configuration text, then applies `ISF_*` overrides from `env`.
pub fn parse_with_overrides<I, K, V>(text: &str, env: I) -> Result<RunConfig, ConfigErrors>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut issues = Vec::new();
    let mut entries: BTreeMap<&'static str, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            issues.push(ConfigIssue {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(key) = KEYS.iter().find(|known| known.eq_ignore_ascii_case(k)) else {
            issues.push(ConfigIssue { line: Some(line), key: Some(k.to_string()), message: "unknown key".into() });
            continue;
        };
        if v.is_empty() {
            issues.push(ConfigIssue { line: Some(line), key: Some(key.to_string()), message: "empty value".into() });
            continue;
        }
        if let Some(prev) = entries.get(key) {
            issues.push(ConfigIssue {
                line: Some(line),
                key: Some(key.to_string()),
                message: format!("duplicate key (first set on line {})", prev.line.unwrap_or(0)),
            });
            continue;
        }
        entries.insert(key, Entry { value: v.to_string(), line: Some(line) });
    }
    for (name, value) in env {
        let name = name.as_ref();
        if name.len() <= ENV_PREFIX.len() || !name[..ENV_PREFIX.len()].eq_ignore_ascii_case(ENV_PREFIX) {
            continue;
        }
        let dotted = name[ENV_PREFIX.len()..].replace("__", ".");
        match KEYS.iter().find(|known| known.eq_ignore_ascii_case(&dotted)) {
            Some(key) => {
                entries.insert(key, Entry { value: value.as_ref().trim().to_string(), line: None });
            }
            None => issues.push(ConfigIssue {
                line: None,
                key: Some(name.to_string()),
                message: "environment override names no configuration key".into(),
            }),
        }
    }
    let config = Resolver { entries: &entries, issues: &mut issues }.resolve();
    match config {
        Some(c) if issues.is_empty() => Ok(c),
        _ => {
            issues.sort_by_key(|i| (i.line.is_none(), i.line));
            Err(ConfigErrors(issues))
        }
    }
}

/// SHA-256 over the sorted effective `key = value` settings. Output
/// settings are left out so that the same run written elsewhere keeps its
/// digest.
fn digest(entries: &BTreeMap<&'static str, Entry>) -> String {
    let mut h = Sha256::new();
    for (k, e) in entries.iter().filter(|(k, _)| !k.starts_with("output.")) {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(e.value.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct Resolver<'a> {
    entries: &'a BTreeMap<&'static str, Entry>,
    issues: &'a mut Vec<ConfigIssue>,
}

impl Resolver<'_> {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        let line = self.entries.get(key).and_then(|e| e.line);
        self.issues.push(ConfigIssue { line, key: Some(key.to_string()), message: message.into() });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.raw(key)?.to_string();
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issue(key, format!("expected {what}, got `{raw}`"));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v: f64 = self.parsed(key, "a number")?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.issue(key, format!("must be positive, got {v}"));
            None
        }
    }

    fn required_positive(&mut self, key: &str) -> Option<f64> {
        if self.raw(key).is_none() {
            self.issue(key, "missing required key");
            return None;
        }
        self.positive(key)
    }

    fn count(&mut self, key: &str, min: usize) -> Option<usize> {
        let v: usize = self.parsed(key, "a non-negative integer")?;
        if v >= min {
            Some(v)
        } else {
            self.issue(key, format!("must be at least {min}, got {v}"));
            None
        }
    }

    fn required_count(&mut self, key: &str, min: usize) -> Option<usize> {
        if self.raw(key).is_none() {
            self.issue(key, "missing required key");
            return None;
        }
        self.count(key, min)
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        match self.raw(key)?.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            other => {
                let other = other.to_string();
                self.issue(key, format!("expected true or false, got `{other}`"));
                None
            }
        }
    }

    fn exclusive(&mut self, keys: &[&str], what: &str) -> Option<&'static str> {
        let present: Vec<&'static str> =
            KEYS.iter().copied().filter(|k| keys.contains(k) && self.entries.contains_key(k)).collect();
        match present.as_slice() {
            [one] => Some(one),
            [] => {
                self.issues.push(ConfigIssue {
                    line: None,
                    key: Some(keys.join(" | ")),
                    message: format!("missing {what}"),
                });
                None
            }
            many => {
                let first = many[1];
                self.issue(first, format!("conflicts with {}; give exactly one {what}", many[0]));
                None
            }
        }
    }

    fn resolve(mut self) -> Option<RunConfig> {
        let mass_u = self.required_positive("system.mass_u");
        let temperature_k = self.required_positive("system.temperature_K");

        let boundary = match self.raw("grid.boundary").map(str::to_ascii_lowercase).as_deref() {
            Some("box") => Some(Boundary::Box),
            Some("periodic") => Some(Boundary::Periodic),
            Some(other) => {
                let other = other.to_string();
                self.issue("grid.boundary", format!("expected box or periodic, got `{other}`"));
                None
            }
            None => {
                self.issue("grid.boundary", "missing required key");
                None
            }
        };
        let points = self.required_count("grid.points", isf_core::system::MIN_POINTS);

        let length_key = if self.entries.contains_key("grid.cells") || self.entries.contains_key("grid.cell_A") {
            // A lattice given by cell count and size.
            let cells = self.required_count("grid.cells", 1);
            let cell = self.required_positive("grid.cell_A");
            for other in ["grid.length_A", "grid.length_lambda_th"] {
                if self.entries.contains_key(other) {
                    self.issue(other, "conflicts with grid.cells/grid.cell_A");
                }
            }
            cells.zip(cell).map(|(c, a)| c as f64 * a)
        } else {
            match self.exclusive(&["grid.length_A", "grid.length_lambda_th"], "grid length") {
                Some("grid.length_A") => self.positive("grid.length_A"),
                Some(_) => {
                    let multiple = self.positive("grid.length_lambda_th");
                    match (multiple, mass_u, temperature_k) {
                        (Some(k), Some(m), Some(t)) => thermal_wavelength(m, t).ok().map(|l| k * l),
                        _ => None,
                    }
                }
                None => None,
            }
        };

        let potential = match self.raw("potential.kind").map(str::to_ascii_lowercase).as_deref() {
            None | Some("free") => {
                self.forbid(
                    &[
                        "potential.hbar_omega_meV",
                        "potential.center_A",
                        "potential.amplitude_meV",
                        "potential.cell_A",
                        "potential.file",
                    ],
                    "free",
                );
                Some(PotentialConfig::Free)
            }
            Some("harmonic") => {
                self.forbid(&["potential.amplitude_meV", "potential.cell_A", "potential.file"], "harmonic");
                let hw = self.required_positive("potential.hbar_omega_meV");
                let center = if self.raw("potential.center_A").is_some() {
                    self.parsed::<f64>("potential.center_A", "a number").map(Some)
                } else {
                    Some(None)
                };
                hw.zip(center).map(|(hbar_omega_mev, center_a)| PotentialConfig::Harmonic { hbar_omega_mev, center_a })
            }
            Some("cosine") => {
                self.forbid(&["potential.hbar_omega_meV", "potential.center_A", "potential.file"], "cosine");
                let amplitude = if self.raw("potential.amplitude_meV").is_none() {
                    self.issue("potential.amplitude_meV", "missing required key");
                    None
                } else {
                    match self.parsed::<f64>("potential.amplitude_meV", "a number") {
                        Some(a) if a >= 0.0 && a.is_finite() => Some(a),
                        Some(a) => {
                            self.issue("potential.amplitude_meV", format!("must be non-negative, got {a}"));
                            None
                        }
                        None => None,
                    }
                };
                let cell = if self.raw("potential.cell_A").is_some() {
                    self.positive("potential.cell_A")
                } else if self.raw("grid.cell_A").is_some() {
                    self.parsed::<f64>("grid.cell_A", "a number")
                } else {
                    self.issue("potential.cell_A", "missing required key (or set grid.cell_A)");
                    None
                };
                amplitude.zip(cell).map(|(amplitude_mev, cell_a)| PotentialConfig::Cosine { amplitude_mev, cell_a })
            }
            Some("tabulated") => {
                self.forbid(
                    &["potential.hbar_omega_meV", "potential.center_A", "potential.amplitude_meV", "potential.cell_A"],
                    "tabulated",
                );
                match self.raw("potential.file") {
                    Some(f) => Some(PotentialConfig::Tabulated { file: f.to_string() }),
                    None => {
                        self.issue("potential.file", "missing required key");
                        None
                    }
                }
            }
            Some(other) => {
                let other = other.to_string();
                self.issue("potential.kind", format!("expected free, harmonic, cosine or tabulated, got `{other}`"));
                None
            }
        };

        let q_inv_a = self.required_positive("scattering.q_invA");
        let strict_commensurate = if self.raw("scattering.strict_commensurate").is_some() {
            self.flag("scattering.strict_commensurate")
        } else {
            Some(false)
        };

        let t_max_ps = match self.exclusive(&["time.t_max_ps", "time.t_max_tau_th"], "end time") {
            Some("time.t_max_ps") => self.positive("time.t_max_ps"),
            Some(_) => {
                let multiple = self.positive("time.t_max_tau_th");
                match (multiple, temperature_k) {
                    (Some(k), Some(t)) => isf_core::units::thermal_time(t).ok().map(|tau: f64| k * tau),
                    _ => None,
                }
            }
            None => None,
        };
        let n_times = self.required_count("time.n_times", 2);

        let n_samples =
            if self.raw("ensemble.n_samples").is_some() { self.count("ensemble.n_samples", 1) } else { Some(1) };
        let seed = if self.raw("ensemble.seed").is_some() {
            self.parsed("ensemble.seed", "a non-negative integer")
        } else {
            Some(DEFAULT_SEED)
        };

        let weight_threshold = match self.raw("numerics.weight_threshold") {
            None => Some(DEFAULT_WEIGHT_THRESHOLD),
            Some(_) => match self.parsed::<f64>("numerics.weight_threshold", "a number") {
                Some(v) if v > 0.0 && v < 1.0 => Some(v),
                Some(v) => {
                    self.issue("numerics.weight_threshold", format!("must lie in (0, 1), got {v}"));
                    None
                }
                None => None,
            },
        };
        let spill_tolerance = if self.raw("numerics.spill_tolerance").is_some() {
            self.positive("numerics.spill_tolerance")
        } else {
            Some(DEFAULT_SPILL_TOLERANCE)
        };
        let working_basis = match self.raw("numerics.working_basis").map(str::to_ascii_lowercase).as_deref() {
            None | Some("full") => Some(WorkingBasis::Full),
            Some("kick_energy") => Some(WorkingBasis::KickEnergy),
            Some(other) => {
                let other = other.to_string();
                self.issue("numerics.working_basis", format!("expected full or kick_energy, got `{other}`"));
                None
            }
        };

        let output_directory = self.raw("output.directory").unwrap_or("out").to_string();
        let mut formats = Vec::new();
        // Owned: the loop records issues on `self`.
        #[allow(clippy::unnecessary_to_owned)]
        for f in self.raw("output.formats").unwrap_or("csv").to_string().split(',') {
            match f.trim().to_ascii_lowercase().as_str() {
                "csv" => formats.push(OutputFormat::Csv),
                "json" => formats.push(OutputFormat::Json),
                other => self.issue("output.formats", format!("unknown format `{other}` (csv, json)")),
            }
        }
        if !formats.contains(&OutputFormat::Csv) {
            formats.insert(0, OutputFormat::Csv);
        }

        if let (Some(Boundary::Box), Some(_)) = (boundary, self.raw("grid.cells")) {
            self.issue("grid.cells", "a lattice of cells needs grid.boundary = periodic");
        }

        Some(RunConfig {
            mass_u: mass_u?,
            temperature_k: temperature_k?,
            boundary: boundary?,
            length_a: length_key?,
            points: points?,
            potential: potential?,
            q_inv_a: q_inv_a?,
            strict_commensurate: strict_commensurate?,
            t_max_ps: t_max_ps?,
            n_times: n_times?,
            n_samples: n_samples?,
            seed: seed?,
            weight_threshold: weight_threshold?,
            spill_tolerance: spill_tolerance?,
            working_basis: working_basis?,
            output_directory,
            formats,
            digest: digest(self.entries),
        })
    }

    fn forbid(&mut self, keys: &[&str], kind: &str) {
        for k in keys {
            if self.entries.contains_key(k) {
                self.issue(k, format!("not used by potential.kind = {kind}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn ballistic_preset() {
        let c = parse_config(presets::BALLISTIC).unwrap();
        assert_eq!(c.boundary, Boundary::Box);
        assert_eq!(c.points, 800);
        assert_eq!(c.n_samples, 60);
        assert_eq!(c.mass_u, 1.0);
        assert_eq!(c.temperature_k, 300.0);
        assert_eq!(c.q_inv_a, 1.0);
        let lam: f64 = thermal_wavelength(1.0, 300.0).unwrap();
        assert!((c.length_a - 20.0 * lam).abs() < 1e-12);
        let tau: f64 = isf_core::units::thermal_time(300.0).unwrap();
        assert!((c.t_max_ps - 5.0 * tau).abs() < 1e-15);
        assert_eq!(c.potential, PotentialConfig::Free);
        assert_eq!(c.digest.len(), 64);
    }

    #[test]
    fn co_preset() {
        let c = parse_config(presets::CO_CU100).unwrap();
        assert_eq!(c.boundary, Boundary::Periodic);
        assert!((c.length_a - 80.0 * 2.556).abs() < 1e-12);
        assert_eq!(c.points, 4000);
        assert_eq!(c.points as f64 / 80.0, 50.0);
        assert_eq!(c.temperature_k, 190.0);
        assert_eq!(c.n_samples, 20);
        assert_eq!(c.mass_u, 27.9949);
        assert_eq!(c.potential, PotentialConfig::Cosine { amplitude_mev: 33.5, cell_a: 2.556 });
        assert_eq!(c.t_max_ps, 200.0);
    }

    #[test]
    fn missing_mass_is_named() {
        let text = presets::BALLISTIC.replace("system.mass_u = 1.0", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.iter().any(|i| i.key.as_deref() == Some("system.mass_u")), "{err}");
    }

    #[test]
    fn all_problems_are_reported_with_lines() {
        let text = "system.mass_u = -1\nsystem.temperature_K = hot\nbogus.key = 3\ngrid.boundary = box\nnot a pair\n";
        let err = parse_config(text).unwrap_err();
        let lines: Vec<Option<usize>> = err.0.iter().map(|i| i.line).collect();
        for l in [1, 2, 3, 5] {
            assert!(lines.contains(&Some(l)), "{err}");
        }
        assert!(err.0.iter().any(|i| i.key.as_deref() == Some("grid.points")));
        assert!(err.0.iter().any(|i| i.key.as_deref() == Some("scattering.q_invA")));
    }

    #[test]
    fn comments_and_case() {
        let text = format!(
            "# header\n{}\nENSEMBLE.N_SAMPLES = 3 # trailing\n",
            presets::BALLISTIC.replace("ensemble.n_samples = 60", "")
        );
        assert_eq!(parse_config(&text).unwrap().n_samples, 3);
    }

    #[test]
    fn environment_overrides_change_digest() {
        let base = parse_config(presets::BALLISTIC).unwrap();
        let over =
            parse_with_overrides(presets::BALLISTIC, [("ISF_ENSEMBLE__N_SAMPLES", "5"), ("PATH", "/bin")]).unwrap();
        assert_eq!(over.n_samples, 5);
        assert_ne!(over.digest, base.digest);
        let bad = parse_with_overrides(presets::BALLISTIC, [("ISF_NOPE", "1")]).unwrap_err();
        assert!(bad.to_string().contains("ISF_NOPE"));
    }

    #[test]
    fn conflicting_lengths() {
        let text = presets::BALLISTIC.replace("grid.points", "grid.length_A = 10\ngrid.points");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("conflicts"), "{err}");
    }

    #[test]
    fn digest_ignores_formatting() {
        let a = parse_config(presets::BALLISTIC).unwrap();
        let spaced = presets::BALLISTIC.replace(" = ", "   =   ").replace('\n', "\n\n# note\n");
        assert_eq!(parse_config(&spaced).unwrap().digest, a.digest);
    }
}
