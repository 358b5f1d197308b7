//! Plain-text output formats and the trace CSV reader.

use std::fmt::Write as _;
use std::path::Path;

use isf_core::analysis::{DsfTrace, FitResult, IsfModelParams};
use isf_core::isf::IsfTrace;
use isf_core::Complex;

use crate::error::{io_error, CliError};

pub const TRACE_HEADER: &str = "t_ps,re_I,im_I,abs_I,neg_ln_abs_I,arg_I,std_err";
pub const DSF_HEADER: &str = "omega_radps,S";
pub const MODEL_HEADER: &str = "t_ps,I_mod";

/// 12 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn digest_or_dash(d: &str) -> &str {
    if d.is_empty() {
        "-"
    } else {
        d
    }
}

/// Trace CSV: `#` metadata lines, then the fixed header and one row per time.
///
/// `arg_I` is the phase unwound along `t` when every `|I|` is large enough,
/// otherwise the principal value.
pub fn format_trace_csv(trace: &IsfTrace<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_digest={}", digest_or_dash(&trace.digest));
    let _ = writeln!(out, "# q_requested_invA={}", num(trace.q_requested));
    let _ = writeln!(out, "# q_used_invA={}", num(trace.q_used));
    let _ = writeln!(out, "# n_samples={}", trace.n_samples);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    let phase = trace.unwrapped_phase().unwrap_or_else(|_| trace.values.iter().map(|v| v.arg()).collect());
    for (i, (t, v)) in trace.times.iter().zip(&trace.values).enumerate() {
        let a = v.norm();
        let se = trace.std_err.as_ref().map(|s| num(s[i])).unwrap_or_default();
        let _ =
            writeln!(out, "{},{},{},{},{},{},{se}", num(*t), num(v.re), num(v.im), num(a), num(-a.ln()), num(phase[i]));
    }
    out
}

/// Reads a trace CSV written by [`format_trace_csv`].
pub fn parse_trace_csv(text: &str, source: &str) -> Result<IsfTrace<f64>, CliError> {
    let bad = |line: usize, msg: String| CliError::Io(format!("{source}: line {line}: {msg}"));
    let mut trace = IsfTrace {
        q_requested: f64::NAN,
        q_used: f64::NAN,
        times: Vec::new(),
        values: Vec::new(),
        std_err: None,
        n_samples: 0,
        digest: String::new(),
    };
    let mut errs: Vec<Option<f64>> = Vec::new();
    let mut header_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                let v = v.trim();
                let number = || v.parse::<f64>().map_err(|_| bad(no, format!("bad number `{v}` for {k}")));
                match k.trim() {
                    "config_digest" => trace.digest = if v == "-" { String::new() } else { v.to_string() },
                    "q_requested_invA" => trace.q_requested = number()?,
                    "q_used_invA" => trace.q_used = number()?,
                    "n_samples" => {
                        trace.n_samples = v.parse().map_err(|_| bad(no, format!("bad sample count `{v}`")))?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line != TRACE_HEADER {
                return Err(bad(no, format!("expected header `{TRACE_HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(no, format!("expected 7 fields, found {}", fields.len())));
        }
        let f = |k: usize| fields[k].trim().parse::<f64>().map_err(|_| bad(no, format!("bad number `{}`", fields[k])));
        trace.times.push(f(0)?);
        trace.values.push(Complex::new(f(1)?, f(2)?));
        errs.push(if fields[6].trim().is_empty() { None } else { Some(f(6)?) });
    }
    if !header_seen {
        return Err(CliError::Io(format!("{source}: no `{TRACE_HEADER}` header")));
    }
    if trace.times.is_empty() {
        return Err(CliError::Io(format!("{source}: no data rows")));
    }
    if trace.q_used.is_nan() {
        return Err(CliError::Io(format!("{source}: missing `# q_used_invA=` line")));
    }
    if trace.q_requested.is_nan() {
        trace.q_requested = trace.q_used;
    }
    if errs.iter().all(Option::is_some) {
        trace.std_err = Some(errs.into_iter().flatten().collect());
    }
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<IsfTrace<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_trace_csv(&text, &path.display().to_string())
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn params_lines(out: &mut String, p: &IsfModelParams<f64>, ci: &IsfModelParams<f64>) {
    for (name, v, c) in
        [("P1", p.p1, ci.p1), ("A1_per_ps2", p.a1, ci.a1), ("P2", p.p2, ci.p2), ("A2_per_ps", p.a2, ci.a2)]
    {
        let _ = writeln!(out, "{name} = {} +/- {}", num(v), num(c));
    }
}

/// Key/value block; parameter lines carry `value +/- ci68`.
pub fn format_fit(fit: &FitResult<f64>, t_fit_max: f64, digest: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config_digest = {}", digest_or_dash(digest));
    let _ = writeln!(out, "t_fit_max_ps = {}", num(t_fit_max));
    params_lines(&mut out, &fit.params, &fit.ci68);
    let _ = writeln!(out, "residual_rms = {}", num(fit.residual_rms));
    let _ = writeln!(out, "n_points = {}", fit.n_points);
    let _ = writeln!(out, "converged = {}", fit.converged);
    let _ = writeln!(out, "iterations = {}", fit.iterations);
    let _ = writeln!(out, "gradient_norm = {}", num(fit.gradient_norm));
    let _ = writeln!(out, "degenerate = {}", fit.degenerate);
    out
}

pub fn format_model_csv(times: &[f64], values: &[f64], digest: &str) -> String {
    let mut out = format!("# config_digest={}\n{MODEL_HEADER}\n", digest_or_dash(digest));
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(out, "{},{}", num(*t), num(*v));
    }
    out
}

pub fn format_dsf_csv(d: &DsfTrace<f64>, digest: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_digest={}", digest_or_dash(digest));
    let _ = writeln!(out, "# q_invA={}", num(d.q));
    let _ = writeln!(out, "# window={}", d.window.name());
    let _ = writeln!(out, "# normalization={}", d.normalization);
    out.push_str(DSF_HEADER);
    out.push('\n');
    for (w, s) in d.omegas.iter().zip(&d.values) {
        let _ = writeln!(out, "{},{}", num(*w), num(*s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(with_err: bool) -> IsfTrace<f64> {
        IsfTrace {
            q_requested: 1.0,
            q_used: 1.0140,
            times: vec![0.0, 0.5, 1.0],
            values: vec![Complex::new(1.0, 0.0), Complex::new(0.5, 0.25), Complex::new(-0.1, 0.2)],
            std_err: with_err.then(|| vec![0.0, 0.01, 0.02]),
            n_samples: if with_err { 4 } else { 0 },
            digest: "abc".into(),
        }
    }

    #[test]
    fn trace_round_trip() {
        for with_err in [true, false] {
            let t = sample(with_err);
            let text = format_trace_csv(&t);
            assert!(text.lines().any(|l| l == TRACE_HEADER));
            let back = parse_trace_csv(&text, "mem").unwrap();
            assert_eq!(back.digest, "abc");
            assert_eq!(back.n_samples, t.n_samples);
            assert_eq!(back.std_err.is_some(), with_err);
            for (a, b) in back.values.iter().zip(&t.values) {
                assert!((a - b).norm() < 1e-11);
            }
            assert!((back.q_used - 1.0140).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_column_is_unwound() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let values = times.iter().map(|t| Complex::from_polar(0.9, 0.2 * t)).collect();
        let t = IsfTrace {
            q_requested: 1.0,
            q_used: 1.0,
            times,
            values,
            std_err: None,
            n_samples: 0,
            digest: String::new(),
        };
        let text = format_trace_csv(&t);
        let last: f64 = text.lines().last().unwrap().split(',').nth(5).unwrap().parse().unwrap();
        assert!((last - 19.8).abs() < 1e-9);
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(num(0.0), "0.00000000000e0");
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let mut text = format_trace_csv(&sample(false));
        text.push_str("1.5,oops,0,0,0,0,\n");
        let err = parse_trace_csv(&text, "f.csv").unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("line 9"), "{err}");
        assert!(parse_trace_csv("t,x\n1,2\n", "g").is_err());
    }
}
