//! Intermediate scattering function: per-sample correlator, ensemble mean,
//! exact spectral trace and the complex mean square displacement.

use rayon::prelude::*;

use crate::dynamics::KickMatrix;
use crate::ensemble::{assemble_twp, draw_phases, ThermalWavePacket};
use crate::error::{config, numeric, usage, Result};
use crate::num::{cis, CompensatedSum, Complex, Real};
use crate::spectrum::ThermalWeights;
use crate::units::HBAR;

/// Below this modulus the phase of `I` is considered lost.
pub const MIN_UNWRAP_MODULUS: f64 = 1e-12;

/// Phase factors are recomputed from scratch every this many steps.
const PHASE_REFRESH: usize = 32;

/// Uniform times `t_i = i·t_max/(n−1)`, ps.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid<T> {
    t_max: T,
    times: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_max: T, n_times: usize) -> Result<Self> {
        if !(t_max > T::zero() && t_max.is_finite()) {
            return Err(config(format!("t_max must be positive, got {t_max}")));
        }
        if n_times < 2 {
            return Err(config(format!("a time grid needs at least 2 points, got {n_times}")));
        }
        let step = t_max / T::from_usize_exact(n_times - 1);
        let mut times: Vec<T> = (0..n_times).map(|i| step * T::from_usize_exact(i)).collect();
        times[n_times - 1] = t_max;
        Ok(Self { t_max, times })
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> T {
        self.t_max / T::from_usize_exact(self.times.len() - 1)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }
}

/// Largest step that keeps every phase increment `(E_m − E_0)Δt/ħ` below π.
pub fn max_time_step<T: Real>(energies: &[T]) -> T {
    let spread = energies.last().copied().unwrap_or(T::zero()) - energies.first().copied().unwrap_or(T::zero());
    if spread <= T::zero() {
        T::infinity()
    } else {
        T::PI() * T::lit(HBAR) / spread
    }
}

/// Rejects time grids too coarse to unwrap the phase of `I`.
pub fn check_time_step<T: Real>(grid: &TimeGrid<T>, energies: &[T]) -> Result<()> {
    let bound = max_time_step(energies);
    if grid.step() >= bound {
        let needed = (grid.t_max() / bound).ceil().to_usize().map_or(usize::MAX, |n| n + 2);
        return Err(config(format!(
            "time step {} ps is not below the phase-unwrap bound {} ps; use at least {needed} time points",
            grid.step(),
            bound
        )));
    }
    Ok(())
}

/// Sampled `I(q, t)` with optional per-time standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct IsfTrace<T> {
    pub q_requested: T,
    pub q_used: T,
    pub times: Vec<T>,
    pub values: Vec<Complex<T>>,
    /// Standard error of the ensemble mean; `None` for exact and analytic traces.
    pub std_err: Option<Vec<T>>,
    pub n_samples: usize,
    /// Content hash of the producing configuration, empty when not known.
    pub digest: String,
}

impl<T: Real> IsfTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `−ln|I|`.
    pub fn neg_ln_abs(&self) -> Vec<T> {
        self.values.iter().map(|v| -v.norm().ln()).collect()
    }

    /// Continuous phase of `I` along the time axis.
    pub fn unwrapped_phase(&self) -> Result<Vec<T>> {
        unwrap_phase(&self.values)
    }
}

/// `e^{±i(E_k − E_ref) t/ħ}` on a uniform time grid, advanced by
/// multiplication and refreshed periodically to bound rounding drift.
struct PhaseStepper<T: Real> {
    rates: Vec<T>,
    step: Vec<Complex<T>>,
    current: Vec<Complex<T>>,
    index: usize,
    dt: T,
}

impl<T: Real> PhaseStepper<T> {
    fn new(energies: &[T], reference: T, sign: T, dt: T) -> Self {
        let rates: Vec<T> = energies.iter().map(|&e| sign * (e - reference) / T::lit(HBAR)).collect();
        let step = rates.iter().map(|&r| cis(r * dt)).collect();
        let current = vec![Complex::new(T::one(), T::zero()); rates.len()];
        Self { rates, step, current, index: 0, dt }
    }

    fn advance(&mut self) {
        self.index += 1;
        if self.index.is_multiple_of(PHASE_REFRESH) {
            let t = self.dt * T::from_usize_exact(self.index);
            for (c, &r) in self.current.iter_mut().zip(&self.rates) {
                *c = cis(r * t);
            }
        } else {
            for (c, s) in self.current.iter_mut().zip(&self.step) {
                *c *= *s;
            }
        }
    }
}

fn check_grid<T: Real>(times: &TimeGrid<T>) -> Result<()> {
    if times.times()[0] != T::zero() {
        return Err(usage("time grids start at t = 0"));
    }
    Ok(())
}

/// `I_θ(q,t) = ⟨χ_KE(t)|χ_EK(t)⟩` for one thermal wave packet.
pub fn isf_sample<T: Real>(
    twp: &ThermalWavePacket<T>,
    kick: &KickMatrix<T>,
    times: &TimeGrid<T>,
) -> Result<Vec<Complex<T>>> {
    check_grid(times)?;
    if twp.coefficients().len() != kick.cols() {
        return Err(usage(format!(
            "wave packet has {} coefficients, kick matrix has {} columns",
            twp.coefficients().len(),
            kick.cols()
        )));
    }
    let e0 = kick.row_energies()[0];
    let dt = times.step();
    let mut forward = PhaseStepper::new(twp.energies(), e0, -T::one(), dt);
    let mut backward = PhaseStepper::new(kick.row_energies(), e0, T::one(), dt);
    let d = kick.apply(twp.coefficients());
    let zero = Complex::new(T::zero(), T::zero());
    let mut evolved = vec![zero; kick.cols()];
    let mut kicked = vec![zero; kick.rows()];
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if i > 0 {
            forward.advance();
            backward.advance();
        }
        for ((e, c), p) in evolved.iter_mut().zip(twp.coefficients()).zip(&forward.current) {
            *e = *c * *p;
        }
        kick.apply_into(&evolved, &mut kicked);
        let mut acc = zero;
        for ((dm, km), p) in d.iter().zip(&kicked).zip(&backward.current) {
            acc += dm.conj() * *p * *km;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Ensemble options for [`isf_ensemble`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n_samples: usize,
    pub seed: u64,
    /// Worker threads; `0` uses the available parallelism.
    pub workers: usize,
}

/// Mean of `n_samples` independent samples and its standard error.
///
/// Sample `k` always uses phase stream `k` of `seed`, and the mean is reduced
/// in sample order with compensated summation, so the result does not depend
/// on the number of workers.
pub fn isf_ensemble<T: Real>(
    weights: &ThermalWeights<T>,
    kick: &KickMatrix<T>,
    q_requested: T,
    times: &TimeGrid<T>,
    spec: EnsembleSpec,
) -> Result<IsfTrace<T>> {
    if spec.n_samples == 0 {
        return Err(config("ensemble.n_samples must be at least 1"));
    }
    let run = |k: usize| -> Result<Vec<Complex<T>>> {
        let twp = assemble_twp(weights, &draw_phases(spec.seed, k as u64, weights.retained()))?;
        isf_sample(&twp, kick, times)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| numeric(format!("cannot start worker pool: {e}")))?;
    let samples: Vec<Vec<Complex<T>>> =
        pool.install(|| (0..spec.n_samples).into_par_iter().map(run).collect::<Result<_>>())?;

    let n = T::from_usize_exact(spec.n_samples);
    let mut values = Vec::with_capacity(times.len());
    let mut errs = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let mut acc = CompensatedSum::new();
        for s in &samples {
            acc.add(s[i]);
        }
        let mean = acc.value() / n;
        values.push(mean);
        if spec.n_samples > 1 {
            let var = crate::num::compensated_sum(samples.iter().map(|s| (s[i] - mean).norm_sqr())) / (n - T::one());
            errs.push((var / n).sqrt());
        }
    }
    Ok(IsfTrace {
        q_requested,
        q_used: kick.q(),
        times: times.times().to_vec(),
        values,
        std_err: (spec.n_samples > 1).then_some(errs),
        n_samples: spec.n_samples,
        digest: String::new(),
    })
}

/// `I(q,t) = Σ_n w_n² Σ_m |M_mn|² e^{i(E_m − E_n)t/ħ}` over the retained
/// initial states and the kick matrix rows.
pub fn isf_exact_trace<T: Real>(
    weights: &ThermalWeights<T>,
    kick: &KickMatrix<T>,
    q_requested: T,
    times: &TimeGrid<T>,
) -> Result<IsfTrace<T>> {
    check_grid(times)?;
    if weights.retained() != kick.cols() {
        return Err(usage(format!(
            "{} retained states but the kick matrix has {} columns",
            weights.retained(),
            kick.cols()
        )));
    }
    let pops = weights.populations();
    // Σ_n P_mn e^{−iE_n t} with P_mn = w_n² |M_mn|², stored by column.
    let cols: Vec<Vec<(usize, T)>> =
        (0..kick.cols()).map(|n| kick.column(n).iter().map(|&(m, v)| (m, pops[n] * v.norm_sqr())).collect()).collect();
    let e0 = kick.row_energies()[0];
    let dt = times.step();
    let mut forward = PhaseStepper::new(weights.energies(), e0, -T::one(), dt);
    let mut backward = PhaseStepper::new(kick.row_energies(), e0, T::one(), dt);
    let zero = Complex::new(T::zero(), T::zero());
    let mut rows = vec![zero; kick.rows()];
    let mut values = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if i > 0 {
            forward.advance();
            backward.advance();
        }
        rows.iter_mut().for_each(|r| *r = zero);
        for (col, p) in cols.iter().zip(&forward.current) {
            for &(m, w) in col {
                rows[m] += *p * w;
            }
        }
        let mut acc = CompensatedSum::new();
        for (r, p) in rows.iter().zip(&backward.current) {
            acc.add(*r * *p);
        }
        values.push(acc.value());
    }
    Ok(IsfTrace {
        q_requested,
        q_used: kick.q(),
        times: times.times().to_vec(),
        values,
        std_err: None,
        n_samples: 0,
        digest: String::new(),
    })
}

/// Cumulative phase of a complex series, assuming successive values differ
/// in argument by less than π.
pub fn unwrap_phase<T: Real>(values: &[Complex<T>]) -> Result<Vec<T>> {
    let floor = T::lit(MIN_UNWRAP_MODULUS);
    let lost: Vec<usize> = values.iter().enumerate().filter(|(_, v)| v.norm() < floor).map(|(i, _)| i).collect();
    if !lost.is_empty() {
        let shown: Vec<String> = lost.iter().take(10).map(|i| i.to_string()).collect();
        return Err(numeric(format!(
            "|I| < {MIN_UNWRAP_MODULUS} at {} time index(es) [{}{}]; the phase cannot be unwound",
            lost.len(),
            shown.join(", "),
            if lost.len() > 10 { ", ..." } else { "" }
        )));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut prev: Option<(T, T)> = None;
    for v in values {
        let raw = v.arg();
        let next = match prev {
            None => raw,
            Some((last_raw, last)) => {
                let mut d = raw - last_raw;
                while d > T::PI() {
                    d -= T::TAU();
                }
                while d <= -T::PI() {
                    d += T::TAU();
                }
                last + d
            }
        };
        prev = Some((raw, next));
        out.push(next);
    }
    Ok(out)
}

/// `δ̃²(t) = −(2/q²) Log I(q,t)` in Å², with the phase unwound along `t`.
pub fn msd_from_isf<T: Real>(trace: &IsfTrace<T>) -> Result<Vec<Complex<T>>> {
    let q = trace.q_used;
    if q == T::zero() {
        return Err(usage("the MSD needs q ≠ 0"));
    }
    let phase = trace.unwrapped_phase()?;
    let scale = -T::lit(2.0) / (q * q);
    Ok(trace.values.iter().zip(phase).map(|(v, p)| Complex::new(v.norm().ln(), p) * scale).collect())
}
