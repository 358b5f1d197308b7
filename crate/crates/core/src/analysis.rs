//! Ballistic reference ISF, the two-component model fit and the dynamical
//! structure factor.

use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, numeric, usage, Result};
use crate::isf::IsfTrace;
use crate::num::{compensated_sum, Complex, Real};
use crate::units::ThermalUnits;

/// Exact ISF of a free particle in a thermal state:
/// `−ln|I| = (λ_th q)²/(4π)·(t/τ_th)²` and `arg I = (λ_th q)²/(4π)·(t/τ_th)`.
pub fn ballistic_isf<T: Real>(mass: T, temperature: T, q: T, times: &[T]) -> Result<IsfTrace<T>> {
    if !(q > T::zero() && q.is_finite()) {
        return Err(domain(format!("q must be positive, got {q}")));
    }
    let th = ThermalUnits::new(mass, temperature)?;
    let a = (th.lambda_th * q).powi(2) / (T::lit(4.0) * T::PI());
    let values = times
        .iter()
        .map(|&t| {
            let s = t / th.tau_th;
            Complex::new(-a * s * s, a * s).exp()
        })
        .collect();
    Ok(IsfTrace {
        q_requested: q,
        q_used: q,
        times: times.to_vec(),
        values,
        std_err: None,
        n_samples: 0,
        digest: String::new(),
    })
}

/// Parameters of `I_mod(t) = 1 + P1(e^{−A1 t² + (P2 A2/P1) t} − 1) + P2(e^{−A2 t} − 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsfModelParams<T> {
    pub p1: T,
    /// ps⁻².
    pub a1: T,
    pub p2: T,
    /// ps⁻¹.
    pub a2: T,
}

impl<T: Real> IsfModelParams<T> {
    pub fn is_valid(&self) -> bool {
        let (zero, one) = (T::zero(), T::one());
        self.p1 > zero
            && self.p1 < one
            && self.p2 > zero
            && self.p2 < one
            && self.p1 + self.p2 < one
            && self.a1 > zero
            && self.a2 > zero
    }

    /// `I_mod(∞) = 1 − P1 − P2`.
    pub fn plateau(&self) -> T {
        T::one() - self.p1 - self.p2
    }

    /// `[P1, A1, P2, A2]` as `f64`.
    pub fn to_array(self) -> [f64; 4] {
        [self.p1, self.a1, self.p2, self.a2].map(Real::to_f64_lossy)
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self { p1: T::lit(a[0]), a1: T::lit(a[1]), p2: T::lit(a[2]), a2: T::lit(a[3]) }
    }
}

pub fn eval_isf_model<T: Real>(p: &IsfModelParams<T>, t: T) -> T {
    let r = p.p2 * p.a2 / p.p1;
    T::one() + p.p1 * ((-p.a1 * t * t + r * t).exp() - T::one()) + p.p2 * ((-p.a2 * t).exp() - T::one())
}

/// Model value and its gradient with respect to (P1, A1, P2, A2).
fn model_with_gradient(p: &[f64; 4], t: f64) -> (f64, [f64; 4]) {
    let [p1, a1, p2, a2] = *p;
    let r = p2 * a2 / p1;
    let e1 = (-a1 * t * t + r * t).exp();
    let e2 = (-a2 * t).exp();
    let value = 1.0 + p1 * (e1 - 1.0) + p2 * (e2 - 1.0);
    let grad = [e1 - 1.0 - e1 * r * t, -p1 * e1 * t * t, e1 * a2 * t + e2 - 1.0, p2 * t * (e1 - e2)];
    (value, grad)
}

pub const FIT_MAX_ITERATIONS: usize = 500;
/// Bound on `max_j |J_jᵀ r| / (‖J_j‖ max(‖r‖, 1))` at convergence.
pub const FIT_GRADIENT_TOLERANCE: f64 = 1e-8;
const CI68_PROBABILITY: f64 = 0.841_344_746_068_542_9;

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult<T> {
    pub params: IsfModelParams<T>,
    /// 68 % confidence half-widths in the same order and units as `params`.
    pub ci68: IsfModelParams<T>,
    /// RMS of `ln I_mod − ln|I|` over the fitted points.
    pub residual_rms: T,
    pub n_points: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Scaled gradient norm at the returned parameters.
    pub gradient_norm: T,
    /// Set when the data carry no decay to fit.
    pub degenerate: bool,
}

/// Least-squares fit of `ln I_mod` to `ln|I|` over `t ≤ t_fit_max`.
pub fn fit_isf_model<T: Real>(trace: &IsfTrace<T>, t_fit_max: T) -> Result<FitResult<T>> {
    let last = trace.times.last().copied().ok_or_else(|| usage("empty trace"))?;
    if last + T::lit(1e-9) * t_fit_max.abs() < t_fit_max {
        return Err(usage(format!("trace ends at {last} ps, before the fit window end {t_fit_max} ps")));
    }
    let (times, moduli): (Vec<f64>, Vec<f64>) = trace
        .times
        .iter()
        .zip(&trace.values)
        .filter(|(t, _)| **t <= t_fit_max)
        .map(|(t, v)| (t.to_f64_lossy(), v.norm().to_f64_lossy()))
        .unzip();
    fit_isf_data(&times, &moduli)
}

/// As [`fit_isf_model`], on raw `(t, |I|)` samples.
pub fn fit_isf_data<T: Real>(times: &[f64], moduli: &[f64]) -> Result<FitResult<T>> {
    if times.len() != moduli.len() {
        return Err(usage("times and values differ in length"));
    }
    if times.len() < 8 {
        return Err(usage(format!("{} points are too few for a four-parameter fit", times.len())));
    }
    if let Some(i) = moduli.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(numeric(format!("|I| = {} at t = {} ps; ln|I| is undefined", moduli[i], times[i])));
    }
    let y: Vec<f64> = moduli.iter().map(|m| m.ln()).collect();
    let scale = y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale < 1e-12 {
        let zero = IsfModelParams { p1: T::zero(), a1: T::zero(), p2: T::zero(), a2: T::zero() };
        return Ok(FitResult {
            params: zero,
            ci68: zero,
            residual_rms: T::lit((y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt()),
            n_points: y.len(),
            converged: false,
            iterations: 0,
            gradient_norm: T::zero(),
            degenerate: true,
        });
    }
    let start = initial_guess(times, &y);
    let lm = levenberg_marquardt(times, &y, start);
    let (cost, jac) = residuals_and_jacobian(times, &y, &lm.params)
        .ok_or_else(|| numeric("no starting point gives a positive, finite model on this trace"))?;
    let n = times.len();
    let dof = (n - 4) as f64;
    let ci = confidence(&jac, &lm.params, 2.0 * cost / dof, dof);
    Ok(FitResult {
        params: IsfModelParams::from_array(lm.params),
        ci68: IsfModelParams::from_array(ci),
        residual_rms: T::lit((2.0 * cost / n as f64).sqrt()),
        n_points: n,
        converged: lm.converged && ci.iter().all(|c| c.is_finite()),
        iterations: lm.iterations,
        gradient_norm: T::lit(lm.gradient),
        degenerate: false,
    })
}

/// Least squares `y ≈ c0 + c1 x`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Data-driven starting point.
///
/// The tail of `−ln I` is nearly linear: its intercept fixes the first
/// plateau `1 − P1` and its slope the product `P2 A2`. `A1` follows from the
/// short-time curvature `−ln I ≈ P1 A1 t²`.
fn initial_guess(t: &[f64], y: &[f64]) -> [f64; 4] {
    let n = t.len();
    let g: Vec<f64> = y.iter().map(|v| -v).collect();
    let tail = 2 * n / 3;
    let (b, s) = line_fit(&t[tail..], &g[tail..]);
    let p1 = (1.0 - (-b).exp()).clamp(0.02, 0.9);
    let t_max = t[n - 1];
    let drift = (s * (1.0 - p1)).max(1e-6 / t_max);
    let p2 = (0.5 * (1.0 - p1)).min(drift * t_max).max(1e-4);
    let a2 = drift / p2;

    // Early window: up to the first maximum of the smoothed curve or until
    // half of the plateau value is reached.
    let half = 0.5 * b.max(g[tail..].iter().sum::<f64>() / (n - tail) as f64);
    let width = (n / 200).max(1);
    let smooth = |i: usize| {
        let lo = i.saturating_sub(width);
        let hi = (i + width + 1).min(n);
        g[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
    };
    let mut end = 1;
    while end + 1 < n {
        if g[end] >= half || (end > width && smooth(end) > smooth(end + 1) && smooth(end) > smooth(end - 1)) {
            break;
        }
        end += 1;
    }
    let end = end.max(3).min(n - 1);
    let (num, den) = t[..=end].iter().zip(&g[..=end]).fold((0.0, 0.0), |(a, b), (&ti, &gi)| {
        let t2 = ti * ti;
        (a + gi * t2, b + t2 * t2)
    });
    let curvature = if den > 0.0 { num / den } else { 0.0 };
    let a1 = (curvature / p1).max(1e-6 / (t_max * t_max));
    [p1, a1, p2, a2]
}

fn to_unconstrained(p: &[f64; 4]) -> [f64; 4] {
    let logit = |x: f64| (x / (1.0 - x)).ln();
    [logit(p[0]), p[1].ln(), logit(p[2]), p[3].ln()]
}

fn from_unconstrained(u: &[f64; 4]) -> [f64; 4] {
    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    [logistic(u[0]), u[1].exp(), logistic(u[2]), u[3].exp()]
}

/// Half the sum of squared residuals and the Jacobian of `ln I_mod` with
/// respect to the raw parameters. `None` when the model is not positive.
fn residuals_and_jacobian(t: &[f64], y: &[f64], p: &[f64; 4]) -> Option<(f64, Vec<[f64; 4]>)> {
    let (cost, _, jac) = evaluate(t, y, p)?;
    Some((cost, jac))
}

fn evaluate(t: &[f64], y: &[f64], p: &[f64; 4]) -> Option<(f64, Vec<f64>, Vec<[f64; 4]>)> {
    if p[0] + p[2] >= 1.0 {
        return None;
    }
    let mut r = Vec::with_capacity(t.len());
    let mut jac = Vec::with_capacity(t.len());
    for (&ti, &yi) in t.iter().zip(y) {
        let (v, g) = model_with_gradient(p, ti);
        if !(v > 0.0 && v.is_finite()) {
            return None;
        }
        r.push(v.ln() - yi);
        jac.push([g[0] / v, g[1] / v, g[2] / v, g[3] / v]);
    }
    let cost = 0.5 * compensated_sum(r.iter().map(|x| x * x));
    Some((cost, r, jac))
}

struct LmOutcome {
    params: [f64; 4],
    iterations: usize,
    converged: bool,
    gradient: f64,
}

/// `max_k |J_kᵀ r| / (‖J_k‖ max(‖r‖, 1))`.
fn scaled_gradient(jac: &[[f64; 4]], r: &[f64], cost: f64) -> f64 {
    let r_norm = (2.0 * cost).sqrt().max(1.0);
    (0..4)
        .map(|k| {
            let col = compensated_sum(jac.iter().map(|j| j[k] * j[k])).sqrt();
            let g = compensated_sum(jac.iter().zip(r).map(|(j, ri)| j[k] * ri));
            if col > 0.0 {
                g.abs() / (col * r_norm)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

fn levenberg_marquardt(t: &[f64], y: &[f64], start: [f64; 4]) -> LmOutcome {
    let mut u = to_unconstrained(&start);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut current = evaluate(t, y, &from_unconstrained(&u));
    if current.is_none() {
        // Shrink the amplitudes and the tail rate until the starting model is
        // positive and finite; P2 A2 / P1 then falls as well.
        for _ in 0..60 {
            u[0] -= 0.5;
            u[2] -= 0.5;
            u[3] -= 0.5;
            current = evaluate(t, y, &from_unconstrained(&u));
            if current.is_some() {
                break;
            }
        }
    }
    let Some((mut cost, mut r, mut jac_raw)) = current else {
        return LmOutcome { params: from_unconstrained(&u), iterations: 0, converged: false, gradient: f64::INFINITY };
    };
    while iterations < FIT_MAX_ITERATIONS {
        let p = from_unconstrained(&u);
        let gradient = scaled_gradient(&jac_raw, &r, cost);
        if gradient <= FIT_GRADIENT_TOLERANCE {
            return LmOutcome { params: p, iterations, converged: true, gradient };
        }
        iterations += 1;
        let chain = [p[0] * (1.0 - p[0]), p[1], p[2] * (1.0 - p[2]), p[3]];
        let jac: Vec<[f64; 4]> = jac_raw.iter().map(|row| std::array::from_fn(|k| row[k] * chain[k])).collect();
        let norms: [f64; 4] = std::array::from_fn(|k| jac.iter().map(|j| j[k] * j[k]).sum::<f64>().sqrt().max(1e-300));
        let mut accepted = false;
        while lambda < 1e16 {
            let Some(step) = damped_step(&jac, &r, &norms, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let trial: [f64; 4] = std::array::from_fn(|k| u[k] + step[k]);
            match evaluate(t, y, &from_unconstrained(&trial)) {
                // The change is summed term by term: near the optimum it is
                // smaller than the rounding error of the cost itself.
                Some((c, rt, jt)) if compensated_sum(rt.iter().zip(&r).map(|(a, b)| (a - b) * (a + b))) < 0.0 => {
                    u = trial;
                    (cost, r, jac_raw) = (c, rt, jt);
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            break;
        }
    }
    let gradient = scaled_gradient(&jac_raw, &r, cost);
    LmOutcome { params: from_unconstrained(&u), iterations, converged: gradient <= FIT_GRADIENT_TOLERANCE, gradient }
}

/// Solves `min ‖J δ + r‖² + λ Σ_k (‖J_k‖ δ_k)²` by Householder QR of the
/// stacked system, which avoids squaring the condition number.
fn damped_step(jac: &[[f64; 4]], r: &[f64], norms: &[f64; 4], lambda: f64) -> Option<[f64; 4]> {
    let mut cols: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let mut c: Vec<f64> = jac.iter().map(|j| j[k]).collect();
            c.extend((0..4).map(|d| if d == k { lambda.sqrt() * norms[k] } else { 0.0 }));
            c
        })
        .collect();
    let mut b: Vec<f64> = r.iter().map(|x| -x).chain([0.0; 4]).collect();
    let mut diag = [0.0; 4];
    for k in 0..4 {
        let alpha = cols[k][k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(alpha > 0.0 && alpha.is_finite()) {
            return None;
        }
        let alpha = if cols[k][k] > 0.0 { -alpha } else { alpha };
        let mut v = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv > 0.0 {
            for j in k + 1..4 {
                let f = 2.0 * v.iter().zip(&cols[j][k..]).map(|(a, c)| a * c).sum::<f64>() / vv;
                for (c, a) in cols[j][k..].iter_mut().zip(&v) {
                    *c -= f * a;
                }
            }
            let f = 2.0 * v.iter().zip(&b[k..]).map(|(a, c)| a * c).sum::<f64>() / vv;
            for (c, a) in b[k..].iter_mut().zip(&v) {
                *c -= f * a;
            }
        }
        diag[k] = alpha;
    }
    let mut x = [0.0; 4];
    for k in (0..4).rev() {
        let s: f64 = (k + 1..4).map(|j| cols[j][k] * x[j]).sum();
        x[k] = (b[k] - s) / diag[k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Gaussian elimination with partial pivoting on a 4×4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert4(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        let col = solve4(a, e)?;
        for r in 0..4 {
            inv[r][k] = col[r];
        }
    }
    Some(inv)
}

/// Student-t scaled standard errors from `s² (JᵀJ)⁻¹` in raw parameters.
fn confidence(jac: &[[f64; 4]], _p: &[f64; 4], variance: f64, dof: f64) -> [f64; 4] {
    // Column scaling keeps the normal matrix well conditioned when the
    // parameters differ by orders of magnitude.
    let mut scale = [0.0; 4];
    for row in jac {
        for k in 0..4 {
            scale[k] += row[k] * row[k];
        }
    }
    let scale = scale.map(|s| if s > 0.0 { s.sqrt() } else { 1.0 });
    let mut jtj = [[0.0; 4]; 4];
    for row in jac {
        for a in 0..4 {
            for b in 0..4 {
                jtj[a][b] += row[a] / scale[a] * row[b] / scale[b];
            }
        }
    }
    let Some(inv) = invert4(jtj) else {
        return [f64::INFINITY; 4];
    };
    let quantile = StudentsT::new(0.0, 1.0, dof).map(|d| d.inverse_cdf(CI68_PROBABILITY)).unwrap_or(1.0);
    std::array::from_fn(|k| quantile * (variance * inv[k][k]).max(0.0).sqrt() / scale[k])
}

/// Taper applied to the time signal before transforming.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Window {
    None,
    /// `½(1 + cos(π t / t_max))`.
    #[default]
    Hann,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::None => "none",
            Window::Hann => "hann",
        }
    }
}

/// Normalization tag carried by every [`DsfTrace`].
pub const DSF_NORMALIZATION: &str = "S(w) = (1/2pi) sum_t dt w(t) I(t) exp(-i w t); integral S dw = I(0)";

/// `S(q, ω)` on `ω_k = 2πk/(2 t_max)`, ascending from negative frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct DsfTrace<T> {
    pub q: T,
    /// rad/ps.
    pub omegas: Vec<T>,
    pub values: Vec<T>,
    pub window: Window,
    pub normalization: &'static str,
    /// Largest `|Im S|` relative to `max |S|` before discarding the imaginary part.
    pub imaginary_residue: T,
}

impl<T: Real> DsfTrace<T> {
    pub fn integral(&self) -> T {
        let dw = self.omegas[1] - self.omegas[0];
        crate::num::compensated_sum(self.values.iter().copied()) * dw
    }

    pub fn peak(&self) -> (T, T) {
        let (i, v) =
            self.values
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        (self.omegas[i], v)
    }

    /// Half width at half maximum on the high-frequency side of the peak,
    /// linearly interpolated.
    pub fn half_width_at_half_maximum(&self) -> Option<T> {
        let (i0, peak) =
            self.values
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let half = peak / T::lit(2.0);
        let k = (i0..self.values.len()).find(|&k| self.values[k] < half)?;
        let (s0, s1) = (self.values[k - 1], self.values[k]);
        let (w0, w1) = (self.omegas[k - 1], self.omegas[k]);
        Some(w0 + (w1 - w0) * (s0 - half) / (s0 - s1) - self.omegas[i0])
    }

    /// Mean and standard deviation of `ω` under `S`.
    pub fn moments(&self) -> (T, T) {
        let total: T = self.values.iter().copied().sum();
        let mean = self.omegas.iter().zip(&self.values).map(|(w, s)| *w * *s).sum::<T>() / total;
        let var = self.omegas.iter().zip(&self.values).map(|(w, s)| (*w - mean).powi(2) * *s).sum::<T>() / total;
        (mean, var.sqrt())
    }
}

/// Fourier transform of the ISF over the conjugate-symmetric extension
/// `I(−t) = I(t)*`, which makes `S` real.
pub fn dsf<T: Real>(trace: &IsfTrace<T>, window: Window) -> Result<DsfTrace<T>> {
    let n = trace.times.len();
    if n < 2 {
        return Err(usage("the DSF needs at least two time points"));
    }
    let t_max = trace.times[n - 1];
    let dt = t_max / T::from_usize_exact(n - 1);
    if trace.times[0] != T::zero() {
        return Err(usage("the DSF needs a time grid starting at t = 0"));
    }
    let uniform =
        trace.times.iter().enumerate().all(|(i, &t)| (t - dt * T::from_usize_exact(i)).abs() <= T::lit(1e-6) * dt);
    if !uniform {
        return Err(usage("the DSF needs a uniform time grid"));
    }
    let taper = |t: T| match window {
        Window::None => T::one(),
        Window::Hann => T::lit(0.5) * (T::one() + (T::PI() * t / t_max).cos()),
    };
    let m = 2 * (n - 1);
    let mut buf: Vec<Complex<T>> = Vec::with_capacity(m);
    for i in 0..n {
        buf.push(trace.values[i] * taper(trace.times[i]));
    }
    for k in n..m {
        let i = m - k;
        buf.push(trace.values[i].conj() * taper(trace.times[i]));
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let norm = dt / T::TAU();
    let dw = T::TAU() / (T::from_usize_exact(m) * dt);
    let half = m / 2;
    let mut omegas = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    let mut worst_im = T::zero();
    for j in 0..m {
        // Reorder so that frequencies ascend from −π/Δt.
        let k = (j + half) % m;
        let signed = j as i64 - half as i64;
        let s = buf[k] * norm;
        worst_im = worst_im.max(s.im.abs());
        omegas.push(dw * T::from_i64(signed).expect("index fits"));
        values.push(s.re);
    }
    let peak = values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    Ok(DsfTrace {
        q: trace.q_used,
        omegas,
        values,
        window,
        normalization: DSF_NORMALIZATION,
        imaginary_residue: if peak > T::zero() { worst_im / peak } else { worst_im },
    })
}
