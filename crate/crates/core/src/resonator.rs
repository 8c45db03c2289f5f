//! Resonator-side analysis: notch-type S21 model and fit, photon-number
//! calibration, power-dependent loss model and critical-photon-number ratios.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::acceptor::C64;
use crate::constants::{BOLTZMANN, HBAR, PLANCK};
use crate::lindblad::{
    build_liouvillian, stationary_projection, steady_state_numeric, DensityMatrix4,
    FourLevelParams, LindbladError,
};

pub const MIN_TRACE_SAMPLES: usize = 8;
/// Required span of a trace in loaded linewidths `f₀/Q`.
pub const MIN_SPAN_LINEWIDTHS: f64 = 3.0;
/// A fit whose rms residual exceeds this fraction of `a` is rejected.
pub const MAX_RELATIVE_RMS: f64 = 0.5;
pub const BETA_BOUNDS: (f64, f64) = (0.05, 2.0);
/// Fractional change of the local log-log slope across the data range above
/// which a saturation fit is flagged as outside the power-law regime.
pub const CURVATURE_WARNING: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResonatorError {
    #[error("trace needs at least {MIN_TRACE_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("frequencies and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("frequency at sample {index} does not increase")]
    NonMonotonicFrequency { index: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("trace spans {span_hz} Hz but {required_hz} Hz are needed")]
    InsufficientSpan { span_hz: f64, required_hz: f64 },
    #[error("fit diverged: {0}")]
    FitDiverged(&'static str),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
    #[error("fitted beta {0} outside [0.05, 2]")]
    BetaOutOfBounds(f64),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ResonatorError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ResonatorError::InvalidParameter { name, value })
    }
}

/// Complex transmission samples of one resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct S21Trace {
    frequencies_hz: Vec<f64>,
    values: Vec<C64>,
    power_dbm_at_device: f64,
}

impl S21Trace {
    pub fn new(
        frequencies_hz: Vec<f64>,
        values: Vec<C64>,
        power_dbm_at_device: f64,
    ) -> Result<Self, ResonatorError> {
        if frequencies_hz.len() != values.len() {
            return Err(ResonatorError::LengthMismatch(
                frequencies_hz.len(),
                values.len(),
            ));
        }
        if frequencies_hz.len() < MIN_TRACE_SAMPLES {
            return Err(ResonatorError::TooFewSamples(frequencies_hz.len()));
        }
        for (index, (f, z)) in frequencies_hz.iter().zip(&values).enumerate() {
            if !f.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
                return Err(ResonatorError::NonFinite { index });
            }
            if index > 0 && *f <= frequencies_hz[index - 1] {
                return Err(ResonatorError::NonMonotonicFrequency { index });
            }
        }
        Ok(Self {
            frequencies_hz,
            values,
            power_dbm_at_device,
        })
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn power_dbm_at_device(&self) -> f64 {
        self.power_dbm_at_device
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn span_hz(&self) -> f64 {
        self.frequencies_hz[self.len() - 1] - self.frequencies_hz[0]
    }
}

/// One-sigma parameter uncertainties from the fit covariance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitUncertainty {
    pub a: f64,
    pub phi: f64,
    pub tau: f64,
    pub f0: f64,
    pub q: f64,
    pub qc: f64,
    pub df: f64,
    pub qi: f64,
}

/// Resonance parameters. `f_start` is the reference frequency of the
/// delay phase (first frequency of the fitted trace).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorFit {
    pub a: f64,
    pub phi: f64,
    /// Group delay, s.
    pub tau: f64,
    pub f0: f64,
    /// Loaded quality factor.
    pub q: f64,
    pub qc: f64,
    /// Asymmetry, Hz.
    pub df: f64,
    pub f_start: f64,
    /// Internal quality factor; infinite when `1/Q − 1/Qc ≤ 0`.
    pub qi: f64,
    pub uncertainty: Option<FitUncertainty>,
    /// Root-mean-square of `|model − data|`.
    pub rms_residual: f64,
}

impl ResonatorFit {
    /// Builds a parameter set with `qi` derived and no uncertainty attached.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: f64,
        phi: f64,
        tau: f64,
        f0: f64,
        q: f64,
        qc: f64,
        df: f64,
        f_start: f64,
    ) -> Self {
        Self {
            a,
            phi,
            tau,
            f0,
            q,
            qc,
            df,
            f_start,
            qi: internal_q(q, qc, df, f0),
            uncertainty: None,
            rms_residual: 0.0,
        }
    }
}

/// `1/Qi = 1/Q − Re[(1 + 2i·df/f₀)/Qc]`.
pub fn internal_q(q: f64, qc: f64, df: f64, f0: f64) -> f64 {
    let inv_qc = C64::new(1.0, 2.0 * df / f0) / qc;
    let inv = 1.0 / q - inv_qc.re;
    if inv > 0.0 {
        1.0 / inv
    } else {
        f64::INFINITY
    }
}

/// `a·e^{i[φ+2π(f−f_start)τ]}·(1 − (Q/Qc)(1+2i·df/f₀)/(1+2iQ(f−f₀)/f₀))`.
pub fn s21_model(fit: &ResonatorFit, f_hz: f64) -> C64 {
    let env = C64::from_polar(fit.a, fit.phi + 2.0 * PI * (f_hz - fit.f_start) * fit.tau);
    let k = C64::new(1.0, 2.0 * fit.df / fit.f0) * (fit.q / fit.qc);
    let d = C64::new(1.0, 2.0 * fit.q * (f_hz - fit.f0) / fit.f0);
    env * (C64::new(1.0, 0.0) - k / d)
}

/// Settings for [`fit_s21_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Per-point weights on `|model − data|²`; unweighted when `None`.
    pub weights: Option<Vec<f64>>,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            weights: None,
            max_iterations: 200,
        }
    }
}

/// Unweighted least-squares fit of [`s21_model`].
pub fn fit_s21(
    trace: &S21Trace,
    guess: Option<&ResonatorFit>,
) -> Result<ResonatorFit, ResonatorError> {
    fit_s21_with(trace, guess, &FitOptions::default())
}

/// Least-squares fit of [`s21_model`]. Without a guess the start point comes
/// from delay removal, an algebraic circle fit and a linear fit of the
/// normalized response; Levenberg–Marquardt refines all seven parameters.
pub fn fit_s21_with(
    trace: &S21Trace,
    guess: Option<&ResonatorFit>,
    options: &FitOptions,
) -> Result<ResonatorFit, ResonatorError> {
    let weights = match &options.weights {
        Some(w) if w.len() != trace.len() => {
            return Err(ResonatorError::LengthMismatch(trace.len(), w.len()))
        }
        Some(w) => {
            if let Some(&v) = w.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(ResonatorError::InvalidParameter {
                    name: "weight",
                    value: v,
                });
            }
            w.clone()
        }
        None => alloc::vec![1.0; trace.len()],
    };
    let start = match guess {
        Some(g) => {
            let mut g = *g;
            g.f_start = trace.frequencies_hz[0];
            g
        }
        None => initial_guess(trace)?,
    };
    if !(start.q > 0.0 && start.qc > 0.0 && start.f0 > 0.0 && start.a > 0.0) {
        return Err(ResonatorError::FitDiverged("no usable starting point"));
    }
    let fit = levenberg_marquardt(trace, &weights, &start, options.max_iterations)?;
    let required = MIN_SPAN_LINEWIDTHS * fit.f0 / fit.q;
    if trace.span_hz() < required {
        return Err(ResonatorError::InsufficientSpan {
            span_hz: trace.span_hz(),
            required_hz: required,
        });
    }
    Ok(fit)
}

fn unwrap_phase(z: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut offset = 0.0;
    let mut prev = 0.0;
    for (i, v) in z.iter().enumerate() {
        let p = v.arg();
        if i > 0 {
            let d = p - prev;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        prev = p;
        out.push(p + offset);
    }
    out
}

/// Ordinary least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

struct Circle {
    center: C64,
    radius: f64,
    /// rms geometric residual divided by the radius
    relative_rms: f64,
}

/// Algebraic (Kåsa) circle fit. Coordinates are centered and scaled first.
fn fit_circle(z: &[C64]) -> Option<Circle> {
    let n = z.len() as f64;
    let mean = z.iter().sum::<C64>() / n;
    let scale = z.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut m = SMatrix::<f64, 3, 3>::zeros();
    let mut rhs = SVector::<f64, 3>::zeros();
    for v in z {
        let w = (v - mean) / scale;
        let row = SVector::<f64, 3>::new(w.re, w.im, 1.0);
        m += row * row.transpose();
        rhs -= row * w.norm_sqr();
    }
    let sol = m.lu().solve(&rhs)?;
    let c = C64::new(-0.5 * sol[0], -0.5 * sol[1]);
    let r2 = c.norm_sqr() - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    let r = r2.sqrt();
    let ss: f64 = z
        .iter()
        .map(|v| ((v - mean) / scale - c).norm() - r)
        .map(|e| e * e)
        .sum();
    Some(Circle {
        center: mean + c * scale,
        radius: r * scale,
        relative_rms: (ss / n).sqrt() / r,
    })
}

fn remove_delay(trace: &S21Trace, tau: f64) -> Vec<C64> {
    let f0 = trace.frequencies_hz[0];
    trace
        .frequencies_hz
        .iter()
        .zip(&trace.values)
        .map(|(f, z)| z * C64::from_polar(1.0, -2.0 * PI * (f - f0) * tau))
        .collect()
}

/// Group delay from the phase slopes of the two trace edges, refined by
/// minimizing the circle-fit residual.
fn estimate_delay(trace: &S21Trace) -> f64 {
    let n = trace.len();
    let m = (n / 10).max(4);
    let f = &trace.frequencies_hz;
    let z = &trace.values;
    let lo = slope(&f[..m], &unwrap_phase(&z[..m]));
    let hi = slope(&f[n - m..], &unwrap_phase(&z[n - m..]));
    let tau0 = 0.5 * (lo + hi) / (2.0 * PI);
    let cost =
        |tau: f64| fit_circle(&remove_delay(trace, tau)).map_or(f64::INFINITY, |c| c.relative_rms);
    // search in phase accumulated across the span, ±1.5 rad around the edge estimate
    let per_rad = 1.0 / (2.0 * PI * trace.span_hz());
    let steps = 60;
    let grid = |k: usize| tau0 + (-1.5 + 3.0 * k as f64 / steps as f64) * per_rad;
    let best = (0..=steps)
        .map(|k| (k, cost(grid(k))))
        .fold(
            (0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        )
        .0;
    let (mut a, mut b) = (grid(best.saturating_sub(1)), grid((best + 1).min(steps)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    0.5 * (a + b)
}

fn initial_guess(trace: &S21Trace) -> Result<ResonatorFit, ResonatorError> {
    let f = &trace.frequencies_hz;
    let n = trace.len();
    let tau = estimate_delay(trace);
    let z = remove_delay(trace, tau);
    let circle = fit_circle(&z).ok_or(ResonatorError::FitDiverged("circle fit failed"))?;
    let unit = |v: C64| {
        let d = v - circle.center;
        d / d.norm()
    };
    let dir = unit(z[0]) + unit(z[n - 1]);
    let dir = if dir.norm() > 0.0 {
        dir / dir.norm()
    } else {
        unit(z[0])
    };
    let p = circle.center + dir * circle.radius;
    let k = (C64::new(1.0, 0.0) - circle.center / p) * 2.0;

    // Im(k/y) = 2Q·f/f₀ − 2Q with y = 1 − z/p, weighted by |y|²
    let mut sw = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let fm = f[n / 2];
    for (fi, zi) in f.iter().zip(&z) {
        let y = C64::new(1.0, 0.0) - zi / p;
        let w = y.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let x = fi - fm;
        let v = (k / y).im;
        sw += w;
        sx += w * x;
        sy += w * v;
        sxx += w * x * x;
        sxy += w * x * v;
    }
    let m = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    let intercept = (sy - m * sx) / sw;
    // v = m·(f − fm) + intercept and v = 2Q(f − f₀)/f₀ ⇒ f₀ = fm − intercept/m
    let f0 = fm - intercept / m;
    let q = 0.5 * m * f0;
    let ratio = k.re;
    if !(q > 0.0 && ratio > 0.0 && f0.is_finite()) {
        return Err(ResonatorError::FitDiverged(
            "initial estimate is unphysical",
        ));
    }
    let s = k.im / k.re;
    Ok(ResonatorFit::new(
        p.norm(),
        p.arg(),
        tau,
        f0,
        q,
        q / ratio,
        0.5 * s * f0,
        f[0],
    ))
}

const NP: usize = 7;
type Normal = SMatrix<f64, NP, NP>;
type Grad = SVector<f64, NP>;

/// Parameter vector `[a, φ, τ, f₀ − f_ref, ln Q, ln Qc, 2df/f₀]`.
fn pack(fit: &ResonatorFit, f_ref: f64) -> Grad {
    Grad::from_column_slice(&[
        fit.a,
        fit.phi,
        fit.tau,
        fit.f0 - f_ref,
        fit.q.ln(),
        fit.qc.ln(),
        2.0 * fit.df / fit.f0,
    ])
}

fn unpack(p: &Grad, f_ref: f64, f_start: f64) -> ResonatorFit {
    let f0 = f_ref + p[3];
    ResonatorFit::new(
        p[0],
        p[1],
        p[2],
        f0,
        p[4].exp(),
        p[5].exp(),
        0.5 * p[6] * f0,
        f_start,
    )
}

/// Weighted cost `Σ w|m − d|²`, normal matrix `JᵀWJ` and gradient `JᵀWr`.
fn linearize(trace: &S21Trace, weights: &[f64], p: &Grad, f_ref: f64) -> (f64, Normal, Grad) {
    let (a, phi, tau, f0) = (p[0], p[1], p[2], f_ref + p[3]);
    let (q, qc, s) = (p[4].exp(), p[5].exp(), p[6]);
    let fs = trace.frequencies_hz[0];
    let k = C64::new(1.0, s) * (q / qc);
    let i = C64::new(0.0, 1.0);
    let mut cost = 0.0;
    let mut jtj = Normal::zeros();
    let mut jtr = Grad::zeros();
    for ((&f, d), &w) in trace.frequencies_hz.iter().zip(&trace.values).zip(weights) {
        let e = C64::from_polar(1.0, phi + 2.0 * PI * (f - fs) * tau);
        let den = C64::new(1.0, 2.0 * q * (f - f0) / f0);
        let r = C64::new(1.0, 0.0) - k / den;
        let m = e * r * a;
        let res = m - d;
        let aek = e * k * a;
        let cols = [
            e * r,
            i * m,
            i * m * (2.0 * PI * (f - fs)),
            aek / (den * den) * i * (-2.0 * q * f / (f0 * f0)),
            -aek / (den * den),
            aek / den,
            -e * i * a * (q / qc) / den,
        ];
        cost += w * res.norm_sqr();
        for (u, cu) in cols.iter().enumerate() {
            jtr[u] += w * (cu.re * res.re + cu.im * res.im);
            for (v, cv) in cols.iter().enumerate().skip(u) {
                jtj[(u, v)] += w * (cu.re * cv.re + cu.im * cv.im);
            }
        }
    }
    for u in 0..NP {
        for v in 0..u {
            jtj[(u, v)] = jtj[(v, u)];
        }
    }
    (cost, jtj, jtr)
}

fn levenberg_marquardt(
    trace: &S21Trace,
    weights: &[f64],
    start: &ResonatorFit,
    max_iterations: usize,
) -> Result<ResonatorFit, ResonatorError> {
    let f_ref = start.f0;
    let f_start = trace.frequencies_hz[0];
    let mut p = pack(start, f_ref);
    let (mut cost, mut jtj, mut jtr) = linearize(trace, weights, &p, f_ref);
    let mut lambda = 1e-3;
    for _ in 0..max_iterations {
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for u in 0..NP {
                a[(u, u)] += lambda * jtj[(u, u)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-jtr));
            let trial = p + step;
            let (c, j, g) = linearize(trace, weights, &trial, f_ref);
            if c.is_finite() && c <= cost {
                let done = cost - c <= 1e-14 * cost || c == 0.0;
                p = trial;
                cost = c;
                jtj = j;
                jtr = g;
                lambda = (lambda / 3.0).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let mut fit = unpack(&p, f_ref, f_start);
    let wsum: f64 = weights.iter().sum();
    fit.rms_residual = (cost / wsum).sqrt();
    let finite = [fit.a, fit.phi, fit.tau, fit.f0, fit.q, fit.qc, fit.df]
        .iter()
        .all(|v| v.is_finite());
    if !finite || fit.a <= 0.0 || fit.f0 <= 0.0 {
        return Err(ResonatorError::FitDiverged(
            "non-finite or unphysical parameters",
        ));
    }
    if fit.rms_residual > MAX_RELATIVE_RMS * fit.a {
        return Err(ResonatorError::FitDiverged("residual above threshold"));
    }
    fit.uncertainty = uncertainty(&fit, &jtj, cost, trace.len());
    Ok(fit)
}

fn uncertainty(fit: &ResonatorFit, jtj: &Normal, cost: f64, n: usize) -> Option<FitUncertainty> {
    let dof = (2 * n).checked_sub(NP).filter(|d| *d > 0)? as f64;
    let cov = jtj.try_inverse()? * (cost / dof);
    let sd = |u: usize| cov[(u, u)].max(0.0).sqrt();
    let qi_var = if fit.qi.is_finite() {
        let g = [fit.qi * fit.qi / fit.q, -fit.qi * fit.qi / fit.qc];
        g[0] * g[0] * cov[(4, 4)] + 2.0 * g[0] * g[1] * cov[(4, 5)] + g[1] * g[1] * cov[(5, 5)]
    } else {
        f64::INFINITY
    };
    Some(FitUncertainty {
        a: sd(0),
        phi: sd(1),
        tau: sd(2),
        f0: sd(3),
        q: fit.q * sd(4),
        qc: fit.qc * sd(5),
        df: 0.5 * fit.f0 * sd(6),
        qi: qi_var.max(0.0).sqrt(),
    })
}

/// Mean photon number from input-output theory,
/// `⟨n⟩ = 2Q²Pin/(Qe·ħω₀²)` with `ω₀ = 2πf₀`.
pub fn photon_number(pin_watts: f64, f0_hz: f64, q: f64, qe: f64) -> Result<f64, ResonatorError> {
    if !(pin_watts >= 0.0 && pin_watts.is_finite()) {
        return Err(ResonatorError::InvalidParameter {
            name: "pin_watts",
            value: pin_watts,
        });
    }
    let w = 2.0 * PI * positive("f0_hz", f0_hz)?;
    let (q, qe) = (positive("q", q)?, positive("qe", qe)?);
    Ok(2.0 * q * q * pin_watts / (qe * HBAR * w * w))
}

/// Same quantity in decay rates: `2κₑPin/(ħω₀(κᵢ+κₑ)²)` (rates in s⁻¹).
pub fn photon_number_from_rates(
    pin_watts: f64,
    f0_hz: f64,
    kappa_i: f64,
    kappa_e: f64,
) -> Result<f64, ResonatorError> {
    if !(pin_watts >= 0.0 && pin_watts.is_finite()) {
        return Err(ResonatorError::InvalidParameter {
            name: "pin_watts",
            value: pin_watts,
        });
    }
    if !(kappa_i >= 0.0 && kappa_i.is_finite()) {
        return Err(ResonatorError::InvalidParameter {
            name: "kappa_i",
            value: kappa_i,
        });
    }
    let w = 2.0 * PI * positive("f0_hz", f0_hz)?;
    let ke = positive("kappa_e", kappa_e)?;
    let k = kappa_i + ke;
    Ok(2.0 * ke * pin_watts / (HBAR * w * k * k))
}

/// `A(T) = tanh(ħω/(2k_BT))`; `T = 0` gives 1.
pub fn thermal_factor(f_hz: f64, t_kelvin: f64) -> Result<f64, ResonatorError> {
    if !(t_kelvin >= 0.0 && t_kelvin.is_finite()) {
        return Err(ResonatorError::InvalidParameter {
            name: "temperature",
            value: t_kelvin,
        });
    }
    if t_kelvin == 0.0 {
        return Ok(1.0);
    }
    Ok((PLANCK * f_hz / (2.0 * BOLTZMANN * t_kelvin)).tanh())
}

/// Excited-state population of a thermal two-level system.
pub fn excited_population(f_hz: f64, t_kelvin: f64) -> f64 {
    1.0 / (1.0 + (PLANCK * f_hz / (BOLTZMANN * t_kelvin)).exp())
}

/// Inverse of [`excited_population`]: `T = hf/(k_B ln((1−p)/p))`.
pub fn temperature_from_excited_population(
    f_hz: f64,
    p_excited: f64,
) -> Result<f64, ResonatorError> {
    if !(p_excited > 0.0 && p_excited < 0.5) {
        return Err(ResonatorError::InvalidParameter {
            name: "p_excited",
            value: p_excited,
        });
    }
    Ok(PLANCK * positive("f_hz", f_hz)? / (BOLTZMANN * ((1.0 - p_excited) / p_excited).ln()))
}

/// Parameters of `tanδ = tanδ₀·A(T)/√(1 + (n/n_c)^β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationFitParams {
    pub tan_delta0: f64,
    pub n_c: f64,
    pub beta: f64,
    pub a_t: f64,
}

impl SaturationFitParams {
    pub fn validate(&self) -> Result<(), ResonatorError> {
        positive("tan_delta0", self.tan_delta0)?;
        positive("n_c", self.n_c)?;
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(ResonatorError::InvalidParameter {
                name: "beta",
                value: self.beta,
            });
        }
        if !(self.a_t > 0.0 && self.a_t <= 1.0) {
            return Err(ResonatorError::InvalidParameter {
                name: "a_t",
                value: self.a_t,
            });
        }
        Ok(())
    }
}

pub fn saturation_model(n_photons: f64, p: &SaturationFitParams) -> f64 {
    p.tan_delta0 * p.a_t / (1.0 + (n_photons / p.n_c).powf(p.beta)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaturationWarning {
    /// The data curve away from a straight line in log-log.
    RegimeViolation { curvature: f64 },
}

/// Joint log10-log10 fit `log tanδ = −a·log n + b` with shared slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationLogLogFit {
    pub a_shared: f64,
    pub b_zero: f64,
    pub b_field: f64,
    /// `n_c(B=0)/n_c(B>0) = 10^{(b_zero − b_field)/a}`.
    pub nc_ratio: f64,
    /// `β = 2a`.
    pub beta: f64,
    /// Quadratic coefficient of a joint fit with a shared curvature term.
    pub curvature: f64,
    pub warning: Option<SaturationWarning>,
}

/// Fits `(n, tanδ)` points measured at zero field and in field.
pub fn fit_saturation_loglog(
    zero_field: &[(f64, f64)],
    in_field: &[(f64, f64)],
) -> Result<SaturationLogLogFit, ResonatorError> {
    if zero_field.is_empty() || in_field.is_empty() || zero_field.len() + in_field.len() < 3 {
        return Err(ResonatorError::DegenerateFit("too few points"));
    }
    let mut rows = Vec::with_capacity(zero_field.len() + in_field.len());
    for (set, points) in [(0usize, zero_field), (1, in_field)] {
        for &(n, t) in points {
            positive("photon number", n)?;
            positive("tan_delta", t)?;
            rows.push((set, n.log10(), t.log10()));
        }
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let xmean = xs.iter().sum::<f64>() / xs.len() as f64;
    let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // within-set spread of x is what determines the slope
    let within: f64 = [0, 1]
        .iter()
        .map(|&s| {
            let v: Vec<f64> = rows.iter().filter(|r| r.0 == s).map(|r| r.1).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        })
        .sum();
    if !(within > 1e-12) {
        return Err(ResonatorError::DegenerateFit("photon numbers do not vary"));
    }

    let linear = solve_normal::<3>(&rows, |set, x| {
        SVector::<f64, 3>::new(-x, (set == 0) as u8 as f64, (set == 1) as u8 as f64)
    })
    .ok_or(ResonatorError::DegenerateFit("singular normal equations"))?;
    let (a, b0, b1) = (linear[0], linear[1], linear[2]);
    let beta = 2.0 * a;
    if !(BETA_BOUNDS.0..=BETA_BOUNDS.1).contains(&beta) {
        return Err(ResonatorError::BetaOutOfBounds(beta));
    }

    let curvature = solve_normal::<4>(&rows, |set, x| {
        SVector::<f64, 4>::new(
            -x,
            (set == 0) as u8 as f64,
            (set == 1) as u8 as f64,
            (x - xmean).powi(2),
        )
    })
    .map_or(0.0, |s| s[3]);
    // local slope is −a + 2c(x − x̄); compare its change across the data to a
    let change = 2.0 * curvature.abs() * (xmax - xmin) / a;
    let warning =
        (change > CURVATURE_WARNING).then_some(SaturationWarning::RegimeViolation { curvature });

    Ok(SaturationLogLogFit {
        a_shared: a,
        b_zero: b0,
        b_field: b1,
        nc_ratio: 10f64.powf((b0 - b1) / a),
        beta,
        curvature,
        warning,
    })
}

fn solve_normal<const D: usize>(
    rows: &[(usize, f64, f64)],
    design: impl Fn(usize, f64) -> SVector<f64, D>,
) -> Option<SVector<f64, D>> {
    let mut m = SMatrix::<f64, D, D>::zeros();
    let mut rhs = SVector::<f64, D>::zeros();
    for &(set, x, y) in rows {
        let r = design(set, x);
        m += r * r.transpose();
        rhs += r * y;
    }
    m.cholesky().map(|c| c.solve(&rhs))
}

/// Inputs of [`predict_saturation_curve`]: the four-level model, the
/// unsaturated loss tangent and the Rabi frequency per √photon (same units
/// as the rates in `lindblad`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationCurveSpec {
    pub lindblad: FourLevelParams,
    pub field_on: bool,
    pub tan_delta0: f64,
    pub rabi_per_sqrt_photon: f64,
}

fn population_difference(p: &FourLevelParams, field_on: bool) -> Result<f64, ResonatorError> {
    let l = build_liouvillian(p, field_on);
    let rho = match steady_state_numeric(&l) {
        Ok(r) => r,
        Err(LindbladError::DegenerateSteadyState { .. }) => {
            stationary_projection(&l, &DensityMatrix4::maximally_mixed())?
        }
        Err(e) => return Err(e.into()),
    };
    Ok(rho.population_difference())
}

impl SaturationCurveSpec {
    fn validate(&self) -> Result<(), ResonatorError> {
        self.lindblad.validate()?;
        positive("tan_delta0", self.tan_delta0)?;
        positive("rabi_per_sqrt_photon", self.rabi_per_sqrt_photon)?;
        Ok(())
    }

    fn relative_loss(&self, n: f64, reference: f64) -> Result<f64, ResonatorError> {
        let p = self
            .lindblad
            .with_omega(self.rabi_per_sqrt_photon * n.sqrt());
        Ok(population_difference(&p, self.field_on)? / reference)
    }

    fn reference(&self) -> Result<f64, ResonatorError> {
        let r = population_difference(&self.lindblad.with_omega(0.0), self.field_on)?;
        if r > 0.0 {
            Ok(r)
        } else {
            Err(ResonatorError::DegenerateFit(
                "no unsaturated population difference",
            ))
        }
    }
}

/// `tanδ(n) = tanδ₀·(ρ₁₁−ρ₃₃)/(ρ₁₁−ρ₃₃)₀` with `Ω = g√n`, using the
/// numerically solved steady state.
pub fn predict_saturation_curve(
    spec: &SaturationCurveSpec,
    photons: &[f64],
) -> Result<Vec<f64>, ResonatorError> {
    spec.validate()?;
    let reference = spec.reference()?;
    photons
        .iter()
        .map(|&n| {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(ResonatorError::InvalidParameter {
                    name: "photon number",
                    value: n,
                });
            }
            Ok(spec.tan_delta0 * spec.relative_loss(n, reference)?)
        })
        .collect()
}

/// Photon number at which the predicted loss falls to `1/√2` of its
/// unsaturated value (bisection in `ln n`).
pub fn half_power_photon_number(spec: &SaturationCurveSpec) -> Result<f64, ResonatorError> {
    spec.validate()?;
    let reference = spec.reference()?;
    let g = |ln_n: f64| {
        spec.relative_loss(ln_n.exp(), reference)
            .map(|v| v - 1.0 / SQRT_2)
    };
    let (mut lo, mut hi) = (-60.0f64, 0.0f64);
    while g(hi)? > 0.0 {
        hi += 10.0;
        if hi > 200.0 {
            return Err(ResonatorError::DegenerateFit("loss never saturates"));
        }
    }
    if g(lo)? < 0.0 {
        return Err(ResonatorError::DegenerateFit("saturated at zero power"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Geometric mean of internal quality factors.
pub fn geometric_mean_qi(qis: &[f64]) -> Result<f64, ResonatorError> {
    if qis.is_empty() {
        return Err(ResonatorError::DegenerateFit("no quality factors"));
    }
    let mut sum = 0.0;
    for &q in qis {
        sum += positive("qi", q)?.ln();
    }
    Ok((sum / qis.len() as f64).exp())
}
