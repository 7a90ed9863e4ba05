//! Decay-rate fitting and Gronwall envelopes.
//!
//! Envelopes are evaluated on the sample times of a trajectory. Convolutions
//! `∫₀ᵗ e^{−μ(t−s)} g(s) ds` use the trapezoidal recursion
//! `I_{i+1} = e^{−μΔ}I_i + Δ/2 (e^{−μΔ} g_i + g_{i+1})`.

use serde::Serialize;

use crate::{Result, SlabError};

/// Samples `‖w(tᵢ)‖` together with the forcing used by the matching envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `g(tᵢ)` or `h(tᵢ)`; empty when the envelope has no forcing.
    pub forcing: Vec<f64>,
    pub meta: SeriesMeta,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SeriesMeta {
    pub mu_floor: f64,
    pub c0: f64,
    pub c1: f64,
}

impl DecaySeries {
    pub fn new(times: Vec<f64>, norms: Vec<f64>, forcing: Vec<f64>, meta: SeriesMeta) -> Result<Self> {
        if times.len() != norms.len() || (!forcing.is_empty() && forcing.len() != times.len()) {
            return Err(SlabError::GridMismatch("series columns differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SlabError::InvalidParameter("series times must be strictly increasing".into()));
        }
        if norms.iter().any(|v| !(*v >= 0.0)) {
            return Err(SlabError::InvalidParameter("series norms must be nonnegative".into()));
        }
        Ok(Self { times, norms, forcing, meta })
    }
}

/// Which part of a series the rate is fitted on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Samples with `t ≥ t₀ + f·(t_end − t₀)`.
    LatterFraction(f64),
    Times(f64, f64),
}

impl Default for Window {
    fn default() -> Self {
        Window::LatterFraction(0.5)
    }
}

pub const MIN_R2: f64 = 0.999;
/// Relative disagreement between the half-window rates that counts as curvature.
pub const CURVATURE_TOL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// `−d log‖w‖/dt` from least squares.
    pub rate: f64,
    pub r2: f64,
    /// `R² < 0.999`: the rate is reported but not claimed.
    pub low_confidence: bool,
    /// The two halves of the window disagree by more than 1 %.
    pub curvature: bool,
    pub samples: usize,
    pub window: (f64, f64),
}

fn window_indices(times: &[f64], window: Window) -> Result<(usize, usize)> {
    let n = times.len();
    if n == 0 {
        return Err(SlabError::InvalidParameter("empty series".into()));
    }
    let (a, b) = match window {
        Window::LatterFraction(f) => {
            if !(0.0..1.0).contains(&f) {
                return Err(SlabError::InvalidParameter(format!("window fraction must lie in [0, 1), got {f}")));
            }
            (times[0] + f * (times[n - 1] - times[0]), times[n - 1])
        }
        Window::Times(a, b) => (a, b),
    };
    let lo = times.iter().position(|&t| t >= a - 1e-12 * a.abs().max(1.0)).unwrap_or(n);
    let hi = times.iter().rposition(|&t| t <= b + 1e-12 * b.abs().max(1.0)).map_or(0, |i| i + 1);
    if hi <= lo || hi - lo < 10 {
        return Err(SlabError::InvalidParameter(format!("need at least 10 samples in the window, got {}", hi.saturating_sub(lo))));
    }
    Ok((lo, hi))
}

fn least_squares(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        sxy += (a - mt) * (b - my);
        sxx += (a - mt).powi(2);
        syy += (b - my).powi(2);
    }
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-30 * n { 1.0 } else { (sxy * sxy / (sxx * syy)).min(1.0) };
    (slope, r2)
}

/// Least-squares decay rate of `log‖w‖` on a window of raw samples.
pub fn fit_rate(times: &[f64], norms: &[f64], window: Window) -> Result<RateFit> {
    if times.len() != norms.len() {
        return Err(SlabError::GridMismatch("times and norms differ in length".into()));
    }
    let (lo, hi) = window_indices(times, window)?;
    let t = &times[lo..hi];
    let v = &norms[lo..hi];
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
        return Err(SlabError::InvalidParameter(format!("nonpositive norm {bad} inside the fit window")));
    }
    let y: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let (slope, r2) = least_squares(t, &y);
    let m = t.len() / 2;
    let (s1, _) = least_squares(&t[..m + 1], &y[..m + 1]);
    let (s2, _) = least_squares(&t[m..], &y[m..]);
    let rate = -slope + 0.0;
    let curvature = (s1 - s2).abs() > CURVATURE_TOL * rate.abs().max(1e-12);
    Ok(RateFit {
        rate,
        r2,
        low_confidence: r2 < MIN_R2,
        curvature: curvature || r2 < MIN_R2,
        samples: t.len(),
        window: (t[0], t[t.len() - 1]),
    })
}

pub fn fit_decay_rate(series: &DecaySeries, window: Window) -> Result<RateFit> {
    fit_rate(&series.times, &series.norms, window)
}

/// `∫₀^{tᵢ} e^{−μ(tᵢ−s)} g(s) ds` on the sample grid.
pub fn exp_convolution(mu: f64, g: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    if g.len() != times.len() {
        return Err(SlabError::GridMismatch("forcing and times differ in length".into()));
    }
    let mut out = vec![0.0; times.len()];
    for i in 1..times.len() {
        let dtau = times[i] - times[i - 1];
        let e = (-mu * dtau).exp();
        out[i] = e * out[i - 1] + 0.5 * dtau * (e * g[i - 1] + g[i]);
    }
    Ok(out)
}

fn validate(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SlabError::InvalidParameter("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Envelope split into the part carried by the initial data and the part
/// driven by the forcing, so that an unknown constant in front of the
/// forcing can be calibrated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub times: Vec<f64>,
    pub homogeneous: Vec<f64>,
    pub forced: Vec<f64>,
    /// Multiplier of `forced` (the unspecified universal constant of the estimate).
    pub constant: f64,
    /// The envelope bounds the squared norm.
    pub squared: bool,
    pub rate: f64,
}

impl Envelope {
    pub fn values(&self) -> Vec<f64> {
        self.homogeneous.iter().zip(&self.forced).map(|(a, b)| a + self.constant * b).collect()
    }

    pub fn with_constant(&self, c: f64) -> Self {
        Self { constant: c, ..self.clone() }
    }
}

/// `e^{−μt}‖θ₀‖ + |∂3θ_eq| ∫₀ᵗ e^{−μ(t−s)} g(s) ds`.
pub fn envelope_rigid(theta0_norm: f64, mu: f64, grad_eq: f64, g: &[f64], times: &[f64]) -> Result<Envelope> {
    if !(mu > 0.0) {
        return Err(SlabError::InvalidParameter(format!("decay rate must be positive, got {mu}")));
    }
    validate(times)?;
    let t0 = times.first().copied().unwrap_or(0.0);
    let homogeneous = times.iter().map(|t| (-mu * (t - t0)).exp() * theta0_norm).collect();
    let forced = if g.is_empty() {
        vec![0.0; times.len()]
    } else {
        exp_convolution(mu, g, times)?.into_iter().map(|v| grad_eq.abs() * v).collect()
    };
    Ok(Envelope { times: times.to_vec(), homogeneous, forced, constant: 1.0, squared: false, rate: mu })
}

/// Inputs of the three moving-boundary envelopes.
#[derive(Clone, Debug, PartialEq)]
pub enum MovingEnvelope<'a> {
    /// Insulated periodic box: rate `μ̄₀/(c0c1)`, no forcing.
    NeumannPeriodic { c0: f64, c1: f64, gap: f64, initial_norm: f64 },
    /// `β₊ = ∞`: rate `μ_β/c0²` with forcing `C|∂3θ_eq| g`.
    DirichletTop { c0: f64, mu: f64, grad_eq: f64, g: &'a [f64], initial_norm: f64 },
    /// Finite `β₊`: squared norm, rate `μ_β/(2c0²)`, forcing
    /// `C(|∂3θ_eq|²c0²/μ_β + β₊|θ̄ − θ_eq|²/2) h²`.
    General { c0: f64, mu: f64, grad_eq: f64, beta_plus: f64, contrast: f64, h: &'a [f64], initial_norm_sq: f64 },
}

pub fn envelope_moving(kind: &MovingEnvelope, times: &[f64]) -> Result<Envelope> {
    validate(times)?;
    let t0 = times.first().copied().unwrap_or(0.0);
    let exp_part = |rate: f64, a: f64| times.iter().map(|t| (-rate * (t - t0)).exp() * a).collect::<Vec<_>>();
    let check_c0 = |c0: f64| {
        if c0 >= 1.0 && c0.is_finite() {
            Ok(())
        } else {
            Err(SlabError::InvalidParameter(format!("c0 must be >= 1, got {c0}")))
        }
    };
    match *kind {
        MovingEnvelope::NeumannPeriodic { c0, c1, gap, initial_norm } => {
            check_c0(c0)?;
            if !(c1 > 0.0 && gap > 0.0) {
                return Err(SlabError::InvalidParameter("insulated envelope needs c1 > 0 and a positive gap".into()));
            }
            let rate = gap / (c0 * c1);
            Ok(Envelope {
                times: times.to_vec(),
                homogeneous: exp_part(rate, initial_norm),
                forced: vec![0.0; times.len()],
                constant: 0.0,
                squared: false,
                rate,
            })
        }
        MovingEnvelope::DirichletTop { c0, mu, grad_eq, g, initial_norm } => {
            check_c0(c0)?;
            if !(mu > 0.0) {
                return Err(SlabError::InvalidParameter(format!("decay rate must be positive, got {mu}")));
            }
            let rate = mu / (c0 * c0);
            let forced = if g.is_empty() {
                vec![0.0; times.len()]
            } else {
                exp_convolution(rate, g, times)?.into_iter().map(|v| grad_eq.abs() * v).collect()
            };
            Ok(Envelope { times: times.to_vec(), homogeneous: exp_part(rate, initial_norm), forced, constant: 1.0, squared: false, rate })
        }
        MovingEnvelope::General { c0, mu, grad_eq, beta_plus, contrast, h, initial_norm_sq } => {
            check_c0(c0)?;
            if !(mu > 0.0) {
                return Err(SlabError::InvalidParameter(format!("decay rate must be positive, got {mu}")));
            }
            if !(beta_plus.is_finite() && beta_plus >= 0.0) {
                return Err(SlabError::InvalidParameter("the squared-norm envelope needs a finite top coefficient".into()));
            }
            let rate = mu / (2.0 * c0 * c0);
            let weight = grad_eq * grad_eq * c0 * c0 / mu + 0.5 * beta_plus * contrast * contrast;
            let forced = if h.is_empty() {
                vec![0.0; times.len()]
            } else {
                let h2: Vec<f64> = h.iter().map(|v| v * v).collect();
                exp_convolution(rate, &h2, times)?.into_iter().map(|v| weight * v).collect()
            };
            Ok(Envelope {
                times: times.to_vec(),
                homogeneous: exp_part(rate, initial_norm_sq),
                forced,
                constant: 1.0,
                squared: true,
                rate,
            })
        }
    }
}

/// Pointwise tolerance `10⁻⁹ + 10⁻³·envelope`.
pub fn tolerance(envelope: f64) -> f64 {
    1e-9 + 1e-3 * envelope
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub envelope: Vec<f64>,
    /// `min (envelope − observed)`.
    pub margin: f64,
    pub worst_time: f64,
    pub pass: bool,
}

/// Pointwise domination of `observed` by `envelope`; compares squares when
/// the envelope bounds the squared norm.
pub fn check_envelope(series: &DecaySeries, envelope: &Envelope) -> Result<EnvelopeCheck> {
    if series.times.len() != envelope.times.len()
        || series.times.iter().zip(&envelope.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(SlabError::GridMismatch("series and envelope are sampled at different times".into()));
    }
    let env = envelope.values();
    let mut margin = f64::INFINITY;
    let mut worst_time = series.times.first().copied().unwrap_or(0.0);
    let mut pass = true;
    for ((t, &obs), &e) in series.times.iter().zip(&series.norms).zip(&env) {
        let o = if envelope.squared { obs * obs } else { obs };
        let m = e - o;
        if m < margin {
            margin = m;
            worst_time = *t;
        }
        if o > e + tolerance(e) {
            pass = false;
        }
    }
    Ok(EnvelopeCheck { envelope: env, margin, worst_time, pass })
}

/// Relative tolerance of the rate-only gate.
pub const RATE_TOL: f64 = 5e-3;

/// Rate-only mode: the observed rate must not fall below the rate of the
/// envelope itself on the same window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateCheck {
    pub rate_floor: f64,
    pub fitted_rate: f64,
    pub r2: f64,
    pub pass: bool,
}

pub fn rate_only_check(series: &DecaySeries, envelope: &Envelope, window: Window) -> Result<RateCheck> {
    let fit = fit_decay_rate(series, window)?;
    let env = envelope.values();
    let env_norm: Vec<f64> = if envelope.squared { env.iter().map(|v| v.max(0.0).sqrt()).collect() } else { env };
    let floor = fit_rate(&envelope.times, &env_norm, window)?.rate;
    Ok(RateCheck {
        rate_floor: floor,
        fitted_rate: fit.rate,
        r2: fit.r2,
        pass: fit.rate >= floor - RATE_TOL * floor.abs() - 1e-12,
    })
}

/// Calibrated mode: the smallest constant making the envelope valid on the
/// first quarter of the samples, then checked on all of them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibratedCheck {
    pub constant: f64,
    pub check: EnvelopeCheck,
}

pub fn calibrated_check(series: &DecaySeries, envelope: &Envelope) -> Result<CalibratedCheck> {
    let n = series.times.len();
    let early = (n / 4).max(1);
    let mut c = 0.0f64;
    for i in 0..early.min(n) {
        let obs = if envelope.squared { series.norms[i].powi(2) } else { series.norms[i] };
        let excess = obs - envelope.homogeneous[i];
        if excess > 0.0 && envelope.forced[i] > 0.0 {
            c = c.max(excess / envelope.forced[i]);
        }
    }
    let calibrated = envelope.with_constant(c);
    Ok(CalibratedCheck { constant: c, check: check_envelope(series, &calibrated)? })
}

/// JSON summary of one envelope verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub case: String,
    pub rate_floor: f64,
    pub fitted_rate: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    pub margin: f64,
    pub pass: bool,
    pub pointwise_pass: bool,
    pub calibrated_constant: Option<f64>,
    pub calibrated_pass: Option<bool>,
}

/// Runs both modes; the rate-only result is the gate.
pub fn envelope_report(case: &str, series: &DecaySeries, envelope: &Envelope, window: Window) -> Result<EnvelopeReport> {
    let rate = rate_only_check(series, envelope, window)?;
    let point = check_envelope(series, envelope)?;
    let has_forcing = envelope.forced.iter().any(|v| *v > 0.0);
    let cal = if has_forcing { Some(calibrated_check(series, envelope)?) } else { None };
    Ok(EnvelopeReport {
        case: case.to_string(),
        rate_floor: rate.rate_floor,
        fitted_rate: rate.fitted_rate,
        r2: rate.r2,
        margin: point.margin,
        pass: rate.pass,
        pointwise_pass: point.pass,
        calibrated_constant: cal.as_ref().map(|c| c.constant),
        calibrated_pass: cal.map(|c| c.check.pass),
    })
}
