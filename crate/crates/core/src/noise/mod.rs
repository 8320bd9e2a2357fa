//! Gate-referred charge noise: spectra, filter-function variance, decay
//! envelopes and insensitivity.
//!
//! Internally frequencies are angular, in rad/ns, and spectral densities are
//! per ns, so a 1/f spectrum A²/ω keeps its numerical form while a white
//! level given in mV²·s is scaled by 1e9.

mod correlation;
mod projection;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate, QuadOptions};

pub use correlation::GateCorrelation;
pub use projection::{project_noise_to_gates, FieldGrid};

/// Oscillatory part of the filter integral is resolved up to ωt = this; the
/// remainder is replaced by its cycle average.
const X_MAX: f64 = 1.0e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    OneOverF,
    White,
}

/// Filter function F(ωt) of the evolution pulse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFunction {
    /// F(z) = sin²(z/2).
    #[default]
    SquarePulse,
}

impl FilterFunction {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            FilterFunction::SquarePulse => {
                let s = (0.5 * z).sin();
                s * s
            }
        }
    }

    /// Cycle average of F at large argument.
    fn mean(self) -> f64 {
        match self {
            FilterFunction::SquarePulse => 0.5,
        }
    }
}

/// Gate-referred voltage noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// 1/f: A in mV, with S_V(ω) = A²/ω. White: S0 in mV²·s.
    pub amplitude: f64,
    /// Averaging time T of the experiment, s; sets the low-frequency cutoff 1/T.
    pub t_avg: f64,
    #[serde(default)]
    pub filter: FilterFunction,
}

impl NoiseModel {
    pub fn one_over_f(a: f64, t_avg: f64) -> Result<Self> {
        let n = Self { kind: NoiseKind::OneOverF, amplitude: a, t_avg, filter: FilterFunction::SquarePulse };
        n.validate()?;
        Ok(n)
    }

    pub fn white(s0: f64, t_avg: f64) -> Result<Self> {
        let n = Self { kind: NoiseKind::White, amplitude: s0, t_avg, filter: FilterFunction::SquarePulse };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::invalid("noise amplitude must be positive"));
        }
        if !(self.t_avg.is_finite() && self.t_avg > 0.0) {
            return Err(Error::invalid("averaging time must be positive"));
        }
        Ok(())
    }

    /// S_V in mV²·ns over ω in rad/ns.
    pub fn spectrum(&self) -> Spectrum {
        match self.kind {
            NoiseKind::OneOverF => Spectrum::OneOverF { a2: self.amplitude * self.amplitude },
            NoiseKind::White => Spectrum::White { s0: self.amplitude * 1e9 },
        }
    }

    /// Low-frequency cutoff 1/T in rad/ns.
    pub fn omega_min(&self) -> f64 {
        1e-9 / self.t_avg
    }
}

/// One-sided spectral density in internal units (ω in rad/ns, S per ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// S(ω) = a2/ω.
    OneOverF { a2: f64 },
    /// S(ω) = s0.
    White { s0: f64 },
}

impl Spectrum {
    pub fn density(&self, omega: f64) -> f64 {
        match *self {
            Spectrum::OneOverF { a2 } => a2 / omega,
            Spectrum::White { s0 } => s0,
        }
    }

    /// ∫_Ω^∞ S(ω)/ω² dω.
    fn tail(&self, omega: f64) -> f64 {
        match *self {
            Spectrum::OneOverF { a2 } => a2 / (2.0 * omega * omega),
            Spectrum::White { s0 } => s0 / omega,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            Spectrum::OneOverF { a2 } => Spectrum::OneOverF { a2: a2 * c },
            Spectrum::White { s0 } => Spectrum::White { s0: s0 * c },
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            Spectrum::OneOverF { a2 } => a2 == 0.0,
            Spectrum::White { s0 } => s0 == 0.0,
        }
    }
}

/// ∫_{ω_min}^∞ S(ω)·F(ωt)/ω² dω.
///
/// With x = ωt the integrand is handled on a log grid below x = 1, cycle by
/// cycle up to x = 10⁴, and through the cycle-averaged tail beyond.
pub fn filtered_integral(s: &Spectrum, filter: FilterFunction, omega_min: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("evolution time must be positive"));
    }
    if !(omega_min > 0.0) {
        return Err(Error::invalid("low-frequency cutoff must be positive"));
    }
    if s.is_zero() {
        return Ok(0.0);
    }
    let opts = QuadOptions { rel_tol: 1e-10, abs_tol: 0.0, max_intervals: 400_000 };
    let x_min = omega_min * t;
    let mut total = 0.0;

    if x_min < 1.0 {
        // u = ln x
        let (u0, u1) = (x_min.ln(), 0.0);
        let n = ((u1 - u0).ceil() as usize).max(1);
        let bps: Vec<f64> = (0..=n).map(|k| u0 + (u1 - u0) * k as f64 / n as f64).collect();
        let f = |u: f64| {
            let x = u.exp();
            s.density(x / t) * filter.eval(x) / x
        };
        total += t * integrate(f, &bps, opts)?.0;
    }
    let x_lo = x_min.max(1.0);
    if x_lo < X_MAX {
        let mut bps = vec![x_lo];
        let mut k = (x_lo / TAU).floor() + 1.0;
        while k * TAU < X_MAX {
            bps.push(k * TAU);
            k += 1.0;
        }
        bps.push(X_MAX);
        let f = |x: f64| s.density(x / t) * filter.eval(x) / (x * x);
        total += t * integrate(f, &bps, opts)?.0;
    }
    total += filter.mean() * s.tail(x_lo.max(X_MAX) / t);
    Ok(total)
}

/// Effective RMS gate voltage σ_V(t), mV, for an evolution of `t` ns.
pub fn sigma_v_effective(n: &NoiseModel, t: f64) -> Result<f64> {
    n.validate()?;
    let i = filtered_integral(&n.spectrum(), n.filter, n.omega_min(), t)?;
    Ok((2.0 / PI * i).sqrt() / t)
}

/// σ_V(t) tabulated on a log-spaced grid and interpolated in (ln t, ln σ²).
#[derive(Debug, Clone)]
pub struct SigmaProfile {
    noise: NoiseModel,
    ln_t: Vec<f64>,
    ln_s2: Vec<f64>,
}

impl SigmaProfile {
    pub fn new(noise: &NoiseModel, t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(t_lo > 0.0 && t_hi >= t_lo) {
            return Err(Error::invalid("profile range must be positive and increasing"));
        }
        let n = 64;
        let (a, b) = (t_lo.ln(), t_hi.ln().max(t_lo.ln() + 1e-9));
        let ln_t: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
        let ln_s2 =
            ln_t.iter().map(|&lt| Ok(2.0 * sigma_v_effective(noise, lt.exp())?.ln())).collect::<Result<Vec<f64>>>()?;
        Ok(Self { noise: *noise, ln_t, ln_s2 })
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let lt = t.ln();
        let (a, b) = (self.ln_t[0], self.ln_t[self.ln_t.len() - 1]);
        if !(lt >= a && lt <= b) {
            return sigma_v_effective(&self.noise, t);
        }
        let h = (b - a) / (self.ln_t.len() - 1) as f64;
        let k = (((lt - a) / h).floor() as usize).min(self.ln_t.len() - 2);
        let w = (lt - self.ln_t[k]) / h;
        Ok((0.5 * ((1.0 - w) * self.ln_s2[k] + w * self.ln_s2[k + 1])).exp())
    }
}

/// I = J/‖∇J‖, mV. A vanishing gradient gives +∞ (saturated).
pub fn insensitivity(j: f64, grad: &[f64]) -> f64 {
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    if g2 == 0.0 {
        f64::INFINITY
    } else {
        j / g2.sqrt()
    }
}

/// I = J/√(∇Jᵀ C ∇J), mV. A gradient in the null space of C gives +∞.
pub fn generalized_insensitivity(j: f64, grad: &[f64], c: &GateCorrelation) -> Result<f64> {
    let q = c.quad_form(grad)?;
    Ok(if q <= 0.0 { f64::INFINITY } else { j / q.sqrt() })
}

/// Quasi-static charge-noise envelope exp[−(2πJt)²(σ_V/I)²].
pub fn charge_envelope(j: f64, i: f64, sigma_v: f64, t: f64) -> f64 {
    if i.is_infinite() {
        return 1.0;
    }
    let x = TAU * j * t * sigma_v / i;
    (-x * x).exp()
}

/// Envelope from the spectrum of J itself (GHz²·ns over rad/ns):
/// G = exp[−(2π)²·(2/π)·∫_{1/T}^∞ S_J(ω)F(ωt)/ω² dω].
pub fn envelope_from_spectrum(s_j: &Spectrum, filter: FilterFunction, t_avg: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    if !(t_avg > 0.0) {
        return Err(Error::invalid("averaging time must be positive"));
    }
    let i = filtered_integral(s_j, filter, 1e-9 / t_avg, t)?;
    Ok((-(TAU * TAU) * (2.0 / PI) * i).exp())
}

/// Quasi-static magnetic dephasing, exp[−(t/t_hf)²].
pub fn hyperfine_envelope(t: f64, t_hf: f64) -> f64 {
    let x = t / t_hf;
    (-x * x).exp()
}

/// Hyperfine decay channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hyperfine {
    #[default]
    Off,
    /// Gaussian with 1/e time `t_1e` ns.
    Gaussian { t_1e: f64 },
}

impl Hyperfine {
    pub fn envelope(&self, t: f64) -> f64 {
        match *self {
            Hyperfine::Off => 1.0,
            Hyperfine::Gaussian { t_1e } => hyperfine_envelope(t, t_1e),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Hyperfine::Gaussian { t_1e } if !(t_1e > 0.0) => Err(Error::invalid("hyperfine 1/e time must be positive")),
            _ => Ok(()),
        }
    }
}
