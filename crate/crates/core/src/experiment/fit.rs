//! Damped-cosine fits to Rabi traces.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::spectrum::{fft_spectrum, peak_frequencies};
use crate::data::TimeTrace;
use crate::error::{Error, Result};
use crate::numeric::{levenberg_marquardt, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Moving-mean high-pass with window 1/cutoff, GHz.
    pub highpass_cutoff: Option<f64>,
    pub min_periods: f64,
    pub min_points_per_period: f64,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { highpass_cutoff: None, min_periods: 8.0, min_points_per_period: 8.0, lm: LmOptions::default() }
    }
}

/// Result of fitting a·cos(2πft + φ)·exp[−(t/τ)²] + c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub frequency: f64,
    /// 1/e time of the envelope, ns; +∞ for an undamped trace.
    pub decay_1e: f64,
    pub n_rabi: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

/// Subtracts a centered moving mean of width 1/cutoff. The window shrinks
/// symmetrically near the ends so the filter stays zero-phase.
pub fn highpass(trace: &TimeTrace, cutoff: f64) -> Result<TimeTrace> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::invalid("high-pass cutoff must be positive"));
    }
    let dt = trace.uniform_step()?;
    let half = ((1.0 / cutoff / dt / 2.0).round() as usize).max(1);
    let p = &trace.p_singlet;
    let n = p.len();
    let mut prefix = vec![0.0; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + p[k];
    }
    let out = (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            let (a, b) = (k - h, k + h + 1);
            p[k] - (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect();
    Ok(TimeTrace { times: trace.times.clone(), p_singlet: out, metadata: trace.metadata.clone() })
}

/// Linear least squares for (a_c, a_s, c) at fixed frequency and envelope
/// rate; returns the coefficients and the sum of squares.
fn linear_part(t: &[f64], y: &[f64], f: f64, r: f64) -> Option<([f64; 3], f64)> {
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let basis = |ti: f64| {
        let e = (-r * ti * ti).exp();
        let w = TAU * f * ti;
        Vector3::new(w.cos() * e, w.sin() * e, 1.0)
    };
    for (&ti, &yi) in t.iter().zip(y) {
        let b = basis(ti);
        m += b * b.transpose();
        rhs += b * yi;
    }
    let x = m.cholesky()?.solve(&rhs);
    let ssr = t.iter().zip(y).map(|(&ti, &yi)| (yi - basis(ti).dot(&x)).powi(2)).sum();
    Some(([x[0], x[1], x[2]], ssr))
}

struct Prepared {
    t: Vec<f64>,
    y: Vec<f64>,
    f0: f64,
    span: f64,
}

fn prepare(trace: &TimeTrace, opts: &FitOptions) -> Result<Prepared> {
    let dt = trace.uniform_step()?;
    if trace.len() < 16 {
        return Err(Error::invalid("fit needs at least 16 samples"));
    }
    let tr = match opts.highpass_cutoff {
        Some(c) => highpass(trace, c)?,
        None => trace.clone(),
    };
    let spec = fft_spectrum(&tr)?;
    let f0 = *peak_frequencies(&spec, 1)
        .first()
        .ok_or_else(|| Error::degenerate("fit_rabi", "no oscillation above the noise floor"))?;
    let span = trace.times[trace.len() - 1] - trace.times[0];
    if f0 * span < opts.min_periods || 1.0 / (f0 * dt) < opts.min_points_per_period {
        return Err(Error::invalid(format!(
            "insufficient sampling: {:.2} periods at {:.2} points per period",
            f0 * span,
            1.0 / (f0 * dt)
        )));
    }
    let t0 = trace.times[0];
    Ok(Prepared { t: trace.times.iter().map(|t| t - t0).collect(), y: tr.p_singlet, f0, span })
}

/// Grid over frequency and envelope rate r = 1/τ² with the linear
/// parameters solved exactly at each node.
fn grid_start(p: &Prepared) -> ([f64; 3], f64, f64) {
    let df = 1.0 / p.span;
    let mut rates = vec![0.0];
    let (lo, hi) = ((0.05 / p.span).ln(), (20.0 / p.span).ln());
    rates.extend((0..40).map(|k| (lo + (hi - lo) * k as f64 / 39.0).exp().powi(2)));
    let mut best = ([0.0; 3], p.f0, 0.0, f64::INFINITY);
    for k in -8..=8 {
        let f = p.f0 + df * k as f64 / 8.0;
        if f <= 0.0 {
            continue;
        }
        for &r in &rates {
            if let Some((c, ssr)) = linear_part(&p.t, &p.y, f, r) {
                if ssr < best.3 {
                    best = (c, f, r, ssr);
                }
            }
        }
    }
    (best.0, best.1, best.2)
}

fn not_converged(rep: &crate::numeric::LmReport) -> Error {
    Error::NotConverged { op: "fit_rabi", iterations: rep.iterations, residual: rep.cost.sqrt(), best: rep.x.clone() }
}

/// Least-squares fit of a Gaussian-damped cosine.
pub fn fit_rabi(trace: &TimeTrace, opts: &FitOptions) -> Result<RabiFit> {
    let p = prepare(trace, opts)?;
    let (c, f, r) = grid_start(&p);
    // Parameters: a_c, a_s, f, s, c with envelope exp(−s²t²).
    let x0 = [c[0], c[1], f, r.sqrt(), c[2]];
    let resid = |x: &[f64], out: &mut [f64]| {
        for ((o, &t), &y) in out.iter_mut().zip(&p.t).zip(&p.y) {
            let w = TAU * x[2] * t;
            *o = (x[0] * w.cos() + x[1] * w.sin()) * (-(x[3] * t).powi(2)).exp() + x[4] - y;
        }
        true
    };
    let rep = levenberg_marquardt(resid, &x0, p.t.len(), opts.lm);
    if !rep.converged {
        return Err(not_converged(&rep));
    }
    let x = rep.x;
    let frequency = x[2].abs();
    let decay_1e = if x[3] == 0.0 { f64::INFINITY } else { 1.0 / x[3].abs() };
    Ok(RabiFit {
        frequency,
        decay_1e,
        n_rabi: frequency * decay_1e,
        amplitude: x[0].hypot(x[1]),
        phase: (-x[1]).atan2(x[0]),
        offset: x[4],
        residual: (rep.cost / p.t.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleFitOptions {
    pub fit: FitOptions,
    /// Holds the second 1/e time fixed at this value, ns.
    pub known_1e: Option<f64>,
}

/// Fit with envelope exp[−(t/τ₁)²]·exp[−(t/τ₂)²].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleRabiFit {
    pub frequency: f64,
    pub decay_1e: [f64; 2],
    /// 1/e time of the combined envelope, (τ₁⁻² + τ₂⁻²)^(−1/2).
    pub combined_1e: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub residual: f64,
}

/// Double-Gaussian envelope fit.
///
/// Without `known_1e` the two times enter only through τ₁⁻² + τ₂⁻², so the
/// split between them is not determined by the data; the fit starts from
/// equal times and reports where the optimizer ends.
pub fn fit_rabi_double(trace: &TimeTrace, opts: &DoubleFitOptions) -> Result<DoubleRabiFit> {
    if let Some(k) = opts.known_1e {
        if !(k > 0.0) {
            return Err(Error::invalid("known 1/e time must be positive"));
        }
    }
    let single = fit_rabi(trace, &opts.fit)?;
    let p = prepare(trace, &opts.fit)?;
    let s = 1.0 / single.decay_1e;
    let resid_of = |x: &[f64], s2: f64, out: &mut [f64]| {
        for ((o, &t), &y) in out.iter_mut().zip(&p.t).zip(&p.y) {
            let w = TAU * x[2] * t;
            let e = (-(x[3] * t).powi(2) - (s2 * t).powi(2)).exp();
            *o = (x[0] * w.cos() + x[1] * w.sin()) * e + x[4] - y;
        }
    };
    let ac = single.amplitude * single.phase.cos();
    let as_ = -single.amplitude * single.phase.sin();
    let (x, s2, cost) = match opts.known_1e {
        Some(k) => {
            let s2 = 1.0 / k;
            let s1 = (s * s - s2 * s2).max(0.0).sqrt();
            let x0 = [ac, as_, single.frequency, s1, single.offset];
            let rep = levenberg_marquardt(
                |x: &[f64], o: &mut [f64]| {
                    resid_of(x, s2, o);
                    true
                },
                &x0,
                p.t.len(),
                opts.fit.lm,
            );
            if !rep.converged {
                return Err(not_converged(&rep));
            }
            (rep.x, s2, rep.cost)
        }
        None => {
            let h = s / std::f64::consts::SQRT_2;
            let x0 = [ac, as_, single.frequency, h, single.offset, h];
            let rep = levenberg_marquardt(
                |x: &[f64], o: &mut [f64]| {
                    resid_of(x, x[5], o);
                    true
                },
                &x0,
                p.t.len(),
                opts.fit.lm,
            );
            if !rep.converged {
                return Err(not_converged(&rep));
            }
            let s2 = rep.x[5];
            (rep.x, s2, rep.cost)
        }
    };
    let inv = |s: f64| if s == 0.0 { f64::INFINITY } else { 1.0 / s.abs() };
    let total = (x[3] * x[3] + s2 * s2).sqrt();
    Ok(DoubleRabiFit {
        frequency: x[2].abs(),
        decay_1e: [inv(x[3]), inv(s2)],
        combined_1e: inv(total),
        amplitude: x[0].hypot(x[1]),
        offset: x[4],
        residual: (cost / p.t.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::time_grid;
    use proptest::prelude::*;

    fn synth(f: f64, tau: f64, t_max: f64, n: usize) -> TimeTrace {
        let t = time_grid(t_max, n);
        let p = t.iter().map(|&t| 1.0 - 0.375 * (1.0 - (-(t / tau).powi(2)).exp() * (TAU * f * t).cos())).collect();
        TimeTrace::new(t, p).unwrap()
    }

    #[test]
    fn round_trip_damped() {
        let fit = fit_rabi(&synth(0.1, 500.0, 1000.0, 2001), &FitOptions::default()).unwrap();
        assert!((fit.frequency / 0.1 - 1.0).abs() < 5e-3);
        assert!((fit.decay_1e / 500.0 - 1.0).abs() < 2e-2);
        assert!((fit.n_rabi - fit.frequency * fit.decay_1e).abs() < 1e-9);
        assert!((fit.amplitude - 0.375).abs() < 1e-3 && (fit.offset - 0.625).abs() < 1e-3);
    }

    #[test]
    fn dc_trace_is_degenerate() {
        let t = time_grid(1000.0, 501);
        let tr = TimeTrace::new(t.clone(), vec![0.625; t.len()]).unwrap();
        assert!(matches!(fit_rabi(&tr, &FitOptions::default()), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn undersampled_rejected() {
        // 4 periods only.
        let r = fit_rabi(&synth(0.1, 1e6, 40.0, 401), &FitOptions::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))), "{r:?}");
        // 5 points per period.
        let r = fit_rabi(&synth(0.1, 1e6, 500.0, 251), &FitOptions::default());
        assert!(matches!(r, Err(Error::InvalidParameter(_))), "{r:?}");
    }

    #[test]
    fn highpass_removes_drift() {
        let base = synth(0.1, 600.0, 1200.0, 2401);
        let p = base.times.iter().zip(&base.p_singlet).map(|(t, p)| p + 0.1 * (-t / 800.0).exp()).collect();
        let drift = TimeTrace::new(base.times.clone(), p).unwrap();
        let opts = FitOptions { highpass_cutoff: Some(0.02), ..Default::default() };
        let fit = fit_rabi(&drift, &opts).unwrap();
        assert!((fit.frequency / 0.1 - 1.0).abs() < 5e-3);
        assert!((fit.decay_1e / 600.0 - 1.0).abs() < 0.05, "{}", fit.decay_1e);
    }

    #[test]
    fn highpass_is_zero_phase_on_symmetric_input() {
        let t = time_grid(100.0, 101);
        let p: Vec<f64> = t.iter().map(|t| ((t - 50.0) / 10.0).powi(2)).collect();
        let h = highpass(&TimeTrace::new(t, p).unwrap(), 0.1).unwrap();
        for k in 0..50 {
            assert!((h.p_singlet[k] - h.p_singlet[100 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn double_with_known_time() {
        let t = time_grid(3000.0, 6001);
        let p = t
            .iter()
            .map(|&t| {
                let g = (-(t / 1000.0f64).powi(2) - (t / 1500.0f64).powi(2)).exp();
                1.0 - 0.375 * (1.0 - g * (TAU * 0.02 * t).cos())
            })
            .collect();
        let tr = TimeTrace::new(t, p).unwrap();
        let opts = DoubleFitOptions { known_1e: Some(1000.0), ..Default::default() };
        let fit = fit_rabi_double(&tr, &opts).unwrap();
        assert!((fit.decay_1e[0] / 1500.0 - 1.0).abs() < 1e-3, "{:?}", fit.decay_1e);
        assert!((fit.combined_1e / (1.0 / (1e-6 + 1.0 / 1500f64.powi(2)).sqrt()) - 1.0).abs() < 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn frequency_recovered(f in 0.05f64..0.3, tau in 300.0f64..3000.0) {
            let t_max = 1.5 * tau;
            let n = ((t_max * f * 12.0).ceil() as usize).max(200) + 1;
            prop_assume!(f * t_max >= 10.0);
            let fit = fit_rabi(&synth(f, tau, t_max, n), &FitOptions::default()).unwrap();
            prop_assert!((fit.frequency / f - 1.0).abs() < 5e-3);
            prop_assert!((fit.decay_1e / tau - 1.0).abs() < 5e-2);
        }
    }
}
