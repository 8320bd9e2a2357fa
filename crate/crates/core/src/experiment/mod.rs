//! Synthetic measurements: Rabi traces, scans, fits and sweeps.
//!
//! A Rabi trace about an axis tipped 120° from the pole has contrast
//! sin²120° = 3/4, so the singlet probability is
//! P(t) = 1 − (c/2)·[1 − G(t)·cos(2πJt)] with c = 3/4.

mod fit;
mod spectrum;
mod sweeps;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{Axis, ScanGrid, TimeTrace};
use crate::device::{ControlFrame, DeviceModel, GateVector};
use crate::error::{Error, Result};
use crate::noise::{charge_envelope, generalized_insensitivity, GateCorrelation, Hyperfine, NoiseModel, SigmaProfile};

pub use fit::{fit_rabi, fit_rabi_double, highpass, DoubleFitOptions, DoubleRabiFit, FitOptions, RabiFit};
pub use spectrum::{fft_spectrum, peak_frequencies, FftSpectrum};
pub use sweeps::{
    i_vs_j_sweep, insensitivity_contour_sweep, measured_insensitivity, predicted_decay, ContourSweepOptions,
    MeasureOptions, MeasuredInsensitivity,
};

pub const DEFAULT_CONTRAST: f64 = 0.75;

/// Step for the gradient entering the analytic envelope, mV.
const GRAD_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// Closed-form envelope with σ_V evaluated at each time.
    Analytic,
    /// Average over quasi-static gate-voltage offsets.
    MonteCarlo {
        samples: usize,
        seed: u64,
        /// Evolution time at which σ_V sets the offset spread, ns; defaults
        /// to the last sample time.
        #[serde(default)]
        sigma_time: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiOptions {
    pub contrast: f64,
    pub hyperfine: Hyperfine,
    pub mode: Mode,
    /// Binomial readout with this many shots per point; `None` returns exact
    /// probabilities.
    pub readout_shots: Option<u32>,
    pub readout_seed: u64,
}

impl Default for RabiOptions {
    fn default() -> Self {
        Self {
            contrast: DEFAULT_CONTRAST,
            hyperfine: Hyperfine::Off,
            mode: Mode::Analytic,
            readout_shots: None,
            readout_seed: 0,
        }
    }
}

/// Second exchange frequency mixed into a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SecondChannel {
    /// J₂ = J₁ + offset, GHz, with the same voltage sensitivity.
    Offset { offset: f64 },
    /// J₂ evaluated at its own bias.
    Bias { bias: GateVector },
}

/// One exchange channel: J(bias + δV) + offset.
struct Channel {
    weight: f64,
    bias: GateVector,
    offset: f64,
}

struct ChannelState {
    j: f64,
    i: f64,
}

impl Channel {
    fn state(&self, d: &DeviceModel, corr: &GateCorrelation) -> Result<ChannelState> {
        let j = d.exchange_of_voltages(&self.bias)? + self.offset;
        if !(j > 0.0) {
            return Err(Error::invalid(format!("channel exchange must be positive, got {j} GHz")));
        }
        let g = d.grad_j(&self.bias, GRAD_STEP)?;
        Ok(ChannelState { j, i: generalized_insensitivity(j, &g, corr)? })
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("times must be nonempty"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("times must be finite and nonnegative"));
    }
    Ok(())
}

fn sigma_profile(noise: &NoiseModel, times: &[f64]) -> Result<SigmaProfile> {
    let pos = times.iter().copied().filter(|&t| t > 0.0);
    let lo = pos.clone().fold(f64::INFINITY, f64::min);
    let hi = pos.fold(0.0, f64::max);
    if lo.is_finite() {
        SigmaProfile::new(noise, lo, hi)
    } else {
        SigmaProfile::new(noise, 1.0, 1.0)
    }
}

fn simulate(
    d: &DeviceModel,
    channels: &[Channel],
    times: &[f64],
    noise: Option<&NoiseModel>,
    corr: &GateCorrelation,
    opts: &RabiOptions,
    profile: Option<&SigmaProfile>,
) -> Result<TimeTrace> {
    validate_times(times)?;
    opts.hyperfine.validate()?;
    corr.validate(d.n_gates())?;
    if !(0.0..=1.0).contains(&opts.contrast) {
        return Err(Error::invalid("contrast must lie in [0, 1]"));
    }
    let states = channels.iter().map(|c| c.state(d, corr)).collect::<Result<Vec<_>>>()?;
    let half = 0.5 * opts.contrast;
    let mut meta = crate::data::Metadata::new();
    meta.insert("J_GHz".into(), json!(states[0].j));
    meta.insert("I_mV".into(), if states[0].i.is_finite() { json!(states[0].i) } else { json!(null) });
    meta.insert("bias_mV".into(), json!(channels[0].bias));

    // Coherence ⟨cos 2πJt⟩ summed over channels with their weights.
    let coherence: Vec<f64> = match (opts.mode, noise) {
        (_, None) => times
            .iter()
            .map(|&t| channels.iter().zip(&states).map(|(c, s)| c.weight * (TAU * s.j * t).cos()).sum())
            .collect(),
        (Mode::Analytic, Some(n)) => {
            let owned;
            let prof = match profile {
                Some(p) => p,
                None => {
                    owned = sigma_profile(n, times)?;
                    &owned
                }
            };
            times
                .iter()
                .map(|&t| {
                    let sigma = if t > 0.0 { prof.at(t)? } else { 0.0 };
                    Ok(channels
                        .iter()
                        .zip(&states)
                        .map(|(c, s)| c.weight * charge_envelope(s.j, s.i, sigma, t) * (TAU * s.j * t).cos())
                        .sum())
                })
                .collect::<Result<_>>()?
        }
        (Mode::MonteCarlo { samples, seed, sigma_time }, Some(n)) => {
            if samples == 0 {
                return Err(Error::invalid("Monte-Carlo needs at least one sample"));
            }
            let t_ref = sigma_time.unwrap_or_else(|| times.iter().copied().fold(0.0, f64::max));
            let sigma = if t_ref > 0.0 { crate::noise::sigma_v_effective(n, t_ref)? } else { 0.0 };
            meta.insert("sigma_v_mV".into(), json!(sigma));
            meta.insert("sigma_time_ns".into(), json!(t_ref));
            meta.insert("samples".into(), json!(samples));
            meta.insert("seed".into(), json!(seed));
            monte_carlo(d, channels, times, sigma, corr, samples, seed)?
        }
    };
    let p: Vec<f64> =
        times.iter().zip(&coherence).map(|(&t, &c)| 1.0 - half * (1.0 - opts.hyperfine.envelope(t) * c)).collect();
    let p = match opts.readout_shots {
        None => p,
        Some(shots) => {
            if shots == 0 {
                return Err(Error::invalid("readout needs at least one shot"));
            }
            meta.insert("readout_shots".into(), json!(shots));
            let mut rng = ChaCha8Rng::seed_from_u64(opts.readout_seed);
            p.iter()
                .map(|&q| {
                    let b =
                        Binomial::new(shots as u64, q.clamp(0.0, 1.0)).map_err(|e| Error::invalid(e.to_string()))?;
                    Ok(b.sample(&mut rng) as f64 / shots as f64)
                })
                .collect::<Result<_>>()?
        }
    };
    let mut trace = TimeTrace::new(times.to_vec(), p)?;
    trace.metadata = meta;
    Ok(trace)
}

/// Weighted mean over trajectories of Σ_c w_c cos(2πJ_c t), with each
/// trajectory offset by δV ~ N(0, 2σ_V²·C).
///
/// The factor 2 makes the Gaussian average of the cosine decay as
/// exp[−(2πt)²·gᵀCg·σ_V²], the same envelope as the analytic path.
fn monte_carlo(
    d: &DeviceModel,
    channels: &[Channel],
    times: &[f64],
    sigma: f64,
    corr: &GateCorrelation,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = d.n_gates();
    let l = corr.sqrt_factor(n)?;
    let scale = std::f64::consts::SQRT_2 * sigma;
    // Each trajectory draws from its own stream so results do not depend on
    // scheduling.
    let js: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let dv: Vec<f64> = (0..n).map(|i| scale * (0..n).map(|j| l[(i, j)] * z[j]).sum::<f64>()).collect();
            channels
                .iter()
                .map(|c| {
                    let v: Vec<f64> = c.bias.iter().zip(&dv).map(|(a, b)| a + b).collect();
                    Ok(d.exchange_of_voltages(&v)? + c.offset)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let acc: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            let mut s = 0.0;
            for jk in &js {
                for (c, &j) in channels.iter().zip(jk) {
                    s += c.weight * (TAU * j * t).cos();
                }
            }
            s / samples as f64
        })
        .collect();
    Ok(acc)
}

/// Singlet probability versus time at bias `v`. With `noise = None` the
/// charge envelope is 1.
pub fn rabi_trace(
    d: &DeviceModel,
    v: &[f64],
    times: &[f64],
    noise: Option<&NoiseModel>,
    corr: &GateCorrelation,
    opts: &RabiOptions,
) -> Result<TimeTrace> {
    simulate(d, &[Channel { weight: 1.0, bias: v.to_vec(), offset: 0.0 }], times, noise, corr, opts, None)
}

/// Incoherent mixture w·P₁ + (1 − w)·P₂ of two exchange frequencies.
#[allow(clippy::too_many_arguments)]
pub fn two_freq_trace(
    d: &DeviceModel,
    v: &[f64],
    weight: f64,
    second: &SecondChannel,
    times: &[f64],
    noise: Option<&NoiseModel>,
    corr: &GateCorrelation,
    opts: &RabiOptions,
) -> Result<TimeTrace> {
    mixture(d, v, weight, second, times, noise, corr, opts, None)
}

#[allow(clippy::too_many_arguments)]
fn mixture(
    d: &DeviceModel,
    v: &[f64],
    weight: f64,
    second: &SecondChannel,
    times: &[f64],
    noise: Option<&NoiseModel>,
    corr: &GateCorrelation,
    opts: &RabiOptions,
    profile: Option<&SigmaProfile>,
) -> Result<TimeTrace> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::invalid("mixture weight must lie in [0, 1]"));
    }
    let first = Channel { weight, bias: v.to_vec(), offset: 0.0 };
    let other = match second {
        SecondChannel::Offset { offset } => Channel { weight: 1.0 - weight, bias: v.to_vec(), offset: *offset },
        SecondChannel::Bias { bias } => Channel { weight: 1.0 - weight, bias: bias.clone(), offset: 0.0 },
    };
    let channels: Vec<Channel> = if weight == 1.0 { vec![first] } else { vec![first, other] };
    let mut t = simulate(d, &channels, times, noise, corr, opts, profile)?;
    t.metadata.insert("weight".into(), json!(weight));
    Ok(t)
}

/// σ_V profile shared by every pixel of a scan in analytic mode.
fn scan_profile(noise: Option<&NoiseModel>, times: &[f64], opts: &RabiOptions) -> Result<Option<SigmaProfile>> {
    validate_times(times)?;
    match (noise, opts.mode) {
        (Some(n), Mode::Analytic) => Ok(Some(sigma_profile(n, times)?)),
        _ => Ok(None),
    }
}

/// Rabi traces versus detuning at fixed Ṽ along the exchange axis: rows are
/// detunings, columns are times.
#[allow(clippy::too_many_arguments)]
pub fn chevron_scan(
    d: &DeviceModel,
    frame: &ControlFrame,
    deltas: &[f64],
    times: &[f64],
    v_exchange: f64,
    noise: Option<&NoiseModel>,
    corr: &GateCorrelation,
    opts: &RabiOptions,
) -> Result<ScanGrid> {
    let prof = scan_profile(noise, times, opts)?;
    let rows = deltas
        .par_iter()
        .map(|&delta| {
            let v = frame.bias(d, delta, v_exchange)?;
            let ch = [Channel { weight: 1.0, bias: v, offset: 0.0 }];
            Ok(simulate(d, &ch, times, noise, corr, opts, prof.as_ref())?.p_singlet)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut g = ScanGrid::new(
        Axis::new("time", "ns", times.to_vec()),
        Axis::new("delta", "GHz", deltas.to_vec()),
        "p_singlet",
        "",
        rows.concat(),
    )?;
    g.metadata.insert("v_exchange_mV".into(), json!(v_exchange));
    Ok(g)
}

/// Singlet probability after a fixed evolution over (Ṽ, Δ): rows are
/// detunings, columns are exchange-axis biases.
#[allow(clippy::too_many_arguments)]
pub fn fingerprint_scan(
    d: &DeviceModel,
    frame: &ControlFrame,
    deltas: &[f64],
    v_exchange: &[f64],
    evolve_time: f64,
    noise: Option<&NoiseModel>,
    corr: &GateCorrelation,
    opts: &RabiOptions,
    second: Option<(f64, SecondChannel)>,
) -> Result<ScanGrid> {
    let times = [evolve_time];
    let prof = scan_profile(noise, &times, opts)?;
    let rows = deltas
        .par_iter()
        .map(|&delta| {
            v_exchange
                .iter()
                .map(|&x| {
                    let v = frame.bias(d, delta, x)?;
                    let t = match &second {
                        None => {
                            let ch = [Channel { weight: 1.0, bias: v, offset: 0.0 }];
                            simulate(d, &ch, &times, noise, corr, opts, prof.as_ref())?
                        }
                        Some((w, ch)) => mixture(d, &v, *w, ch, &times, noise, corr, opts, prof.as_ref())?,
                    };
                    Ok(t.p_singlet[0])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut g = ScanGrid::new(
        Axis::new("v_exchange", "mV", v_exchange.to_vec()),
        Axis::new("delta", "GHz", deltas.to_vec()),
        "p_singlet",
        "",
        rows.concat(),
    )?;
    g.metadata.insert("evolve_time_ns".into(), json!(evolve_time));
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::time_grid;

    fn sop(d: &DeviceModel, vx: f64) -> GateVector {
        ControlFrame::ground_truth(d).bias(d, 0.0, vx).unwrap()
    }

    #[test]
    fn noiseless_bounds_and_start() {
        let d = DeviceModel::reference();
        let v = sop(&d, 450.0);
        let t = rabi_trace(&d, &v, &time_grid(500.0, 2001), None, &GateCorrelation::Identity, &RabiOptions::default())
            .unwrap();
        assert_eq!(t.p_singlet[0], 1.0);
        let (lo, hi) = t.p_singlet.iter().fold((1.0f64, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
        assert!(lo >= 0.25 - 1e-12 && hi <= 1.0 + 1e-12);
        assert!(lo < 0.2501, "{lo}");
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        let d = DeviceModel::reference();
        let v = sop(&d, 480.0);
        let n = NoiseModel::one_over_f(0.3, 1.0).unwrap();
        let (j, tau) = predicted_decay(&d, &v, &n, &GateCorrelation::Identity).unwrap();
        let times = time_grid(2.0 * tau, 801);
        let c = GateCorrelation::Identity;
        let a = rabi_trace(&d, &v, &times, Some(&n), &c, &RabiOptions::default()).unwrap();
        let mc =
            RabiOptions { mode: Mode::MonteCarlo { samples: 2000, seed: 7, sigma_time: None }, ..Default::default() };
        let m = rabi_trace(&d, &v, &times, Some(&n), &c, &mc).unwrap();
        let worst = a.p_singlet.iter().zip(&m.p_singlet).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 0.02, "worst {worst}, J {j}, tau {tau}");
        // Bit-reproducible.
        let m2 = rabi_trace(&d, &v, &times, Some(&n), &c, &mc).unwrap();
        assert_eq!(m.p_singlet, m2.p_singlet);
    }

    #[test]
    fn mixture_reduces_and_is_bounded() {
        let d = DeviceModel::reference();
        let v = sop(&d, 450.0);
        let times = time_grid(300.0, 301);
        let c = GateCorrelation::Identity;
        let o = RabiOptions::default();
        let single = rabi_trace(&d, &v, &times, None, &c, &o).unwrap();
        let second = SecondChannel::Offset { offset: 0.01 };
        let w1 = two_freq_trace(&d, &v, 1.0, &second, &times, None, &c, &o).unwrap();
        assert_eq!(single.p_singlet, w1.p_singlet);
        let mix = two_freq_trace(&d, &v, 0.5, &second, &times, None, &c, &o).unwrap();
        let w0 = two_freq_trace(&d, &v, 0.0, &second, &times, None, &c, &o).unwrap();
        for k in 0..times.len() {
            let (a, b) = (single.p_singlet[k], w0.p_singlet[k]);
            assert!(mix.p_singlet[k] >= a.min(b) - 1e-12 && mix.p_singlet[k] <= a.max(b) + 1e-12);
        }
    }

    #[test]
    fn readout_sampling_is_seeded() {
        let d = DeviceModel::reference();
        let v = sop(&d, 450.0);
        let times = time_grid(100.0, 51);
        let o = RabiOptions { readout_shots: Some(100), readout_seed: 3, ..Default::default() };
        let a = rabi_trace(&d, &v, &times, None, &GateCorrelation::Identity, &o).unwrap();
        let b = rabi_trace(&d, &v, &times, None, &GateCorrelation::Identity, &o).unwrap();
        assert_eq!(a.p_singlet, b.p_singlet);
        assert!(a
            .p_singlet
            .iter()
            .all(|p| (0.0..=1.0).contains(p) && ((p * 100.0) - (p * 100.0).round()).abs() < 1e-9));
    }

    #[test]
    fn chevron_symmetry_and_sop_minimum() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        let deltas: Vec<f64> = (-4..=4).map(|k| 4.0 * k as f64).collect();
        let times = time_grid(400.0, 401);
        let g = chevron_scan(&d, &f, &deltas, &times, 450.0, None, &GateCorrelation::Identity, &RabiOptions::default())
            .unwrap();
        for k in 0..4 {
            for (a, b) in g.row(k).iter().zip(g.row(8 - k)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        let js: Vec<f64> =
            deltas.iter().map(|&x| d.exchange_of_voltages(&f.bias(&d, x, 450.0).unwrap()).unwrap()).collect();
        assert!(js.iter().all(|&j| j >= js[4]));
    }

    #[test]
    fn fingerprint_extrema_at_sop() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        let deltas: Vec<f64> = (-20..=20).map(|k| 0.2 * k as f64).collect();
        let g = fingerprint_scan(
            &d,
            &f,
            &deltas,
            &[400.0, 450.0],
            500.0,
            None,
            &GateCorrelation::Identity,
            &RabiOptions::default(),
            None,
        )
        .unwrap();
        // dP/dΔ vanishes at Δ = 0 along each column.
        for ix in 0..2 {
            let (a, b, c) = (g.at(ix, 19), g.at(ix, 20), g.at(ix, 21));
            assert!((a - c).abs() < 1e-9);
            assert!((b - a) * (b - g.at(ix, 18)) >= -1e-15 || (a - b).abs() < 1e-6);
        }
    }
}
