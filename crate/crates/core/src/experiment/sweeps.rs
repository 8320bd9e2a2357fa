//! Insensitivity measurements along contours and exchange sweeps.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde_json::json;

use super::fit::{fit_rabi, FitOptions};
use super::{rabi_trace, Mode, RabiOptions};
use crate::data::{time_grid, Table};
use crate::device::{constant_j_contour, ContourOptions, ControlFrame, DeviceModel, GateVector};
use crate::error::{Error, Result};
use crate::noise::{generalized_insensitivity, insensitivity, sigma_v_effective, GateCorrelation, NoiseModel};

const GRAD_STEP: f64 = 0.01;

/// Solves τ = I/(2πJ·σ_V(τ)) for the charge-noise 1/e time, ns. Returns
/// +∞ when the insensitivity is infinite.
fn self_consistent_tau(j: f64, i: f64, noise: &NoiseModel) -> Result<f64> {
    if i.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut tau = 1000.0;
    for _ in 0..100 {
        let next = i / (TAU * j * sigma_v_effective(noise, tau)?);
        if ((next - tau) / tau).abs() < 1e-12 {
            return Ok(next);
        }
        tau = next;
    }
    Ok(tau)
}

/// Exchange and predicted charge-noise 1/e time at bias `v` using the
/// generalized insensitivity for `corr`.
pub fn predicted_decay(d: &DeviceModel, v: &[f64], noise: &NoiseModel, corr: &GateCorrelation) -> Result<(f64, f64)> {
    let j = d.exchange_of_voltages(v)?;
    let i = generalized_insensitivity(j, &d.grad_j(v, GRAD_STEP)?, corr)?;
    Ok((j, self_consistent_tau(j, i, noise)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    /// Gate step for the centered difference, mV.
    pub perturbation: f64,
    /// Length of each noiseless trace in oscillation periods.
    pub periods: f64,
    pub points_per_period: f64,
    pub fit: FitOptions,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self { perturbation: 0.5, periods: 20.0, points_per_period: 16.0, fit: FitOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredInsensitivity {
    /// mV.
    pub i: f64,
    /// Fitted frequency at the bias itself, GHz.
    pub j: f64,
    /// GHz/mV.
    pub grad: GateVector,
}

/// Insensitivity from fitted Rabi frequencies at v ± h·e_k for every gate.
pub fn measured_insensitivity(d: &DeviceModel, v: &[f64], opts: &MeasureOptions) -> Result<MeasuredInsensitivity> {
    let h = opts.perturbation;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("perturbation must be positive"));
    }
    if !(opts.periods > 0.0 && opts.points_per_period > 0.0) {
        return Err(Error::invalid("trace length and sampling must be positive"));
    }
    let j0 = d.exchange_of_voltages(v)?;
    let n = (opts.periods * opts.points_per_period).ceil() as usize + 1;
    let times = time_grid(opts.periods / j0, n);
    let ro = RabiOptions::default();
    let freq = |v: &[f64]| -> Result<f64> {
        let t = rabi_trace(d, v, &times, None, &GateCorrelation::Identity, &ro)?;
        Ok(fit_rabi(&t, &opts.fit)?.frequency)
    };
    let j = freq(v)?;
    let grad = (0..d.n_gates())
        .into_par_iter()
        .map(|k| {
            let mut vp = v.to_vec();
            let mut vm = v.to_vec();
            vp[k] += h;
            vm[k] -= h;
            Ok((freq(&vp)? - freq(&vm)?) / (2.0 * h))
        })
        .collect::<Result<GateVector>>()?;
    Ok(MeasuredInsensitivity { i: insensitivity(j, &grad), j, grad })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSweepOptions {
    pub contour: ContourOptions,
    pub measure: MeasureOptions,
    /// Monte-Carlo trajectories per contour point; 0 skips the simulation.
    pub mc_samples: usize,
    pub seed: u64,
    /// Gate correlation of the noise injected in the Monte-Carlo.
    pub injection: GateCorrelation,
    /// Simulated trace length in predicted 1/e times.
    pub mc_window: f64,
    pub mc_points_per_period: f64,
    pub highpass_cutoff: Option<f64>,
}

impl Default for ContourSweepOptions {
    fn default() -> Self {
        Self {
            contour: ContourOptions::default(),
            measure: MeasureOptions::default(),
            mc_samples: 2000,
            seed: 0,
            injection: GateCorrelation::Identity,
            mc_window: 2.5,
            mc_points_per_period: 12.0,
            highpass_cutoff: None,
        }
    }
}

/// Monte-Carlo trace around `v` and its fitted fringe count.
///
/// The offset spread uses σ_V at the predicted 1/e time, the time scale
/// the fitted envelope is most sensitive to.
fn simulated_n_rabi(
    d: &DeviceModel,
    v: &[f64],
    noise: &NoiseModel,
    opts: &ContourSweepOptions,
    seed: u64,
) -> Result<f64> {
    let (j, tau) = predicted_decay(d, v, noise, &opts.injection)?;
    if tau.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let t_max = (opts.mc_window * tau).max(10.0 / j);
    let n = (t_max * j * opts.mc_points_per_period).ceil() as usize + 1;
    let ro = RabiOptions {
        mode: Mode::MonteCarlo { samples: opts.mc_samples, seed, sigma_time: Some(tau) },
        ..Default::default()
    };
    let trace = rabi_trace(d, v, &time_grid(t_max, n), Some(noise), &opts.injection, &ro)?;
    let fit = fit_rabi(&trace, &FitOptions { highpass_cutoff: opts.highpass_cutoff, ..Default::default() })?;
    Ok(fit.n_rabi)
}

/// Measured, direct and generalized insensitivity with predicted and
/// simulated fringe counts along the J = `j_target` contour.
///
/// Detunings where the contour cannot be reached are skipped and listed
/// under `skipped_deltas`; failed Monte-Carlo fits give NaN and are listed
/// under `fit_failures`.
pub fn insensitivity_contour_sweep(
    d: &DeviceModel,
    frame: &ControlFrame,
    j_target: f64,
    deltas: &[f64],
    noise: &NoiseModel,
    corr: &GateCorrelation,
    opts: &ContourSweepOptions,
) -> Result<Table> {
    corr.validate(d.n_gates())?;
    opts.injection.validate(d.n_gates())?;
    let pts = constant_j_contour(d, frame, j_target, deltas, opts.contour)?;
    let mut skipped = Vec::new();
    let reached: Vec<(usize, _)> = pts
        .into_iter()
        .enumerate()
        .filter_map(|(k, p)| match p {
            Ok(p) => Some((k, p)),
            Err(e) if e.is_numerical() => {
                skipped.push(deltas[k]);
                None
            }
            Err(_) => None,
        })
        .collect();
    let rows = reached
        .par_iter()
        .map(|(k, p)| {
            let m = measured_insensitivity(d, &p.bias, &opts.measure)?;
            let direct = insensitivity(p.j, &d.grad_j(&p.bias, GRAD_STEP)?);
            let gen = generalized_insensitivity(m.j, &m.grad, corr)?;
            let tau = self_consistent_tau(m.j, m.i, noise)?;
            let tau_gen = self_consistent_tau(m.j, gen, noise)?;
            let sim = if opts.mc_samples == 0 {
                Ok(f64::NAN)
            } else {
                simulated_n_rabi(d, &p.bias, noise, opts, opts.seed.wrapping_add(*k as u64))
            };
            let sim = match sim {
                Ok(n) => n,
                Err(e) if e.is_numerical() || matches!(e, Error::InvalidParameter(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            Ok([
                p.delta,
                p.v_exchange,
                p.j,
                m.i,
                direct,
                gen,
                sigma_v_effective(noise, tau.min(1e12))?,
                m.j * tau,
                m.j * tau_gen,
                sim,
            ])
        })
        .collect::<Result<Vec<[f64; 10]>>>()?;
    let cols = [
        ("delta", "GHz"),
        ("v_exchange", "mV"),
        ("J", "GHz"),
        ("I", "mV"),
        ("I_direct", "mV"),
        ("I_generalized", "mV"),
        ("sigma_v", "mV"),
        ("n_rabi_predicted", ""),
        ("n_rabi_generalized", ""),
        ("n_rabi_simulated", ""),
    ];
    let mut t = Table::new();
    for (c, (name, unit)) in cols.iter().enumerate() {
        t.push(*name, *unit, rows.iter().map(|r| r[c]).collect());
    }
    let failures: Vec<f64> = rows.iter().filter(|r| r[9].is_nan() && opts.mc_samples > 0).map(|r| r[0]).collect();
    t.metadata.insert("j_target_GHz".into(), json!(j_target));
    t.metadata.insert("skipped_deltas".into(), json!(skipped));
    t.metadata.insert("fit_failures".into(), json!(failures));
    t.metadata.insert("seed".into(), json!(opts.seed));
    t.metadata.insert("mc_samples".into(), json!(opts.mc_samples));
    Ok(t)
}

/// J, insensitivity and predicted fringe count along the exchange axis at
/// Δ = 0.
pub fn i_vs_j_sweep(d: &DeviceModel, frame: &ControlFrame, v_exchange: &[f64], noise: &NoiseModel) -> Result<Table> {
    let rows = v_exchange
        .par_iter()
        .map(|&x| {
            let v = frame.bias(d, 0.0, x)?;
            let j = d.exchange_of_voltages(&v)?;
            let i = insensitivity(j, &d.grad_j(&v, GRAD_STEP)?);
            let tc = d.barrier().tc(d.barrier_voltage(&v)?);
            let tau = self_consistent_tau(j, i, noise)?;
            Ok([x, j, i, tc, j * tau])
        })
        .collect::<Result<Vec<[f64; 5]>>>()?;
    let mut t = Table::new();
    for (c, (name, unit)) in
        [("v_exchange", "mV"), ("J", "GHz"), ("I", "mV"), ("t_c", "GHz"), ("n_rabi_predicted", "")].iter().enumerate()
    {
        t.push(*name, *unit, rows.iter().map(|r| r[c]).collect());
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_matches_direct_gradient() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        for delta in [0.0, 10.0] {
            let v = f.bias(&d, delta, 420.0).unwrap();
            let m = measured_insensitivity(&d, &v, &MeasureOptions::default()).unwrap();
            let j = d.exchange_of_voltages(&v).unwrap();
            let direct = insensitivity(j, &d.grad_j_analytic(&v).unwrap());
            assert!((m.i / direct - 1.0).abs() < 0.02, "Δ {delta}: {} vs {direct}", m.i);
            let half = MeasureOptions { perturbation: 0.25, ..Default::default() };
            let m2 = measured_insensitivity(&d, &v, &half).unwrap();
            assert!((m2.i / m.i - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn self_consistent_tau_is_a_fixed_point() {
        let n = NoiseModel::one_over_f(0.3, 1.0).unwrap();
        let tau = self_consistent_tau(0.16, 100.0, &n).unwrap();
        let s = sigma_v_effective(&n, tau).unwrap();
        assert!((tau * TAU * 0.16 * s / 100.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ivj_columns() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        let n = NoiseModel::one_over_f(0.3, 1.0).unwrap();
        let t = i_vs_j_sweep(&d, &f, &[300.0, 400.0, 500.0], &n).unwrap();
        assert_eq!(t.rows(), 3);
        let j = t.column("J").unwrap();
        assert!(j[0] < j[1] && j[1] < j[2]);
    }
}
