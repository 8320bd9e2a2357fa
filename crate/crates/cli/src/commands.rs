//! One function per subcommand, each returning the CSV and JSON it writes.

use serde_json::{json, Value};

use dotsim_core::barrier::{fit_wkb, WkbFitOptions};
use dotsim_core::data::{linspace, time_grid};
use dotsim_core::device::{axis_angle_deg, calibrate_axes, constant_j_contour, synth_stability_map, ContourOptions};
use dotsim_core::experiment::{
    chevron_scan, fft_spectrum, fingerprint_scan, fit_rabi, i_vs_j_sweep, insensitivity_contour_sweep,
    peak_frequencies, rabi_trace, two_freq_trace, ContourSweepOptions, FitOptions, MeasureOptions, Mode, SecondChannel,
};
use dotsim_core::{
    ControlFrame, DeviceModel, Error, GateCorrelation, GateVector, Hyperfine, NoiseModel, RabiOptions, Result, Table,
};

use crate::config::{Bias, ModeName, RunConfig};

pub struct Outputs {
    pub csv: String,
    pub json: Value,
}

struct Setup {
    device: DeviceModel,
    frame: ControlFrame,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let device = cfg.device()?;
    let frame = ControlFrame::ground_truth(&device);
    Ok(Setup { device, frame })
}

fn noise(cfg: &RunConfig, enabled: bool) -> Option<&NoiseModel> {
    enabled.then_some(&cfg.noise)
}

fn generalized(cfg: &RunConfig, d: &DeviceModel) -> GateCorrelation {
    GateCorrelation::plunger_weighted(d, cfg.plunger_weight)
}

/// Gate vector and exchange-axis coordinate for a bias request.
fn resolve(s: &Setup, b: Bias) -> Result<(GateVector, f64)> {
    let x = match (b.v_exchange, b.j_target) {
        (Some(x), _) => x,
        (None, Some(j)) => {
            let pts = constant_j_contour(&s.device, &s.frame, j, &[b.delta], ContourOptions::default())?;
            pts.into_iter().next().expect("one detuning requested")?.v_exchange
        }
        (None, None) => 0.0,
    };
    Ok((s.frame.bias(&s.device, b.delta, x)?, x))
}

fn check_grid(n: usize, what: &str) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("{what} needs at least 2 points")));
    }
    Ok(())
}

fn rabi_options(cfg: &RunConfig) -> RabiOptions {
    let r = &cfg.rabi;
    RabiOptions {
        contrast: r.contrast,
        hyperfine: r.hyperfine_1e.map_or(Hyperfine::Off, |t_1e| Hyperfine::Gaussian { t_1e }),
        mode: match r.mode {
            ModeName::Analytic => Mode::Analytic,
            ModeName::MonteCarlo => Mode::MonteCarlo { samples: r.samples, seed: cfg.seed, sigma_time: None },
        },
        readout_shots: r.readout_shots,
        readout_seed: cfg.seed,
    }
}

pub fn rabi(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let r = &cfg.rabi;
    check_grid(r.points, "rabi")?;
    let (v, x) = resolve(&s, r.bias())?;
    let times = time_grid(r.t_max, r.points);
    let corr = GateCorrelation::Identity;
    let trace = rabi_trace(&s.device, &v, &times, noise(cfg, r.noise), &corr, &rabi_options(cfg))?;
    let mut json = trace.to_json();
    json["metadata"]["v_exchange_mV"] = json!(x);
    json["metadata"]["delta_GHz"] = json!(r.delta);
    if r.fit {
        let fit = fit_rabi(&trace, &FitOptions { highpass_cutoff: r.highpass_cutoff, ..Default::default() })?;
        json["fit"] = serde_json::to_value(fit).expect("fit serializes");
    }
    Ok(Outputs { csv: trace.to_csv(), json })
}

fn chevron_bias(s: &Setup, v_exchange: Option<f64>, j_target: Option<f64>) -> Result<f64> {
    Ok(resolve(s, Bias { delta: 0.0, v_exchange, j_target })?.1)
}

pub fn chevron(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let c = &cfg.chevron;
    check_grid(c.delta_points, "chevron detuning axis")?;
    check_grid(c.points, "chevron time axis")?;
    let x = chevron_bias(&s, c.v_exchange, c.j_target)?;
    let deltas = linspace(c.delta_min, c.delta_max, c.delta_points);
    let times = time_grid(c.t_max, c.points);
    let opts = RabiOptions::default();
    let g =
        chevron_scan(&s.device, &s.frame, &deltas, &times, x, noise(cfg, c.noise), &GateCorrelation::Identity, &opts)?;
    Ok(Outputs { csv: g.to_csv(), json: g.to_json() })
}

pub fn fingerprint(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let f = &cfg.fingerprint;
    check_grid(f.delta_points, "fingerprint detuning axis")?;
    check_grid(f.v_points, "fingerprint exchange axis")?;
    let deltas = linspace(f.delta_min, f.delta_max, f.delta_points);
    let vx = linspace(f.v_min, f.v_max, f.v_points);
    let second = f.two_freq.as_ref().map(|m| (m.weight, SecondChannel::Offset { offset: m.offset }));
    let g = fingerprint_scan(
        &s.device,
        &s.frame,
        &deltas,
        &vx,
        f.evolve_time,
        noise(cfg, f.noise),
        &GateCorrelation::Identity,
        &RabiOptions::default(),
        second,
    )?;
    Ok(Outputs { csv: g.to_csv(), json: g.to_json() })
}

pub fn contour(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let c = &cfg.contour;
    check_grid(c.delta_points, "contour")?;
    let deltas = linspace(c.delta_min, c.delta_max, c.delta_points);
    let opts = ContourSweepOptions {
        measure: MeasureOptions { perturbation: c.perturbation, ..Default::default() },
        mc_samples: c.mc_samples,
        seed: cfg.seed,
        injection: c
            .injection_plunger_weight
            .map_or(GateCorrelation::Identity, |w| GateCorrelation::plunger_weighted(&s.device, w)),
        highpass_cutoff: c.highpass_cutoff,
        ..Default::default()
    };
    let t = insensitivity_contour_sweep(
        &s.device,
        &s.frame,
        c.j_target,
        &deltas,
        &cfg.noise,
        &generalized(cfg, &s.device),
        &opts,
    )?;
    Ok(Outputs { csv: t.to_csv(), json: t.to_json() })
}

pub fn ivj(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let c = &cfg.ivj;
    check_grid(c.points, "ivj")?;
    let t = i_vs_j_sweep(&s.device, &s.frame, &linspace(c.v_min, c.v_max, c.points), &cfg.noise)?;
    Ok(Outputs { csv: t.to_csv(), json: t.to_json() })
}

pub fn calibrate(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let c = &cfg.calibrate;
    check_grid(c.pixels, "calibration map")?;
    let ax = linspace(c.p_min, c.p_max, c.pixels);
    let lo = synth_stability_map(&s.device, &ax, &ax, c.v_x1[0], c.evolve_time)?;
    let hi = synth_stability_map(&s.device, &ax, &ax, c.v_x1[1], c.evolve_time)?;
    let rep = calibrate_axes(&s.device, &lo, &hi)?;
    let truth = &s.frame;
    let cols = [&rep.frame.u_detuning, &rep.frame.u_exchange, &rep.frame.v0, &truth.u_detuning, &truth.u_exchange];
    let mut csv = String::from("gate,u_detuning,u_exchange,v0 [mV],truth_u_detuning,truth_u_exchange\n");
    for (k, g) in s.device.gates().iter().enumerate() {
        let row: Vec<String> = cols.iter().map(|c| c[k].to_string()).collect();
        csv.push_str(&format!("{g},{}\n", row.join(",")));
    }
    let err_det = axis_angle_deg(&rep.frame.u_detuning, &truth.u_detuning);
    let err_exch = axis_angle_deg(&rep.frame.u_exchange, &truth.u_exchange);
    let json = json!({
        "gates": s.device.gates(),
        "frame": rep.frame,
        "ground_truth": truth,
        "centers_mV": rep.centers,
        "v_x1_mV": rep.v_x1,
        "angle_error_deg": { "detuning": err_det, "exchange": err_exch },
        "skew_deg": rep.frame.skew_deg(),
    });
    Ok(Outputs { csv, json })
}

pub fn fitwkb(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let c = &cfg.fitwkb;
    check_grid(c.points, "fitwkb")?;
    let d = &s.device;
    let data = linspace(c.v_min, c.v_max, c.points)
        .into_iter()
        .map(|x| {
            let v = s.frame.bias(d, 0.0, x)?;
            Ok((d.barrier_voltage(&v)?, d.exchange_of_voltages(&v)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let fit = fit_wkb(&data, d.hubbard_u(), c.init, WkbFitOptions { j_min: c.j_min, lm: None })?;
    let model: Vec<f64> = data
        .iter()
        .map(|&(v, _)| dotsim_core::barrier::sop_exchange(&fit.barrier, d.hubbard_u(), v))
        .collect::<Result<_>>()?;
    let mut t = Table::new();
    t.push("v_barrier", "mV", data.iter().map(|p| p.0).collect());
    t.push("J", "GHz", data.iter().map(|p| p.1).collect());
    t.push("J_fit", "GHz", model);
    let json = json!({
        "fit": { "t0": fit.barrier.t0, "a": fit.barrier.a, "b": fit.barrier.b },
        "truth": d.barrier(),
        "residual": fit.residual,
        "points_used": fit.points_used,
        "iterations": fit.iterations,
        "data": t.to_json(),
    });
    Ok(Outputs { csv: t.to_csv(), json })
}

pub fn stability(cfg: &RunConfig) -> Result<Outputs> {
    let s = setup(cfg)?;
    let c = &cfg.stability;
    check_grid(c.pixels, "stability map")?;
    let ax = linspace(c.p_min, c.p_max, c.pixels);
    let g = synth_stability_map(&s.device, &ax, &ax, c.v_x1, c.evolve_time)?;
    Ok(Outputs { csv: g.to_csv(), json: g.to_json() })
}

fn twofreq_trace(cfg: &RunConfig) -> Result<dotsim_core::TimeTrace> {
    let s = setup(cfg)?;
    let c = &cfg.twofreq;
    check_grid(c.points, "twofreq")?;
    let (v, _) = resolve(&s, c.bias())?;
    two_freq_trace(
        &s.device,
        &v,
        c.weight,
        &SecondChannel::Offset { offset: c.offset },
        &time_grid(c.t_max, c.points),
        noise(cfg, c.noise),
        &GateCorrelation::Identity,
        &RabiOptions::default(),
    )
}

pub fn twofreq(cfg: &RunConfig) -> Result<Outputs> {
    let trace = twofreq_trace(cfg)?;
    let spec = fft_spectrum(&trace)?;
    let mut json = trace.to_json();
    json["peaks_GHz"] = json!(peak_frequencies(&spec, cfg.twofreq.n_peaks));
    Ok(Outputs { csv: trace.to_csv(), json })
}

pub fn spectrum(cfg: &RunConfig) -> Result<Outputs> {
    let trace = twofreq_trace(cfg)?;
    let spec = fft_spectrum(&trace)?;
    let mut t = Table::new();
    t.push("frequency", "GHz", spec.frequencies.clone());
    t.push("magnitude", "", spec.magnitude.clone());
    let mut json = t.to_json();
    json["peaks_GHz"] = json!(peak_frequencies(&spec, cfg.twofreq.n_peaks));
    Ok(Outputs { csv: t.to_csv(), json })
}
