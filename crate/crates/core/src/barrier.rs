//! Shallow-barrier (modified WKB) model of the gate-controlled tunnel coupling.
//!
//! With a barrier action φ(V) = a − b·V the tunnel coupling is
//! t_c = t0·(√(e^{2φ} + 1) − e^φ). For a deep barrier this is the usual
//! t0·e^{−φ}/2; as the barrier is lowered t_c saturates at t0, which makes
//! J(V) grow sub-exponentially.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hubbard::{exchange_sop_approx, DotPairParams};
use crate::numeric::{levenberg_marquardt, LmOptions};

/// Barrier model: prefactor `t0` (GHz), action offset `a`, action slope `b` (1/mV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbBarrier {
    pub t0: f64,
    pub a: f64,
    pub b: f64,
}

/// Above this action the closed form would overflow `exp(2φ)`.
const LARGE_ACTION: f64 = 350.0;

impl WkbBarrier {
    pub fn new(t0: f64, a: f64, b: f64) -> Result<Self> {
        let w = Self { t0, a, b };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(Error::invalid(format!("barrier prefactor t0 must be positive, got {}", self.t0)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::invalid(format!("barrier slope b must be positive, got {}", self.b)));
        }
        if !self.a.is_finite() {
            return Err(Error::invalid("barrier offset a must be finite"));
        }
        Ok(())
    }

    /// Barrier action φ at effective barrier voltage `v` (mV).
    pub fn action(&self, v: f64) -> f64 {
        self.a - self.b * v
    }

    /// Voltage at which the action equals `phi`.
    pub fn voltage_for_action(&self, phi: f64) -> f64 {
        (self.a - phi) / self.b
    }

    /// Tunnel coupling t_c(V), GHz.
    pub fn tc(&self, v: f64) -> f64 {
        tc_of_action(self.t0, self.action(v))
    }

    /// dt_c/dV, GHz/mV.
    pub fn dtc_dv(&self, v: f64) -> f64 {
        let phi = self.action(v);
        // dt_c/dφ = −t_c·e^φ/√(e^{2φ}+1) = −t_c/√(1+e^{−2φ})
        let sat = if phi > 0.0 {
            1.0 / (1.0 + (-2.0 * phi).exp()).sqrt()
        } else {
            phi.exp() / (phi.exp().powi(2) + 1.0).sqrt()
        };
        self.b * tc_of_action(self.t0, phi) * sat
    }
}

/// t0·(√(e^{2φ}+1) − e^φ), evaluated without cancellation or overflow.
pub fn tc_of_action(t0: f64, phi: f64) -> f64 {
    if phi > LARGE_ACTION {
        return t0 * (-phi).exp() / 2.0;
    }
    if phi > 0.0 {
        let e = (-phi).exp();
        t0 * e / ((1.0 + e * e).sqrt() + 1.0)
    } else {
        let e = phi.exp();
        t0 / ((e * e + 1.0).sqrt() + e)
    }
}

/// Exchange at Δ = 0 predicted by the barrier model and the symmetric-point
/// Hubbard formula.
pub fn sop_exchange(w: &WkbBarrier, u: f64, v: f64) -> Result<f64> {
    exchange_sop_approx(&DotPairParams::new(u, w.tc(v), 0.0)?)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WkbFitOptions {
    /// Only points with J at or above this value enter the fit.
    pub j_min: Option<f64>,
    pub lm: Option<LmOptions>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkbFit {
    pub barrier: WkbBarrier,
    /// Sum of squared log-residuals.
    pub residual: f64,
    pub points_used: usize,
    pub iterations: usize,
}

/// Least-squares fit of (t0, a, b) to (V, J) data at Δ = 0, in log J.
///
/// On non-convergence the error carries the best parameters reached as
/// `[t0, a, b]`.
pub fn fit_wkb(data: &[(f64, f64)], u: f64, init: WkbBarrier, opts: WkbFitOptions) -> Result<WkbFit> {
    init.validate()?;
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::invalid("charging energy must be positive"));
    }
    let pts: Vec<(f64, f64)> = data.iter().copied().filter(|&(_, j)| opts.j_min.map_or(true, |m| j >= m)).collect();
    if pts.len() < 4 {
        return Err(Error::invalid(format!("fit_wkb needs at least 4 points, got {}", pts.len())));
    }
    if let Some(&(v, j)) = pts.iter().find(|&&(v, j)| !(v.is_finite() && j.is_finite() && j > 0.0)) {
        return Err(Error::invalid(format!("invalid data point (V={v}, J={j}); J must be positive")));
    }
    let v_first = pts[0].0;
    if pts.iter().all(|&(v, _)| v == v_first) {
        return Err(Error::degenerate("fit_wkb", "all voltages are equal"));
    }
    let log_j: Vec<f64> = pts.iter().map(|&(_, j)| j.ln()).collect();

    let residuals = |p: &[f64], out: &mut [f64]| -> bool {
        let w = WkbBarrier { t0: p[0].exp(), a: p[1], b: p[2] };
        if !(w.b > 0.0) || !w.t0.is_finite() {
            return false;
        }
        for (k, &(v, _)) in pts.iter().enumerate() {
            match sop_exchange(&w, u, v) {
                Ok(j) if j > 0.0 => out[k] = j.ln() - log_j[k],
                _ => return false,
            }
        }
        true
    };
    let x0 = [init.t0.ln(), init.a, init.b];
    let rep = levenberg_marquardt(residuals, &x0, pts.len(), opts.lm.unwrap_or_default());
    let barrier = WkbBarrier { t0: rep.x[0].exp(), a: rep.x[1], b: rep.x[2] };
    if !rep.converged {
        return Err(Error::NotConverged {
            op: "fit_wkb",
            iterations: rep.iterations,
            residual: rep.cost,
            best: vec![barrier.t0, barrier.a, barrier.b],
        });
    }
    Ok(WkbFit { barrier, residual: rep.cost, points_used: pts.len(), iterations: rep.iterations })
}
