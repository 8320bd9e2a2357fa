//! Symmetric control axes and constant-J contours.

use serde::{Deserialize, Serialize};

use super::{DeviceModel, GateVector};
use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Detuning and exchange directions through a reference bias.
///
/// A bias is V = V₀ + û_det·Δ/(l_delta·û_det) + û_exch·Ṽ, so that a step
/// along û_det changes the detuning by exactly Δ and Ṽ is the distance moved
/// along the exchange axis in mV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFrame {
    pub u_detuning: GateVector,
    pub u_exchange: GateVector,
    pub v0: GateVector,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ControlFrame {
    /// Normalizes both directions.
    pub fn new(u_detuning: GateVector, u_exchange: GateVector, v0: GateVector) -> Result<Self> {
        if u_detuning.len() != v0.len() || u_exchange.len() != v0.len() {
            return Err(Error::DimensionMismatch { expected: v0.len(), got: u_detuning.len().min(u_exchange.len()) });
        }
        let (nd, ne) = (norm(&u_detuning), norm(&u_exchange));
        if !(nd > 0.0 && ne > 0.0 && nd.is_finite() && ne.is_finite()) {
            return Err(Error::invalid("frame directions must be nonzero"));
        }
        Ok(Self {
            u_detuning: u_detuning.iter().map(|x| x / nd).collect(),
            u_exchange: u_exchange.iter().map(|x| x / ne).collect(),
            v0,
        })
    }

    /// Frame implied by the device's own lever arms: û_det is normal to the
    /// Δ = const lines in the (P1, P2) plane, û_exch is the direction in
    /// (P1, P2, X1) that keeps both Δ and the common-mode coordinate fixed.
    pub fn ground_truth(d: &DeviceModel) -> Self {
        let n = d.n_gates();
        let (p1, p2, x1) = d.key_gates();
        let (ld, lc) = (d.l_delta(), d.l_common());
        let mut u_det = vec![0.0; n];
        u_det[p1] = ld[p1];
        u_det[p2] = ld[p2];
        let a = [ld[p1], ld[p2], ld[x1]];
        let b = [lc[p1], lc[p2], lc[x1]];
        let mut e = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        if norm(&e) < 1e-12 * norm(&a) * norm(&b).max(1e-300) {
            // Open cell: only Δ constrains the direction; take X1 with its
            // detuning component removed.
            let s = a[2] / dot(&a, &a);
            e = [-s * a[0], -s * a[1], 1.0 - s * a[2]];
        }
        if e[2] < 0.0 {
            e = e.map(|x| -x);
        }
        let mut u_exch = vec![0.0; n];
        u_exch[p1] = e[0];
        u_exch[p2] = e[1];
        u_exch[x1] = e[2];
        Self::new(u_det, u_exch, d.v0().to_vec()).expect("lever arms give nonzero directions")
    }

    pub fn bias(&self, d: &DeviceModel, delta: f64, v_exchange: f64) -> Result<GateVector> {
        d.check(&self.v0)?;
        let slope = dot(d.l_delta(), &self.u_detuning);
        if slope.abs() < 1e-12 {
            return Err(Error::degenerate("ControlFrame::bias", "detuning axis does not change Δ"));
        }
        let s = delta / slope;
        Ok(self
            .v0
            .iter()
            .zip(&self.u_detuning)
            .zip(&self.u_exchange)
            .map(|((v0, ud), ue)| v0 + ud * s + ue * v_exchange)
            .collect())
    }

    /// Angle between the two axes, degrees.
    pub fn skew_deg(&self) -> f64 {
        90.0 - dot(&self.u_detuning, &self.u_exchange).abs().clamp(0.0, 1.0).acos().to_degrees()
    }
}

/// Angle between two directions in degrees, ignoring sign.
pub fn axis_angle_deg(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b).abs() / (norm(a) * norm(b))).clamp(0.0, 1.0).acos().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourOptions {
    /// Search interval for Ṽ along û_exchange, mV.
    pub v_exchange_range: (f64, f64),
    /// Relative tolerance on J.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self { v_exchange_range: (-1000.0, 2000.0), rel_tol: 1e-7, max_iter: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourPoint {
    pub delta: f64,
    pub v_exchange: f64,
    pub bias: GateVector,
    pub j: f64,
}

/// Bias points where J = `j_target` for each requested detuning.
///
/// Each point is found independently by bisection in Ṽ; a point whose target
/// is out of reach is returned as an error without affecting the others.
pub fn constant_j_contour(
    d: &DeviceModel,
    frame: &ControlFrame,
    j_target: f64,
    deltas: &[f64],
    opts: ContourOptions,
) -> Result<Vec<Result<ContourPoint>>> {
    if !(j_target > 0.0 && j_target.is_finite()) {
        return Err(Error::invalid("target exchange must be positive"));
    }
    d.check(&frame.v0)?;
    let (lo, hi) = opts.v_exchange_range;
    if !(lo < hi) {
        return Err(Error::invalid("exchange range must be increasing"));
    }
    Ok(deltas
        .iter()
        .map(|&delta| {
            let f = |x: f64| -> Result<f64> { Ok(d.exchange_of_voltages(&frame.bias(d, delta, x)?)? - j_target) };
            let x =
                bisect(f, lo, hi, |_, fx| fx.abs() < opts.rel_tol * j_target, opts.max_iter).map_err(|e| match e {
                    Error::Unreachable { op, reason } => {
                        Error::Unreachable { op, reason: format!("J = {j_target} GHz at Δ = {delta} GHz: {reason}") }
                    }
                    e => e,
                })?;
            let bias = frame.bias(d, delta, x)?;
            let j = d.exchange_of_voltages(&bias)?;
            Ok(ContourPoint { delta, v_exchange: x, bias, j })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::WkbBarrier;

    #[test]
    fn ideal_ground_truth_axes() {
        let d = DeviceModel::ideal(0.1, WkbBarrier { t0: 5.0, a: 3.0, b: 0.05 }, 20.0).unwrap();
        let f = ControlFrame::ground_truth(&d);
        let (p1, p2, x1) = d.key_gates();
        let r = 1.0 / 2f64.sqrt();
        assert!((f.u_detuning[p1] - r).abs() < 1e-15 && (f.u_detuning[p2] + r).abs() < 1e-15);
        assert_eq!(f.u_exchange[x1], 1.0);
        assert!(f.skew_deg().abs() < 1e-12);
    }

    #[test]
    fn bias_reproduces_detuning() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        for delta in [-15.0, 0.0, 3.0] {
            let v = f.bias(&d, delta, 250.0).unwrap();
            assert!((d.detuning(&v).unwrap() - delta).abs() < 1e-12);
            assert!(d.common_mode(&v).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn contour_properties() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        let deltas: Vec<f64> = (-9..=9).map(|k| 2.0 * k as f64).collect();
        let pts = constant_j_contour(&d, &f, 0.16, &deltas, ContourOptions::default()).unwrap();
        let pts: Vec<ContourPoint> = pts.into_iter().map(|p| p.unwrap()).collect();
        for p in &pts {
            let j = d.exchange_of_voltages(&p.bias).unwrap();
            assert!(((j - 0.16) / 0.16).abs() < 1e-6);
        }
        let n = pts.len();
        for k in 0..n / 2 {
            assert!((pts[k].v_exchange - pts[n - 1 - k].v_exchange).abs() < 1e-6);
        }
        // Strictly decreasing in |Δ|.
        for k in n / 2..n - 1 {
            assert!(pts[k + 1].v_exchange < pts[k].v_exchange);
        }
    }

    #[test]
    fn unreachable_points_are_flagged_individually() {
        let d = DeviceModel::reference();
        let f = ControlFrame::ground_truth(&d);
        let opts = ContourOptions { v_exchange_range: (0.0, 350.0), ..Default::default() };
        let pts = constant_j_contour(&d, &f, 0.16, &[0.0, 18.0], opts).unwrap();
        assert!(matches!(pts[0], Err(Error::Unreachable { .. })));
        assert!(pts[1].is_ok());
    }
}
