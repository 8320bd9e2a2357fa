//! Gate voltages to Hubbard control parameters.
//!
//! Lever arms are linear: Δ = l_delta·(V − V₀) in GHz and the effective
//! barrier voltage is l_barrier·(V − V₀) in mV. A third row, l_common, sets
//! the common-mode (total occupancy) coordinate that bounds the (1,1) cell
//! along the direction where both dots fill together.

mod frame;
mod stability;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::barrier::WkbBarrier;
use crate::error::{Error, Result};
use crate::hubbard::{dj_ddelta, exchange_exact, DotPairParams};

pub use frame::{axis_angle_deg, constant_j_contour, ContourOptions, ContourPoint, ControlFrame};
pub use stability::{calibrate_axes, synth_stability_map, CalibrationReport};

/// One voltage per gate, mV, in [`DeviceModel::gates`] order.
pub type GateVector = Vec<f64>;

/// Names every device must define: the two plungers and the exchange gate.
pub const P1: &str = "P1";
pub const P2: &str = "P2";
pub const X1: &str = "X1";

pub const DEFAULT_GATES: [&str; 7] = ["P1", "P2", "P3", "X1", "X2", "T1", "T2"];

/// Serialized form of a device, with per-gate coefficients keyed by gate
/// name. Omitted gates default to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub gates: Vec<String>,
    /// GHz/mV.
    pub l_delta: BTreeMap<String, f64>,
    /// Dimensionless.
    pub l_barrier: BTreeMap<String, f64>,
    /// Dimensionless; all zero leaves the cell open along the common mode.
    #[serde(default)]
    pub l_common: BTreeMap<String, f64>,
    pub barrier: WkbBarrier,
    /// Singlet charging energy U, GHz.
    pub hubbard_u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hubbard_u_t: Option<f64>,
    /// Reference bias, mV.
    #[serde(default)]
    pub v0: BTreeMap<String, f64>,
    /// Extent of the (1,1) cell along the common-mode coordinate, mV.
    pub cell_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    gates: Vec<String>,
    l_delta: Vec<f64>,
    l_barrier: Vec<f64>,
    l_common: Vec<f64>,
    barrier: WkbBarrier,
    u: f64,
    u_t: Option<f64>,
    v0: GateVector,
    cell_size: f64,
    p1: usize,
    p2: usize,
    x1: usize,
}

fn by_gate(gates: &[String], map: &BTreeMap<String, f64>, what: &str) -> Result<Vec<f64>> {
    if let Some(name) = map.keys().find(|k| !gates.contains(k)) {
        return Err(Error::UnknownGate(name.clone()));
    }
    let v: Vec<f64> = gates.iter().map(|g| map.get(g).copied().unwrap_or(0.0)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} entries must be finite")));
    }
    Ok(v)
}

fn to_map(gates: &[String], v: &[f64]) -> BTreeMap<String, f64> {
    gates.iter().cloned().zip(v.iter().copied()).filter(|(_, x)| *x != 0.0).collect()
}

impl DeviceModel {
    pub fn from_spec(spec: &DeviceSpec) -> Result<Self> {
        let gates = spec.gates.clone();
        if gates.is_empty() {
            return Err(Error::invalid("gate list is empty"));
        }
        for (i, g) in gates.iter().enumerate() {
            if gates[..i].contains(g) {
                return Err(Error::invalid(format!("duplicate gate `{g}`")));
            }
        }
        let find = |name: &str| {
            gates
                .iter()
                .position(|g| g == name)
                .ok_or_else(|| Error::invalid(format!("device must define gate `{name}`")))
        };
        let (p1, p2, x1) = (find(P1)?, find(P2)?, find(X1)?);
        let l_delta = by_gate(&gates, &spec.l_delta, "l_delta")?;
        let l_barrier = by_gate(&gates, &spec.l_barrier, "l_barrier")?;
        let l_common = by_gate(&gates, &spec.l_common, "l_common")?;
        let v0 = by_gate(&gates, &spec.v0, "v0")?;
        spec.barrier.validate()?;
        if !(l_delta[p1] > 0.0 && l_delta[p2] < 0.0) {
            return Err(Error::invalid("detuning lever arms need l_delta[P1] > 0 and l_delta[P2] < 0"));
        }
        if !(spec.hubbard_u.is_finite() && spec.hubbard_u > 0.0) {
            return Err(Error::invalid("hubbard_u must be positive"));
        }
        if let Some(ut) = spec.hubbard_u_t {
            if !(ut >= spec.hubbard_u) {
                return Err(Error::invalid("hubbard_u_t must be at least hubbard_u"));
            }
        }
        if !(spec.cell_size.is_finite() && spec.cell_size > 0.0) {
            return Err(Error::invalid("cell_size must be positive"));
        }
        Ok(Self {
            gates,
            l_delta,
            l_barrier,
            l_common,
            barrier: spec.barrier,
            u: spec.hubbard_u,
            u_t: spec.hubbard_u_t,
            v0,
            cell_size: spec.cell_size,
            p1,
            p2,
            x1,
        })
    }

    pub fn to_spec(&self) -> DeviceSpec {
        DeviceSpec {
            gates: self.gates.clone(),
            l_delta: to_map(&self.gates, &self.l_delta),
            l_barrier: to_map(&self.gates, &self.l_barrier),
            l_common: to_map(&self.gates, &self.l_common),
            barrier: self.barrier,
            hubbard_u: self.u,
            hubbard_u_t: self.u_t,
            v0: to_map(&self.gates, &self.v0),
            cell_size: self.cell_size,
        }
    }

    /// Seven-gate reference device: U = 20 GHz, α = 0.1 GHz/mV,
    /// WKB(t0 = 5 GHz, a = 3, b = 0.05/mV), 10% cross-capacitance.
    ///
    /// X1 couples to the effective barrier voltage with lever 0.1, so the
    /// barrier gradient at the symmetric point is small compared with the
    /// detuning gradient near the cell edge.
    pub fn reference() -> Self {
        let spec = DeviceSpec {
            gates: DEFAULT_GATES.iter().map(|s| s.to_string()).collect(),
            l_delta: gate_map(&[("P1", 0.1), ("P2", -0.1), ("T1", 0.01), ("X2", -0.01), ("P3", -0.01)]),
            l_barrier: gate_map(&[("X1", 0.1), ("P1", 0.01), ("P2", 0.01)]),
            l_common: gate_map(&[("P1", 0.5), ("P2", 0.5), ("X1", 0.1), ("T1", 0.05), ("X2", 0.05), ("P3", 0.05)]),
            barrier: WkbBarrier { t0: 5.0, a: 3.0, b: 0.05 },
            hubbard_u: 20.0,
            hubbard_u_t: None,
            v0: BTreeMap::new(),
            cell_size: 200.0,
        };
        Self::from_spec(&spec).expect("reference device is valid")
    }

    /// Seven gates, Δ = α(V_P1 − V_P2), barrier driven by X1 alone, no
    /// cross-capacitance.
    pub fn ideal(alpha: f64, barrier: WkbBarrier, u: f64) -> Result<Self> {
        let spec = DeviceSpec {
            gates: DEFAULT_GATES.iter().map(|s| s.to_string()).collect(),
            l_delta: gate_map(&[("P1", alpha), ("P2", -alpha)]),
            l_barrier: gate_map(&[("X1", 1.0)]),
            l_common: gate_map(&[("P1", 0.5), ("P2", 0.5)]),
            barrier,
            hubbard_u: u,
            hubbard_u_t: None,
            v0: BTreeMap::new(),
            cell_size: u / alpha,
        };
        Self::from_spec(&spec)
    }

    pub fn gates(&self) -> &[String] {
        &self.gates
    }

    pub fn n_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn gate_index(&self, name: &str) -> Result<usize> {
        self.gates.iter().position(|g| g == name).ok_or_else(|| Error::UnknownGate(name.to_string()))
    }

    /// Indices of P1, P2 and X1.
    pub fn key_gates(&self) -> (usize, usize, usize) {
        (self.p1, self.p2, self.x1)
    }

    pub fn l_delta(&self) -> &[f64] {
        &self.l_delta
    }

    pub fn l_barrier(&self) -> &[f64] {
        &self.l_barrier
    }

    pub fn l_common(&self) -> &[f64] {
        &self.l_common
    }

    pub fn barrier(&self) -> &WkbBarrier {
        &self.barrier
    }

    pub fn hubbard_u(&self) -> f64 {
        self.u
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Detuning lever arm α = l_delta[P1].
    pub fn alpha(&self) -> f64 {
        self.l_delta[self.p1]
    }

    pub fn with_v0(mut self, v0: GateVector) -> Result<Self> {
        self.check(&v0)?;
        self.v0 = v0;
        Ok(self)
    }

    pub fn with_barrier(mut self, barrier: WkbBarrier) -> Result<Self> {
        barrier.validate()?;
        self.barrier = barrier;
        Ok(self)
    }

    pub fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_gates() {
            return Err(Error::DimensionMismatch { expected: self.n_gates(), got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("gate voltages must be finite"));
        }
        Ok(())
    }

    /// Named voltages to a [`GateVector`]; unnamed gates sit at V₀.
    pub fn gate_vector(&self, named: &BTreeMap<String, f64>) -> Result<GateVector> {
        let mut v = self.v0.clone();
        for (name, &x) in named {
            v[self.gate_index(name)?] = x;
        }
        Ok(v)
    }

    fn lever(&self, l: &[f64], v: &[f64]) -> f64 {
        l.iter().zip(v).zip(&self.v0).map(|((l, v), v0)| l * (v - v0)).sum()
    }

    pub fn detuning(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.lever(&self.l_delta, v))
    }

    /// Effective barrier voltage, mV.
    pub fn barrier_voltage(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.lever(&self.l_barrier, v))
    }

    /// Common-mode coordinate, mV; the cell spans |s| < cell_size/2.
    pub fn common_mode(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.lever(&self.l_common, v))
    }

    /// (Δ, t_c) in GHz.
    pub fn control_params(&self, v: &[f64]) -> Result<(f64, f64)> {
        self.check(v)?;
        Ok((self.lever(&self.l_delta, v), self.barrier.tc(self.lever(&self.l_barrier, v))))
    }

    pub fn pair_params(&self, v: &[f64]) -> Result<DotPairParams> {
        let (delta, tc) = self.control_params(v)?;
        if delta.abs() >= self.u {
            return Err(Error::domain(
                "exchange_of_voltages",
                format!("detuning {delta} GHz lies outside the (1,1) cell |Δ| < {}", self.u),
            ));
        }
        DotPairParams::new(self.u, tc, delta)
    }

    /// J(V), GHz.
    pub fn exchange_of_voltages(&self, v: &[f64]) -> Result<f64> {
        Ok(exchange_exact(&self.pair_params(v)?))
    }

    /// True when V lies inside the (1,1) charge cell.
    pub fn in_cell(&self, v: &[f64]) -> Result<bool> {
        self.check(v)?;
        let (d, s) = (self.lever(&self.l_delta, v), self.lever(&self.l_common, v));
        Ok(d.abs() < self.u && s.abs() < self.cell_size / 2.0)
    }

    /// ∂J/∂V_j by central differences with the given step, GHz/mV.
    pub fn grad_j(&self, v: &[f64], step: f64) -> Result<GateVector> {
        self.check(v)?;
        if !(step > 0.0) {
            return Err(Error::invalid("gradient step must be positive"));
        }
        let mut w = v.to_vec();
        (0..self.n_gates())
            .map(|j| {
                w[j] = v[j] + step;
                let hi = self.exchange_of_voltages(&w);
                w[j] = v[j] - step;
                let lo = self.exchange_of_voltages(&w);
                w[j] = v[j];
                Ok((hi? - lo?) / (2.0 * step))
            })
            .collect()
    }

    /// Chain-rule gradient: ∂J/∂Δ·l_delta + ∂J/∂t_c·dt_c/dV_b·l_barrier.
    pub fn grad_j_analytic(&self, v: &[f64]) -> Result<GateVector> {
        let p = self.pair_params(v)?;
        let vb = self.lever(&self.l_barrier, v);
        let dj_dd = dj_ddelta(&p);
        // t_c > 0 always holds for a WKB barrier.
        let h = 1e-6 * p.tc_s;
        let dj_dt = (exchange_exact(&p.with_tc(p.tc_s + h)) - exchange_exact(&p.with_tc(p.tc_s - h))) / (2.0 * h);
        let dt_dv = self.barrier.dtc_dv(vb);
        Ok(self.l_delta.iter().zip(&self.l_barrier).map(|(ld, lb)| dj_dd * ld + dj_dt * dt_dv * lb).collect())
    }
}

pub fn gate_map(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ideal() -> DeviceModel {
        DeviceModel::ideal(0.1, WkbBarrier { t0: 5.0, a: 3.0, b: 0.05 }, 20.0).unwrap()
    }

    fn at(d: &DeviceModel, named: &[(&str, f64)]) -> GateVector {
        d.gate_vector(&gate_map(named)).unwrap()
    }

    #[test]
    fn reference_point() {
        let d = DeviceModel::reference();
        let (delta, tc) = d.control_params(d.v0()).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(tc, d.barrier().tc(0.0));
    }

    #[test]
    fn ideal_detuning_arithmetic() {
        let d = ideal();
        let (delta, _) = d.control_params(&at(&d, &[("P1", 5.0), ("P2", -5.0)])).unwrap();
        assert!((delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn common_shift_leaves_detuning() {
        let d = ideal();
        let v = vec![1.0; 7];
        let (delta, tc) = d.control_params(&v).unwrap();
        assert!(delta.abs() < 1e-15);
        assert_eq!(tc, d.barrier().tc(1.0));
    }

    #[test]
    fn exchange_matches_hubbard() {
        // Pick V_X1 so that t_c = 1 GHz at Δ = 0.
        let w = WkbBarrier { t0: 5.0, a: 3.0, b: 0.05 };
        let d = DeviceModel::ideal(0.1, w, 20.0).unwrap();
        // t0/(√(e^{2φ}+1)+e^φ) = 1 ⇒ e^φ = (t0² − 1)/(2 t0)
        let phi = ((25.0f64 - 1.0) / 10.0).ln();
        let v = at(&d, &[("X1", w.voltage_for_action(phi))]);
        let (_, tc) = d.control_params(&v).unwrap();
        assert!((tc - 1.0).abs() < 1e-12);
        let j = d.exchange_of_voltages(&v).unwrap();
        assert!((j - (102f64.sqrt() - 10.0)).abs() < 1e-12);
    }

    #[test]
    fn detuning_outside_cell_is_an_error() {
        let d = ideal();
        let v = at(&d, &[("P1", 150.0), ("P2", -150.0)]);
        assert!(matches!(d.exchange_of_voltages(&v), Err(Error::Domain { .. })));
    }

    #[test]
    fn spec_round_trip_and_unknown_gate() {
        let d = DeviceModel::reference();
        let spec = d.to_spec();
        assert_eq!(DeviceModel::from_spec(&spec).unwrap(), d);
        let mut bad = spec.clone();
        bad.l_barrier.insert("P9".into(), 0.1);
        assert_eq!(DeviceModel::from_spec(&bad), Err(Error::UnknownGate("P9".into())));
        let mut dup = spec.clone();
        dup.gates.push("P1".into());
        assert!(DeviceModel::from_spec(&dup).is_err());
        let mut sign = spec;
        sign.l_delta.insert("P2".into(), 0.1);
        assert!(DeviceModel::from_spec(&sign).is_err());
    }

    #[test]
    fn gradient_symmetry_at_sop() {
        let d = ideal();
        let v = at(&d, &[("X1", 40.0)]);
        let g = d.grad_j(&v, 0.01).unwrap();
        let (p1, p2, x1) = d.key_gates();
        assert!((g[p1] + g[p2]).abs() < 1e-9);
        assert!(g[p1].abs() < 1e-6 && g[x1] > 0.0);
    }

    #[test]
    fn numeric_and_chain_rule_gradients_agree() {
        let d = DeviceModel::reference();
        let v = at(&d, &[("P1", 40.0), ("P2", -30.0), ("X1", 400.0)]);
        let g = d.grad_j(&v, 0.01).unwrap();
        let ga = d.grad_j_analytic(&v).unwrap();
        for (a, b) in g.iter().zip(&ga) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1e-6), "{a} vs {b}");
        }
    }

    #[test]
    fn deep_detuning_slope_matches_hubbard() {
        let d = ideal();
        // Δ = 19.8 GHz, small t_c.
        let v = at(&d, &[("P1", 99.0), ("P2", -99.0), ("X1", -20.0)]);
        let p = d.pair_params(&v).unwrap();
        let g = d.grad_j(&v, 0.01).unwrap();
        let (p1, p2, _) = d.key_gates();
        let u_det = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()];
        let along = (g[p1] * u_det[0] + g[p2] * u_det[1]) / (d.alpha() * 2f64.sqrt());
        let j = exchange_exact(&p);
        let asym = j * j / (p.tc_s * p.tc_s);
        assert!(((along - asym) / asym).abs() < 0.1, "{along} vs {asym}");
    }

    proptest! {
        #[test]
        fn null_space_invariance(w in proptest::collection::vec(-50.0f64..50.0, 7)) {
            let d = DeviceModel::reference();
            let v = at(&d, &[("P1", 20.0), ("P2", -10.0), ("X1", 300.0)]);
            // Remove the components along l_delta and l_barrier (Gram–Schmidt).
            let ld = d.l_delta().to_vec();
            let lb = d.l_barrier().to_vec();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let e1: Vec<f64> = ld.iter().map(|x| x / dot(&ld, &ld).sqrt()).collect();
            let lb2: Vec<f64> = lb.iter().zip(&e1).map(|(b, e)| b - dot(&lb, &e1) * e).collect();
            let e2: Vec<f64> = lb2.iter().map(|x| x / dot(&lb2, &lb2).sqrt()).collect();
            let (c1, c2) = (dot(&w, &e1), dot(&w, &e2));
            let w: Vec<f64> = w.iter().zip(e1.iter().zip(&e2)).map(|(x, (a, b))| x - c1 * a - c2 * b).collect();
            let moved: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
            let j0 = d.exchange_of_voltages(&v).unwrap();
            let j1 = d.exchange_of_voltages(&moved).unwrap();
            prop_assert!((j0 - j1).abs() <= 1e-10 * j0);
        }

        #[test]
        fn mirror_along_detuning(delta in 0.0f64..19.0, x1 in 0.0f64..600.0) {
            let d = DeviceModel::reference();
            let h = delta / (2.0 * d.alpha());
            let plus = at(&d, &[("P1", h), ("P2", -h), ("X1", x1)]);
            let minus = at(&d, &[("P1", -h), ("P2", h), ("X1", x1)]);
            let (jp, jm) = (d.exchange_of_voltages(&plus).unwrap(), d.exchange_of_voltages(&minus).unwrap());
            prop_assert!((jp - jm).abs() <= 1e-12 * jp.max(1e-300));
        }
    }
}
