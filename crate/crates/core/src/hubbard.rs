//! Two-site, two-electron Hubbard model of an exchange-coupled dot pair.
//!
//! Energies are frequencies (E/h) in GHz. The singlet sector is written in the
//! ordered basis {(2,0)S, (1,1)S, (0,2)S}; the (1,1) triplet is uncoupled and
//! sits at zero energy, so the exchange energy is minus the singlet ground
//! energy.

use crate::error::{Error, Result};
use crate::numeric::symmetric_eigenvalues_3x3;

/// Hubbard parameters of one dot pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotPairParams {
    /// Singlet charging energy U^s, GHz.
    pub u_s: f64,
    /// Triplet charging energy U^t, GHz. Defaults to `u_s`.
    pub u_t: Option<f64>,
    /// Singlet tunnel coupling t_c^s, GHz.
    pub tc_s: f64,
    /// Triplet tunnel coupling t_c^t, GHz. Defaults to `tc_s`.
    pub tc_t: Option<f64>,
    /// Detuning Δ, GHz, referenced to the center of the (1,1) cell.
    pub delta: f64,
}

impl DotPairParams {
    pub fn new(u: f64, tc: f64, delta: f64) -> Result<Self> {
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::invalid(format!("charging energy must be positive, got {u}")));
        }
        if !(tc.is_finite() && tc >= 0.0) {
            return Err(Error::invalid(format!("tunnel coupling must be non-negative, got {tc}")));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        Ok(Self { u_s: u, u_t: None, tc_s: tc, tc_t: None, delta })
    }

    /// Adds the triplet anti-crossing parameters used by
    /// [`exchange_excited_corrected`].
    pub fn with_triplet(mut self, u_t: f64, tc_t: f64) -> Result<Self> {
        if !(u_t.is_finite() && u_t >= self.u_s) {
            return Err(Error::invalid(format!(
                "triplet charging energy {u_t} must be at least the singlet one {}",
                self.u_s
            )));
        }
        if !(tc_t.is_finite() && tc_t >= 0.0) {
            return Err(Error::invalid(format!("triplet tunnel coupling must be non-negative, got {tc_t}")));
        }
        self.u_t = Some(u_t);
        self.tc_t = Some(tc_t);
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_tc(mut self, tc: f64) -> Self {
        self.tc_s = tc;
        self
    }

    pub fn u_t(&self) -> f64 {
        self.u_t.unwrap_or(self.u_s)
    }

    pub fn tc_t(&self) -> f64 {
        self.tc_t.unwrap_or(self.tc_s)
    }
}

/// Eigenvalues of the singlet block plus the triplet reference energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingletSpectrum {
    /// Ascending, GHz.
    pub energies: [f64; 3],
    pub triplet_energy: f64,
}

impl SingletSpectrum {
    pub fn exchange(&self) -> f64 {
        self.triplet_energy - self.energies[0]
    }
}

/// Singlet-sector Hamiltonian in the basis {(2,0)S, (1,1)S, (0,2)S}.
///
/// The (1,1)S state couples to each doubly occupied state with matrix element
/// t_c; the doubly occupied states do not couple directly.
pub fn singlet_hamiltonian(p: &DotPairParams) -> [[f64; 3]; 3] {
    let t = p.tc_s;
    [[p.u_s + p.delta, t, 0.0], [t, 0.0, t], [0.0, t, p.u_s - p.delta]]
}

pub fn singlet_spectrum(p: &DotPairParams) -> SingletSpectrum {
    SingletSpectrum { energies: symmetric_eigenvalues_3x3(&singlet_hamiltonian(p)), triplet_energy: 0.0 }
}

/// Exchange energy from exact diagonalization of the singlet block, GHz.
pub fn exchange_exact(p: &DotPairParams) -> f64 {
    singlet_spectrum(p).exchange()
}

/// Single-anti-crossing approximation, valid for 0 ≪ |Δ| ≪ U:
/// J = √(t_c² + (U−|Δ|)²/4) − (U−|Δ|)/2.
pub fn exchange_detuning_approx(p: &DotPairParams) -> f64 {
    let gap = p.u_s - p.delta.abs();
    let t2 = p.tc_s * p.tc_s;
    let root = (t2 + gap * gap / 4.0).sqrt();
    // Cancellation-free form of root - gap/2 for gap > 0.
    if gap > 0.0 {
        t2 / (root + gap / 2.0)
    } else {
        root - gap / 2.0
    }
}

/// Symmetric-operating-point approximation, valid for |Δ| ≪ U:
/// J = [√(2t_c² + U²/4) − U/2] / (1 − Δ²/U²).
pub fn exchange_sop_approx(p: &DotPairParams) -> Result<f64> {
    let u = p.u_s;
    if p.delta.abs() >= u {
        return Err(Error::domain("exchange_sop_approx", format!("|Δ| = {} must be below U = {u}", p.delta.abs())));
    }
    let two_t2 = 2.0 * p.tc_s * p.tc_s;
    let gap0 = two_t2 / ((two_t2 + u * u / 4.0).sqrt() + u / 2.0);
    Ok(gap0 / (1.0 - (p.delta / u).powi(2)))
}

/// Exchange at Δ = 0 with the triplet anti-crossing subtracted:
/// J = (t_c^s)²/U^s − (t_c^t)²/U^t.
pub fn exchange_excited_corrected(p: &DotPairParams) -> f64 {
    p.tc_s * p.tc_s / p.u_s - p.tc_t().powi(2) / p.u_t()
}

/// dJ/dΔ of the exact exchange by central differences with step
/// max(1e-6·U, 1e-9) GHz.
pub fn dj_ddelta(p: &DotPairParams) -> f64 {
    let h = (1e-6 * p.u_s).max(1e-9);
    let plus = exchange_exact(&p.with_delta(p.delta + h));
    let minus = exchange_exact(&p.with_delta(p.delta - h));
    (plus - minus) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    /// Brute-force oracle: general symmetric eigensolver on the same block.
    fn oracle_exchange(u: f64, t: f64, d: f64) -> f64 {
        let h = Matrix3::new(u + d, t, 0.0, t, 0.0, t, 0.0, t, u - d);
        -h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn params(u: f64, t: f64, d: f64) -> DotPairParams {
        DotPairParams::new(u, t, d).unwrap()
    }

    #[test]
    fn hamiltonian_construction() {
        let h = singlet_hamiltonian(&params(20.0, 0.0, 0.0));
        assert_eq!(h, [[20.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 20.0]]);
        let h = singlet_hamiltonian(&params(20.0, 1.0, 10.0));
        assert_eq!(h, [[30.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 10.0]]);
    }

    #[test]
    fn hamiltonian_mirror_symmetry() {
        let a = singlet_hamiltonian(&params(20.0, 1.3, 7.0));
        let b = singlet_hamiltonian(&params(20.0, 1.3, -7.0));
        let swap = [2, 1, 0];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i][j], b[swap[i]][swap[j]]);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DotPairParams::new(0.0, 1.0, 0.0).is_err());
        assert!(DotPairParams::new(20.0, -1.0, 0.0).is_err());
        assert!(params(20.0, 1.0, 0.0).with_triplet(19.0, 1.0).is_err());
    }

    #[test]
    fn no_tunneling_no_exchange() {
        for d in [-15.0, 0.0, 3.0, 19.5] {
            assert_eq!(exchange_exact(&params(20.0, 0.0, d)), 0.0);
        }
    }

    #[test]
    fn exact_exchange_at_sop() {
        let j = exchange_exact(&params(20.0, 1.0, 0.0));
        let closed = 102f64.sqrt() - 10.0;
        assert!((j - closed).abs() < 1e-13);
        assert!((j - oracle_exchange(20.0, 1.0, 0.0)).abs() < 1e-12);
        assert!((j - 0.0995).abs() < 5e-5);
    }

    #[test]
    fn detuning_approx_against_exact() {
        let p = params(20.0, 1.0, 10.0);
        let approx = exchange_detuning_approx(&p);
        assert!((approx - (26f64.sqrt() - 5.0)).abs() < 1e-12);
        assert!((approx - 0.0990).abs() < 1e-4);
        // The exact value also carries the far anti-crossing, ≈ t²/(U+Δ).
        let exact = oracle_exchange(20.0, 1.0, 10.0);
        let far = 1.0 / 30.0;
        assert!((exact - approx - far).abs() < 0.05 * far);
        assert_eq!(exchange_detuning_approx(&params(20.0, 0.0, 10.0)), 0.0);
    }

    #[test]
    fn detuning_approx_limit() {
        // t_c ≪ U − |Δ| reduces to t_c²/(U − |Δ|).
        let j = exchange_detuning_approx(&params(20.0, 0.1, 18.0));
        assert!(((j - 0.005) / 0.005).abs() < 0.01);
    }

    #[test]
    fn sop_approx_values() {
        let j = exchange_sop_approx(&params(20.0, 1.0, 0.0)).unwrap();
        assert!((j - exchange_exact(&params(20.0, 1.0, 0.0))).abs() < 1e-15);
        let j = exchange_sop_approx(&params(20.0, 0.1, 0.0)).unwrap();
        assert!(((j - 0.001) / 0.001).abs() < 1e-4);
        let a = exchange_sop_approx(&params(20.0, 1.0, 10.0)).unwrap();
        let b = exchange_sop_approx(&params(20.0, 1.0, -10.0)).unwrap();
        assert_eq!(a, b);
        assert!(exchange_sop_approx(&params(20.0, 1.0, 20.0)).is_err());
    }

    #[test]
    fn excited_state_correction() {
        let p = params(20.0, 1.0, 0.0).with_triplet(25.0, 1.0).unwrap();
        assert!((exchange_excited_corrected(&p) - 0.01).abs() < 1e-15);
        let p = params(20.0, 1.0, 0.0).with_triplet(25.0, 0.0).unwrap();
        assert!((exchange_excited_corrected(&p) - 0.05).abs() < 1e-15);
        let p = params(20.0, 1.0, 0.0).with_triplet(20.0, 1.0).unwrap();
        assert_eq!(exchange_excited_corrected(&p), 0.0);
    }

    #[test]
    fn derivative_examples() {
        assert!(dj_ddelta(&params(20.0, 1.0, 0.0)).abs() < 1e-8);
        // Close to the anti-crossing |dJ/dΔ| approaches J²/t².
        let p = params(20.0, 0.01, 19.8);
        let j = exchange_exact(&p);
        let asym = j * j / (0.01 * 0.01);
        assert!(((dj_ddelta(&p) - asym) / asym).abs() < 0.03);
        let a = dj_ddelta(&params(20.0, 0.7, 6.0));
        let b = dj_ddelta(&params(20.0, 0.7, -6.0));
        assert!((a + b).abs() < 1e-9);
    }

    #[test]
    fn detuning_approx_close_to_anticrossing() {
        for i in 0..=4 {
            let d = 18.4 + i as f64 * 0.15;
            for t in [0.1, 0.5, 1.0] {
                let p = params(20.0, t, d);
                let exact = exchange_exact(&p);
                let rel = (exchange_detuning_approx(&p) - exact).abs() / exact;
                assert!(rel < 0.05, "Δ={d} t={t}: {rel}");
            }
        }
    }

    proptest! {
        #[test]
        fn exact_matches_brute_force(u in 1.0f64..100.0, tr in 0.0f64..0.3, dr in -1.5f64..1.5) {
            let (t, d) = (tr * u, dr * u);
            let j = exchange_exact(&params(u, t, d));
            let o = oracle_exchange(u, t, d);
            prop_assert!((j - o).abs() <= 1e-11 * u);
        }

        #[test]
        fn mirror_symmetric(u in 1.0f64..50.0, tr in 0.0f64..0.2, dr in 0.0f64..0.99) {
            let (t, d) = (tr * u, dr * u);
            let a = exchange_exact(&params(u, t, d));
            let b = exchange_exact(&params(u, t, -d));
            prop_assert!((a - b).abs() <= 1e-13 * u);
        }

        #[test]
        fn monotone_in_tunnel_coupling(u in 1.0f64..50.0, tr in 0.001f64..0.2, dr in -0.95f64..0.95) {
            let (t, d) = (tr * u, dr * u);
            let j = exchange_exact(&params(u, t, d));
            prop_assert!(j > 0.0);
            let h = 1e-4 * t;
            let djdt = (exchange_exact(&params(u, t + h, d)) - exchange_exact(&params(u, t - h, d))) / (2.0 * h);
            prop_assert!(djdt > 0.0);
            prop_assert!(exchange_exact(&params(u, 1.1 * t, d)) > j);
        }

        #[test]
        fn non_decreasing_in_abs_detuning(u in 1.0f64..50.0, tr in 0.0f64..0.2, d1 in 0.0f64..0.95, d2 in 0.0f64..0.95) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let t = tr * u;
            let a = exchange_exact(&params(u, t, lo * u));
            let b = exchange_exact(&params(u, t, -hi * u));
            prop_assert!(b >= a - 1e-13 * u);
        }

        #[test]
        fn sop_formula_is_exact_at_zero_detuning(u in 1.0f64..100.0, tr in 0.0f64..1.0) {
            let p = params(u, tr * u, 0.0);
            let a = exchange_sop_approx(&p).unwrap();
            let b = exchange_exact(&p);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn derivative_odd(u in 1.0f64..50.0, tr in 0.01f64..0.2, dr in 0.0f64..0.9) {
            let p = params(u, tr * u, dr * u);
            let a = dj_ddelta(&p);
            let b = dj_ddelta(&p.with_delta(-p.delta));
            prop_assert!((a + b).abs() <= 1e-6 * a.abs().max(1e-3));
        }
    }
}
