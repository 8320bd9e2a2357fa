//! Fourier magnitude of Rabi traces and peak picking.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::TimeTrace;
use crate::error::Result;

/// Zero-padding factor applied before the transform.
const PAD: usize = 8;
/// Peaks below this fraction of the largest are ignored.
const REL_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FftSpectrum {
    /// GHz.
    pub frequencies: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Magnitudes at or below this are treated as numerical noise.
    pub floor: f64,
}

/// Magnitude spectrum after mean subtraction and a Hann window.
pub fn fft_spectrum(trace: &TimeTrace) -> Result<FftSpectrum> {
    let dt = trace.uniform_step()?;
    let n = trace.len();
    let mean = trace.p_singlet.iter().sum::<f64>() / n as f64;
    let m = (n * PAD).next_power_of_two();
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    let scale = trace.p_singlet.iter().fold(0.0f64, |a, p| a.max(p.abs())).max(1.0);
    for (k, p) in trace.p_singlet.iter().enumerate() {
        let w = if n > 1 { 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos() } else { 1.0 };
        buf[k] = Complex::new((p - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let df = 1.0 / (m as f64 * dt);
    let half = m / 2 + 1;
    Ok(FftSpectrum {
        frequencies: (0..half).map(|k| k as f64 * df).collect(),
        magnitude: buf[..half].iter().map(|c| c.norm()).collect(),
        floor: 1e-9 * n as f64 * scale,
    })
}

/// Up to `n` peak frequencies, strongest first, refined by a parabola
/// through the log-magnitude of the three bins around each local maximum.
pub fn peak_frequencies(spec: &FftSpectrum, n: usize) -> Vec<f64> {
    let m = &spec.magnitude;
    if m.len() < 3 {
        return Vec::new();
    }
    let top = m.iter().copied().fold(0.0, f64::max);
    let floor = spec.floor.max(REL_FLOOR * top);
    let mut peaks: Vec<(f64, f64)> = (1..m.len() - 1)
        .filter(|&k| m[k] > floor && m[k] > m[k - 1] && m[k] >= m[k + 1])
        .map(|k| {
            let (a, b, c) = (m[k - 1].ln(), m[k].ln(), m[k + 1].ln());
            let den = a - 2.0 * b + c;
            let d = if den.abs() > 0.0 && den.is_finite() { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 };
            let df = spec.frequencies[1] - spec.frequencies[0];
            (spec.frequencies[k] + d * df, m[k])
        })
        .collect();
    peaks.sort_by(|x, y| y.1.total_cmp(&x.1));
    peaks.into_iter().take(n).map(|p| p.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::time_grid;

    fn cosines(parts: &[(f64, f64)], t_max: f64, n: usize) -> TimeTrace {
        let t = time_grid(t_max, n);
        let p =
            t.iter().map(|&t| 0.625 + parts.iter().map(|(a, f)| a * (2.0 * PI * f * t).cos()).sum::<f64>()).collect();
        TimeTrace::new(t, p).unwrap()
    }

    #[test]
    fn single_tone_within_a_twentieth_bin() {
        let s = fft_spectrum(&cosines(&[(0.375, 0.1)], 2000.0, 4001)).unwrap();
        let f = peak_frequencies(&s, 3);
        assert_eq!(f.len(), 1, "{f:?}");
        assert!((f[0] - 0.1).abs() < 0.05 / 2000.0, "{}", f[0]);
    }

    #[test]
    fn two_tones_resolved() {
        let s = fft_spectrum(&cosines(&[(0.19, 0.05), (0.19, 0.06)], 2000.0, 4001)).unwrap();
        let mut f = peak_frequencies(&s, 2);
        f.sort_by(f64::total_cmp);
        assert!((f[0] - 0.05).abs() < 0.5 / 2000.0 && (f[1] - 0.06).abs() < 0.5 / 2000.0, "{f:?}");
    }

    #[test]
    fn constant_has_no_peaks() {
        let s = fft_spectrum(&cosines(&[], 2000.0, 4001)).unwrap();
        assert!(peak_frequencies(&s, 5).is_empty());
    }

    #[test]
    fn nonuniform_grid_rejected() {
        let t = TimeTrace::new(vec![0.0, 1.0, 3.0], vec![1.0, 0.5, 0.7]).unwrap();
        assert!(fft_spectrum(&t).is_err());
    }
}
