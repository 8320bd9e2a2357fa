use crate::error::{Error, Result};

/// Bisection for a root of `f` in `[lo, hi]`; the endpoints must bracket a sign
/// change. Stops when `done(x, f(x))` holds or the bracket collapses.
pub fn bisect<F, D>(f: F, mut lo: f64, mut hi: f64, done: D, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64, f64) -> bool,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Unreachable { op: "bisect", reason: format!("no sign change on [{lo}, {hi}]") });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 || done(mid, f_mid) || mid == lo || mid == hi {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NotConverged {
        op: "bisect",
        iterations: max_iter,
        residual: (hi - lo).abs(),
        best: vec![0.5 * (lo + hi)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect(|x| Ok(x * x - 2.0), 0.0, 2.0, |_, fx| fx.abs() < 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbracketed_interval() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, |_, _| false, 10).is_err());
    }
}
