//! Closed-form eigenvalues of a real symmetric 3×3 matrix.

use std::f64::consts::PI;

/// Eigenvalues of a real symmetric 3×3 matrix, ascending.
///
/// Uses the trigonometric solution of the characteristic cubic, then polishes
/// every root with Newton steps on the characteristic polynomial so that
/// eigenvalues much smaller than the matrix norm keep full relative accuracy.
pub fn symmetric_eigenvalues_3x3(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let mut eig = if p1 == 0.0 {
        [m[0][0], m[1][1], m[2][2]]
    } else {
        let d0 = m[0][0] - q;
        let d1 = m[1][1] - q;
        let d2 = m[2][2] - q;
        let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        // B = (A - qI)/p, r = det(B)/2
        let b = [
            [d0 / p, m[0][1] / p, m[0][2] / p],
            [m[0][1] / p, d1 / p, m[1][2] / p],
            [m[0][2] / p, m[1][2] / p, d2 / p],
        ];
        let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[1][2])
            - b[0][1] * (b[0][1] * b[2][2] - b[1][2] * b[0][2])
            + b[0][2] * (b[0][1] * b[1][2] - b[1][1] * b[0][2]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
        let mid = 3.0 * q - hi - lo;
        [lo, mid, hi]
    };
    if p1 != 0.0 {
        for e in eig.iter_mut() {
            *e = polish(m, *e);
        }
    }
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}

/// Newton refinement of a root of det(M - λI), accepting a step only while it
/// reduces the residual.
fn polish(m: &[[f64; 3]; 3], mut lambda: f64) -> f64 {
    let mut best = char_poly(m, lambda).0.abs();
    for _ in 0..4 {
        let (f, df) = char_poly(m, lambda);
        if f == 0.0 || df == 0.0 {
            break;
        }
        let next = lambda - f / df;
        let r = char_poly(m, next).0.abs();
        if r < best {
            best = r;
            lambda = next;
        } else {
            break;
        }
    }
    lambda
}

/// det(M - λI) and its derivative in λ, expanded around the diagonal shifts.
fn char_poly(m: &[[f64; 3]; 3], lambda: f64) -> (f64, f64) {
    let a = m[0][0] - lambda;
    let b = m[1][1] - lambda;
    let c = m[2][2] - lambda;
    let (x, y, z) = (m[0][1], m[0][2], m[1][2]);
    let f = a * b * c + 2.0 * x * y * z - a * z * z - b * y * y - c * x * x;
    let df = -(b * c + a * c + a * b) + z * z + y * y + x * x;
    (f, df)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn oracle(m: &[[f64; 3]; 3]) -> [f64; 3] {
        let mat = Matrix3::from_fn(|i, j| m[i][j]);
        let mut e: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        [e[0], e[1], e[2]]
    }

    #[test]
    fn diagonal_matrix_is_sorted() {
        let e = symmetric_eigenvalues_3x3(&[[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!(e, [-1.0, 2.0, 3.0]);
    }

    #[test]
    fn matches_nalgebra_on_hubbard_like_blocks() {
        for &(u, t, d) in &[(20.0, 1.0, 0.0), (20.0, 1.0, 10.0), (20.0, 0.1, 19.0), (5.0, 3.0, -2.0)] {
            let m = [[u + d, t, 0.0], [t, 0.0, t], [0.0, t, u - d]];
            let got = symmetric_eigenvalues_3x3(&m);
            let want = oracle(&m);
            for k in 0..3 {
                assert!((got[k] - want[k]).abs() < 1e-12 * u, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn small_eigenvalue_keeps_relative_accuracy() {
        // Ground state -2t²/U-ish, far below the matrix norm.
        let (u, t) = (20.0, 1e-3);
        let m = [[u, t, 0.0], [t, 0.0, t], [0.0, t, u]];
        let e = symmetric_eigenvalues_3x3(&m);
        let exact = -2.0 * t * t / ((2.0 * t * t + u * u / 4.0).sqrt() + u / 2.0);
        assert!(((e[0] - exact) / exact).abs() < 1e-10, "{} vs {}", e[0], exact);
    }
}
