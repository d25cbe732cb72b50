//! Singular values by one-sided (Hestenes) Jacobi rotations.

use num_complex::Complex64;

use super::CMat;

/// Singular values in decreasing order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    // work on the orientation with fewer columns
    let mut w = if a.ncols() > a.nrows() { a.adjoint() } else { a.clone() };
    let (m, n) = (w.nrows(), w.ncols());
    let eps = f64::EPSILON;
    let mut norms: Vec<f64> = (0..n).map(|j| w.column(j).norm_squared()).collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut gamma = Complex64::new(0.0, 0.0);
                for r in 0..m {
                    gamma += w[(r, p)].conj() * w[(r, q)];
                }
                let (alpha, beta) = (norms[p], norms[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let ph = phase.conj();
                for r in 0..m {
                    let x = w[(r, p)];
                    let y = w[(r, q)] * ph;
                    w[(r, p)] = x * c - y * s;
                    w[(r, q)] = x * s + y * c;
                }
                norms[p] = w.column(p).norm_squared();
                norms[q] = w.column(q).norm_squared();
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value of a square matrix.
pub fn smallest_singular_value(a: &CMat) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}
