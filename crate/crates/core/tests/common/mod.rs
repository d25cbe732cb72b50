//! Reference implementations used as oracles by the integration tests. None of
//! them share code with the library routines they check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plate_channel::channel::random_config;
use plate_channel::ValidatedConfig;

pub type C = Complex64;
pub type CMat = DMatrix<C>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random configurations in the standard test domain: up to 16 plates,
/// gaps in [0.5, 10], flows in [-1, 1].
pub fn battery(seed: u64, count: usize) -> Vec<ValidatedConfig> {
    let mut r = rng(seed);
    (0..count).map(|_| random_config(&mut r, 16, (0.5, 10.0), (-1.0, 1.0))).collect()
}

/// 401 points on [-50, 50] with k = 0 removed.
pub fn symmetric_k_grid() -> Vec<f64> {
    (0..=400).map(|i| -50.0 + 0.25 * i as f64).filter(|&k| k != 0.0).collect()
}

pub fn zero_flows(c: &ValidatedConfig) -> ValidatedConfig {
    c.with_flows(vec![0.0; c.n() + 1]).unwrap()
}

pub fn random_k(r: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let k = r.random_range(lo..hi);
    if r.random_bool(0.5) {
        k
    } else {
        -k
    }
}

/// A(k) entry by entry from the closed form, with no cutoffs.
pub fn direct_a(c: &ValidatedConfig, k: f64) -> DMatrix<f64> {
    let n = c.n();
    let d = c.gaps();
    let coth = |x: f64| 1.0 / x.tanh();
    let csch = |x: f64| 1.0 / x.sinh();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (k + coth(k * d[i]) + coth(k * d[i + 1])) / k
        } else if j == i + 1 {
            -csch(k * d[i + 1]) / k
        } else if i == j + 1 {
            -csch(k * d[j + 1]) / k
        } else {
            0.0
        }
    })
}

/// Eigenvalues of a symmetric tridiagonal matrix by Sturm-sequence bisection, ascending.
pub fn sturm_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let count_below = |x: f64| {
        let mut cnt = 0;
        let mut q = 1.0f64;
        for i in 0..n {
            let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
            q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (diag[i].abs() + 1.0);
            }
            if q < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (0..n)
        .map(|j| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if count_below(m) > j {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Characteristic polynomial coefficients `c[0] + c[1] x + ... + x^n` of a
/// square matrix by the Faddeev-LeVerrier recursion.
pub fn faddeev_leverrier(m: &CMat) -> Vec<C> {
    let n = m.nrows();
    let mut coeffs = vec![C::new(0.0, 0.0); n + 1];
    coeffs[n] = C::new(1.0, 0.0);
    let id = CMat::identity(n, n);
    let mut mk = CMat::zeros(n, n);
    for k in 1..=n {
        mk = m * &mk + &id * coeffs[n - k + 1];
        let amk = m * &mk;
        coeffs[n - k] = -amk.trace() / k as f64;
    }
    coeffs
}

/// Roots of a monic polynomial by Durand-Kerner iteration.
pub fn durand_kerner(coeffs: &[C]) -> Vec<C> {
    let n = coeffs.len() - 1;
    let eval = |z: C| coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c);
    let radius = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = C::from_polar(1.0, 0.4);
    let mut z: Vec<C> = (0..n).map(|j| seed.powu(j as u32) * radius * 0.5).collect();
    for _ in 0..5000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut den = C::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            change = change.max(step.norm() / z[i].norm().max(1e-300));
        }
        if change < 1e-15 {
            break;
        }
    }
    z
}

/// Matches every value in `a` to the nearest unused value in `b`; returns
/// the worst distance relative to `scale`.
pub fn match_sets(a: &[C], b: &[C], scale: f64) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d / scale);
    }
    worst
}

/// Dormand-Prince 5(4) integration of `x' = M x` from 0 to `t`.
pub fn rk45(m: &CMat, x0: &DVector<C>, t: f64, rtol: f64, atol: f64) -> DVector<C> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut x = x0.clone();
    let mut s = 0.0;
    if t == 0.0 {
        return x;
    }
    let mnorm = m.iter().map(|z| z.norm()).fold(0.0, f64::max) * m.nrows() as f64;
    let mut h = (0.01 / mnorm.max(1e-3)).min(t);
    while s < t {
        if s + h > t {
            h = t - s;
        }
        let mut k: Vec<DVector<C>> = Vec::with_capacity(7);
        k.push(m * &x);
        for i in 0..6 {
            let mut y = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[i][j] != 0.0 {
                    y += kj * C::new(h * A[i][j], 0.0);
                }
            }
            k.push(m * &y);
        }
        let mut x5 = x.clone();
        let mut err = DVector::<C>::zeros(x.len());
        for i in 0..7 {
            x5 += &k[i] * C::new(h * B5[i], 0.0);
            err += &k[i] * C::new(h * (B5[i] - B4[i]), 0.0);
        }
        let e = (0..x.len())
            .map(|i| err[i].norm() / (atol + rtol * x[i].norm().max(x5[i].norm())))
            .fold(0.0, f64::max);
        if e <= 1.0 {
            s += h;
            x = x5;
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    x
}

/// `exp(t M)` column by column with [`rk45`].
pub fn rk45_exponential(m: &CMat, t: f64) -> CMat {
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::<C>::zeros(n);
        e[j] = C::new(1.0, 0.0);
        out.set_column(j, &rk45(m, &e, t, 1e-12, 1e-14));
    }
    out
}

/// Smallest singular value as the square root of the smallest eigenvalue of `M^H M`.
pub fn sigma_min_hermitian(m: &CMat) -> f64 {
    let h = m.adjoint() * m;
    let e = nalgebra::SymmetricEigen::new(h);
    e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
