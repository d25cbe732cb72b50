//! Dense complex eigensolver: balancing, Householder reduction to Hessenberg
//! form, shifted QR to Schur form, eigenvectors by back-substitution.

use num_complex::Complex64;

use super::{cabs1, matrix_hash, CMat};
use crate::error::{Error, Result};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Diagonal similarity `D^-1 A D` with power-of-two entries in `D`.
pub(crate) fn balance(a: &mut CMat) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    let n = a.nrows();
    let mut d = vec![1.0; n];
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += cabs1(a[(j, i)]);
                    r += cabs1(a[(i, j)]);
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= SQRDX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= SQRDX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                    a[(j, i)] *= f;
                }
                d[i] *= f;
            }
        }
    }
    d
}

/// Reduces `h` to upper Hessenberg form in place; accumulates the unitary factor into `q`.
fn hessenberg(h: &mut CMat, q: &mut CMat) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let mut v = vec![C0; n];
    for j in 0..n - 2 {
        let mut norm = 0.0;
        for i in j + 1..n {
            norm += h[(i, j)].norm_sqr();
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(j + 1, j)];
        let phase = if x0.norm() == 0.0 { C1 } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in 0..n {
            v[i] = if i > j { h[(i, j)] } else { C0 };
        }
        v[j + 1] -= alpha;
        let vn = v[j + 1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for z in &mut v[j + 1..] {
            *z /= vn;
        }
        // H <- (I - 2 v v^H) H
        for c in 0..n {
            let mut s = C0;
            for i in j + 1..n {
                s += v[i].conj() * h[(i, c)];
            }
            let s = s * 2.0;
            for i in j + 1..n {
                h[(i, c)] -= v[i] * s;
            }
        }
        // H <- H (I - 2 v v^H), Q <- Q (I - 2 v v^H)
        for m in [&mut *h, &mut *q] {
            for r in 0..n {
                let mut s = C0;
                for i in j + 1..n {
                    s += m[(r, i)] * v[i];
                }
                let s = s * 2.0;
                for i in j + 1..n {
                    m[(r, i)] -= s * v[i].conj();
                }
            }
        }
        h[(j + 1, j)] = alpha;
        for i in j + 2..n {
            h[(i, j)] = C0;
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` with real `c` mapping `(x, y)` to `(r, 0)`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, C0);
    }
    if ax == 0.0 {
        return (0.0, y.conj() / ay);
    }
    let nrm = ax.hypot(ay);
    let c = ax / nrm;
    let s = (x / ax) * y.conj() / nrm;
    (c, s)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let l1 = mid + disc;
    let l2 = mid - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Upper triangular Schur form `T = Z^H H Z` of a Hessenberg matrix.
fn schur(h: &mut CMat, z: &mut CMat, hash: u64) -> Result<()> {
    let n = h.nrows();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let hnorm = h.iter().fold(0.0f64, |m, v| m.max(cabs1(*v)));
    let small = f64::MIN_POSITIVE * (n as f64 / eps);
    let max_iter = 30 * n.max(10);
    let mut total = 0usize;
    let mut hi = n - 1;
    let mut its = 0usize;
    let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(n);

    while hi > 0 {
        // find the active window [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = cabs1(h[(lo, lo - 1)]);
            let mut tst = cabs1(h[(lo - 1, lo - 1)]) + cabs1(h[(lo, lo)]);
            if tst == 0.0 {
                tst = hnorm;
            }
            if sub <= small.max(eps * tst) {
                h[(lo, lo - 1)] = C0;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            its = 0;
            continue;
        }
        total += 1;
        its += 1;
        if total > max_iter {
            return Err(Error::NoConvergence { hash });
        }

        let sigma = if its.is_multiple_of(10) {
            // exceptional shift to break cycles
            h[(hi, hi)] + cabs1(h[(hi, hi - 1)]) * 0.75
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        for i in lo..=hi {
            h[(i, i)] -= sigma;
        }
        rot.clear();
        for i in lo..hi {
            let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
            for col in i..n {
                let x = h[(i, col)];
                let y = h[(i + 1, col)];
                h[(i, col)] = x * c + s * y;
                h[(i + 1, col)] = -s.conj() * x + y * c;
            }
            h[(i + 1, i)] = C0;
            rot.push((c, s));
        }
        for (off, &(c, s)) in rot.iter().enumerate() {
            let i = lo + off;
            let top = (i + 2).min(hi + 1);
            for r in 0..top {
                let x = h[(r, i)];
                let y = h[(r, i + 1)];
                h[(r, i)] = x * c + y * s.conj();
                h[(r, i + 1)] = -s * x + y * c;
            }
            for r in 0..n {
                let x = z[(r, i)];
                let y = z[(r, i + 1)];
                z[(r, i)] = x * c + y * s.conj();
                z[(r, i + 1)] = -s * x + y * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += sigma;
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = C0;
        }
    }
    Ok(())
}

/// Eigenvectors of an upper triangular `t`, as columns.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    let n = t.nrows();
    let tnorm = t.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let smin = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        y[(k, k)] = C1;
        for j in (0..k).rev() {
            let mut s = C0;
            for l in j + 1..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < smin {
                den = Complex64::new(smin, 0.0);
            }
            y[(j, k)] = -s / den;
            if y[(j, k)].norm() > 1e100 {
                for l in j..=k {
                    y[(l, k)] *= 1e-100;
                }
            }
        }
    }
    y
}

pub(crate) struct Decomposition {
    pub values: Vec<Complex64>,
    pub vectors: Option<CMat>,
}

pub(crate) fn decompose(a: &CMat, want_vectors: bool) -> Result<Decomposition> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigenproblem needs a square matrix");
    let hash = matrix_hash(a);
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NoConvergence { hash });
    }
    let mut h = a.clone();
    let d = balance(&mut h);
    let mut z = CMat::identity(n, n);
    hessenberg(&mut h, &mut z);
    schur(&mut h, &mut z, hash)?;
    let values: Vec<Complex64> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = if want_vectors {
        let y = triangular_eigenvectors(&h);
        let mut v = &z * y;
        for (i, mut row) in v.row_iter_mut().enumerate() {
            row *= Complex64::new(d[i], 0.0);
        }
        for mut col in v.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= Complex64::new(nrm, 0.0);
            }
        }
        Some(v)
    } else {
        None
    };
    Ok(Decomposition { values, vectors })
}
