//! Matrix exponential by scaling and squaring with the [13/13] Padé approximant.

use num_complex::Complex64;

use super::{eig::balance, norm1, CMat};
use crate::error::{Error, Result};

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled [13/13] approximant reaches unit roundoff.
const THETA13: f64 = 5.371920351148152;

fn axpy_identity(m: &mut CMat, c: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += Complex64::new(c, 0.0);
    }
}

fn lin3(a: &CMat, x: f64, b: &CMat, y: f64, c: &CMat, z: f64) -> CMat {
    a * Complex64::new(x, 0.0) + b * Complex64::new(y, 0.0) + c * Complex64::new(z, 0.0)
}

fn pade13(a: &CMat) -> Result<CMat> {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let mut inner_u = &a6 * lin3(&a6, b[13], &a4, b[11], &a2, b[9]) + lin3(&a6, b[7], &a4, b[5], &a2, b[3]);
    axpy_identity(&mut inner_u, b[1]);
    let u = a * inner_u;
    let mut v = &a6 * lin3(&a6, b[12], &a4, b[10], &a2, b[8]) + lin3(&a6, b[6], &a4, b[4], &a2, b[2]);
    axpy_identity(&mut v, b[0]);
    let p = &v + &u;
    let q = &v - &u;
    q.lu().solve(&p).ok_or(Error::Overflow)
}

fn is_finite(m: &CMat) -> bool {
    m.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// `exp(a)`.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if !is_finite(a) {
        return Err(Error::Overflow);
    }
    if n == 0 {
        return Ok(a.clone());
    }
    let mut work = a.clone();
    let mut d = balance(&mut work);
    if norm1(&work) >= norm1(a) {
        work = a.clone();
        d = vec![1.0; n];
    }
    let nrm = norm1(&work);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    if s > 1000 {
        return Err(Error::Overflow);
    }
    let scaled = &work * Complex64::new(2f64.powi(-s), 0.0);
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
        if !is_finite(&r) {
            return Err(Error::Overflow);
        }
    }
    // undo D^-1 A D
    let out = CMat::from_fn(n, n, |i, j| r[(i, j)] * (d[i] / d[j]));
    if !is_finite(&out) {
        return Err(Error::Overflow);
    }
    Ok(out)
}

/// `exp(t m)`.
pub fn matrix_exponential(m: &CMat, t: f64) -> Result<CMat> {
    expm(&(m * Complex64::new(t, 0.0)))
}
