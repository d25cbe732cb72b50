//! Dense complex kernels for the small 2n x 2n generators.

mod eig;
mod expm;
mod svd;

use std::hash::{DefaultHasher, Hash, Hasher};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use expm::{expm, matrix_exponential};
pub use svd::{singular_values, smallest_singular_value};

pub type CMat = DMatrix<Complex64>;

pub(crate) fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

pub(crate) fn matrix_hash(a: &CMat) -> u64 {
    let mut h = DefaultHasher::new();
    a.nrows().hash(&mut h);
    for v in a.iter() {
        v.re.to_bits().hash(&mut h);
        v.im.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Orders by real part, then imaginary part.
pub fn sort_eigenvalues(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn norm_fro(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// All eigenvalues, sorted by (re, im).
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let mut v = eig::decompose(m, false)?.values;
    sort_eigenvalues(&mut v);
    Ok(v)
}

/// Eigenvalues with unit-norm eigenvectors as the matching columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: CMat,
}

impl Eigen {
    pub fn abscissa(&self) -> f64 {
        abscissa(&self.values)
    }

    /// `max_j ||M v_j - lambda_j v_j||`.
    pub fn max_residual(&self, m: &CMat) -> f64 {
        let mv = m * &self.vectors;
        (0..self.values.len())
            .map(|j| (mv.column(j) - self.vectors.column(j) * self.values[j]).norm())
            .fold(0.0, f64::max)
    }
}

pub fn eigen(m: &CMat) -> Result<Eigen> {
    let d = eig::decompose(m, true)?;
    let vecs = d.vectors.expect("vectors requested");
    let mut idx: Vec<usize> = (0..d.values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (d.values[a], d.values[b]);
        x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
    });
    let values = idx.iter().map(|&i| d.values[i]).collect();
    let vectors = CMat::from_fn(vecs.nrows(), idx.len(), |r, c| vecs[(r, idx[c])]);
    Ok(Eigen { values, vectors })
}

pub fn abscissa(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Spectrum of a generator at one wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub k: f64,
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
}

impl SpectrumSample {
    pub fn new(k: f64, m: &CMat) -> Result<Self> {
        let eigenvalues = eigenvalues(m).map_err(|e| e.at_k(k))?;
        let abscissa = abscissa(&eigenvalues);
        Ok(Self { k, eigenvalues, abscissa })
    }

    pub fn trace_real(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).sum()
    }

    pub fn max_abs_real(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
    }
}

/// Smallest pairwise distance between eigenvalues.
pub fn min_eigenvalue_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Condition number of the eigenvector matrix, columns scaled to unit length.
pub fn eigvec_condition(m: &CMat) -> Result<f64> {
    let e = eigen(m)?;
    let gap = min_eigenvalue_gap(&e.values);
    let scale = norm2(m);
    if gap < 1e-8 * scale {
        return Err(Error::DefectiveMatrix { gap });
    }
    let s = singular_values(&e.vectors);
    let (hi, lo) = (s[0], s[s.len() - 1]);
    if lo == 0.0 {
        return Err(Error::DefectiveMatrix { gap });
    }
    Ok((hi / lo).max(1.0))
}
