//! Tridiagonal coupling matrices A, B, C and the per-mode generator M(k).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ValidatedConfig;
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Below this value of |k| * min(gap) the generator is built from the rescaled system.
pub const SMALL_K_THRESHOLD: f64 = 1e-4;
/// Above this argument coth and csch are replaced by their limits.
pub const HYPERBOLIC_CUTOFF: f64 = 40.0;

const SERIES_CUTOFF: f64 = 1e-3;

pub fn coth(x: f64) -> f64 {
    if x.abs() > HYPERBOLIC_CUTOFF {
        x.signum()
    } else {
        1.0 / x.tanh()
    }
}

pub fn csch(x: f64) -> f64 {
    if x.abs() > HYPERBOLIC_CUTOFF {
        0.0
    } else {
        1.0 / x.sinh()
    }
}

/// `x * coth(x)`, analytic through x = 0.
pub fn xcoth(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 + x2 * (1.0 / 3.0 - x2 * (1.0 / 45.0 - x2 * 2.0 / 945.0))
    } else {
        x * coth(x)
    }
}

/// `x * csch(x)`, analytic through x = 0.
pub fn xcsch(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 * (1.0 / 6.0 - x2 * (7.0 / 360.0 - x2 * 31.0 / 15120.0))
    } else {
        x * csch(x)
    }
}

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TriSym {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl TriSym {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "TriSym needs order >= 1");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal must have n - 1 entries");
        Self { diag, off }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n.saturating_sub(1)])
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![1.0; n], vec![0.0; n.saturating_sub(1)])
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    pub fn off_mut(&mut self) -> &mut [f64] {
        &mut self.off
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    /// `a * self + b * other + c * I`.
    pub fn combine(&self, a: f64, other: &TriSym, b: f64, c: f64) -> TriSym {
        assert_eq!(self.n(), other.n());
        TriSym {
            diag: self.diag.iter().zip(&other.diag).map(|(x, y)| a * x + b * y + c).collect(),
            off: self.off.iter().zip(&other.off).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// `s * self + c * I`.
    pub fn affine(&self, s: f64, c: f64) -> TriSym {
        TriSym {
            diag: self.diag.iter().map(|x| s * x + c).collect(),
            off: self.off.iter().map(|x| s * x).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> TriSym {
        TriSym {
            diag: self.diag.iter().map(|x| x * s).collect(),
            off: self.off.iter().map(|x| x * s).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Determinant by the three-term recurrence.
    pub fn determinant(&self) -> f64 {
        let mut prev = 1.0;
        let mut cur = self.diag[0];
        for i in 1..self.n() {
            let next = self.diag[i] * cur - self.off[i - 1] * self.off[i - 1] * prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Cholesky factor `L` (lower bidiagonal), or `None` if not positive definite.
    pub fn cholesky(&self) -> Option<TriCholesky> {
        let n = self.n();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut p = self.diag[i];
            if i > 0 {
                l[i - 1] = self.off[i - 1] / d[i - 1];
                p -= l[i - 1] * l[i - 1];
            }
            if !(p > 0.0) || !p.is_finite() {
                return None;
            }
            d[i] = p.sqrt();
        }
        Some(TriCholesky { d, l })
    }
}

/// `A = L L^T` with `L` lower bidiagonal: diagonal `d`, subdiagonal `l`.
#[derive(Debug, Clone)]
pub struct TriCholesky {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TriCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n {
            if i > 0 {
                x[i] -= self.l[i - 1] * x[i - 1];
            }
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                x[i] -= self.l[i] * x[i + 1];
            }
            x[i] /= self.d[i];
        }
    }

    /// Solves `A X = rhs` column by column.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = rhs.clone();
        for mut col in out.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        out
    }
}

/// A, B, C at a nonzero wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrices {
    pub k: f64,
    pub a: TriSym,
    pub b: TriSym,
    pub c: TriSym,
}

/// Fills A, B, C given, for plate `p`, the coth-type factor of the gap below,
/// the coth-type factor of the gap above and the csch-type factor of the gap above.
/// Plate `p` (0-based) sits on gap `p` and under gap `p + 1`.
fn assemble(
    n: usize,
    flows: &[f64],
    factors: impl Fn(usize) -> (f64, f64, f64),
    shift: f64,
    scale_a: f64,
) -> (TriSym, TriSym, TriSym) {
    let mut a = TriSym::zeros(n);
    let mut b = TriSym::zeros(n);
    let mut c = TriSym::zeros(n);
    for p in 0..n {
        let (cb, ca, sa) = factors(p);
        let (ub, ua) = (flows[p], flows[p + 1]);
        a.diag[p] = (shift + cb + ca) * scale_a;
        b.diag[p] = ub * ub * cb + ua * ua * ca;
        c.diag[p] = ub * cb + ua * ca;
        if p + 1 < n {
            a.off[p] = -sa * scale_a;
            b.off[p] = -ua * ua * sa;
            c.off[p] = -ua * sa;
        }
    }
    (a, b, c)
}

/// A(k), B(k), C(k) from their closed forms. Fails for k = 0.
pub fn build_abc(config: &ValidatedConfig, k: f64) -> Result<SpectralMatrices> {
    if k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let g = config.gaps();
    let (a, b, c) = assemble(
        config.n(),
        config.flows(),
        |p| (coth(k * g[p]), coth(k * g[p + 1]), csch(k * g[p + 1])),
        k,
        1.0 / k,
    );
    Ok(SpectralMatrices { k, a, b, c })
}

/// The rescaled triple (k^2 A, k B, k C), finite and analytic at k = 0.
pub fn build_rescaled(config: &ValidatedConfig, k: f64) -> SpectralMatrices {
    let g = config.gaps();
    let (a, b, c) = assemble(
        config.n(),
        config.flows(),
        |p| {
            (
                xcoth(k * g[p]) / g[p],
                xcoth(k * g[p + 1]) / g[p + 1],
                xcsch(k * g[p + 1]) / g[p + 1],
            )
        },
        0.0,
        1.0,
    );
    let a = a.affine(1.0, k * k);
    SpectralMatrices { k, a, b, c }
}

/// The 2n x 2n generator M(k) of the per-mode evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub k: f64,
    pub m: CMat,
}

impl GeneratorMatrix {
    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    /// Assembles `[[0, I], [ll, lr]]`.
    pub fn from_blocks(k: f64, ll: &DMatrix<f64>, lr: &CMat) -> Self {
        let n = ll.nrows();
        let mut m = CMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, n + i)] = Complex64::new(1.0, 0.0);
            for j in 0..n {
                m[(n + i, j)] = Complex64::new(ll[(i, j)], 0.0);
                m[(n + i, n + j)] = lr[(i, j)];
            }
        }
        Self { k, m }
    }

    /// `i k V I + M`, the generator seen along the ray x = V t.
    pub fn shifted(&self, v: f64) -> CMat {
        let mut g = self.m.clone();
        let s = Complex64::new(0.0, self.k * v);
        for i in 0..g.nrows() {
            g[(i, i)] += s;
        }
        g
    }
}

/// Generator from an explicit (A, B, C) triple via Cholesky solves against A.
pub fn generator_from_matrices(sm: &SpectralMatrices) -> Result<GeneratorMatrix> {
    let k = sm.k;
    let n = sm.a.n();
    let chol = sm.a.cholesky().ok_or(Error::SolveFailure { k })?;
    let rhs = sm.b.affine(k, -k.powi(4)).to_dense();
    let ll = chol.solve(&rhs);
    let y = chol.solve(&sm.c.to_dense());
    let lr = y.map(|v| Complex64::new(0.0, -2.0 * v));
    debug_assert_eq!(ll.nrows(), n);
    Ok(GeneratorMatrix::from_blocks(k, &ll, &lr))
}

/// Generator from a rescaled triple (k^2 A, k B, k C); valid at k = 0.
pub fn generator_from_rescaled(sm: &SpectralMatrices) -> Result<GeneratorMatrix> {
    let k = sm.k;
    let chol = sm.a.cholesky().ok_or(Error::SolveFailure { k })?;
    let k2 = k * k;
    let rhs = sm.b.affine(1.0, -k.powi(4)).to_dense();
    let ll = chol.solve(&rhs) * k2;
    let y = chol.solve(&sm.c.to_dense());
    let lr = y.map(|v| Complex64::new(0.0, -2.0 * k * v));
    Ok(GeneratorMatrix::from_blocks(k, &ll, &lr))
}

/// M(k) for any real k, switching to the rescaled system near k = 0.
pub fn build_generator(config: &ValidatedConfig, k: f64) -> Result<GeneratorMatrix> {
    if k.abs() * config.min_gap() < SMALL_K_THRESHOLD {
        generator_from_rescaled(&build_rescaled(config, k))
    } else {
        generator_from_matrices(&build_abc(config, k)?)
    }
}

/// `det(mu^2 A + 2 mu C + k B - k^4 I)`.
///
/// This equals `(-1)^n det(A) det(i mu I - M)`; the constant is not divided out.
pub fn char_poly_eval(sm: &SpectralMatrices, mu: f64) -> Complex64 {
    let k = sm.k;
    let q = sm.a.combine(mu * mu, &sm.c, 2.0 * mu, -k.powi(4));
    let q = q.combine(1.0, &sm.b, k, 0.0);
    Complex64::new(q.determinant(), 0.0)
}

/// Leading-order large-|k| generator with A -> I and B, C replaced by their diagonal limits.
pub fn asymptotic_generator(config: &ValidatedConfig, k: f64) -> Result<GeneratorMatrix> {
    let kh = k.abs() * config.min_gap();
    if kh <= 1.0 {
        return Err(Error::OutOfAsymptoticRange { kh });
    }
    let n = config.n();
    let u = config.flows();
    let mut ll = DMatrix::zeros(n, n);
    let mut lr = CMat::zeros(n, n);
    for p in 0..n {
        let b = u[p] * u[p] + u[p + 1] * u[p + 1];
        let c = k.signum() * (u[p] + u[p + 1]);
        ll[(p, p)] = k.abs() * b - k.powi(4);
        lr[(p, p)] = Complex64::new(0.0, -2.0 * c);
    }
    Ok(GeneratorMatrix::from_blocks(k, &ll, &lr))
}

/// Generator with the inter-plate coupling removed: each plate sees only
/// the diagonal entries of A, B, C. The coupling it drops is exponentially
/// small in |k| min(gap).
pub fn decoupled_generator(config: &ValidatedConfig, k: f64) -> Result<GeneratorMatrix> {
    let sm = build_abc(config, k)?;
    let n = config.n();
    let strip = |t: &TriSym| TriSym::new(t.diag().to_vec(), vec![0.0; n - 1]);
    generator_from_matrices(&SpectralMatrices {
        k,
        a: strip(&sm.a),
        b: strip(&sm.b),
        c: strip(&sm.c),
    })
}
