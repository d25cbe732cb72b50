//! Plates with m horizontal dimensions: P, Q, R for a vector wavenumber and
//! the matching generator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelConfig, ValidatedConfig};
use crate::error::{Error, Result};
use crate::linalg::{abscissa, eigenvalues, CMat};
use crate::spectral::{coth, csch, xcoth, xcsch, GeneratorMatrix, TriSym, SMALL_K_THRESHOLD};
use crate::stability::{geomspace, Verdict, ALPHA_TOL};

/// Heights as in the planar channel, with a horizontal flow vector per gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdChannelConfig {
    pub heights: Vec<f64>,
    pub flows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedNdConfig {
    geometry: ValidatedConfig,
    flows: Vec<Vec<f64>>,
    m: usize,
}

impl NdChannelConfig {
    pub fn new(heights: Vec<f64>, flows: Vec<Vec<f64>>) -> Self {
        Self { heights, flows }
    }

    /// Embeds a planar configuration with its flows along `direction`.
    pub fn from_planar(config: &ValidatedConfig, direction: &[f64]) -> Self {
        let flows = config.flows().iter().map(|u| direction.iter().map(|d| u * d).collect()).collect();
        Self { heights: config.heights().to_vec(), flows }
    }

    pub fn validate(&self) -> Result<ValidatedNdConfig> {
        let zero = vec![0.0; self.flows.len()];
        let geometry = ChannelConfig::new(self.heights.clone(), zero).validate()?;
        let m = self.flows.first().map_or(0, Vec::len);
        if m == 0 {
            return Err(Error::InvalidConfig("flow vectors need at least one component".into()));
        }
        if let Some(bad) = self.flows.iter().position(|u| u.len() != m) {
            return Err(Error::InvalidConfig(format!("flow {bad} has {} components, expected {m}", self.flows[bad].len())));
        }
        if self.flows.iter().flatten().any(|u| !u.is_finite()) {
            return Err(Error::InvalidConfig("flows must be finite".into()));
        }
        Ok(ValidatedNdConfig { geometry, flows: self.flows.clone(), m })
    }
}

impl ValidatedNdConfig {
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    pub fn gaps(&self) -> &[f64] {
        self.geometry.gaps()
    }

    pub fn min_gap(&self) -> f64 {
        self.geometry.min_gap()
    }

    pub fn flows(&self) -> &[Vec<f64>] {
        &self.flows
    }

    pub fn has_flow(&self) -> bool {
        self.flows.iter().flatten().any(|&u| u != 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdSpectralMatrices {
    pub k: Vec<f64>,
    pub p: TriSym,
    pub q: TriSym,
    pub r: TriSym,
}

fn check_k(config: &ValidatedNdConfig, k: &[f64]) -> Result<()> {
    if k.len() != config.m {
        return Err(Error::InvalidConfig(format!("wavevector has {} components, expected {}", k.len(), config.m)));
    }
    Ok(())
}

/// Fills P, Q, R from per-gap factors `(coth-type, csch-type)`, a diagonal
/// shift and a scale for P, and the projected flows `k . U_i` already divided
/// by the right power of |k|.
fn fill(n: usize, w: &[f64], factor: impl Fn(usize) -> (f64, f64), shift: f64, scale_p: f64) -> (TriSym, TriSym, TriSym) {
    let mut p = TriSym::zeros(n);
    let mut q = TriSym::zeros(n);
    let mut r = TriSym::zeros(n);
    for i in 0..n {
        let (cb, _) = factor(i);
        let (ca, sa) = factor(i + 1);
        p.diag_mut()[i] = (shift + cb + ca) * scale_p;
        q.diag_mut()[i] = w[i] * w[i] * cb + w[i + 1] * w[i + 1] * ca;
        r.diag_mut()[i] = w[i] * cb + w[i + 1] * ca;
        if i + 1 < n {
            p.off_mut()[i] = -sa * scale_p;
            q.off_mut()[i] = -w[i + 1] * w[i + 1] * sa;
            r.off_mut()[i] = -w[i + 1] * sa;
        }
    }
    (p, q, r)
}

/// P(k), Q(k), R(k) for a nonzero wavevector.
pub fn build_ndim(config: &ValidatedNdConfig, k: &[f64]) -> Result<NdSpectralMatrices> {
    check_k(config, k)?;
    let kn = norm(k);
    if kn == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    let g = config.gaps();
    // (k.U)^2 / |k| and (k.U) / |k| both come from w = (k.U) / sqrt|k| and (k.U) / |k|
    let proj: Vec<f64> = config.flows.iter().map(|u| dot(k, u)).collect();
    let wq: Vec<f64> = proj.iter().map(|x| x / kn.sqrt()).collect();
    let wr: Vec<f64> = proj.iter().map(|x| x / kn).collect();
    let factor = |i: usize| (coth(kn * g[i]), csch(kn * g[i]));
    let (p, q, _) = fill(config.n(), &wq, factor, kn, 1.0 / kn);
    let (_, _, r) = fill(config.n(), &wr, factor, kn, 1.0 / kn);
    Ok(NdSpectralMatrices { k: k.to_vec(), p, q, r })
}

/// `|k|^2 P`, `Q` and `|k| R`, finite as the wavevector shrinks.
fn build_rescaled(config: &ValidatedNdConfig, k: &[f64]) -> NdSpectralMatrices {
    let kn = norm(k);
    let g = config.gaps();
    let proj: Vec<f64> = if kn == 0.0 {
        vec![0.0; config.flows.len()]
    } else {
        config.flows.iter().map(|u| dot(k, u) / kn).collect()
    };
    // Q = (k.U)^2/|k| coth = (k.U/|k|)^2 xcoth / d; |k| R = (k.U/|k|) xcoth / d
    let factor = |i: usize| (xcoth(kn * g[i]) / g[i], xcsch(kn * g[i]) / g[i]);
    let (p, q, r) = fill(config.n(), &proj, factor, 0.0, 1.0);
    let p = p.affine(1.0, kn * kn);
    NdSpectralMatrices { k: k.to_vec(), p, q, r }
}

fn assemble(k: &[f64], ll: &DMatrix<f64>, lr: &CMat) -> GeneratorMatrix {
    GeneratorMatrix::from_blocks(norm(k), ll, lr)
}

/// Generator `N = [[0, I], [P^-1 (Q - |k|^4), -2i P^-1 R]]`.
///
/// The returned `k` field holds |k|.
pub fn ndim_generator(config: &ValidatedNdConfig, k: &[f64]) -> Result<GeneratorMatrix> {
    check_k(config, k)?;
    let kn = norm(k);
    let k4 = kn.powi(4);
    if kn * config.min_gap() < SMALL_K_THRESHOLD {
        let sm = build_rescaled(config, k);
        let chol = sm.p.cholesky().ok_or(Error::SolveFailure { k: kn })?;
        let ll = chol.solve(&sm.q.affine(1.0, -k4).to_dense()) * (kn * kn);
        let y = chol.solve(&sm.r.to_dense());
        let lr = y.map(|v| Complex64::new(0.0, -2.0 * kn * v));
        return Ok(assemble(k, &ll, &lr));
    }
    let sm = build_ndim(config, k)?;
    let chol = sm.p.cholesky().ok_or(Error::SolveFailure { k: kn })?;
    let ll = chol.solve(&sm.q.affine(1.0, -k4).to_dense());
    let y = chol.solve(&sm.r.to_dense());
    let lr = y.map(|v| Complex64::new(0.0, -2.0 * v));
    Ok(assemble(k, &ll, &lr))
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `count` unit vectors in R^m from a Halton sequence, rejecting points
/// outside the unit ball so the directions are uniform on the sphere.
pub fn halton_directions(m: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(m <= PRIMES.len(), "Halton directions support m <= {}", PRIMES.len());
    let mut out = Vec::with_capacity(count);
    let mut i = 1;
    while out.len() < count {
        let x: Vec<f64> = (0..m).map(|j| 2.0 * radical_inverse(i, PRIMES[j]) - 1.0).collect();
        let r = norm(&x);
        if r > 0.1 && r <= 1.0 {
            out.push(x.iter().map(|v| v / r).collect());
        }
        i += 1;
    }
    out
}

/// Coordinate axes, normalised flow directions and Halton points.
pub fn default_directions(config: &ValidatedNdConfig, halton: usize) -> Vec<Vec<f64>> {
    let m = config.m;
    let mut dirs: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..m).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for u in &config.flows {
        let r = norm(u);
        if r > 0.0 {
            let d: Vec<f64> = u.iter().map(|x| x / r).collect();
            if !dirs.iter().any(|e| norm(&e.iter().zip(&d).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-12) {
                dirs.push(d);
            }
        }
    }
    dirs.extend(halton_directions(m, halton));
    dirs
}

/// Default radii: geometric from the small-k regime up to |k| = 50.
pub fn default_radii(config: &ValidatedNdConfig) -> Vec<f64> {
    geomspace(1e-4 / config.min_gap().max(1.0), 50.0, 120)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionScan {
    pub direction: Vec<f64>,
    pub max_abscissa: f64,
    pub argmax_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdStabilityReport {
    pub verdict: Verdict,
    pub max_abscissa: f64,
    pub scans: Vec<DirectionScan>,
    pub corroborated: bool,
}

/// Largest spectral abscissa along one direction over the given radii.
pub fn scan_direction(config: &ValidatedNdConfig, direction: &[f64], radii: &[f64]) -> Result<DirectionScan> {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &r in radii {
        let k: Vec<f64> = direction.iter().map(|d| d * r).collect();
        let g = ndim_generator(config, &k)?;
        let a = abscissa(&eigenvalues(&g.m).map_err(|e| e.at_k(r))?);
        if a > best.0 {
            best = (a, r);
        }
    }
    Ok(DirectionScan { direction: direction.to_vec(), max_abscissa: best.0, argmax_radius: best.1 })
}

/// Verdict from the flow predicate, corroborated by the spectrum over the
/// sampled directions and radii.
pub fn ndim_classify_on(config: &ValidatedNdConfig, directions: &[Vec<f64>], radii: &[f64]) -> Result<NdStabilityReport> {
    let scans: Vec<DirectionScan> = directions
        .par_iter()
        .map(|d| scan_direction(config, d, radii))
        .collect::<Result<_>>()?;
    let (max_abscissa, at) = scans
        .iter()
        .fold((f64::NEG_INFINITY, 0.0), |acc, s| if s.max_abscissa > acc.0 { (s.max_abscissa, s.argmax_radius) } else { acc });
    if !config.has_flow() {
        if max_abscissa > 10.0 * ALPHA_TOL {
            return Err(Error::InconsistentEvidence { alpha: max_abscissa, k: at });
        }
        return Ok(NdStabilityReport { verdict: Verdict::Stable, max_abscissa, scans, corroborated: max_abscissa <= ALPHA_TOL });
    }
    Ok(NdStabilityReport { verdict: Verdict::Unstable, max_abscissa, scans, corroborated: max_abscissa >= 1e-6 })
}

pub fn ndim_classify(config: &ValidatedNdConfig) -> Result<NdStabilityReport> {
    ndim_classify_on(config, &default_directions(config, 16), &default_radii(config))
}
