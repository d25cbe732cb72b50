//! Spectral scans, the discriminant-inequality intervals, the stability
//! classification, the small-k growth slope and the Green's function.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ValidatedConfig;
use crate::error::{Error, Result};
use crate::linalg::{matrix_exponential, norm2, CMat, SpectrumSample};
use crate::spectral::{build_generator, coth};

/// Numerical zero for spectral abscissae.
pub const ALPHA_TOL: f64 = 1e-9;

/// Eigenvalues of M(k) at every grid point, evaluated in parallel.
pub fn spectrum_scan(config: &ValidatedConfig, kgrid: &[f64]) -> Result<Vec<SpectrumSample>> {
    kgrid
        .par_iter()
        .map(|&k| {
            let g = build_generator(config, k).map_err(|e| e.at_k(k))?;
            SpectrumSample::new(k, &g.m)
        })
        .collect()
}

pub fn abscissa_at(config: &ValidatedConfig, k: f64) -> Result<f64> {
    let g = build_generator(config, k).map_err(|e| e.at_k(k))?;
    Ok(SpectrumSample::new(k, &g.m)?.abscissa)
}

/// Eigenvalue branches followed across a scan by nearest-neighbour matching.
#[derive(Debug, Clone)]
pub struct Branches {
    /// `values[b][s]` is branch `b` at scan sample `s`.
    pub values: Vec<Vec<Complex64>>,
    /// Sample indices where some branch jumped by more than ten local spacings.
    pub crossings: Vec<usize>,
}

pub fn track_branches(samples: &[SpectrumSample]) -> Branches {
    let Some(first) = samples.first() else {
        return Branches { values: Vec::new(), crossings: Vec::new() };
    };
    let nb = first.eigenvalues.len();
    let mut values: Vec<Vec<Complex64>> = first.eigenvalues.iter().map(|&z| vec![z]).collect();
    let mut crossings = Vec::new();
    for (s, sample) in samples.iter().enumerate().skip(1) {
        let prev: Vec<Complex64> = values.iter().map(|b| b[s - 1]).collect();
        let mut used = vec![false; nb];
        let mut flagged = false;
        let spacing = local_spacing(&prev);
        for (b, p) in prev.iter().enumerate() {
            let mut best = usize::MAX;
            let mut dist = f64::INFINITY;
            for (j, z) in sample.eigenvalues.iter().enumerate() {
                let d = (z - p).norm();
                if !used[j] && d < dist {
                    dist = d;
                    best = j;
                }
            }
            used[best] = true;
            values[b].push(sample.eigenvalues[best]);
            if dist > 10.0 * spacing {
                flagged = true;
            }
        }
        if flagged {
            crossings.push(s);
        }
    }
    Branches { values, crossings }
}

fn local_spacing(v: &[Complex64]) -> f64 {
    let gap = crate::linalg::min_eigenvalue_gap(v);
    if gap.is_finite() && gap > 0.0 {
        gap
    } else {
        f64::INFINITY
    }
}

/// Which factor the wall gaps use in the discriminant inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WallFactor {
    /// Wall gaps keep coth(|k| h); interior gaps use tanh(|k| h / 2). This is
    /// the exact row sum of the pencil.
    Coth,
    /// tanh(|k| h / 2) for every gap.
    Tanh,
}

/// Row-sum margin of plate `p` (0-based): positive when the discriminant of
/// the row-sum quadratic in mu is negative, i.e. the row is dominant for all mu.
pub fn pd_margin(config: &ValidatedConfig, k: f64, plate: usize, walls: WallFactor) -> f64 {
    let k = k.abs();
    if k == 0.0 {
        return f64::NEG_INFINITY;
    }
    let n = config.n();
    let g = config.gaps();
    let u = config.flows();
    let factor = |gap: usize| {
        let wall = gap == 0 || gap == n;
        if wall && walls == WallFactor::Coth {
            coth(k * g[gap])
        } else {
            (0.5 * k * g[gap]).tanh()
        }
    };
    let (tb, ta) = (factor(plate), factor(plate + 1));
    let (ub, ua) = (u[plate], u[plate + 1]);
    let lhs = (ub * tb + ua * ta).powi(2);
    let rhs = (ub * ub * tb + ua * ua * ta - k * k * k) * (k + tb + ta);
    rhs - lhs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, k: f64) -> bool {
        k >= self.lo && k <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdIntervals {
    pub walls: WallFactor,
    /// Where each plate's inequality holds.
    pub per_plate: Vec<Vec<Interval>>,
    /// Where at least one plate's inequality holds.
    pub union: Vec<Interval>,
    /// Where every plate's inequality holds; there the pencil is positive definite for all mu.
    pub certified: Vec<Interval>,
}

impl PdIntervals {
    pub fn is_empty(&self) -> bool {
        self.union.is_empty()
    }

    pub fn contains(&self, k: f64) -> bool {
        self.union.iter().any(|i| i.contains(k))
    }
}

const BISECT_TOL: f64 = 1e-8;

fn bisect(f: &impl Fn(f64) -> bool, mut a: f64, mut b: f64) -> f64 {
    // f(a) != f(b); returns the crossing point
    let fa = f(a);
    while (b - a).abs() > BISECT_TOL * (1.0 + a.abs().max(b.abs())) {
        let m = 0.5 * (a + b);
        if f(m) == fa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Sublevel intervals of a boolean predicate sampled on a sorted grid, with
/// endpoints refined by bisection.
fn intervals_of(kgrid: &[f64], f: impl Fn(f64) -> bool) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    let flags: Vec<bool> = kgrid.iter().map(|&k| f(k)).collect();
    for i in 0..kgrid.len() {
        if flags[i] && start.is_none() {
            start = Some(if i == 0 { kgrid[0] } else { bisect(&f, kgrid[i - 1], kgrid[i]) });
        }
        if !flags[i] {
            if let Some(s) = start.take() {
                out.push(Interval { lo: s, hi: bisect(&f, kgrid[i - 1], kgrid[i]) });
            }
        }
    }
    if let Some(s) = start {
        out.push(Interval { lo: s, hi: *kgrid.last().unwrap() });
    }
    out
}

/// Intervals of k where the discriminant inequality holds, per plate and combined.
pub fn pd_intervals_with(config: &ValidatedConfig, kgrid: &[f64], walls: WallFactor) -> PdIntervals {
    let mut grid: Vec<f64> = kgrid.iter().copied().filter(|k| k.is_finite()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let n = config.n();
    let holds = |p: usize| move |k: f64| pd_margin(config, k, p, walls) > 0.0;
    let per_plate = (0..n).map(|p| intervals_of(&grid, holds(p))).collect();
    let union = intervals_of(&grid, |k| (0..n).any(|p| holds(p)(k)));
    let certified = intervals_of(&grid, |k| (0..n).all(|p| holds(p)(k)));
    PdIntervals { walls, per_plate, union, certified }
}

pub fn pd_intervals(config: &ValidatedConfig, kgrid: &[f64]) -> PdIntervals {
    pd_intervals_with(config, kgrid, WallFactor::Coth)
}

/// `count` points geometrically spaced on `[a, b]`, `0 < a < b`.
pub fn geomspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
}

/// Default classification grid: positive k only, since the spectrum at -k is the conjugate.
pub fn default_scan_grid(config: &ValidatedConfig) -> Vec<f64> {
    let h = config.min_gap();
    geomspace(1e-4 / h.max(1.0), 50.0, 400)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// `(k, alpha(k))` over the scan grid.
    pub abscissa: Vec<(f64, f64)>,
    pub max_abscissa: f64,
    pub intervals: PdIntervals,
    /// Largest abscissa found at sample points inside the union of intervals.
    pub max_abscissa_in_k: f64,
    /// Whether the numerics agree with the verdict.
    pub corroborated: bool,
    pub slope: Option<GrowthFit>,
    pub diagnostics: Vec<String>,
}

fn samples_inside(iv: &[Interval], per: usize) -> Vec<f64> {
    let mut ks = Vec::new();
    for i in iv {
        if i.lo > 0.0 && i.hi / i.lo > 4.0 {
            ks.extend(geomspace(i.lo, i.hi, per));
        } else {
            ks.extend(linspace(i.lo, i.hi, per + 2).into_iter().skip(1).take(per));
        }
    }
    ks.retain(|&k| k != 0.0);
    ks
}

pub fn classify(config: &ValidatedConfig) -> Result<StabilityReport> {
    classify_on(config, &default_scan_grid(config))
}

/// Stability verdict from the flow predicate, corroborated by the spectrum.
pub fn classify_on(config: &ValidatedConfig, kgrid: &[f64]) -> Result<StabilityReport> {
    let samples = spectrum_scan(config, kgrid)?;
    let abscissa: Vec<(f64, f64)> = samples.iter().map(|s| (s.k, s.abscissa)).collect();
    let (max_abscissa, argmax) = abscissa
        .iter()
        .fold((f64::NEG_INFINITY, 0.0), |(m, km), &(k, a)| if a > m { (a, k) } else { (m, km) });
    let intervals = pd_intervals(config, kgrid);
    let mut diagnostics = Vec::new();

    if !config.has_flow() {
        if max_abscissa > 10.0 * ALPHA_TOL {
            return Err(Error::InconsistentEvidence { alpha: max_abscissa, k: argmax });
        }
        if !intervals.is_empty() {
            diagnostics.push("discriminant inequality holds somewhere despite zero flow".into());
        }
        let corroborated = max_abscissa <= ALPHA_TOL && intervals.is_empty();
        return Ok(StabilityReport {
            verdict: Verdict::Stable,
            abscissa,
            max_abscissa,
            intervals,
            max_abscissa_in_k: f64::NEG_INFINITY,
            corroborated,
            slope: None,
            diagnostics,
        });
    }

    let inside = samples_inside(&intervals.union, 16);
    let mut max_in_k = f64::NEG_INFINITY;
    for k in inside {
        max_in_k = max_in_k.max(abscissa_at(config, k)?);
    }
    if intervals.is_empty() {
        diagnostics.push("discriminant inequality never holds on the scan grid".into());
    }
    if max_abscissa <= ALPHA_TOL {
        diagnostics.push(format!("no positive abscissa resolved (max {max_abscissa:e})"));
    }
    let slope = match growth_slope(config) {
        Ok(fit) => Some(fit),
        Err(e) => {
            diagnostics.push(format!("growth slope unavailable: {e}"));
            None
        }
    };
    let corroborated = max_abscissa > ALPHA_TOL && max_in_k > ALPHA_TOL;
    Ok(StabilityReport {
        verdict: Verdict::Unstable,
        abscissa,
        max_abscissa,
        intervals,
        max_abscissa_in_k: max_in_k,
        corroborated,
        slope,
        diagnostics,
    })
}

/// Least-squares fit `alpha(k) = c k + d k^2` on a small-k window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub c: f64,
    pub d: f64,
    /// Largest absolute misfit of the two-term model.
    pub residual: f64,
    /// `|d| k_max / |c|`: size of the quadratic term relative to the linear one at the window end.
    pub quadratic_ratio: f64,
    /// `c` times the channel depth.
    pub c_times_depth: f64,
    pub k: Vec<f64>,
    pub alpha: Vec<f64>,
}

pub const SLOPE_WINDOW: (f64, f64) = (1e-4, 1e-2);

pub fn growth_slope(config: &ValidatedConfig) -> Result<GrowthFit> {
    growth_slope_on(config, SLOPE_WINDOW.0, SLOPE_WINDOW.1, 25)
}

pub fn growth_slope_on(config: &ValidatedConfig, kmin: f64, kmax: f64, count: usize) -> Result<GrowthFit> {
    let ks = geomspace(kmin, kmax, count);
    let alpha = ks
        .iter()
        .map(|&k| abscissa_at(config, k))
        .collect::<Result<Vec<_>>>()?;
    if alpha.iter().all(|&a| a <= ALPHA_TOL * 1e-3) {
        return Err(Error::FlatSpectrum);
    }
    // normal equations for [k, k^2]
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&k, &a) in ks.iter().zip(&alpha) {
        s11 += k * k;
        s12 += k * k * k;
        s22 += k * k * k * k;
        r1 += k * a;
        r2 += k * k * a;
    }
    let det = s11 * s22 - s12 * s12;
    let c = (r1 * s22 - r2 * s12) / det;
    let d = (s11 * r2 - s12 * r1) / det;
    let residual = ks
        .iter()
        .zip(&alpha)
        .map(|(&k, &a)| (c * k + d * k * k - a).abs())
        .fold(0.0, f64::max);
    Ok(GrowthFit {
        c,
        d,
        residual,
        quadratic_ratio: (d * kmax / c).abs(),
        c_times_depth: c * config.depth(),
        k: ks,
        alpha,
    })
}

/// `i k V I + M(k)`: the generator seen along the ray x = V t.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedGenerator {
    pub v: f64,
    pub k: f64,
    pub matrix: CMat,
}

pub fn shifted_generator(config: &ValidatedConfig, v: f64, k: f64) -> Result<ShiftedGenerator> {
    let g = build_generator(config, k).map_err(|e| e.at_k(k))?;
    Ok(ShiftedGenerator { v, k, matrix: g.shifted(v) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    /// Initial taper scale; the integrand is damped by `exp(-(k / k_cut)^8)`.
    pub k_cut: f64,
    /// Trapezoid nodes per local oscillation wavelength at the truncation point.
    pub nodes_per_wavelength: f64,
    pub rel_tol: f64,
    pub max_refinements: usize,
    pub max_nodes: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            k_cut: 8.0,
            nodes_per_wavelength: 6.0,
            rel_tol: 1e-4,
            max_refinements: 4,
            max_nodes: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreensSample {
    pub v: f64,
    pub t: f64,
    pub g: CMat,
    pub norm: f64,
    /// Spectral norms of the displacement, displacement-from-velocity,
    /// velocity-from-displacement and velocity blocks.
    pub block_norms: [f64; 4],
    pub k_max: f64,
    pub nodes: usize,
    /// Relative change over the last refinement.
    pub change: f64,
}

const TAPER_POWER: i32 = 8;
const TRUNCATION: f64 = 1.5;
const CHUNK: usize = 256;

fn greens_pass(config: &ValidatedConfig, v: f64, t: f64, k_cut: f64, nodes: usize) -> Result<CMat> {
    let kmax = TRUNCATION * k_cut;
    let h = 2.0 * kmax / (nodes - 1) as f64;
    let dim = 2 * config.n();
    let chunks: Vec<CMat> = (0..nodes)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| -> Result<CMat> {
            let mut acc = CMat::zeros(dim, dim);
            for &i in idx {
                let k = -kmax + i as f64 * h;
                let w = (-(k / k_cut).powi(TAPER_POWER)).exp() * if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
                if w == 0.0 {
                    continue;
                }
                let g = build_generator(config, k).map_err(|e| e.at_k(k))?;
                let e = matrix_exponential(&g.m, t).map_err(|e| e.at_k(k))?;
                let phase = Complex64::from_polar(w, k * v * t);
                acc += e * phase;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = CMat::zeros(dim, dim);
    for c in chunks {
        total += c;
    }
    Ok(total * Complex64::new(h / (2.0 * std::f64::consts::PI), 0.0))
}

fn node_count(q: &Quadrature, k_cut: f64, t: f64, v: f64) -> usize {
    let kmax = TRUNCATION * k_cut;
    // phase of exp(t (i k V + i k^2)) changes at rate t (|V| + 2 k)
    let rate = t.max(1.0) * (v.abs() + 2.0 * kmax + 1.0);
    let wavelength = 2.0 * std::f64::consts::PI / rate;
    let n = (2.0 * kmax / wavelength * q.nodes_per_wavelength).ceil() as usize;
    (n | 1).max(65)
}

fn block_norms(g: &CMat) -> [f64; 4] {
    let n = g.nrows() / 2;
    let b = |r: usize, c: usize| norm2(&g.view((r * n, c * n), (n, n)).into_owned());
    [b(0, 0), b(0, 1), b(1, 0), b(1, 1)]
}

/// `G(V t, t) = (1 / 2 pi) int exp(t (i k V + M(k))) dk`, Abel-regularised by a
/// smooth taper and refined until the norm settles.
pub fn greens_function(config: &ValidatedConfig, v: f64, t: f64, q: &Quadrature) -> Result<GreensSample> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("time {t} must be positive")));
    }
    let mut k_cut = q.k_cut;
    let mut nodes = node_count(q, k_cut, t, v);
    let mut prev = greens_pass(config, v, t, k_cut, nodes)?;
    let mut change = f64::INFINITY;
    for _ in 0..q.max_refinements {
        k_cut *= 2.0;
        nodes = node_count(q, k_cut, t, v);
        if nodes > q.max_nodes {
            break;
        }
        let next = greens_pass(config, v, t, k_cut, nodes)?;
        let scale = norm2(&next).max(f64::MIN_POSITIVE);
        change = norm2(&(&next - &prev)) / scale;
        prev = next;
        if change < q.rel_tol {
            let norm = norm2(&prev);
            return Ok(GreensSample {
                v,
                t,
                block_norms: block_norms(&prev),
                g: prev,
                norm,
                k_max: TRUNCATION * k_cut,
                nodes,
                change,
            });
        }
    }
    Err(Error::NonConvergentQuadrature { change, nodes, kmax: TRUNCATION * k_cut })
}

/// Least-squares slope of `log y` against `log t`.
pub fn power_law_exponent(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
