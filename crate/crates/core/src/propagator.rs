//! Exact-in-time evolution of plate data: transform, multiply every Fourier
//! mode by `exp(t M(k))`, transform back.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::channel::{check_decay, InitialData, ValidatedConfig};
use crate::error::{Error, Result};
use crate::linalg::{matrix_exponential, CMat};
use crate::spectral::build_generator;

const ALIAS_TOL: f64 = 1e-8;
const REALITY_TOL: f64 = 1e-9;
const DECAY_TOL: f64 = 1e-10;

/// Uniform grid on `[-L, L)` with `N` nodes and the matching DFT wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    half_width: f64,
    points: usize,
}

impl Default for SimGrid {
    fn default() -> Self {
        Self { half_width: 40.0, points: 1024 }
    }
}

impl SimGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("point count {points} must be a power of two")));
        }
        Ok(Self { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn dk(&self) -> f64 {
        PI / self.half_width
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Signed mode number of DFT slot `m`.
    pub fn mode(&self, m: usize) -> i64 {
        if m < self.points / 2 {
            m as i64
        } else {
            m as i64 - self.points as i64
        }
    }

    pub fn k(&self, m: usize) -> f64 {
        self.mode(m) as f64 * self.dk()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.points).map(|m| self.k(m)).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.points / 2
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / (2.0 * self.half_width)
    }
}

/// Per-mode 2n-vectors `(eta_1..eta_n, d/dt eta_1..d/dt eta_n)` in DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub n: usize,
    pub grid: SimGrid,
    pub modes: Vec<Vec<Complex64>>,
}

impl SpectralState {
    pub fn zeros(n: usize, grid: SimGrid) -> Self {
        Self {
            n,
            grid,
            modes: vec![vec![Complex64::new(0.0, 0.0); 2 * n]; grid.points()],
        }
    }

    /// Largest `|s(k) - conj(s(-k))|` over all mode pairs.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.grid.points();
        let mut worst = 0.0f64;
        for m in 0..n {
            let p = (n - m) % n;
            for (a, b) in self.modes[m].iter().zip(&self.modes[p]) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    pub fn peak(&self) -> f64 {
        self.modes.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Real plate displacements and velocities at time `t`, indexed `[plate][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub t: f64,
    pub x: Vec<f64>,
    pub displacement: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
    /// Largest imaginary part discarded by the inverse transform.
    pub residue: f64,
}

impl SpatialField {
    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.displacement
            .iter()
            .chain(&self.velocity)
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Discrete L2 norm of the displacements over all plates.
    pub fn displacement_l2(&self) -> f64 {
        let dx = if self.x.len() > 1 { self.x[1] - self.x[0] } else { 1.0 };
        (self.displacement.iter().flatten().map(|v| v * v).sum::<f64>() * dx).sqrt()
    }
}

fn sign(m: usize) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Forward transform `f^(k) = sum_j f(x_j) e^{-i k x_j} dx` of every profile.
pub fn transform_initial(data: &InitialData, grid: &SimGrid) -> Result<SpectralState> {
    let n = data.n();
    let x = grid.nodes();
    let (disp, vel) = data.sample(&x)?;
    let mut profiles = disp;
    profiles.extend(vel);
    check_decay(&profiles, DECAY_TOL)?;

    let npts = grid.points();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(npts);
    let mut state = SpectralState::zeros(n, *grid);
    let dx = grid.dx();
    let mut buf = vec![Complex64::new(0.0, 0.0); npts];
    for (c, prof) in profiles.iter().enumerate() {
        for (b, &v) in buf.iter_mut().zip(prof) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (m, v) in buf.iter().enumerate() {
            state.modes[m][c] = v * (dx * sign(m));
        }
    }

    let peak = state.peak();
    if peak > 0.0 {
        let nyq = state.modes[grid.nyquist_index()].iter().map(|z| z.norm()).fold(0.0, f64::max);
        if nyq > ALIAS_TOL * peak {
            return Err(Error::AliasedData { ratio: nyq / peak });
        }
    }
    Ok(state)
}

fn apply(e: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    (0..e.nrows())
        .map(|i| (0..e.ncols()).map(|j| e[(i, j)] * v[j]).sum())
        .collect()
}

/// Multiplies every mode by `exp(t M(k))`, then restores conjugate symmetry.
pub fn evolve(config: &ValidatedConfig, state: &SpectralState, t: f64) -> Result<SpectralState> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("time {t} must be finite and non-negative")));
    }
    if config.n() != state.n {
        return Err(Error::InvalidConfig(format!(
            "state has {} plates but the channel has {}",
            state.n,
            config.n()
        )));
    }
    let grid = state.grid;
    let nyq = grid.nyquist_index();
    let mut modes: Vec<Vec<Complex64>> = (0..grid.points())
        .into_par_iter()
        .map(|m| -> Result<Vec<Complex64>> {
            let k = grid.k(m);
            let g = build_generator(config, k).map_err(|e| e.at_k(k))?;
            let mut e = matrix_exponential(&g.m, t).map_err(|e| e.at_k(k))?;
            if m == nyq {
                // the slot stands for both +k_N and -k_N
                e = e.map(|z| Complex64::new(z.re, 0.0));
            }
            Ok(apply(&e, &state.modes[m]))
        })
        .collect::<Result<_>>()?;

    let npts = grid.points();
    for m in 1..nyq {
        let p = npts - m;
        for c in 0..2 * state.n {
            let avg = (modes[m][c] + modes[p][c].conj()) * 0.5;
            modes[m][c] = avg;
            modes[p][c] = avg.conj();
        }
    }
    for m in [0, nyq] {
        for z in &mut modes[m] {
            z.im = 0.0;
        }
    }
    Ok(SpectralState { n: state.n, grid, modes })
}

/// Inverse transform `f(x_j) = (1 / 2 pi) sum_m f^(k_m) e^{i k_m x_j} dk`.
pub fn synthesize(state: &SpectralState, t: f64) -> Result<SpatialField> {
    let grid = state.grid;
    let npts = grid.points();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(npts);
    let scale = 1.0 / (2.0 * grid.half_width());
    let mut out = Vec::with_capacity(2 * state.n);
    let mut residue = 0.0f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); npts];
    for c in 0..2 * state.n {
        for (m, b) in buf.iter_mut().enumerate() {
            *b = state.modes[m][c] * sign(m);
        }
        ifft.process(&mut buf);
        let mut prof = Vec::with_capacity(npts);
        for z in &buf {
            prof.push(z.re * scale);
            residue = residue.max((z.im * scale).abs());
        }
        out.push(prof);
    }
    let fmax = out.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if residue > REALITY_TOL * fmax {
        return Err(Error::RealityViolation { residue });
    }
    let velocity = out.split_off(state.n);
    Ok(SpatialField {
        t,
        x: grid.nodes(),
        displacement: out,
        velocity,
        residue,
    })
}

/// Fields at each requested time, starting from the same initial data.
pub fn simulate(
    config: &ValidatedConfig,
    data: &InitialData,
    grid: &SimGrid,
    times: &[f64],
) -> Result<Vec<SpatialField>> {
    if data.n() != config.n() {
        return Err(Error::InvalidConfig(format!(
            "initial data has {} plates but the channel has {}",
            data.n(),
            config.n()
        )));
    }
    let s0 = transform_initial(data, grid)?;
    times
        .iter()
        .map(|&t| synthesize(&evolve(config, &s0, t)?, t))
        .collect()
}

/// Fourier coefficients on the period `[0, 2 pi)`, integer wavenumbers `-K..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicData {
    pub n: usize,
    pub kmax: usize,
    /// `coeffs[k + kmax]` is the 2n-vector for wavenumber k.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl PeriodicData {
    pub fn zeros(n: usize, kmax: usize) -> Self {
        Self {
            n,
            kmax,
            coeffs: vec![vec![Complex64::new(0.0, 0.0); 2 * n]; 2 * kmax + 1],
        }
    }

    /// Sets the coefficient at `k` and its conjugate at `-k`, keeping fields real.
    pub fn set(&mut self, k: i64, v: Vec<Complex64>) {
        assert_eq!(v.len(), 2 * self.n);
        assert!(k.unsigned_abs() as usize <= self.kmax);
        let i = (k + self.kmax as i64) as usize;
        let j = (-k + self.kmax as i64) as usize;
        self.coeffs[j] = v.iter().map(|z| z.conj()).collect();
        if k == 0 {
            self.coeffs[i] = v.iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        } else {
            self.coeffs[i] = v;
        }
    }
}

/// Evolves a periodic state and evaluates it on `points` uniform nodes of `[0, 2 pi)`.
pub fn simulate_periodic(
    config: &ValidatedConfig,
    data: &PeriodicData,
    times: &[f64],
    points: usize,
) -> Result<Vec<SpatialField>> {
    if data.n != config.n() {
        return Err(Error::InvalidConfig("coefficient size does not match plate count".into()));
    }
    let kmax = data.kmax as i64;
    let x: Vec<f64> = (0..points).map(|j| 2.0 * PI * j as f64 / points as f64).collect();
    let gens = (-kmax..=kmax)
        .map(|k| build_generator(config, k as f64).map_err(|e| e.at_k(k as f64)))
        .collect::<Result<Vec<_>>>()?;
    times
        .iter()
        .map(|&t| {
            let evolved = gens
                .iter()
                .zip(&data.coeffs)
                .map(|(g, c)| Ok(apply(&matrix_exponential(&g.m, t).map_err(|e| e.at_k(g.k))?, c)))
                .collect::<Result<Vec<_>>>()?;
            let mut comps = vec![vec![0.0; points]; 2 * data.n];
            let mut residue = 0.0f64;
            for (j, &xj) in x.iter().enumerate() {
                for c in 0..2 * data.n {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (idx, v) in evolved.iter().enumerate() {
                        let k = idx as f64 - kmax as f64;
                        s += v[c] * Complex64::from_polar(1.0, k * xj);
                    }
                    comps[c][j] = s.re;
                    residue = residue.max(s.im.abs());
                }
            }
            let fmax = comps.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            if residue > REALITY_TOL * fmax {
                return Err(Error::RealityViolation { residue });
            }
            let velocity = comps.split_off(data.n);
            Ok(SpatialField {
                t,
                x: x.clone(),
                displacement: comps,
                velocity,
                residue,
            })
        })
        .collect()
}
