//! Independent checks: the divergence identity and the two-surface flux
//! identity on manufactured harmonic functions, and a back-substitution of
//! generator eigenpairs into the linearised kinematic and Bernoulli equations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{random_config, ChannelConfig, ValidatedConfig};
use crate::error::{Error, Result};
use crate::linalg::eigen;
use crate::spectral::{build_abc, build_generator, generator_from_matrices, GeneratorMatrix};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Closed-form potentials with analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManufacturedPotential {
    Constant(f64),
    /// `x^2 - y^2`
    SaddleXY,
    /// `x y`
    ProductXY,
    /// `Re exp(-(x + i y)^2)`
    GaussRe,
    /// `Im exp(-(x + i y)^2)`
    GaussIm,
    /// `x^2`; not harmonic, used as a negative control.
    SquareX,
}

impl ManufacturedPotential {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        use ManufacturedPotential::*;
        match self {
            Constant(c) => *c,
            SaddleXY => x * x - y * y,
            ProductXY => x * y,
            GaussRe => gauss(x, y).re,
            GaussIm => gauss(x, y).im,
            SquareX => x * x,
        }
    }

    /// `(d/dx, d/dy)`.
    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        use ManufacturedPotential::*;
        match self {
            Constant(_) => (0.0, 0.0),
            SaddleXY => (2.0 * x, -2.0 * y),
            ProductXY => (y, x),
            GaussRe => {
                // f' = -2 z e^{-z^2}; d/dx Re f = Re f', d/dy Re f = -Im f'
                let d = gauss_prime(x, y);
                (d.re, -d.im)
            }
            GaussIm => {
                let d = gauss_prime(x, y);
                (d.im, d.re)
            }
            SquareX => (2.0 * x, 0.0),
        }
    }

    pub fn is_harmonic(&self) -> bool {
        !matches!(self, ManufacturedPotential::SquareX)
    }

    /// Bound on `|phi| + |grad phi|` over `|x| >= x0`, `|y| <= ymax`, or `None`
    /// when the potential does not decay in x.
    pub fn decay_bound(&self, x0: f64, ymax: f64) -> Option<f64> {
        use ManufacturedPotential::*;
        match self {
            Constant(c) if *c == 0.0 => Some(0.0),
            GaussRe | GaussIm if x0 >= 1.0 => {
                // |e^{-z^2}| = e^{y^2 - x^2}, |f'| <= 2 |z| |e^{-z^2}|, both decreasing in x past 1
                let r = x0.hypot(ymax);
                Some((1.0 + 2.0 * r) * (ymax * ymax - x0 * x0).exp())
            }
            _ => None,
        }
    }
}

fn gauss(x: f64, y: f64) -> Complex64 {
    let z = Complex64::new(x, y);
    (-z * z).exp()
}

fn gauss_prime(x: f64, y: f64) -> Complex64 {
    let z = Complex64::new(x, y);
    -2.0 * z * (-z * z).exp()
}

/// Fourth-order central-difference value of
/// `d/dx (u_y v_x + v_y u_x) + d/dy (u_y v_y - u_x v_x)` at a point.
pub fn divergence_residual(u: &ManufacturedPotential, v: &ManufacturedPotential, x: f64, y: f64, h: f64) -> f64 {
    let f = |x: f64, y: f64| {
        let (ux, uy) = u.grad(x, y);
        let (vx, vy) = v.grad(x, y);
        (uy * vx + vy * ux, uy * vy - ux * vx)
    };
    let d = |g: &dyn Fn(f64) -> f64| (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h);
    let dx = d(&|s| f(x + s, y).0);
    let dy = d(&|s| f(x, y + s).1);
    (dx + dy).abs()
}

/// A static interface `y = eta(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Flat(f64),
    /// `base + amp * sech(x)`
    Sech { base: f64, amp: f64 },
    /// `base + amp * exp(-x^2)`
    Gaussian { base: f64, amp: f64 },
}

impl Surface {
    pub fn eta(&self, x: f64) -> f64 {
        match *self {
            Surface::Flat(c) => c,
            Surface::Sech { base, amp } => base + amp / x.cosh(),
            Surface::Gaussian { base, amp } => base + amp * (-x * x).exp(),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            Surface::Flat(_) => 0.0,
            Surface::Sech { amp, .. } => -amp * x.tanh() / x.cosh(),
            Surface::Gaussian { amp, .. } => -2.0 * amp * x * (-x * x).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticSurfacePair {
    pub bottom: Surface,
    pub top: Surface,
}

impl StaticSurfacePair {
    pub fn new(bottom: Surface, top: Surface) -> Result<Self> {
        let p = Self { bottom, top };
        let sep = (-400..=400)
            .map(|i| i as f64 * 0.05)
            .map(|x| top.eta(x) - bottom.eta(x))
            .fold(f64::INFINITY, f64::min);
        if !(sep > 0.0) {
            return Err(Error::InvalidConfig(format!("surfaces touch or cross (min separation {sep})")));
        }
        Ok(p)
    }

    pub fn flat(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Surface::Flat(lo), Surface::Flat(hi))
    }
}

// Gauss-Kronrod 7-15 nodes and weights, as tabulated
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// 15-point Kronrod value, 7-point Gauss error estimate and the Kronrod value of `|f|`.
fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let f1 = f(c - h * XGK[j]);
        let f2 = f(c + h * XGK[j]);
        k += (f1 + f2) * WGK[j];
        abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            g += (f1 + f2) * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm(), abs * h)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub abs_integral: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss-Kronrod: split the worst panel until the summed
/// error estimate is below `rel_tol` times the integral of `|f|`.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    rel_tol: f64,
    budget: usize,
) -> Result<Integral> {
    let mut panels = vec![(a, b, gk15(&f, a, b))];
    loop {
        let value: Complex64 = panels.iter().map(|p| p.2 .0).sum();
        let error: f64 = panels.iter().map(|p| p.2 .1).sum();
        let abs_integral: f64 = panels.iter().map(|p| p.2 .2).sum();
        if error <= rel_tol * abs_integral || abs_integral == 0.0 {
            return Ok(Integral { value, abs_integral, error, panels: panels.len() });
        }
        if panels.len() >= budget {
            return Err(Error::QuadratureBudgetExceeded { budget });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap();
        let (pa, pb, _) = panels.swap_remove(worst);
        let m = 0.5 * (pa + pb);
        panels.push((pa, m, gk15(&f, pa, m)));
        panels.push((m, pb, gk15(&f, m, pb)));
    }
}

/// Composite Simpson rule with `intervals` (even) subintervals.
pub fn integrate_simpson(f: impl Fn(f64) -> Complex64, a: f64, b: f64, intervals: usize) -> Complex64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

/// Integrand of the flux identity on one surface: `F . (-eta', 1)` with
/// `F = (u_y v_x + v_y u_x, u_y v_y - u_x v_x)` and `v = exp(-i k x + kappa y)`.
fn flux_density(phi: &ManufacturedPotential, s: &Surface, k: f64, kappa: f64, x: f64) -> Complex64 {
    let y = s.eta(x);
    let (ux, uy) = phi.grad(x, y);
    let v = Complex64::from_polar((kappa * y).exp(), -k * x);
    let vx = -I * k * v;
    let vy = v * kappa;
    let f1 = vx * uy + vy * ux;
    let f2 = vy * uy - vx * ux;
    -f1 * s.slope(x) + f2
}

/// Half-width of the x-range outside which the manufactured potentials are negligible.
pub const FLUX_X0: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxResidual {
    /// `|top - bottom|` divided by the integral of the absolute integrands.
    pub relative: f64,
    pub absolute: f64,
    pub scale: f64,
}

/// Net flux of the divergence-free field through the two surfaces; vanishes
/// when `phi` is harmonic between them.
pub fn boundary_flux_residual(
    phi: &ManufacturedPotential,
    surfaces: &StaticSurfacePair,
    k: f64,
    kappa_sign: f64,
) -> Result<FluxResidual> {
    let kappa = kappa_sign.signum() * k.abs();
    let top = integrate_adaptive(|x| flux_density(phi, &surfaces.top, k, kappa, x), -FLUX_X0, FLUX_X0, 1e-13, 20_000)?;
    let bot = integrate_adaptive(|x| flux_density(phi, &surfaces.bottom, k, kappa, x), -FLUX_X0, FLUX_X0, 1e-13, 20_000)?;
    let absolute = (top.value - bot.value).norm();
    let scale = top.abs_integral + bot.abs_integral;
    let relative = if scale == 0.0 { absolute } else { absolute / scale };
    Ok(FluxResidual { relative, absolute, scale })
}

/// Same residual with a fixed composite Simpson rule, for convergence-rate studies.
pub fn boundary_flux_residual_simpson(
    phi: &ManufacturedPotential,
    surfaces: &StaticSurfacePair,
    k: f64,
    kappa_sign: f64,
    intervals: usize,
) -> f64 {
    let kappa = kappa_sign.signum() * k.abs();
    let top = integrate_simpson(|x| flux_density(phi, &surfaces.top, k, kappa, x), -FLUX_X0, FLUX_X0, intervals);
    let bot = integrate_simpson(|x| flux_density(phi, &surfaces.bottom, k, kappa, x), -FLUX_X0, FLUX_X0, intervals);
    (top - bot).norm()
}

/// Boundary potentials of every gap: `plus[i]` on the upper side of gap i
/// (i = 0..n-1), `minus[i]` on the lower side of gap i + 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

/// Solves the kinematic relations of every gap for the boundary potentials,
/// given plate displacements `eta` and velocities `pi` in Fourier space.
pub fn recover_potentials(config: &ValidatedConfig, k: f64, eta: &[Complex64], pi: &[Complex64]) -> Result<Potentials> {
    if k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let n = config.n();
    let d = config.gaps();
    let u = config.flows();
    // unknown order: plus_0, (minus_1, plus_1), ..., (minus_{n-1}, plus_{n-1}), minus_n
    let dim = 2 * n;
    let col_plus = |i: usize| 2 * i;
    let col_minus = |i: usize| 2 * i - 1;
    let mut sys = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = DVector::<Complex64>::zeros(dim);
    let kc = Complex64::new(k, 0.0);
    // kinematic source of plate p (0-based) seen from gap g
    let w = |p: usize, g: usize| pi[p] + I * k * u[g] * eta[p];

    // bottom wall gap: w - k plus_0 tanh(k d_0) = 0
    sys[(0, col_plus(0))] = -kc * (k * d[0]).tanh();
    rhs[0] = -w(0, 0);
    // interior gap i sits between plate i - 1 and plate i (0-based plates)
    for i in 1..n {
        let (wb, wt) = (w(i - 1, i), w(i, i));
        let e = (-(k * d[i]).abs()).exp();
        let (r1, r2) = (2 * i - 1, 2 * i);
        let (cm, cp) = (col_minus(i), col_plus(i));
        if k > 0.0 {
            // e (w_b - k minus) - (w_t - k plus) = 0
            sys[(r1, cm)] = -kc * e;
            sys[(r1, cp)] = kc;
            rhs[r1] = wt - wb * e;
            // w_b + k minus - e (w_t + k plus) = 0
            sys[(r2, cm)] = kc;
            sys[(r2, cp)] = -kc * e;
            rhs[r2] = wt * e - wb;
        } else {
            // w_b - k minus - e (w_t - k plus) = 0
            sys[(r1, cm)] = -kc;
            sys[(r1, cp)] = kc * e;
            rhs[r1] = wt * e - wb;
            // e (w_b + k minus) - (w_t + k plus) = 0
            sys[(r2, cm)] = kc * e;
            sys[(r2, cp)] = -kc;
            rhs[r2] = wt - wb * e;
        }
    }
    // top wall gap: w + k minus_n tanh(k d_n) = 0
    sys[(dim - 1, col_minus(n))] = kc * (k * d[n]).tanh();
    rhs[dim - 1] = -w(n - 1, n);

    let sol = sys.lu().solve(&rhs).ok_or(Error::SingularXiSolve { k })?;
    if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularXiSolve { k });
    }
    Ok(Potentials {
        plus: (0..n).map(|i| sol[col_plus(i)]).collect(),
        minus: (1..=n).map(|i| sol[col_minus(i)]).collect(),
    })
}

/// Bernoulli balance of every plate for a mode `exp(lambda t)`, relative to
/// the largest individual term.
pub fn bernoulli_residual(
    config: &ValidatedConfig,
    k: f64,
    lambda: Complex64,
    eta: &[Complex64],
    pi: &[Complex64],
    xi: &Potentials,
) -> f64 {
    let n = config.n();
    let u = config.flows();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for p in 0..n {
        let terms = [
            lambda * pi[p],
            eta[p] * k.powi(4),
            (lambda + I * k * u[p]) * xi.plus[p],
            -(lambda + I * k * u[p + 1]) * xi.minus[p],
        ];
        let sum: Complex64 = terms.iter().sum();
        worst = worst.max(sum.norm());
        scale = terms.iter().map(|t| t.norm()).fold(scale, f64::max);
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Worst Bernoulli residual over all eigenpairs of the given generator.
pub fn assembly_residual_of(config: &ValidatedConfig, g: &GeneratorMatrix) -> Result<f64> {
    let k = g.k;
    let n = config.n();
    let e = eigen(&g.m).map_err(|err| err.at_k(k))?;
    let mut worst = 0.0f64;
    for (j, &lambda) in e.values.iter().enumerate() {
        let col = e.vectors.column(j);
        let eta: Vec<Complex64> = (0..n).map(|i| col[i]).collect();
        let pi: Vec<Complex64> = (0..n).map(|i| col[n + i]).collect();
        let xi = recover_potentials(config, k, &eta, &pi)?;
        worst = worst.max(bernoulli_residual(config, k, lambda, &eta, &pi, &xi));
    }
    Ok(worst)
}

/// Back-substitutes every eigenpair of M(k) into the linearised equations.
pub fn assembly_residual(config: &ValidatedConfig, k: f64) -> Result<f64> {
    if k == 0.0 {
        return Err(Error::ZeroWavenumber);
    }
    let g = build_generator(config, k)?;
    assembly_residual_of(config, &g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationCase {
    pub id: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl VerificationCase {
    pub fn below(id: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self { id: id.into(), residual, threshold, pass: residual <= threshold }
    }

    pub fn above(id: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self { id: id.into(), residual, threshold, pass: residual > threshold }
    }

    pub fn failed(id: impl Into<String>, threshold: f64) -> Self {
        Self { id: id.into(), residual: f64::NAN, threshold, pass: false }
    }
}

/// Generator of `config` at `k` with one entry of C negated: the diagonal
/// entry of `plate`, or the off-diagonal entry below it when `off` is set.
pub fn corrupted_generator(config: &ValidatedConfig, k: f64, plate: usize, off: bool) -> Result<GeneratorMatrix> {
    let mut sm = build_abc(config, k)?;
    if off {
        sm.c.off_mut()[plate] *= -1.0;
    } else {
        sm.c.diag_mut()[plate] *= -1.0;
    }
    generator_from_matrices(&sm)
}

pub const ASSEMBLY_TOL: f64 = 1e-8;
pub const FLAT_FLUX_TOL: f64 = 1e-8;
pub const CURVED_FLUX_TOL: f64 = 1e-7;
pub const DIVERGENCE_TOL: f64 = 1e-6;
/// Negative controls must exceed this.
pub const TEETH: f64 = 1e-2;

/// Curved static geometry used by the flux checks.
pub fn curved_surfaces() -> StaticSurfacePair {
    StaticSurfacePair::new(Surface::Sech { base: 0.0, amp: 0.2 }, Surface::Gaussian { base: 1.0, amp: 0.3 })
        .expect("curved pair is separated")
}

/// Six plates, unit gaps, uniform flow 0.1.
fn six_plate_config() -> ValidatedConfig {
    ChannelConfig::uniform(6, 1.0, vec![0.1; 7]).validate().expect("valid")
}

fn assembly_case(id: String, config: &ValidatedConfig, k: f64) -> VerificationCase {
    match assembly_residual(config, k) {
        Ok(r) => VerificationCase::below(id, r, ASSEMBLY_TOL),
        Err(_) => VerificationCase::failed(id, ASSEMBLY_TOL),
    }
}

/// Every oracle with a fixed seed: divergence identity, flux identity on flat
/// and curved surfaces, assembly back-substitution over `configs` random
/// configurations, and the negative controls.
pub fn run_battery(seed: u64, configs: usize) -> Vec<VerificationCase> {
    use ManufacturedPotential::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();

    for j in 0..8 {
        let (x, y) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        cases.push(VerificationCase::below(format!("divergence/poly/{j}"), divergence_residual(&SaddleXY, &ProductXY, x, y, 1e-4), DIVERGENCE_TOL));
        cases.push(VerificationCase::below(format!("divergence/gauss/{j}"), divergence_residual(&GaussRe, &GaussRe, x, y, 1e-4), DIVERGENCE_TOL));
        cases.push(VerificationCase::below(format!("divergence/conjugate/{j}"), divergence_residual(&GaussRe, &GaussIm, x, y, 1e-4), DIVERGENCE_TOL));
    }
    // negative control at a point where d/dy Re e^{-z^2} is order one
    cases.push(VerificationCase::above("divergence/non-harmonic", divergence_residual(&GaussRe, &SquareX, 0.5, 0.5, 1e-4), TEETH));

    let mut flux = Vec::new();
    let flat = StaticSurfacePair::flat(0.0, 1.0).expect("separated");
    for k in [0.5, 1.0, 3.0] {
        for sign in [1.0, -1.0] {
            flux.push((format!("flux/flat/k={k}/kappa={sign:+}"), GaussRe, flat, k, sign, FLAT_FLUX_TOL));
            flux.push((format!("flux/curved/k={k}/kappa={sign:+}"), GaussRe, curved_surfaces(), k, sign, CURVED_FLUX_TOL));
            flux.push((format!("flux/curved-im/k={k}/kappa={sign:+}"), GaussIm, curved_surfaces(), k, sign, CURVED_FLUX_TOL));
        }
    }
    cases.extend(flux.into_par_iter().map(|(id, phi, s, k, sign, tol)| match boundary_flux_residual(&phi, &s, k, sign) {
        Ok(r) => VerificationCase::below(id, r.relative, tol),
        Err(_) => VerificationCase::failed(id, tol),
    }).collect::<Vec<_>>());
    let constant = boundary_flux_residual(&Constant(1.0), &curved_surfaces(), 1.0, 1.0).map_or(f64::NAN, |r| r.absolute);
    cases.push(VerificationCase::below("flux/constant", constant, 0.0));

    let mut assembly = vec![("assembly/six-plate/k=0.3".to_string(), six_plate_config(), 0.3)];
    for c in 0..configs {
        let cfg = random_config(&mut rng, 8, (0.5, 3.0), (-1.0, 1.0));
        for j in 0..5 {
            let k = rng.random_range(0.05..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            assembly.push((format!("assembly/random-{c}/{j}"), cfg.clone(), k));
        }
    }
    cases.extend(assembly.par_iter().map(|(id, cfg, k)| assembly_case(id.clone(), cfg, *k)).collect::<Vec<_>>());

    let cfg = six_plate_config();
    let mutated = corrupted_generator(&cfg, 0.3, 2, false).and_then(|g| assembly_residual_of(&cfg, &g));
    cases.push(match mutated {
        Ok(r) => VerificationCase::above("assembly/corrupted-c", r, TEETH),
        Err(_) => VerificationCase::failed("assembly/corrupted-c", TEETH),
    });
    cases
}
