//! Channel geometry, mean flows and initial plate data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw channel description: interface heights bottom to top and one flow per gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub heights: Vec<f64>,
    pub flows: Vec<f64>,
}

impl ChannelConfig {
    pub fn new(heights: Vec<f64>, flows: Vec<f64>) -> Self {
        Self { heights, flows }
    }

    /// Channel with `n` plates, all gaps equal to `gap`, bottom wall at 0.
    pub fn uniform(n: usize, gap: f64, flows: Vec<f64>) -> Self {
        let heights = (0..n + 2).map(|i| i as f64 * gap).collect();
        Self { heights, flows }
    }

    /// Channel built from gap widths rather than absolute heights.
    pub fn from_gaps(gaps: &[f64], flows: Vec<f64>) -> Self {
        let mut heights = Vec::with_capacity(gaps.len() + 1);
        let mut h = 0.0;
        heights.push(h);
        for g in gaps {
            h += g;
            heights.push(h);
        }
        Self { heights, flows }
    }

    pub fn validate(&self) -> Result<ValidatedConfig> {
        validate(self)
    }
}

/// A configuration that passed validation, with derived gap widths cached.
///
/// Immutable once built, so it can be shared freely between worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    heights: Vec<f64>,
    flows: Vec<f64>,
    gaps: Vec<f64>,
    depth: f64,
}

/// A random configuration with `1..=max_n` plates, gaps drawn uniformly from
/// `gaps` and flows from `flows`.
pub fn random_config(rng: &mut impl Rng, max_n: usize, gaps: (f64, f64), flows: (f64, f64)) -> ValidatedConfig {
    let n = rng.random_range(1..=max_n);
    let g: Vec<f64> = (0..=n).map(|_| rng.random_range(gaps.0..=gaps.1)).collect();
    let u: Vec<f64> = (0..=n).map(|_| rng.random_range(flows.0..=flows.1)).collect();
    ChannelConfig::from_gaps(&g, u).validate().expect("positive gaps give a valid config")
}

pub fn validate(config: &ChannelConfig) -> Result<ValidatedConfig> {
    let h = &config.heights;
    if h.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 heights (one plate), got {}",
            h.len()
        )));
    }
    if let Some(i) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("height {i} is not finite")));
    }
    if let Some(i) = config.flows.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("flow {i} is not finite")));
    }
    for i in 0..h.len() - 1 {
        if h[i + 1] < h[i] {
            return Err(Error::NonMonotoneHeights { index: i + 1 });
        }
    }
    let gaps: Vec<f64> = h.windows(2).map(|w| w[1] - w[0]).collect();
    if let Some(i) = gaps.iter().position(|&d| d <= 0.0) {
        return Err(Error::NonPositiveGap { index: i });
    }
    let n = h.len() - 2;
    if config.flows.len() != n + 1 {
        return Err(Error::WrongFlowCount {
            expected: n + 1,
            got: config.flows.len(),
        });
    }
    Ok(ValidatedConfig {
        heights: h.clone(),
        flows: config.flows.clone(),
        depth: h[n + 1] - h[0],
        gaps,
    })
}

impl ValidatedConfig {
    /// Number of plates.
    pub fn n(&self) -> usize {
        self.heights.len() - 2
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    /// Mean flow in each of the n + 1 gaps, bottom to top.
    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    /// Gap widths; gap i sits between interface i and i + 1.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Total channel depth, top wall minus bottom wall.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn has_flow(&self) -> bool {
        self.flows.iter().any(|&u| u != 0.0)
    }

    pub fn to_config(&self) -> ChannelConfig {
        ChannelConfig::new(self.heights.clone(), self.flows.clone())
    }

    pub fn with_flows(&self, flows: Vec<f64>) -> Result<ValidatedConfig> {
        validate(&ChannelConfig::new(self.heights.clone(), flows))
    }

    /// Same flows, every gap multiplied by `factor`.
    pub fn scaled_gaps(&self, factor: f64) -> Result<ValidatedConfig> {
        let gaps: Vec<f64> = self.gaps.iter().map(|g| g * factor).collect();
        let mut c = ChannelConfig::from_gaps(&gaps, self.flows.clone());
        for h in &mut c.heights {
            *h += self.heights[0];
        }
        validate(&c)
    }
}

/// Which half of the state vector a bump initialises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    Displacement,
    Velocity,
}

/// `amplitude * exp(-((x - center) / width)^2)` on one plate (1-based index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub plate: usize,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "GaussianBump::default_width")]
    pub width: f64,
    #[serde(default = "GaussianBump::default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub field: Field,
}

impl GaussianBump {
    pub const DEFAULT_WIDTH: f64 = 2.0;
    pub const DEFAULT_AMPLITUDE: f64 = 0.1;

    fn default_width() -> f64 {
        Self::DEFAULT_WIDTH
    }

    fn default_amplitude() -> f64 {
        Self::DEFAULT_AMPLITUDE
    }

    pub fn on_plate(plate: usize) -> Self {
        Self {
            plate,
            center: 0.0,
            width: Self::DEFAULT_WIDTH,
            amplitude: Self::DEFAULT_AMPLITUDE,
            field: Field::Displacement,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.width;
        self.amplitude * (-s * s).exp()
    }
}

/// Initial displacement and velocity of every plate.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Gaussians { n: usize, bumps: Vec<GaussianBump> },
    /// Values at the nodes of a simulation grid, indexed `[plate][node]`.
    Sampled {
        displacement: Vec<Vec<f64>>,
        velocity: Vec<Vec<f64>>,
    },
}

impl InitialData {
    pub fn gaussians(n: usize, bumps: Vec<GaussianBump>) -> Result<Self> {
        for b in &bumps {
            if b.plate == 0 || b.plate > n {
                return Err(Error::InvalidConfig(format!(
                    "bump plate index {} outside 1..={n}",
                    b.plate
                )));
            }
            if !(b.width > 0.0 && b.width.is_finite()) {
                return Err(Error::InvalidConfig(format!("bump width {} must be positive", b.width)));
            }
            if !b.amplitude.is_finite() || !b.center.is_finite() {
                return Err(Error::InvalidConfig("bump parameters must be finite".into()));
            }
        }
        Ok(InitialData::Gaussians { n, bumps })
    }

    pub fn zero(n: usize) -> Self {
        InitialData::Gaussians { n, bumps: Vec::new() }
    }

    pub fn n(&self) -> usize {
        match self {
            InitialData::Gaussians { n, .. } => *n,
            InitialData::Sampled { displacement, .. } => displacement.len(),
        }
    }

    /// Samples `(displacement, velocity)` at the given nodes.
    pub fn sample(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        match self {
            InitialData::Gaussians { n, bumps } => {
                let mut disp = vec![vec![0.0; x.len()]; *n];
                let mut vel = vec![vec![0.0; x.len()]; *n];
                for b in bumps {
                    let target = match b.field {
                        Field::Displacement => &mut disp[b.plate - 1],
                        Field::Velocity => &mut vel[b.plate - 1],
                    };
                    for (v, &xj) in target.iter_mut().zip(x) {
                        *v += b.eval(xj);
                    }
                }
                Ok((disp, vel))
            }
            InitialData::Sampled { displacement, velocity } => {
                if velocity.len() != displacement.len()
                    || displacement.iter().chain(velocity).any(|p| p.len() != x.len())
                {
                    return Err(Error::InvalidConfig(format!(
                        "sampled data must have {} values per profile",
                        x.len()
                    )));
                }
                Ok((displacement.clone(), velocity.clone()))
            }
        }
    }
}

/// Checks that every profile is negligible at both ends of the sample range.
pub fn check_decay(profiles: &[Vec<f64>], rel_tol: f64) -> Result<()> {
    let peak = profiles
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(());
    }
    for (i, p) in profiles.iter().enumerate() {
        let edge = p.first().unwrap_or(&0.0).abs().max(p.last().unwrap_or(&0.0).abs());
        if edge > rel_tol * peak {
            return Err(Error::NonDecayingData(format!(
                "profile {i} has boundary value {edge:e} against peak {peak:e}"
            )));
        }
    }
    Ok(())
}

/// On-disk configuration: channel plus optional Gaussian initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub heights: Vec<f64>,
    pub flows: Vec<f64>,
    #[serde(default)]
    pub initial: Vec<GaussianBump>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn channel(&self) -> Result<ValidatedConfig> {
        validate(&ChannelConfig::new(self.heights.clone(), self.flows.clone()))
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        let n = self.heights.len().saturating_sub(2);
        InitialData::gaussians(n, self.initial.clone())
    }
}
