//! Epsilon-pseudospectra on rectangular grids, level-set contours and widths.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ValidatedConfig;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, smallest_singular_value, CMat};
use crate::spectral::build_generator;

/// Rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

/// `sigma_min(M - lambda I)` sampled on a grid; `sigma[j * nx + i]` sits at `(re[i], im[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoGrid {
    pub k: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub sigma: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
}

impl PseudoGrid {
    pub fn nx(&self) -> usize {
        self.re.len()
    }

    pub fn ny(&self) -> usize {
        self.im.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.sigma[j * self.nx() + i]
    }

    pub fn range(&self) -> (f64, f64) {
        self.sigma
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    fn check_level(&self, level: f64) -> Result<()> {
        let (min, max) = self.range();
        if !(level > 0.0) || level < min || level > max {
            return Err(Error::LevelOutOfRange { level, min, max });
        }
        Ok(())
    }
}

pub const DEFAULT_RESOLUTION: usize = 201;
#[allow(clippy::excessive_precision)]
pub const FIGURE_LEVELS: [f64; 4] = [1e-1, 0.031622776601683794, 1e-2, 0.0031622776601683794];

fn axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn shifted_smin(m: &CMat, z: Complex64) -> f64 {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= z;
    }
    smallest_singular_value(&a)
}

/// Field of `sigma_min(m - lambda I)` over a window.
pub fn field_on(m: &CMat, k: f64, window: Window, nx: usize, ny: usize) -> Result<PseudoGrid> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidGrid("pseudospectrum grid needs at least 2 x 2 nodes".into()));
    }
    let eigenvalues = eigenvalues(m)?;
    let re = axis(window.re.0, window.re.1, nx);
    let im = axis(window.im.0, window.im.1, ny);
    let sigma = (0..nx * ny)
        .into_par_iter()
        .map(|idx| shifted_smin(m, Complex64::new(re[idx % nx], im[idx / nx])))
        .collect();
    Ok(PseudoGrid { k, re, im, sigma, eigenvalues })
}

/// Eigenvalue bounding box inflated by `3 * max_level`, widened until the
/// field on the boundary is at least `max_level` so no sublevel set is clipped.
pub fn auto_window(m: &CMat, max_level: f64) -> Result<Window> {
    let ev = eigenvalues(m)?;
    let (mut r0, mut r1, mut i0, mut i1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in &ev {
        r0 = r0.min(z.re);
        r1 = r1.max(z.re);
        i0 = i0.min(z.im);
        i1 = i1.max(z.im);
    }
    let mut margin = 3.0 * max_level;
    for _ in 0..20 {
        let w = Window {
            re: (r0 - margin, r1 + margin),
            im: (i0 - margin, i1 + margin),
        };
        let probe = 64;
        let mut ok = true;
        'edges: for s in 0..=probe {
            let f = s as f64 / probe as f64;
            let x = w.re.0 + f * (w.re.1 - w.re.0);
            let y = w.im.0 + f * (w.im.1 - w.im.0);
            for z in [
                Complex64::new(x, w.im.0),
                Complex64::new(x, w.im.1),
                Complex64::new(w.re.0, y),
                Complex64::new(w.re.1, y),
            ] {
                if shifted_smin(m, z) < max_level {
                    ok = false;
                    break 'edges;
                }
            }
        }
        if ok {
            return Ok(w);
        }
        margin *= 2.0;
    }
    Ok(Window {
        re: (r0 - margin, r1 + margin),
        im: (i0 - margin, i1 + margin),
    })
}

/// Pseudospectral field of M(k); the window defaults to [`auto_window`] for `max_level`.
pub fn compute_grid(
    config: &ValidatedConfig,
    k: f64,
    window: Option<Window>,
    resolution: usize,
    max_level: f64,
) -> Result<PseudoGrid> {
    let g = build_generator(config, k).map_err(|e| e.at_k(k))?;
    let w = match window {
        Some(w) => w,
        None => auto_window(&g.m, max_level)?,
    };
    field_on(&g.m, k, w, resolution, resolution)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSet {
    pub level: f64,
    /// Polylines of `(re, im)` points; closed ones repeat their first point.
    pub lines: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    // between nodes (i, j) and (i + 1, j)
    H(usize, usize),
    // between nodes (i, j) and (i, j + 1)
    V(usize, usize),
}

fn crossing(g: &PseudoGrid, e: Edge, level: f64) -> (f64, f64) {
    let (a, b, pa, pb) = match e {
        Edge::H(i, j) => (g.at(i, j), g.at(i + 1, j), (g.re[i], g.im[j]), (g.re[i + 1], g.im[j])),
        Edge::V(i, j) => (g.at(i, j), g.at(i, j + 1), (g.re[i], g.im[j]), (g.re[i], g.im[j + 1])),
    };
    let t = if a == b { 0.5 } else { ((level - a) / (b - a)).clamp(0.0, 1.0) };
    (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))
}

/// Marching-squares level curves of the field.
pub fn extract_contours(grid: &PseudoGrid, levels: &[f64]) -> Result<Vec<ContourSet>> {
    levels
        .iter()
        .map(|&level| {
            grid.check_level(level)?;
            Ok(ContourSet { level, lines: contour(grid, level) })
        })
        .collect()
}

fn contour(g: &PseudoGrid, level: f64) -> Vec<Vec<(f64, f64)>> {
    let mut segs: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..g.ny() - 1 {
        for i in 0..g.nx() - 1 {
            let v = [g.at(i, j), g.at(i + 1, j), g.at(i + 1, j + 1), g.at(i, j + 1)];
            let inside = v.map(|x| x < level);
            let case = inside.iter().enumerate().fold(0u8, |c, (b, &f)| c | ((f as u8) << b));
            let bottom = Edge::H(i, j);
            let right = Edge::V(i + 1, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            match case {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 | 10 => {
                    let centre_inside = (v.iter().sum::<f64>() / 4.0) < level;
                    if (case == 5) == centre_inside {
                        segs.push((left, top));
                        segs.push((bottom, right));
                    } else {
                        segs.push((left, bottom));
                        segs.push((right, top));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut at: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segs.iter().enumerate() {
        at.entry(a).or_default().push(s);
        at.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    let take = |edge: Edge, used: &mut Vec<bool>| -> Option<Edge> {
        let o = at[&edge].iter().copied().find(|&o| !used[o])?;
        used[o] = true;
        Some(if segs[o].0 == edge { segs[o].1 } else { segs[o].0 })
    };
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut chain = VecDeque::from([segs[start].0, segs[start].1]);
        while let Some(e) = take(*chain.back().unwrap(), &mut used) {
            chain.push_back(e);
        }
        while let Some(e) = take(*chain.front().unwrap(), &mut used) {
            chain.push_front(e);
        }
        lines.push(chain.into_iter().map(|e| crossing(g, e, level)).collect());
    }
    lines
}

/// Largest horizontal extent of a 4-connected component of `{sigma < level}`,
/// with endpoints located by linear interpolation between nodes.
pub fn width_at(grid: &PseudoGrid, level: f64) -> Result<f64> {
    grid.check_level(level)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let inside: Vec<bool> = grid.sigma.iter().map(|&v| v < level).collect();
    let mut label = vec![usize::MAX; nx * ny];
    let mut best = 0.0f64;
    let mut stack = Vec::new();
    let mut next_label = 0;
    for seed in 0..nx * ny {
        if !inside[seed] || label[seed] != usize::MAX {
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        label[seed] = next_label;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            let (i, j) = (p % nx, p / nx);
            let left = if i > 0 && !inside[p - 1] {
                let (a, b) = (grid.at(i - 1, j), grid.at(i, j));
                let t = (level - b) / (a - b);
                grid.re[i] + t * (grid.re[i - 1] - grid.re[i])
            } else {
                grid.re[i]
            };
            let right = if i + 1 < nx && !inside[p + 1] {
                let (a, b) = (grid.at(i, j), grid.at(i + 1, j));
                let t = (level - a) / (b - a);
                grid.re[i] + t * (grid.re[i + 1] - grid.re[i])
            } else {
                grid.re[i]
            };
            lo = lo.min(left);
            hi = hi.max(right);
            let mut nb = Vec::with_capacity(4);
            if i > 0 {
                nb.push(p - 1);
            }
            if i + 1 < nx {
                nb.push(p + 1);
            }
            if j > 0 {
                nb.push(p - nx);
            }
            if j + 1 < ny {
                nb.push(p + nx);
            }
            for q in nb {
                if inside[q] && label[q] == usize::MAX {
                    label[q] = next_label;
                    stack.push(q);
                }
            }
        }
        next_label += 1;
        best = best.max(hi - lo);
    }
    Ok(best)
}
