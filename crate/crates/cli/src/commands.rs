//! Subcommand implementations.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use plate_channel::channel::ConfigFile;
use plate_channel::linalg::{abscissa, eigenvalues};
use plate_channel::ndim::{default_directions, ndim_classify_on, ndim_generator, NdChannelConfig};
use plate_channel::propagator::{simulate as run_simulation, SimGrid};
use plate_channel::pseudospectrum::{compute_grid, extract_contours, width_at, DEFAULT_RESOLUTION, FIGURE_LEVELS};
use plate_channel::spectral::{build_abc, build_generator};
use plate_channel::stability::{
    classify_on, default_scan_grid, geomspace, greens_function, linspace, power_law_exponent, spectrum_scan, Quadrature,
};
use plate_channel::verifier::run_battery;
use plate_channel::ValidatedConfig;

use crate::output::{num, resolve_dir, sha256_hex, tagged, Run};
use crate::CliError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GridSpec {
    half_width: f64,
    points: usize,
}

/// Optional run parameters a recipe file may carry next to the channel.
#[derive(Debug, Default, Deserialize)]
struct Recipe {
    grid: Option<GridSpec>,
    times: Option<Vec<f64>>,
    k: Option<Vec<f64>>,
    levels: Option<Vec<f64>>,
    resolution: Option<usize>,
    velocity: Option<f64>,
}

struct Input {
    hash: String,
    file: ConfigFile,
    recipe: Recipe,
}

fn read(path: &Path) -> Result<(String, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((sha256_hex(text.as_bytes()), text))
}

fn load(path: &Path) -> Result<Input, CliError> {
    let (hash, text) = read(path)?;
    let file = ConfigFile::from_json(&text)?;
    let recipe = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Input { hash, file, recipe })
}

fn eigen_header(n: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((1..=2 * n).map(|j| format!("re_{j}")));
    h.extend((1..=2 * n).map(|j| format!("im_{j}")));
    h.push("alpha".into());
    h
}

fn eigen_row(lead: Vec<String>, values: &[plate_channel::Complex64]) -> Vec<String> {
    let mut r = lead;
    r.extend(values.iter().map(|z| num(z.re)));
    r.extend(values.iter().map(|z| num(z.im)));
    r.push(num(abscissa(values)));
    r
}

pub fn simulate(
    path: &Path,
    out: Option<&Path>,
    half_width: Option<f64>,
    points: Option<usize>,
    times: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let input = load(path)?;
    let cfg = input.file.channel()?;
    let data = input.file.initial_data()?;
    let spec = input.recipe.grid;
    let default = SimGrid::default();
    let grid = SimGrid::new(
        half_width.or(spec.map(|g| g.half_width)).unwrap_or(default.half_width()),
        points.or(spec.map(|g| g.points)).unwrap_or(default.points()),
    )?;
    let times = times.or(input.recipe.times).unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0]);
    if times.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Config("times must be finite".into()));
    }

    let mut run = Run::start(resolve_dir(out, "simulate"), "simulate", input.hash)?;
    run.set_parameters(json!({
        "config": input.file,
        "grid": { "half_width": grid.half_width(), "points": grid.points() },
        "times": times,
    }));
    let fields = run_simulation(&cfg, &data, &grid, &times)?;
    let n = cfg.n();
    let mut header = vec!["x".to_string()];
    header.extend((1..=n).map(|p| format!("eta_{p}")));
    header.extend((1..=n).map(|p| format!("deta_{p}")));
    for f in &fields {
        let rows: Vec<Vec<String>> = (0..f.x.len())
            .map(|j| {
                let mut r = vec![num(f.x[j])];
                r.extend(f.displacement.iter().map(|d| num(d[j])));
                r.extend(f.velocity.iter().map(|v| num(v[j])));
                r
            })
            .collect();
        run.csv(&tagged("field_t", f.t, "csv"), &header, &rows)?;
        println!("t = {}  max|eta| = {:.6e}", f.t, f.max_displacement());
    }
    run.finish()?;
    Ok(())
}

fn scan_grid(cfg: &ValidatedConfig, range: Option<(f64, f64)>, count: usize) -> Result<Vec<f64>, CliError> {
    match range {
        _ if count < 2 => Err(CliError::Config("count must be at least 2".into())),
        None => {
            let d = default_scan_grid(cfg);
            Ok(geomspace(d[0], d[d.len() - 1], count))
        }
        Some((a, b)) if !(a < b) => Err(CliError::Config("need kmin < kmax".into())),
        Some((a, b)) if a > 0.0 => Ok(geomspace(a, b, count)),
        Some((a, b)) => Ok(linspace(a, b, count)),
    }
}

pub fn stability(path: &Path, out: Option<&Path>, range: Option<(f64, f64)>, count: usize) -> Result<(), CliError> {
    let input = load(path)?;
    let cfg = input.file.channel()?;
    let kgrid = scan_grid(&cfg, range, count)?;
    let mut run = Run::start(resolve_dir(out, "stability"), "stability", input.hash)?;
    run.set_parameters(json!({
        "heights": cfg.heights(),
        "flows": cfg.flows(),
        "kmin": kgrid.first(),
        "kmax": kgrid.last(),
        "count": kgrid.len(),
    }));
    let report = classify_on(&cfg, &kgrid)?;
    let samples = spectrum_scan(&cfg, &kgrid)?;
    let rows: Vec<Vec<String>> = samples.iter().map(|s| eigen_row(vec![num(s.k)], &s.eigenvalues)).collect();
    run.csv("spectrum.csv", &eigen_header(cfg.n()), &rows)?;
    run.json("intervals.json", &report.intervals)?;
    run.json(
        "report.json",
        &json!({
            "verdict": report.verdict,
            "max_abscissa": report.max_abscissa,
            "max_abscissa_in_k": report.max_abscissa_in_k,
            "corroborated": report.corroborated,
            "slope": report.slope,
            "diagnostics": report.diagnostics,
        }),
    )?;
    let verdict = match report.verdict {
        plate_channel::stability::Verdict::Stable => "stable",
        plate_channel::stability::Verdict::Unstable => "unstable",
    };
    println!("{verdict}");
    let k: Vec<String> = report.intervals.union.iter().map(|i| format!("[{:.6e}, {:.6e}]", i.lo, i.hi)).collect();
    println!("K = {{{}}}", k.join(", "));
    println!("max alpha = {:.6e}", report.max_abscissa);
    run.finish()?;
    Ok(())
}

pub fn spectrum(path: &Path, out: Option<&Path>, ks: &[f64], dump: bool) -> Result<(), CliError> {
    let input = load(path)?;
    let cfg = input.file.channel()?;
    let mut run = Run::start(resolve_dir(out, "spectrum"), "spectrum", input.hash)?;
    run.set_parameters(json!({ "heights": cfg.heights(), "flows": cfg.flows(), "k": ks }));
    let mut rows = Vec::new();
    for &k in ks {
        let g = build_generator(&cfg, k).map_err(|e| e.at_k(k))?;
        let ev = eigenvalues(&g.m).map_err(|e| e.at_k(k))?;
        rows.push(eigen_row(vec![num(k)], &ev));
        if dump {
            let header: Vec<String> = ["matrix", "i", "j", "re", "im"].map(String::from).to_vec();
            let mut d = Vec::new();
            if k != 0.0 {
                let sm = build_abc(&cfg, k)?;
                for (name, t) in [("A", &sm.a), ("B", &sm.b), ("C", &sm.c)] {
                    for i in 0..t.n() {
                        for j in 0..t.n() {
                            d.push(vec![name.into(), i.to_string(), j.to_string(), num(t.get(i, j)), num(0.0)]);
                        }
                    }
                }
            }
            for i in 0..g.m.nrows() {
                for j in 0..g.m.ncols() {
                    let z = g.m[(i, j)];
                    d.push(vec!["M".into(), i.to_string(), j.to_string(), num(z.re), num(z.im)]);
                }
            }
            run.csv(&tagged("matrices_k", k, "csv"), &header, &d)?;
        }
    }
    run.csv("eigenvalues.csv", &eigen_header(cfg.n()), &rows)?;
    run.finish()?;
    Ok(())
}

pub fn pseudospec(
    path: &Path,
    out: Option<&Path>,
    ks: Option<Vec<f64>>,
    levels: Option<Vec<f64>>,
    resolution: Option<usize>,
) -> Result<(), CliError> {
    let input = load(path)?;
    let cfg = input.file.channel()?;
    let ks = ks.or(input.recipe.k).unwrap_or_else(|| vec![1.0, 0.5, 0.1, 0.01]);
    let levels = levels.or(input.recipe.levels).unwrap_or_else(|| FIGURE_LEVELS.to_vec());
    let resolution = resolution.or(input.recipe.resolution).unwrap_or(DEFAULT_RESOLUTION);
    if levels.is_empty() || levels.iter().any(|l| !(*l > 0.0)) {
        return Err(CliError::Config("levels must be positive".into()));
    }
    if resolution < 3 {
        return Err(CliError::Config("resolution must be at least 3".into()));
    }
    let max_level = levels.iter().cloned().fold(0.0, f64::max);
    let mut run = Run::start(resolve_dir(out, "pseudospec"), "pseudospec", input.hash)?;
    run.set_parameters(json!({
        "heights": cfg.heights(), "flows": cfg.flows(), "k": ks, "levels": levels, "resolution": resolution,
    }));
    let mut widths = Vec::new();
    for &k in &ks {
        let grid = compute_grid(&cfg, k, None, resolution, max_level)?;
        let header: Vec<String> = ["re", "im", "sigma_min"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = (0..grid.ny())
            .flat_map(|j| (0..grid.nx()).map(move |i| (i, j)))
            .map(|(i, j)| vec![num(grid.re[i]), num(grid.im[j]), num(grid.at(i, j))])
            .collect();
        run.csv(&tagged("field_k", k, "csv"), &header, &rows)?;
        let contours = extract_contours(&grid, &levels)?;
        run.json(&tagged("contours_k", k, "json"), &json!({ "k": k, "contours": contours }))?;
        for &l in &levels {
            let w = width_at(&grid, l).ok();
            if let Some(w) = w {
                println!("k = {k}  eps = {l:.4e}  width/eps = {:.4}", w / l);
            }
            widths.push(json!({ "k": k, "level": l, "width": w, "ratio": w.map(|w| w / l) }));
        }
    }
    run.json("widths.json", &widths)?;
    run.finish()?;
    Ok(())
}

pub fn greens(
    path: &Path,
    out: Option<&Path>,
    velocity: Option<f64>,
    times: Option<Vec<f64>>,
    k_cut: Option<f64>,
) -> Result<(), CliError> {
    let input = load(path)?;
    let cfg = input.file.channel()?;
    let v = velocity.or(input.recipe.velocity).unwrap_or(0.0);
    let times = times.or(input.recipe.times).unwrap_or_else(|| (1..=10).map(|i| 10.0 * i as f64).collect());
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(CliError::Config("times must be positive".into()));
    }
    let mut q = Quadrature::default();
    if let Some(kc) = k_cut {
        q.k_cut = kc;
    }
    let mut run = Run::start(resolve_dir(out, "greens"), "greens", input.hash)?;
    run.set_parameters(json!({
        "heights": cfg.heights(), "flows": cfg.flows(), "velocity": v, "times": times, "quadrature": q,
    }));
    let header: Vec<String> = ["t", "V", "norm", "block_dd", "block_dv", "block_vd", "block_vv", "k_max", "nodes", "change"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    let mut norms = Vec::new();
    for &t in &times {
        let s = greens_function(&cfg, v, t, &q)?;
        let mut r = vec![num(t), num(v), num(s.norm)];
        r.extend(s.block_norms.iter().map(|b| num(*b)));
        r.extend([num(s.k_max), s.nodes.to_string(), num(s.change)]);
        rows.push(r);
        norms.push(s.norm);
        println!("t = {t}  |G| = {:.6e}", s.norm);
    }
    run.csv("greens.csv", &header, &rows)?;
    if times.len() >= 2 {
        let p = power_law_exponent(&times, &norms);
        println!("power-law exponent = {p:.4}");
        run.json("fit.json", &json!({ "exponent": p }))?;
    }
    run.finish()?;
    Ok(())
}

pub fn verify(out: Option<&Path>, seed: u64, configs: usize) -> Result<(), CliError> {
    let params = json!({ "seed": seed, "configs": configs });
    let mut run = Run::start(resolve_dir(out, "verify"), "verify", sha256_hex(params.to_string().as_bytes()))?;
    run.set_parameters(params);
    let cases = run_battery(seed, configs);
    run.json("report.json", &cases)?;
    let failed: Vec<_> = cases.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        println!("FAIL {}  residual = {:e}  threshold = {:e}", c.id, c.residual, c.threshold);
    }
    println!("{} of {} cases passed", cases.len() - failed.len(), cases.len());
    run.finish()?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.len()))
    }
}

pub fn ndim_spectrum(path: &Path, out: Option<&Path>, directions: usize, radii: usize, kmax: f64) -> Result<(), CliError> {
    let (hash, text) = read(path)?;
    let raw: NdChannelConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = raw.validate()?;
    if radii < 2 || !(kmax > 0.0) {
        return Err(CliError::Config("need radii >= 2 and kmax > 0".into()));
    }
    let dirs = default_directions(&cfg, directions);
    let rs = geomspace(1e-4 / cfg.min_gap().max(1.0), kmax, radii);
    let mut run = Run::start(resolve_dir(out, "ndim-spectrum"), "ndim-spectrum", hash)?;
    run.set_parameters(json!({ "config": raw, "directions": dirs, "radii": rs }));

    let pairs: Vec<(usize, f64)> = (0..dirs.len()).flat_map(|d| rs.iter().map(move |&r| (d, r))).collect();
    let rows: Vec<Vec<String>> = pairs
        .par_iter()
        .map(|&(d, r)| {
            let k: Vec<f64> = dirs[d].iter().map(|c| c * r).collect();
            let g = ndim_generator(&cfg, &k)?;
            let ev = eigenvalues(&g.m).map_err(|e| e.at_k(r))?;
            let mut lead: Vec<String> = dirs[d].iter().map(|c| num(*c)).collect();
            lead.push(num(r));
            Ok(eigen_row(lead, &ev))
        })
        .collect::<Result<_, plate_channel::Error>>()?;
    let mut header: Vec<String> = (1..=cfg.dim()).map(|j| format!("khat_{j}")).collect();
    header.extend(eigen_header(cfg.n()).into_iter().skip(1).collect::<Vec<_>>());
    header.insert(cfg.dim(), "knorm".into());
    run.csv("spectrum.csv", &header, &rows)?;
    let report = ndim_classify_on(&cfg, &dirs, &rs)?;
    run.json("report.json", &report)?;
    let verdict = match report.verdict {
        plate_channel::stability::Verdict::Stable => "stable",
        plate_channel::stability::Verdict::Unstable => "unstable",
    };
    println!("{verdict}");
    println!("max alpha = {:.6e}", report.max_abscissa);
    run.finish()?;
    Ok(())
}
