use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decomposition::{split_nonoverlapping, split_overlapping, Decomposition};
use crate::error::{Result, TvError};
use crate::grid::{GridShape, Signal};
use crate::io::{read_csv, read_pgm, write_csv, write_pgm, PgmEncoding};
use crate::operators::{
    normalize_problem, read_index_set, sampling_pattern, write_index_set, MaskOperator, MeasurementOperator,
    NormalizedProblem, PartialFourierOperator,
};
use crate::solver::{solve, Algorithm, SolverConfig, SolverState};

use super::{phantom, Artifacts, ComponentGrowth, ExperimentConfig, ExperimentKind, Report};

const ALPHA_FRACTION_1D: f64 = 0.05;
const ALPHA_FRACTION_INPAINT: f64 = 0.01;
const ALPHA_FRACTION_CS: f64 = 0.005;

/// Iterations whose iterates the Fourier experiment always keeps.
const KEY_ITERATIONS: [usize; 9] = [1, 2, 5, 10, 20, 50, 100, 200, 500];

/// Collects output file names relative to the output directory.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| TvError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| TvError::io(parent, e))?;
        }
        self.written.push(name.to_string());
        Ok(p)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name)?;
        std::fs::write(&p, body).map_err(|e| TvError::io(&p, e))
    }

    fn csv(&mut self, name: &str, s: &Signal) -> Result<()> {
        let p = self.path(name)?;
        write_csv(&p, s)
    }

    fn pgm(&mut self, name: &str, s: &Signal) -> Result<()> {
        let p = self.path(name)?;
        write_pgm(&p, s, PgmEncoding::Binary)
    }
}

fn value_range(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn default_alpha(cfg: &ExperimentConfig, fraction: f64, data: &[f64]) -> f64 {
    cfg.alpha.unwrap_or_else(|| {
        let range = value_range(data);
        // a flat signal still needs a positive weight
        fraction * if range > 0.0 { range } else { 1.0 }
    })
}

fn solver_config(cfg: &ExperimentConfig, d: usize) -> Result<SolverConfig> {
    cfg.solver.validate(d)?;
    Ok(cfg.solver.clone())
}

/// Runs the scheme, writing snapshot files through `snap` when asked.
fn run_scheme<T: MeasurementOperator>(
    alg: Algorithm,
    problem: &NormalizedProblem<T>,
    dec: &Decomposition,
    solver: &SolverConfig,
    mut snap: impl FnMut(usize, &Signal) -> Result<()>,
) -> Result<SolverState> {
    let mut failure = None;
    let state = solve(alg, &problem.op, &problem.data, problem.alpha, dec, solver, &mut |n, u| {
        if failure.is_none() {
            if let Err(e) = snap(n, u) {
                failure = Some(e);
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(state),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn report(
    cfg: &ExperimentConfig,
    shape: &GridShape,
    alg: Algorithm,
    alpha: f64,
    factor: f64,
    overlap: Option<usize>,
    state: &SolverState,
    data_norm: f64,
) -> Report {
    let inc = state.max_energy_increase();
    Report {
        experiment: cfg.experiment,
        shape: shape.dims().to_vec(),
        algorithm: alg,
        alpha,
        normalization_factor: factor,
        subdomains: cfg.subdomains,
        overlap,
        outer_iterations: state.outer_iterations(),
        converged: state.converged,
        final_energy: state.final_energy() / (factor * factor),
        max_energy_increase: inc,
        energy_non_increasing: inc <= 1e-10,
        growth: ComponentGrowth::of(state, data_norm),
        diagnostics: state.diagnostics.clone(),
        relative_error: None,
        backprojection_error: None,
        ablation: None,
        artifacts: Vec::new(),
    }
}

fn finish(mut out: Outputs, mut report: Report, state: SolverState, ablation: Option<SolverState>) -> Result<Artifacts> {
    out.written.push("report.json".into());
    report.artifacts = out.written.clone();
    let json = serde_json::to_string_pretty(&report)?;
    let p = out.dir.join("report.json");
    std::fs::write(&p, json + "\n").map_err(|e| TvError::io(&p, e))?;
    Ok(Artifacts {
        out_dir: out.dir,
        report,
        state,
        ablation,
    })
}

/// 1D interpolation from data known only outside an interval, solved by the
/// overlapping scheme; optionally repeated without correction.
pub fn run_interpolate1d(cfg: &ExperimentConfig) -> Result<Artifacts> {
    expect_kind(cfg, ExperimentKind::Interpolate1d)?;
    cfg.validate()?;
    let signal = match &cfg.input {
        Some(p) => read_csv(p)?,
        None => {
            let n = cfg.length;
            if n < 4 {
                return Err(TvError::invalid(format!("signal length {n} too short")));
            }
            Signal::new(GridShape::d1(n)?, (0..n).map(|i| if i < n / 2 { 0.2 } else { 1.0 }).collect())?
        }
    };
    let shape = signal.shape().clone();
    let n = shape.len();
    let observed: Vec<bool> = match &cfg.mask {
        Some(p) => {
            let m = read_csv(p)?;
            if m.len() != n {
                return Err(TvError::invalid(format!("mask has {} entries, signal has {n}", m.len())));
            }
            m.values().iter().map(|&v| v != 0.0).collect()
        }
        None => {
            let [start, end] = cfg.gap.unwrap_or([(0.35 * n as f64).round() as usize, (0.65 * n as f64).round() as usize]);
            if start > end || end > n {
                return Err(TvError::invalid(format!("gap [{start}, {end}) does not fit a signal of length {n}")));
            }
            (0..n).map(|i| i < start || i >= end).collect()
        }
    };
    let op = MaskOperator::from_mask(shape.clone(), &observed, 1.0)?;
    let g = op.apply(&signal);
    let alpha = default_alpha(cfg, ALPHA_FRACTION_1D, &g);
    let problem = normalize_problem(&op, &g, alpha)?;
    let dec = split_overlapping(&shape, 0, cfg.subdomains, cfg.overlap)?;
    let solver = solver_config(cfg, 1)?;
    let alg = Algorithm::SequentialOverlapping;

    let mut out = Outputs::new(&cfg.out)?;
    let mut snaps = Vec::new();
    let state = run_scheme(alg, &problem, &dec, &solver, |k, u| {
        if cfg.snapshots {
            snaps.push((format!("snapshots/iter_{k:04}.csv"), u.clone()));
        }
        Ok(())
    })?;
    for (name, u) in &snaps {
        out.csv(name, u)?;
    }
    let data_norm = norm(&problem.data);
    let ablation = if cfg.ablation {
        let mut off = solver.clone();
        off.use_partition_correction = false;
        Some(run_scheme(alg, &problem, &dec, &off, |_, _| Ok(()))?)
    } else {
        None
    };

    out.csv("reconstruction.csv", &state.u)?;
    out.csv(
        "observed.csv",
        &Signal::new(shape.clone(), observed.iter().map(|&o| f64::from(u8::from(o))).collect())?,
    )?;
    out.text("trace.csv", &state.trace_csv())?;
    out.text("components.csv", &state.component_norms_csv())?;
    if let Some(a) = &ablation {
        out.text("ablation_trace.csv", &a.trace_csv())?;
        out.text("ablation_components.csv", &a.component_norms_csv())?;
    }
    let mut rep = report(cfg, &shape, alg, alpha, problem.factor, Some(cfg.overlap), &state, data_norm);
    rep.ablation = ablation.as_ref().map(|a| ComponentGrowth::of(a, data_norm));
    finish(out, rep, state, ablation)
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(TvError::invalid(format!(
            "{} config passed to the {} driver",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    Ok(())
}

/// Seeded inpainting mask: a two-column missing stripe plus randomly
/// missing pixels. `true` marks observed pixels.
fn synthetic_mask(shape: &GridShape, missing_fraction: f64, seed: u64) -> Vec<bool> {
    let n = shape.len();
    let cols = shape.dims()[1];
    let stripe = cols / 3;
    let mut observed: Vec<bool> = (0..n).map(|i| !(stripe..stripe + 2).contains(&(i % cols))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a5c);
    let count = (missing_fraction * n as f64).round() as usize;
    for i in sample(&mut rng, n, count.min(n)) {
        observed[i] = false;
    }
    observed
}

/// Inpainting of a grayscale image with the overlapping scheme.
pub fn run_inpaint2d(cfg: &ExperimentConfig) -> Result<Artifacts> {
    expect_kind(cfg, ExperimentKind::Inpaint2d)?;
    cfg.validate()?;
    let image = match &cfg.input {
        Some(p) => read_pgm(p)?,
        None => phantom(cfg.size, cfg.size, cfg.seed)?,
    };
    let shape = image.shape().clone();
    let observed = match &cfg.mask {
        Some(p) => {
            let m = read_pgm(p)?;
            if m.shape() != &shape {
                return Err(TvError::invalid(format!(
                    "mask is {:?} but image is {:?}",
                    m.shape().dims(),
                    shape.dims()
                )));
            }
            m.values().iter().map(|&v| v != 0.0).collect()
        }
        None => synthetic_mask(&shape, cfg.missing_fraction, cfg.seed),
    };
    let op = MaskOperator::from_mask(shape.clone(), &observed, 1.0)?;
    let g = op.apply(&image);
    let alpha = default_alpha(cfg, ALPHA_FRACTION_INPAINT, image.values());
    let problem = normalize_problem(&op, &g, alpha)?;
    let dec = split_overlapping(&shape, cfg.axis, cfg.subdomains, cfg.overlap)?;
    let solver = solver_config(cfg, 2)?;
    let alg = Algorithm::SequentialOverlapping;

    let mut out = Outputs::new(&cfg.out)?;
    let mut snaps = Vec::new();
    let state = run_scheme(alg, &problem, &dec, &solver, |k, u| {
        if cfg.snapshots {
            snaps.push((format!("snapshots/iter_{k:04}.pgm"), u.clone()));
        }
        Ok(())
    })?;
    for (name, u) in &snaps {
        out.pgm(name, u)?;
    }
    let mask_image = Signal::new(shape.clone(), observed.iter().map(|&o| f64::from(u8::from(o))).collect())?;
    out.pgm("input.pgm", &image)?;
    out.pgm("mask.pgm", &mask_image)?;
    out.pgm("observed.pgm", &image.mul(&mask_image))?;
    out.pgm("reconstruction.pgm", &state.u)?;
    out.text("trace.csv", &state.trace_csv())?;
    out.text("components.csv", &state.component_norms_csv())?;
    let mut rep = report(cfg, &shape, alg, alpha, problem.factor, Some(cfg.overlap), &state, norm(&problem.data));
    rep.relative_error = Some(state.u.sub(&image).norm() / image.norm().max(f64::MIN_POSITIVE));
    finish(out, rep, state, None)
}

/// Indicator of the sampled frequencies with the zero frequency moved to the center.
fn centered_mask(shape: &GridShape, freqs: &[usize]) -> Signal {
    let mut values = vec![0.0; shape.len()];
    let dims = shape.dims();
    for &f in freqs {
        let shifted: Vec<usize> = shape
            .multi_index(f)
            .iter()
            .zip(dims)
            .map(|(&i, &len)| (i + len / 2) % len)
            .collect();
        values[shape.flat_index(&shifted).expect("inside grid")] = 1.0;
    }
    Signal::from_raw(shape, values)
}

/// Compressed sensing from partial Fourier samples with a nonoverlapping scheme.
pub fn run_cs_fourier(cfg: &ExperimentConfig) -> Result<Artifacts> {
    expect_kind(cfg, ExperimentKind::CsFourier)?;
    cfg.validate()?;
    if cfg.algorithm == Algorithm::SequentialOverlapping {
        return Err(TvError::invalid("the Fourier experiment uses a nonoverlapping scheme"));
    }
    let truth = match &cfg.input {
        Some(p) => read_pgm(p)?,
        None => phantom(cfg.size, cfg.size, cfg.seed)?,
    };
    let shape = truth.shape().clone();
    let freqs = match &cfg.frequencies {
        Some(p) => read_index_set(p, &shape)?,
        None => sampling_pattern(&shape, cfg.fraction, cfg.low_block, cfg.seed)?,
    };
    let op = PartialFourierOperator::new(shape.clone(), freqs.clone(), 1.0)?;
    let g = op.apply(&truth);
    let backprojection = op.adjoint(&g);
    let alpha = default_alpha(cfg, ALPHA_FRACTION_CS, truth.values());
    let problem = normalize_problem(&op, &g, alpha)?;
    let dec = split_nonoverlapping(&shape, cfg.axis, cfg.subdomains)?;
    let solver = solver_config(cfg, 2)?;
    let alg = cfg.algorithm;

    let mut out = Outputs::new(&cfg.out)?;
    let mut snaps = Vec::new();
    let state = run_scheme(alg, &problem, &dec, &solver, |k, u| {
        if cfg.snapshots || KEY_ITERATIONS.contains(&k) {
            snaps.push((format!("snapshots/iter_{k:04}.pgm"), u.clone()));
        }
        Ok(())
    })?;
    for (name, u) in &snaps {
        out.pgm(name, u)?;
    }
    let sampling_path = out.path("sampling_set.txt")?;
    write_index_set(&sampling_path, &shape, &freqs)?;
    out.pgm("phantom.pgm", &truth)?;
    out.pgm("sampling_mask.pgm", &centered_mask(&shape, &freqs))?;
    out.pgm("backprojection.pgm", &backprojection)?;
    out.pgm("reconstruction.pgm", &state.u)?;
    out.text("trace.csv", &state.trace_csv())?;
    out.text("components.csv", &state.component_norms_csv())?;
    let scale = truth.norm().max(f64::MIN_POSITIVE);
    let mut rep = report(cfg, &shape, alg, alpha, problem.factor, None, &state, norm(&problem.data));
    rep.relative_error = Some(state.u.sub(&truth).norm() / scale);
    rep.backprojection_error = Some(backprojection.sub(&truth).norm() / scale);
    finish(out, rep, state, None)
}
