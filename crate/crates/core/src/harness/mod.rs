//! End-to-end experiment drivers behind the `tvdd` command-line tool.
//!
//! Each experiment synthesizes (or reads) its data, normalizes the
//! problem, runs a decomposition solver and writes its artifacts to an
//! output directory. Configuration is JSON; see [`ExperimentConfig`].

mod experiments;
mod phantom;
mod selftest;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, TvError};
use crate::solver::{Algorithm, Diagnostics, SolverConfig, SolverState};

pub use experiments::{run_cs_fourier, run_inpaint2d, run_interpolate1d};
pub use phantom::phantom;
pub use selftest::{selftest, SelfCheck};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Interpolate1d,
    Inpaint2d,
    CsFourier,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Interpolate1d => "interpolate1d",
            ExperimentKind::Inpaint2d => "inpaint2d",
            ExperimentKind::CsFourier => "cs-fourier",
        }
    }
}

/// Settings of one experiment run.
///
/// Fields left out of a JSON config file keep the per-experiment defaults
/// of [`ExperimentConfig::defaults`]; nested `solver` fields merge the
/// same way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Signal (CSV) or image (PGM) to measure. Synthesized when absent.
    pub input: Option<PathBuf>,
    /// Observation mask: CSV for 1D (nonzero = observed), PGM for 2D (0 = missing).
    pub mask: Option<PathBuf>,
    /// Sampled frequency list, one multi-index per line.
    pub frequencies: Option<PathBuf>,
    /// Length of the synthetic 1D signal.
    pub length: usize,
    /// Unobserved interval `[start, end)` of the 1D experiment; the middle
    /// 30% when absent.
    pub gap: Option<[usize; 2]>,
    /// Side length of synthetic images.
    pub size: usize,
    /// Fraction of sampled frequencies.
    pub fraction: f64,
    /// Side of the centered low-frequency block that is always sampled.
    pub low_block: usize,
    /// Fraction of randomly missing pixels in the synthetic inpainting mask.
    pub missing_fraction: f64,
    /// Regularization weight; a fixed fraction of the data range when absent.
    pub alpha: Option<f64>,
    pub subdomains: usize,
    pub axis: usize,
    /// Shared grid lines between neighbouring overlapping subdomains.
    pub overlap: usize,
    /// Also run the 1D experiment without partition-of-unity correction.
    pub ablation: bool,
    /// Scheme for the Fourier experiment (the other two always overlap).
    pub algorithm: Algorithm,
    pub solver: SolverConfig,
    pub seed: u64,
    pub out: PathBuf,
    /// Write the iterate after every outer iteration.
    pub snapshots: bool,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            input: None,
            mask: None,
            frequencies: None,
            length: 100,
            gap: None,
            size: 32,
            fraction: 0.3,
            low_block: 8,
            missing_fraction: 0.2,
            alpha: None,
            subdomains: 4,
            axis: 0,
            overlap: 4,
            ablation: true,
            algorithm: Algorithm::SequentialOverlapping,
            solver: SolverConfig::for_dim(2),
            seed: 7,
            out: PathBuf::from(format!("out/{}", kind.name())),
            snapshots: false,
        };
        match kind {
            ExperimentKind::Interpolate1d => ExperimentConfig {
                subdomains: 2,
                overlap: 40,
                solver: SolverConfig::for_dim(1),
                ..base
            },
            ExperimentKind::Inpaint2d => base,
            ExperimentKind::CsFourier => ExperimentConfig {
                size: 64,
                algorithm: Algorithm::SequentialNonoverlapping,
                ..base
            },
        }
    }

    /// Parses a JSON config, filling missing fields from the defaults of `kind`.
    pub fn from_json(text: &str, kind: ExperimentKind) -> Result<Self> {
        let file: Value = serde_json::from_str(text)?;
        if !file.is_object() {
            return Err(TvError::invalid("config file must hold a JSON object"));
        }
        let mut merged = serde_json::to_value(Self::defaults(kind))?;
        overlay(&mut merged, file);
        let cfg: ExperimentConfig = serde_json::from_value(merged)?;
        if cfg.experiment != kind {
            return Err(TvError::invalid(format!(
                "config is for {}, not {}",
                cfg.experiment.name(),
                kind.name()
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| TvError::io(path, e))?;
        Self::from_json(&text, kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the invariants that can be verified before any work is done.
    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(TvError::invalid(format!("alpha must be positive, got {a}")));
            }
        }
        for path in [&self.input, &self.mask, &self.frequencies].into_iter().flatten() {
            if !path.exists() {
                return Err(TvError::invalid(format!("{} does not exist", path.display())));
            }
        }
        if self.subdomains == 0 {
            return Err(TvError::invalid("at least one subdomain is required"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(TvError::invalid(format!("frequency fraction {} outside (0, 1]", self.fraction)));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(TvError::invalid(format!("missing fraction {} outside [0, 1)", self.missing_fraction)));
        }
        Ok(())
    }
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Component growth of a run, compared with the data norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentGrowth {
    pub data_norm: f64,
    /// Largest local component norm over the whole run.
    pub max_component_norm: f64,
    /// Largest local component norm within the first 50 outer iterations.
    pub max_component_norm_first_50: f64,
    /// Largest ratio of component norm to iterate norm.
    pub max_component_ratio: f64,
    /// Some component exceeded ten times the data norm.
    pub unbounded: bool,
}

impl ComponentGrowth {
    pub fn of(state: &SolverState, data_norm: f64) -> Self {
        let max_upto = |k: usize| {
            state
                .trace
                .iter()
                .take(k + 1)
                .map(|t| t.max_component_norm)
                .fold(0.0, f64::max)
        };
        let max_component_norm = max_upto(state.trace.len());
        let max_component_ratio = state
            .trace
            .iter()
            .filter(|t| t.solution_norm > 0.0)
            .map(|t| t.max_component_norm / t.solution_norm)
            .fold(0.0, f64::max);
        ComponentGrowth {
            data_norm,
            max_component_norm,
            max_component_norm_first_50: max_upto(50),
            max_component_ratio,
            unbounded: max_component_norm > 10.0 * data_norm,
        }
    }
}

/// Summary written to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub shape: Vec<usize>,
    pub algorithm: Algorithm,
    pub alpha: f64,
    /// Operator rescaling `c`; the solver works with `cT`, `cg`, `c^2 alpha`.
    pub normalization_factor: f64,
    pub subdomains: usize,
    pub overlap: Option<usize>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Energy of the final iterate for the original (unscaled) problem.
    pub final_energy: f64,
    pub max_energy_increase: f64,
    pub energy_non_increasing: bool,
    pub growth: ComponentGrowth,
    pub diagnostics: Diagnostics,
    pub relative_error: Option<f64>,
    pub backprojection_error: Option<f64>,
    /// The same run without partition-of-unity correction.
    pub ablation: Option<ComponentGrowth>,
    pub artifacts: Vec<String>,
}

/// Files written by a run together with the solver output.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub out_dir: PathBuf,
    pub report: Report,
    pub state: SolverState,
    pub ablation: Option<SolverState>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    match cfg.experiment {
        ExperimentKind::Interpolate1d => run_interpolate1d(cfg),
        ExperimentKind::Inpaint2d => run_inpaint2d(cfg),
        ExperimentKind::CsFourier => run_cs_fourier(cfg),
    }
}

/// Worker count from `TVDD_THREADS`; `None` when unset, an error when malformed.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("TVDD_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| TvError::invalid(format!("TVDD_THREADS must be a nonnegative integer, got {s:?}"))),
        Err(_) => Ok(None),
    }
}
