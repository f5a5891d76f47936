use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvError};
use crate::grid::Signal;

/// One row of the energy trace; row `n` describes the iterate `u^(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub energy: f64,
    /// `||u^(n) - u^(n-1)||_2`, zero for the initial row.
    pub increment_norm: f64,
    /// Largest norm among the local components carried into the next sweep.
    pub max_component_norm: f64,
    /// Largest final dual increment of the projections in this sweep.
    pub projection_residual: f64,
    pub solution_norm: f64,
    pub component_norms: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub inner_steps: usize,
    /// Steps whose candidate failed to lower the surrogate; the previous iterate was kept.
    pub rejected_steps: usize,
    pub projection_iterations: usize,
    pub projections_unconverged: usize,
    pub multipliers_unconverged: usize,
    pub max_multiplier_residual: f64,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub u: Signal,
    pub components: Vec<Signal>,
    pub trace: Vec<TraceEntry>,
    pub diagnostics: Diagnostics,
    /// The increment dropped below `outer_tol` before the iteration budget ran out.
    pub converged: bool,
}

impl SolverState {
    pub fn final_energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.energy)
    }

    pub fn outer_iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    /// Largest `J(u^(n+1)) - J(u^(n))` along the trace (negative when strictly decreasing).
    pub fn max_energy_increase(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_increment(&self) -> f64 {
        self.trace
            .iter()
            .skip(1)
            .map(|t| t.increment_norm)
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `iter,energy,increment_norm,max_component_norm,projection_residual`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,energy,increment_norm,max_component_norm,projection_residual\n");
        for t in &self.trace {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                t.iter, t.energy, t.increment_norm, t.max_component_norm, t.projection_residual
            ));
        }
        s
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| TvError::io(path, e))?;
        f.write_all(self.trace_csv().as_bytes()).map_err(|e| TvError::io(path, e))
    }

    /// CSV with `iter,solution_norm` followed by one column per subdomain component.
    pub fn component_norms_csv(&self) -> String {
        let parts = self.components.len();
        let mut s = String::from("iter,solution_norm");
        for j in 0..parts {
            s.push_str(&format!(",component_{j}"));
        }
        s.push('\n');
        for t in &self.trace {
            s.push_str(&format!("{},{:.16e}", t.iter, t.solution_norm));
            for c in &t.component_norms {
                s.push_str(&format!(",{c:.16e}"));
            }
            s.push('\n');
        }
        s
    }
}
