use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::Image;

/// One continuation stage of the semismooth Newton solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsnStage {
    pub delta: f64,
    /// `‖T_δ(v)‖` at the warm start followed by one entry per Newton step.
    pub newton_residuals: Vec<f64>,
    /// Fraction of the `2·#Λ` one-sided constraints that are violated at stage exit.
    pub violated_ratio: f64,
    /// `‖max(0, Bv − BY − q_n)‖ / ‖v‖` at stage exit.
    pub violation_residual: f64,
    /// Relative constraint gap at stage exit.
    pub relative_gap: f64,
    pub linear_iterations: usize,
}

/// Convergence record of one solve. Traces hold one entry per outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
    pub wall_time_s: f64,
    pub objective: Vec<f64>,
    pub relative_gap: Vec<f64>,
    pub elapsed_s: Vec<f64>,
    /// `‖g_k − g_∞‖`, filled only when the problem carries a reference solution.
    pub distance_to_reference: Vec<f64>,
    /// Outer iterations whose inner solve hit its iteration cap.
    pub inner_cap_hits: usize,
    pub ssn_stages: Vec<SsnStage>,
}

impl SolveReport {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective.last().copied()
    }

    pub fn final_relative_gap(&self) -> Option<f64> {
        self.relative_gap.last().copied()
    }

    /// Writes the per-iteration traces as CSV with a header row.
    pub fn write_trace_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let with_ref = !self.distance_to_reference.is_empty();
        let mut header = vec!["iteration", "objective", "relative_gap", "elapsed_s"];
        if with_ref {
            header.push("distance_to_reference");
        }
        w.write_record(&header)?;
        for i in 0..self.objective.len() {
            let mut row = vec![
                (i + 1).to_string(),
                self.objective[i].to_string(),
                self.relative_gap[i].to_string(),
                self.elapsed_s[i].to_string(),
            ];
            if with_ref {
                row.push(self.distance_to_reference[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Estimate plus its report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub estimate: Image,
    pub report: SolveReport,
}

pub(crate) struct Recorder {
    start: Instant,
    report: SolveReport,
}

impl Recorder {
    pub fn new(solver: &str) -> Self {
        Self {
            start: Instant::now(),
            report: SolveReport {
                solver: solver.to_string(),
                iterations: 0,
                converged: false,
                message: String::new(),
                wall_time_s: 0.0,
                objective: Vec::new(),
                relative_gap: Vec::new(),
                elapsed_s: Vec::new(),
                distance_to_reference: Vec::new(),
                inner_cap_hits: 0,
                ssn_stages: Vec::new(),
            },
        }
    }

    pub fn push(&mut self, objective: f64, relative_gap: f64, v: &[f64], reference: Option<&Image>) {
        let r = &mut self.report;
        r.iterations += 1;
        r.objective.push(objective);
        r.relative_gap.push(relative_gap);
        r.elapsed_s.push(self.start.elapsed().as_secs_f64());
        if let Some(g) = reference {
            let d: f64 = v.iter().zip(g.values()).map(|(a, b)| (a - b).powi(2)).sum();
            r.distance_to_reference.push(d.sqrt());
        }
    }

    pub fn iterations(&self) -> usize {
        self.report.iterations
    }

    pub fn inner_cap_hit(&mut self) {
        self.report.inner_cap_hits += 1;
    }

    pub fn stage(&mut self, s: SsnStage) {
        self.report.ssn_stages.push(s);
    }

    pub fn finish(mut self, converged: bool, message: impl Into<String>) -> SolveReport {
        self.report.converged = converged;
        self.report.message = message.into();
        self.report.wall_time_s = self.start.elapsed().as_secs_f64();
        self.report
    }
}
