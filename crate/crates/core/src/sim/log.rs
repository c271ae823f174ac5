//! Per-step records and their CSV form.
//!
//! Columns, in order: `step, t, status, task_error, u_norm`, then `q<i>`, `qd<i>` and `u<i>`
//! for each joint, then `c:<tag>` with the error `d − safe` of every constraint row, then
//! `phi:<name>` with the angle of every cone, and `solve_us` when timing is requested.
//! Numbers use Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::io;
use std::time::Duration;

use nalgebra::DVector;

use crate::vfi::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepStatus {
    Optimal,
    Infeasible,
    MaxIter,
    /// The controller raised an error; the fallback command was applied.
    Error,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::Infeasible => "infeasible",
            StepStatus::MaxIter => "max_iter",
            StepStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub status: StepStatus,
    pub task_error: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    /// The command applied over `[t, t + dt)`.
    pub u: DVector<f64>,
    /// `d − safe` per constraint row; NaN when the controller failed.
    pub constraints: Vec<f64>,
    /// Cone angles in radians.
    pub phi: Vec<f64>,
    pub elapsed: Duration,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub dof: usize,
    pub constraint_tags: Vec<String>,
    pub directions: Vec<Direction>,
    pub cone_names: Vec<String>,
    pub records: Vec<StepRecord>,
}

impl StepLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self, timing: bool) -> Vec<String> {
        let mut cols: Vec<String> = ["step", "t", "status", "task_error", "u_norm"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["q", "qd", "u"] {
            cols.extend((0..self.dof).map(|i| format!("{prefix}{i}")));
        }
        cols.extend(self.constraint_tags.iter().map(|t| format!("c:{t}")));
        cols.extend(self.cone_names.iter().map(|t| format!("phi:{t}")));
        if timing {
            cols.push("solve_us".into());
        }
        cols
    }

    pub fn write_csv<W: io::Write>(&self, mut out: W, timing: bool) -> io::Result<()> {
        writeln!(out, "{}", self.header(timing).join(","))?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            let _ = write!(
                line,
                "{},{},{},{},{}",
                r.step,
                r.t,
                r.status.as_str(),
                r.task_error,
                r.u.norm()
            );
            for v in r.q.iter().chain(r.qdot.iter()).chain(r.u.iter()) {
                let _ = write!(line, ",{v}");
            }
            for v in r.constraints.iter().chain(r.phi.iter()) {
                let _ = write!(line, ",{v}");
            }
            if timing {
                let _ = write!(line, ",{}", r.elapsed.as_secs_f64() * 1e6);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self, timing: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn column(&self, tag: &str) -> Option<usize> {
        self.constraint_tags.iter().position(|t| t == tag)
    }

    /// Largest angle of the named cone over the run.
    pub fn max_phi(&self, cone: &str) -> Option<f64> {
        let i = self.cone_names.iter().position(|c| c == cone)?;
        Some(self.records.iter().map(|r| r.phi[i]).fold(f64::NEG_INFINITY, f64::max))
    }

    /// Steps at which some row's distance is on the wrong side of its safe value by more than
    /// `tol`, with the offending tag.
    pub fn constraint_breaches(&self, tol: f64) -> Vec<(usize, String, f64)> {
        let mut out = Vec::new();
        for r in &self.records {
            for ((tag, dir), &e) in self.constraint_tags.iter().zip(&self.directions).zip(&r.constraints) {
                let bad = match dir {
                    Direction::KeepOut => !(e >= -tol),
                    Direction::KeepIn => !(e <= tol),
                };
                if bad {
                    out.push((r.step, tag.clone(), e));
                }
            }
        }
        out
    }

    pub fn final_task_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.task_error)
    }

    pub fn non_optimal_steps(&self) -> usize {
        self.records.iter().filter(|r| r.status != StepStatus::Optimal).count()
    }
}
