//! Per-step episode logs and their line-delimited JSON form.
//!
//! Each line is one [`StepRecord`] object with fields in this order:
//! `step, clock_index, t_in, t_out, rho, occupied, action, feedback,
//! controlled_action, discomfort, energy, total, reward, next_t_in`.
//! `action` and `controlled_action` are 0/1, `feedback` is -1/0/1,
//! `occupied` is a boolean, `rho` is $/kWh.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{Action, Feedback};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub clock_index: usize,
    pub t_in: f64,
    pub t_out: f64,
    pub rho: f64,
    pub occupied: bool,
    pub action: Action,
    pub feedback: Feedback,
    pub controlled_action: Action,
    pub discomfort: f64,
    pub energy: f64,
    pub total: f64,
    pub reward: f64,
    pub next_t_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub gamma: f64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeRecord {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn discounted_return(&self) -> f64 {
        self.steps
            .iter()
            .rev()
            .fold(0.0, |acc, s| s.reward + self.gamma * acc)
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.total).sum()
    }

    pub fn energy_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.energy).sum()
    }

    pub fn discomfort_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.discomfort).sum()
    }

    pub fn override_count(&self) -> usize {
        self.steps.iter().filter(|s| s.feedback.is_override()).count()
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n")
                .map_err(|e| Error::io("writing episode record", e))?;
        }
        Ok(())
    }

    pub fn to_ndjson_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_ndjson<R: BufRead>(r: R, gamma: f64) -> Result<Self> {
        let mut steps = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("reading episode record", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: StepRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("record line {}: {e}", i + 1)))?;
            steps.push(s);
        }
        Ok(Self { gamma, steps })
    }
}
