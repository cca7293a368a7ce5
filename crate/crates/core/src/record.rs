//! Per-run output shared by every policy.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{slot_costs, ArrivalTrace, CostModel, ProbVector};

/// Decisions and per-slot costs of one policy on one trace. Costs are always
/// charged on the true arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub policy: String,
    /// `X_1..X_T`, binary or fractional.
    pub decisions: Vec<Vec<f64>>,
    pub forward_costs: Vec<f64>,
    pub switch_costs: Vec<f64>,
    pub total_cost: f64,
    pub runtime_ms: f64,
    pub seed: u64,
    /// Pre-rounding iterates `P′_1..P′_T` for policies that have them.
    pub fractional: Option<Vec<ProbVector>>,
    pub config: serde_json::Value,
}

/// The JSON summary written next to the per-slot CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: String,
    pub config: serde_json::Value,
    pub total_cost: f64,
    pub runtime_ms: f64,
    pub seed: u64,
}

impl RunRecord {
    /// Costs `decisions` on `trace` and assembles the record.
    pub fn from_decisions(
        policy: impl Into<String>,
        trace: &ArrivalTrace,
        cost: &CostModel,
        decisions: Vec<Vec<f64>>,
        seed: u64,
        config: serde_json::Value,
    ) -> Result<Self> {
        let per_slot = slot_costs(trace, &decisions, cost)?;
        let (forward_costs, switch_costs): (Vec<f64>, Vec<f64>) = per_slot.into_iter().unzip();
        let total_cost = forward_costs
            .iter()
            .zip(&switch_costs)
            .map(|(f, s)| f + s)
            .sum();
        Ok(Self {
            policy: policy.into(),
            decisions,
            forward_costs,
            switch_costs,
            total_cost,
            runtime_ms: 0.0,
            seed,
            fractional: None,
            config,
        })
    }

    pub fn horizon(&self) -> usize {
        self.decisions.len()
    }

    /// Per-slot `F_t` values.
    pub fn slot_totals(&self) -> impl Iterator<Item = f64> + '_ {
        self.forward_costs
            .iter()
            .zip(&self.switch_costs)
            .map(|(f, s)| f + s)
    }

    pub fn total_forward(&self) -> f64 {
        self.forward_costs.iter().sum()
    }

    pub fn total_switch(&self) -> f64 {
        self.switch_costs.iter().sum()
    }

    /// `P′_1..P′_T`, if the policy produced them.
    pub fn fractional_trace(&self) -> Option<&[ProbVector]> {
        self.fractional.as_deref()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            policy: self.policy.clone(),
            config: self.config.clone(),
            total_cost: self.total_cost,
            runtime_ms: self.runtime_ms,
            seed: self.seed,
        }
    }

    /// `t,forward_cost,switch_cost,total_cost`, one row per slot.
    pub fn costs_csv_string(&self) -> String {
        let mut out = String::from("t,forward_cost,switch_cost,total_cost\n");
        for (t, (f, s)) in self.forward_costs.iter().zip(&self.switch_costs).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", t + 1, f, s, f + s);
        }
        out
    }

    /// `t,x1..xN`, one row per slot.
    pub fn decisions_csv_string(&self) -> String {
        let n = self.decisions.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, x) in self.decisions.iter().enumerate() {
            let _ = write!(out, "{}", t + 1);
            for v in x {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&csv, self.costs_csv_string()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&self.summary())? + "\n";
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }
}

/// Per-slot costs read back from a cost CSV: `(forward, switch, total)`.
pub fn read_costs_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "forward_cost", "switch_cost", "total_cost"] {
        return Err(Error::Parse(format!("unexpected cost header {headers:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", i + 1, &rec[k])))
        };
        if field(0)? != (i + 1) as f64 {
            return Err(Error::Parse(format!("row {}: slots must count up from 1", i + 1)));
        }
        out.push((field(1)?, field(2)?, field(3)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        let trace = ArrivalTrace::new(vec![vec![10.0, 0.0], vec![0.0, 30.0], vec![5.0, 5.0]]).unwrap();
        let cost = CostModel::uniform(0.1, 2.0, 2, 1, 0.05).unwrap();
        let decisions = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]];
        RunRecord::from_decisions("test", &trace, &cost, decisions, 3, serde_json::json!({})).unwrap()
    }

    #[test]
    fn costs_add_up() {
        let r = record();
        assert_eq!(r.forward_costs, vec![0.0, 0.0, 0.5]);
        assert_eq!(r.switch_costs, vec![2.0, 2.0, 1.0]);
        assert_eq!(r.total_cost, 5.5);
    }

    #[test]
    fn csv_totals_reproduce_summary() {
        let r = record();
        let rows = read_costs_csv(&r.costs_csv_string()).unwrap();
        let total: f64 = rows.iter().map(|(_, _, t)| t).sum();
        assert_eq!(total, r.total_cost);
        assert!(r.decisions_csv_string().starts_with("t,x1,x2\n1,1,0\n"));
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = record();
        r.write(dir.path(), "run").unwrap();
        let summary: RunSummary =
            serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
        assert_eq!(summary.total_cost, 5.5);
        assert_eq!(summary.policy, "test");
    }
}
