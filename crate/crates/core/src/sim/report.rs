//! Summaries and CSV export of simulation records.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::Serialize;

use super::{ClipCount, RunRecord, SimError};
use crate::stats::{Describe, Histogram};

pub const CSV_HEADER: &str =
    "run,event_id,user_id,t_s,t_eval,t_p_dec,t_p_ai,t_p_tc,t_exe,t_c,t_act,total,verdict,met_deadline,impact_mps,distance_m";

pub const HISTOGRAM_BIN_MS: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: String,
    #[serde(flatten)]
    pub stats: Describe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub runs: u32,
    pub records: usize,
    /// Per stage plus `total`, in pipeline order.
    pub stages: Vec<StageSummary>,
    pub met_deadline: usize,
    pub verdicts: BTreeMap<String, usize>,
    pub impact_mps: Option<Describe>,
    pub histogram_total: Histogram,
    pub histogram_t_p_ai: Histogram,
    /// Stages where more than 0.1 % of draws were clipped at zero.
    pub clipping: Vec<ClipCount>,
}

impl Summary {
    pub fn stage(&self, name: &str) -> Option<&Describe> {
        self.stages.iter().find(|s| s.stage == name).map(|s| &s.stats)
    }
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary, SimError> {
    if records.is_empty() {
        return Err(SimError::Empty);
    }
    let column = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let mut stages = Vec::new();
    for (i, name) in super::latency::STAGES.iter().enumerate() {
        let xs = column(&|r| r.stages.as_array()[i]);
        stages.push(StageSummary {
            stage: (*name).to_string(),
            stats: Describe::of(&xs).expect("non-empty"),
        });
    }
    let totals = column(&|r| r.total);
    stages.push(StageSummary {
        stage: "total".into(),
        stats: Describe::of(&totals).expect("non-empty"),
    });
    let mut verdicts = BTreeMap::new();
    for r in records {
        *verdicts.entry(r.verdict.to_string()).or_insert(0) += 1;
    }
    let impacts: Vec<f64> = records.iter().filter_map(|r| r.impact_mps).collect();
    Ok(Summary {
        runs: records.iter().map(|r| r.run + 1).max().unwrap_or(0),
        records: records.len(),
        stages,
        met_deadline: records.iter().filter(|r| r.met_deadline).count(),
        verdicts,
        impact_mps: Describe::of(&impacts),
        histogram_total: Histogram::of(&totals, HISTOGRAM_BIN_MS).expect("non-empty"),
        histogram_t_p_ai: Histogram::of(&column(&|r| r.stages.t_p_ai), HISTOGRAM_BIN_MS).expect("non-empty"),
        clipping: Vec::new(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.4}"))
}

/// Writes the header and one row per record, numbers at four decimals.
pub fn export_csv<W: Write>(records: &[RunRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let s = &r.stages;
        writeln!(
            w,
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{},{}",
            r.run,
            r.event_id,
            r.user_id,
            s.t_s,
            s.t_eval,
            s.t_p_dec,
            s.t_p_ai,
            s.t_p_tc,
            s.t_exe,
            s.t_c,
            s.t_act,
            r.total,
            r.verdict,
            r.met_deadline,
            opt(r.impact_mps),
            opt(r.distance_m),
        )?;
    }
    w.flush()
}

pub fn to_csv_string(records: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    export_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}
