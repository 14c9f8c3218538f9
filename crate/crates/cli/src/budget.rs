//! `budget` and `impact`.

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use sightline_core::budget::{
    impact_velocity, solve_network_budget_split, BudgetResult, ImpactVelocity, DEFAULT_K_IMPACT,
};

use crate::Out;

#[derive(Args, Debug)]
pub struct BudgetArgs {
    /// End-to-end deadline, ms
    #[arg(long, default_value = "150")]
    t_tot: f64,
    /// Sensor stage: CMOS readout 2 + encoding 20, ms
    #[arg(long, default_value = "22")]
    t_s: f64,
    /// Processing stage: decode 1 + inference median 74.49 + classification median 0.90, ms
    #[arg(long, default_value = "76.39")]
    t_p: f64,
    /// Consumer decision, ms
    #[arg(long, default_value = "1.2")]
    t_c: f64,
    /// Share of the network allowance given to the sensor uplink
    #[arg(long, default_value_t = 0.5)]
    uplink_share: f64,
    /// CSV instead of a table
    #[arg(long)]
    csv: bool,
}

#[derive(Serialize)]
struct BudgetOutput {
    feasible: bool,
    t_s: f64,
    t_p: f64,
    t_c: f64,
    uplink_share: f64,
    #[serde(flatten)]
    result: BudgetResult,
}

pub fn budget(a: BudgetArgs, out: &Out) -> Result<()> {
    // an infeasible split surfaces as exit code 2 with the deficit in the message
    let r = solve_network_budget_split(a.t_tot, a.t_s, a.t_p, a.t_c, a.uplink_share)?;
    if out.json {
        return out.json(&BudgetOutput {
            feasible: true,
            t_s: a.t_s,
            t_p: a.t_p,
            t_c: a.t_c,
            uplink_share: a.uplink_share,
            result: r,
        });
    }
    if a.csv {
        return out.text(format!(
            "t_tot,t_s,t_p,t_c,compute_sum,network_allowance,t_eval,t_exe\n{},{},{},{},{:.4},{:.4},{:.4},{:.4}\n",
            a.t_tot, a.t_s, a.t_p, a.t_c, r.compute_sum, r.network_allowance_total, r.t_eval_alloc, r.t_exe_alloc
        ));
    }
    let rows = [
        ("deadline t_tot", a.t_tot),
        ("sensor t_s", a.t_s),
        ("processing t_p", a.t_p),
        ("consumer t_c", a.t_c),
        ("fixed stages", r.compute_sum),
        ("network allowance", r.network_allowance_total),
        ("uplink t_eval", r.t_eval_alloc),
        ("downlink t_exe", r.t_exe_alloc),
    ];
    let mut s = String::new();
    for (name, v) in rows {
        s.push_str(&format!("{name:<18} {v:>9.3} ms\n"));
    }
    out.text(s)
}

#[derive(Args, Debug)]
pub struct ImpactArgs {
    /// Notification latencies, ms
    #[arg(long, value_delimiter = ',', default_value = "150,200,250,300,350,400")]
    latencies: Vec<f64>,
    /// Residual impact speed per second of latency, m/s²
    #[arg(long, default_value_t = DEFAULT_K_IMPACT)]
    k: f64,
    /// CSV instead of a table
    #[arg(long)]
    csv: bool,
}

pub fn impact(a: ImpactArgs, out: &Out) -> Result<()> {
    let rows = a
        .latencies
        .iter()
        .map(|&l| impact_velocity(l, a.k))
        .collect::<Result<Vec<ImpactVelocity>, _>>()?;
    if out.json {
        return out.json(&rows);
    }
    let mut s = if a.csv {
        "latency_ms,impact_mps,impact_kmh\n".to_string()
    } else {
        format!("{:>10} {:>10} {:>10}\n", "latency_ms", "m/s", "km/h")
    };
    for r in &rows {
        if a.csv {
            s.push_str(&format!("{},{:.4},{:.4}\n", r.latency_ms, r.mps, r.kmh));
        } else {
            s.push_str(&format!("{:>10} {:>10.4} {:>10.4}\n", r.latency_ms, r.mps, r.kmh));
        }
    }
    out.text(s)
}
