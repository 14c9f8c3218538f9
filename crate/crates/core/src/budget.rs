//! End-to-end latency ledger, network allowance and impact kinematics.
//!
//! The pipeline latency is the sum of six stages:
//! sensor capture/encode, uplink, processing, downlink, consumer validation
//! and action. Whatever the fixed stages leave of the deadline is the
//! allowance for the two network hops.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deadline from occurrence to user notification, ms.
pub const DEFAULT_T_MAX_MS: f64 = 150.0;
/// Effective impact coefficient fitted to the published latency table, m/s².
pub const DEFAULT_K_IMPACT: f64 = 7.63;
/// Braking deceleration of the reference vehicle, m/s².
pub const DEFAULT_BRAKING_DECEL: f64 = 8.53;

pub const T_CMOS_MS: f64 = 2.0;
pub const T_ENC_MS: f64 = 20.0;
pub const T_DEC_MS: f64 = 1.0;
pub const T_AI_MEDIAN_MS: f64 = 74.49;
pub const T_AI_MEAN_MS: f64 = 79.02;
pub const T_AI_STD_MS: f64 = 11.53;
pub const T_TC_MEDIAN_MS: f64 = 0.90;
pub const T_TC_MEAN_MS: f64 = 0.95;
pub const T_TC_STD_MS: f64 = 0.21;
pub const T_C_MS: f64 = 1.2;
pub const T_ACT_MS: f64 = 0.0;
/// Per-hop network latency used by the reference profile (two-decimal value).
pub const T_NET_REFERENCE_MS: f64 = 25.20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("{name} must be finite and non-negative, got {value}")]
    Component { name: &'static str, value: f64 },
    #[error("budget infeasible: fixed stages exceed the deadline by {deficit:.4} ms")]
    Infeasible { deficit: f64 },
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    Split(f64),
    #[error("maximum tolerable latency must be positive, got {0}")]
    TMax(f64),
    #[error("braking deceleration must be positive, got {0}")]
    Deceleration(f64),
    #[error("speed must be non-negative, got {0}")]
    Speed(f64),
}

fn check(name: &'static str, value: f64) -> Result<f64, BudgetError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(BudgetError::Component { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorTiming {
    pub t_cmos: f64,
    pub t_enc: f64,
}

impl SensorTiming {
    pub fn total(&self) -> f64 {
        self.t_cmos + self.t_enc
    }
}

impl Default for SensorTiming {
    fn default() -> Self {
        Self {
            t_cmos: T_CMOS_MS,
            t_enc: T_ENC_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessingTiming {
    pub t_dec: f64,
    pub t_ai: f64,
    pub t_tc: f64,
}

impl ProcessingTiming {
    pub fn total(&self) -> f64 {
        self.t_dec + self.t_ai + self.t_tc
    }
}

impl Default for ProcessingTiming {
    /// Median inference and classification times.
    fn default() -> Self {
        Self {
            t_dec: T_DEC_MS,
            t_ai: T_AI_MEDIAN_MS,
            t_tc: T_TC_MEDIAN_MS,
        }
    }
}

/// Stage latencies in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingProfile {
    pub t_s: f64,
    pub t_eval: f64,
    pub t_p: f64,
    pub t_exe: f64,
    pub t_c: f64,
    pub t_act: f64,
}

impl TimingProfile {
    pub fn new(
        t_s: f64,
        t_eval: f64,
        t_p: f64,
        t_exe: f64,
        t_c: f64,
        t_act: f64,
    ) -> Result<Self, BudgetError> {
        Ok(Self {
            t_s: check("t_s", t_s)?,
            t_eval: check("t_eval", t_eval)?,
            t_p: check("t_p", t_p)?,
            t_exe: check("t_exe", t_exe)?,
            t_c: check("t_c", t_c)?,
            t_act: check("t_act", t_act)?,
        })
    }

    pub fn from_parts(
        sensor: SensorTiming,
        t_eval: f64,
        processing: ProcessingTiming,
        t_exe: f64,
        t_c: f64,
        t_act: f64,
    ) -> Result<Self, BudgetError> {
        check("t_cmos", sensor.t_cmos)?;
        check("t_enc", sensor.t_enc)?;
        check("t_dec", processing.t_dec)?;
        check("t_ai", processing.t_ai)?;
        check("t_tc", processing.t_tc)?;
        Self::new(sensor.total(), t_eval, processing.total(), t_exe, t_c, t_act)
    }

    /// Reference deployment: 22 ms sensor, 76.39 ms processing, 1.2 ms
    /// consumer and 25.20 ms per network hop.
    pub fn reference() -> Self {
        Self::from_parts(
            SensorTiming::default(),
            T_NET_REFERENCE_MS,
            ProcessingTiming::default(),
            T_NET_REFERENCE_MS,
            T_C_MS,
            T_ACT_MS,
        )
        .expect("reference constants are valid")
    }
}

pub fn total_latency(p: &TimingProfile) -> f64 {
    p.t_s + p.t_eval + p.t_p + p.t_exe + p.t_c + p.t_act
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub t_tot_target: f64,
    /// t_s + t_p + t_c
    pub compute_sum: f64,
    pub network_allowance_total: f64,
    pub t_eval_alloc: f64,
    pub t_exe_alloc: f64,
}

/// Splits the time left after the fixed stages equally between uplink and
/// downlink.
pub fn solve_network_budget(t_tot: f64, t_s: f64, t_p: f64, t_c: f64) -> Result<BudgetResult, BudgetError> {
    solve_network_budget_split(t_tot, t_s, t_p, t_c, 0.5)
}

/// Like [`solve_network_budget`] but gives `uplink_share` of the allowance to
/// the sensor→processing hop.
pub fn solve_network_budget_split(
    t_tot: f64,
    t_s: f64,
    t_p: f64,
    t_c: f64,
    uplink_share: f64,
) -> Result<BudgetResult, BudgetError> {
    check("t_tot", t_tot)?;
    check("t_s", t_s)?;
    check("t_p", t_p)?;
    check("t_c", t_c)?;
    if !(uplink_share > 0.0 && uplink_share < 1.0) {
        return Err(BudgetError::Split(uplink_share));
    }
    let compute_sum = t_s + t_p + t_c;
    let allowance = t_tot - compute_sum;
    if allowance <= 0.0 {
        return Err(BudgetError::Infeasible { deficit: -allowance });
    }
    let t_eval_alloc = allowance * uplink_share;
    Ok(BudgetResult {
        t_tot_target: t_tot,
        compute_sum,
        network_allowance_total: allowance,
        t_eval_alloc,
        t_exe_alloc: allowance - t_eval_alloc,
    })
}

/// `t_min <= t_rt <= t_tot`.
pub fn check_realtime(t_min: f64, t_rt: f64, t_tot: f64) -> bool {
    t_min <= t_rt && t_rt <= t_tot
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrakingModel {
    /// m/s
    pub v: f64,
    /// m/s²
    pub a_b: f64,
    pub k_impact: f64,
}

impl BrakingModel {
    pub fn new(v: f64, a_b: f64) -> Result<Self, BudgetError> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(BudgetError::Speed(v));
        }
        if !(a_b.is_finite() && a_b > 0.0) {
            return Err(BudgetError::Deceleration(a_b));
        }
        Ok(Self {
            v,
            a_b,
            k_impact: DEFAULT_K_IMPACT,
        })
    }
}

impl Default for BrakingModel {
    fn default() -> Self {
        Self {
            v: 20.0,
            a_b: DEFAULT_BRAKING_DECEL,
            k_impact: DEFAULT_K_IMPACT,
        }
    }
}

/// v² / 2a
pub fn braking_distance(m: &BrakingModel) -> f64 {
    m.v * m.v / (2.0 * m.a_b)
}

/// v / a
pub fn stopping_time(m: &BrakingModel) -> f64 {
    m.v / m.a_b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactVelocity {
    pub latency_ms: f64,
    pub mps: f64,
    pub kmh: f64,
}

/// Residual impact speed for a notification delay, linear in latency.
pub fn impact_velocity(latency_ms: f64, k_impact: f64) -> Result<ImpactVelocity, BudgetError> {
    check("latency", latency_ms)?;
    check("k_impact", k_impact)?;
    let mps = k_impact * latency_ms / 1000.0;
    Ok(ImpactVelocity {
        latency_ms,
        mps,
        kmh: mps * 3.6,
    })
}

/// Deadline configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeadlineConfig {
    t_max_ms: f64,
}

impl DeadlineConfig {
    pub fn new(t_max_ms: f64) -> Result<Self, BudgetError> {
        if t_max_ms.is_finite() && t_max_ms > 0.0 {
            Ok(Self { t_max_ms })
        } else {
            Err(BudgetError::TMax(t_max_ms))
        }
    }

    pub fn max_tolerable_latency(&self) -> f64 {
        self.t_max_ms
    }
}

impl Default for DeadlineConfig {
    fn default() -> Self {
        Self {
            t_max_ms: DEFAULT_T_MAX_MS,
        }
    }
}

/// Rounds to the two decimals used in reports.
pub fn report_ms(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}
