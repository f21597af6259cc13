//! CSV and JSON persistence for evaluation results, learning curves and
//! grid tables.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so
//! `parse(emit(records)) == records` holds bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, RewardChannel};
use crate::optim::IterationRecord;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Baseline,
    Rl,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::Rl => "rl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(PolicyKind::Baseline),
            "rl" => Some(PolicyKind::Rl),
            _ => None,
        }
    }
}

/// One evaluation trial of one policy at one link length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub env: EnvKind,
    pub utility: String,
    pub f0: f64,
    pub length_km: f64,
    pub policy_kind: PolicyKind,
    pub trial: usize,
    /// Channel means in the environment's channel order.
    pub returns: Vec<f64>,
    pub utility_value: f64,
    /// 95% half-width across the trials of this report (repeated per row).
    pub ci95: f64,
    pub seed: u64,
    pub config_hash: String,
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn results_header(channels: &[RewardChannel]) -> String {
    let mut cols = vec![
        "env".to_string(),
        "utility".to_string(),
        "f0".to_string(),
        "length_km".to_string(),
        "policy_kind".to_string(),
        "trial".to_string(),
    ];
    cols.extend(channels.iter().map(|c| c.label().to_string()));
    cols.extend(
        ["utility_value", "ci95", "seed", "config_hash"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

pub fn write_results_csv(
    path: &Path,
    channels: &[RewardChannel],
    records: &[TrialRecord],
) -> Result<(), HarnessError> {
    let mut out = String::new();
    out.push_str(&results_header(channels));
    out.push('\n');
    for r in records {
        assert_eq!(r.returns.len(), channels.len());
        let mut cols = vec![
            r.env.to_string(),
            r.utility.clone(),
            fmt_f64(r.f0),
            fmt_f64(r.length_km),
            r.policy_kind.label().to_string(),
            r.trial.to_string(),
        ];
        cols.extend(r.returns.iter().map(|v| fmt_f64(*v)));
        cols.push(fmt_f64(r.utility_value));
        cols.push(fmt_f64(r.ci95));
        cols.push(r.seed.to_string());
        cols.push(r.config_hash.clone());
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(HarnessError::from)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_results_csv(&text)
}

pub fn parse_results_csv(text: &str) -> Result<Vec<TrialRecord>, HarnessError> {
    let bad = |m: String| HarnessError::Csv(m);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty csv".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let fixed_front = 6;
    let fixed_back = 4;
    if cols.len() < fixed_front + fixed_back + 1 {
        return Err(bad(format!("unrecognized header '{header}'")));
    }
    let channel_count = cols.len() - fixed_front - fixed_back;
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad(format!("line {}: wrong field count", lineno + 2)));
        }
        let f = |s: &str| -> Result<f64, HarnessError> {
            s.parse::<f64>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))
        };
        let env = EnvKind::parse(fields[0])
            .ok_or_else(|| bad(format!("line {}: bad env", lineno + 2)))?;
        let policy_kind = PolicyKind::parse(fields[4])
            .ok_or_else(|| bad(format!("line {}: bad policy kind", lineno + 2)))?;
        let returns = (0..channel_count)
            .map(|k| f(fields[fixed_front + k]))
            .collect::<Result<Vec<f64>, _>>()?;
        records.push(TrialRecord {
            env,
            utility: fields[1].to_string(),
            f0: f(fields[2])?,
            length_km: f(fields[3])?,
            policy_kind,
            trial: fields[5]
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?,
            returns,
            utility_value: f(fields[fixed_front + channel_count])?,
            ci95: f(fields[fixed_front + channel_count + 1])?,
            seed: fields[fixed_front + channel_count + 2]
                .parse()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?,
            config_hash: fields[fixed_front + channel_count + 3].to_string(),
        });
    }
    Ok(records)
}

/// Learning curve: `iteration, <channel means>, utility, wall_time_s`.
/// Everything except the wall-time column is a deterministic function of
/// the seed and configuration.
pub fn write_learning_curve_csv(
    path: &Path,
    channels: &[RewardChannel],
    curve: &[IterationRecord],
) -> Result<(), HarnessError> {
    let mut out = String::from("iteration");
    for c in channels {
        let _ = write!(out, ",{}", c.label());
    }
    out.push_str(",utility,wall_time_s\n");
    for rec in curve {
        let _ = write!(out, "{}", rec.iteration);
        for v in &rec.mean_returns {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(out, ",{},{}", fmt_f64(rec.utility), fmt_f64(rec.wall_time_s));
        debug_assert_eq!(rec.mean_returns.len(), channels.len());
    }
    std::fs::write(path, out).map_err(HarnessError::from)
}

/// Grid table: `f_consume, f_discard, <channel means>, utility`.
pub fn write_grid_csv(
    path: &Path,
    channels: &[RewardChannel],
    table: &[crate::baseline::GridPoint],
) -> Result<(), HarnessError> {
    let mut out = String::from("f_consume,f_discard");
    for c in channels {
        let _ = write!(out, ",{}", c.label());
    }
    out.push_str(",utility\n");
    for point in table {
        let _ = write!(out, "{},{}", fmt_f64(point.f_consume), fmt_f64(point.f_discard));
        for v in &point.mean_returns {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(out, ",{}", fmt_f64(point.utility));
    }
    std::fs::write(path, out).map_err(HarnessError::from)
}

/// Aggregated view of one policy's evaluation at one length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_utility: f64,
    pub ci95_half_width: f64,
    pub mean_returns: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LengthSummary {
    pub length_km: f64,
    pub baseline_thresholds: Option<(f64, f64)>,
    pub baseline: Option<EvalSummary>,
    pub rl: Option<EvalSummary>,
    pub reldiff: Option<f64>,
    pub boundary_clamps: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub environment: EnvKind,
    pub utility: String,
    pub f0: f64,
    pub seed: u64,
    pub scale: f64,
    pub config_hash: String,
    pub lengths: Vec<LengthSummary>,
}

impl SweepSummary {
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let data = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Csv(e.to_string()))?;
        std::fs::write(path, data).map_err(HarnessError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::WERNER_CHANNELS;

    #[test]
    fn results_csv_round_trips_exactly() {
        let records = vec![
            TrialRecord {
                env: EnvKind::Wn2m2,
                utility: "bb84_werner".into(),
                f0: 0.9,
                length_km: 12.5,
                policy_kind: PolicyKind::Rl,
                trial: 0,
                returns: vec![0.901234567890123, 1.2345e-4],
                utility_value: 2931.123456789,
                ci95: 0.75e-1,
                seed: 42,
                config_hash: "deadbeef01020304".into(),
            },
            TrialRecord {
                env: EnvKind::Wn2m2,
                utility: "bb84_werner".into(),
                f0: 0.9,
                length_km: 12.5,
                policy_kind: PolicyKind::Baseline,
                trial: 1,
                returns: vec![0.3, f64::MIN_POSITIVE],
                utility_value: 0.0,
                ci95: 0.0,
                seed: 42,
                config_hash: "deadbeef01020304".into(),
            },
        ];
        let dir = std::env::temp_dir().join("entlink_report_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("results.csv");
        write_results_csv(&path, WERNER_CHANNELS, &records).unwrap();
        let parsed = read_results_csv(&path).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_results_csv("").is_err());
        assert!(parse_results_csv("env,utility\nwn2m2,x").is_err());
        let header = results_header(WERNER_CHANNELS);
        assert!(parse_results_csv(&format!("{header}\nwn2m2,u,0.9\n")).is_err());
    }
}
