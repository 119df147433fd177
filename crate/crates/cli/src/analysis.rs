//! Statistics over finished runs: parameter changes against each replicate's
//! original and the per-revision score trend.

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use topoagent_agents::RunLog;
use topoagent_core::problem::ProblemSpec;

/// Spec sections excluded from parameter statistics.
const FIXED_SECTIONS: [&str; 3] = ["bcs", "loads", "label"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamStat {
    pub path: String,
    /// Mean signed change from the original over revisions that changed it.
    pub avg_delta: Option<f64>,
    pub avg_abs_delta: Option<f64>,
    pub count: usize,
    /// Revisions examined.
    pub revisions: usize,
}

impl ParamStat {
    pub fn never_modified(&self) -> bool {
        self.count == 0
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                if prefix.is_empty() && FIXED_SECTIONS.contains(&k.as_str()) {
                    continue;
                }
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), n.as_f64().unwrap_or(f64::NAN))),
        // Toggles count as +1 when switched on and −1 when switched off.
        Value::Bool(b) => out.push((prefix.to_string(), if *b { 1.0 } else { 0.0 })),
        Value::String(_) | Value::Null => {}
    }
}

/// Numeric and boolean leaves of the tunable sections, in schema order.
pub fn numeric_parameters(spec: &ProblemSpec) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    flatten("", &spec.to_value(), &mut out);
    out
}

/// Per-parameter change statistics. Every completed revision is compared to
/// its own replicate's original; skipped and failed revisions are left out.
pub fn parameter_stats(logs: &[RunLog]) -> Vec<ParamStat> {
    let mut paths: Vec<String> = Vec::new();
    let mut deltas: Vec<Vec<f64>> = Vec::new();
    let mut revisions = 0;
    for log in logs {
        let Some(original) = log.records.first() else { continue };
        let base = numeric_parameters(&original.spec);
        for (p, _) in &base {
            if !paths.contains(p) {
                paths.push(p.clone());
                deltas.push(Vec::new());
            }
        }
        for r in log.records.iter().skip(1).filter(|r| r.failure.is_none()) {
            revisions += 1;
            let now = numeric_parameters(&r.spec);
            for (p, v) in now {
                let Some(old) = base.iter().find(|(q, _)| *q == p).map(|(_, o)| *o) else { continue };
                if v != old {
                    let k = paths.iter().position(|q| *q == p).expect("registered path");
                    deltas[k].push(v - old);
                }
            }
        }
    }
    paths
        .into_iter()
        .zip(deltas)
        .map(|(path, d)| {
            let n = d.len();
            let (avg, avg_abs) = if n == 0 {
                (None, None)
            } else {
                (Some(d.iter().sum::<f64>() / n as f64), Some(d.iter().map(|x| x.abs()).sum::<f64>() / n as f64))
            };
            ParamStat { path, avg_delta: avg, avg_abs_delta: avg_abs, count: n, revisions }
        })
        .collect()
}

pub fn stats_csv(stats: &[ParamStat]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/m".to_string(), |x| format!("{x:.6}"));
    let mut s = String::from("parameter,avg_delta,avg_abs_delta,count,revisions\n");
    for p in stats {
        s.push_str(&format!("{},{},{},{},{}\n", p.path, fmt(p.avg_delta), fmt(p.avg_abs_delta), p.count, p.revisions));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTrend {
    /// Mean latest score per revision index.
    pub means: Vec<f64>,
    /// Least-squares slope of `means` against the revision index.
    pub slope: f64,
    pub replicates: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("replicate {replicate}, revision {revision} has no judge verdict")]
    Unjudged { replicate: usize, revision: usize },
    #[error("no run logs given")]
    Empty,
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`; zero for fewer than
/// two points.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let xbar = (n - 1) as f64 / 2.0;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    sxy / sxx
}

pub fn score_trend(logs: &[RunLog]) -> Result<ScoreTrend, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let len = logs.iter().map(|l| l.records.len()).max().unwrap_or(0);
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for log in logs {
        for r in &log.records {
            let v = r.verdict.as_ref().ok_or(AnalysisError::Unjudged { replicate: log.replicate, revision: r.index })?;
            sums[r.index] += v.score;
            counts[r.index] += 1;
        }
    }
    let means: Vec<f64> = sums.iter().zip(&counts).filter(|(_, c)| **c > 0).map(|(s, c)| s / *c as f64).collect();
    Ok(ScoreTrend { slope: ols_slope(&means), means, replicates: logs.len() })
}
