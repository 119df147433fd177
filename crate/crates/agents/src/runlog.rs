//! Persisted record of one replicate.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topoagent_core::manufacture::select_best;
use topoagent_core::problem::{ClampReport, ParameterDiff, ProblemSpec, RevisionRules};
use topoagent_core::render::RenderManifest;
use topoagent_core::simp::{OptimizationResult, StopReason};

use crate::judge::JudgeVerdict;
use crate::transcript::{AgentKind, Exchange};

pub const RUNLOG_FILE: &str = "runlog.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub iterations: usize,
    pub termination: StopReason,
    pub final_compliance: f64,
    pub final_volume: f64,
    pub solver_warnings: usize,
    pub compliance: Vec<f64>,
    pub volume: Vec<f64>,
}

impl From<&OptimizationResult> for ResultSummary {
    fn from(r: &OptimizationResult) -> Self {
        Self {
            iterations: r.iterations,
            termination: r.termination,
            final_compliance: r.final_compliance,
            final_volume: r.final_volume,
            solver_warnings: r.solver_warnings,
            compliance: r.compliance.clone(),
            volume: r.volume.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionRecord {
    pub index: usize,
    /// Design this revision was built on; `None` for the original.
    pub base: Option<usize>,
    pub spec: ProblemSpec,
    /// Proposed changes, expressed against the base spec.
    pub diff: ParameterDiff,
    pub clamp: ClampReport,
    /// Render directory relative to the run directory.
    pub renders: Option<String>,
    /// Density file relative to the run directory.
    pub densities: Option<String>,
    pub result: Option<ResultSummary>,
    /// Latest verdict for this design.
    pub verdict: Option<JudgeVerdict>,
    pub failure: Option<String>,
}

/// Scores of all designs after one judging call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeRound {
    pub after_revision: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesSummary {
    pub rmin_floor: f64,
    pub protected: Vec<String>,
    pub instructions: Vec<String>,
}

impl From<&RevisionRules> for RulesSummary {
    fn from(r: &RevisionRules) -> Self {
        Self { rmin_floor: r.rmin_floor, protected: r.protected.clone(), instructions: r.instructions() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    SolverAborted { revision: usize, message: String },
    AgentAborted { revision: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub replicate: usize,
    pub preference: String,
    pub ablation: bool,
    pub budget: usize,
    pub rules: RulesSummary,
    pub records: Vec<RevisionRecord>,
    pub judge_rounds: Vec<JudgeRound>,
    pub transcript: Vec<Exchange>,
    pub status: RunStatus,
}

impl RunLog {
    /// Latest scores, unjudged designs as `-inf`.
    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.verdict.as_ref().map_or(f64::NEG_INFINITY, |v| v.score)).collect()
    }

    /// Highest latest score, ties to the most recent design.
    pub fn best(&self) -> Option<usize> {
        select_best(&self.scores())
    }

    /// Records whose base is not the best design of the judging round before
    /// them.
    pub fn rebase_violations(&self) -> Vec<usize> {
        let mut bad = Vec::new();
        for r in self.records.iter().skip(1) {
            let expected = if r.index == 1 {
                Some(0)
            } else {
                self.judge_rounds.iter().find(|j| j.after_revision == r.index - 1).and_then(|j| select_best(&j.scores))
            };
            if r.base.is_none() || r.base != expected {
                bad.push(r.index);
            }
        }
        bad
    }

    pub fn vision_requests(&self) -> impl Iterator<Item = &Exchange> {
        self.transcript.iter().filter(|e| e.agent == AgentKind::Vision)
    }

    pub fn render_dir(&self, run_dir: &Path, index: usize) -> Option<PathBuf> {
        self.records.get(index)?.renders.as_ref().map(|r| run_dir.join(r))
    }

    pub fn manifest(&self, run_dir: &Path, index: usize) -> io::Result<RenderManifest> {
        let dir = self
            .render_dir(run_dir, index)
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, format!("revision {index} has no renders")))?;
        RenderManifest::load(&dir)
    }

    pub fn save(&self, run_dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(run_dir)?;
        let path = run_dir.join(RUNLOG_FILE);
        let text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Reads `path`, or `path/runlog.json` when `path` is a directory.
    pub fn load(path: &Path) -> io::Result<Self> {
        let file = if path.is_dir() { path.join(RUNLOG_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", file.display())))
    }

    /// Directory holding `path` when it names a log file, else `path`.
    pub fn run_dir(path: &Path) -> PathBuf {
        if path.is_dir() {
            path.to_path_buf()
        } else {
            path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
        }
    }
}
