//! The revision loop: solve, render, revise from the best design so far,
//! re-solve, judge everything, repeat.

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use topoagent_core::grid_io::DensityGrid;
use topoagent_core::problem::{apply_revision, validate_value, ClampReport, FieldError, ParameterDiff, ProblemSpec, RevisionRules};
use topoagent_core::render::{render_sixpack, RenderOptions};
use topoagent_core::simp::Optimizer;

use crate::client::ChatModel;
use crate::judge::{Design, Judge};
use crate::prompts::DEFAULT_PREFERENCE;
use crate::runlog::{JudgeRound, ResultSummary, RevisionRecord, RulesSummary, RunLog, RunStatus};
use crate::vision::{vision_revise, HistoryEntry, VisionRequest};

pub const DENSITY_FILE: &str = "densities.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub budget: usize,
    pub ablation: bool,
    pub replicate: usize,
    pub preference: String,
    pub render: RenderOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { budget: 4, ablation: false, replicate: 0, preference: DEFAULT_PREFERENCE.to_string(), render: RenderOptions::default() }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid problem spec: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

struct Solved {
    summary: ResultSummary,
    projected: Vec<f64>,
    renders: String,
    densities: String,
}

fn revision_dir(index: usize) -> String {
    format!("rev_{index}")
}

/// Optimizes `spec`, then stores densities and the six renders under
/// `run_dir/rev_{index}`. The outer error is I/O, the inner the solver.
fn solve(spec: &ProblemSpec, index: usize, run_dir: &Path, options: &RenderOptions) -> Result<Result<Solved, String>, RunError> {
    let result = match Optimizer::new(spec).and_then(|o| {
        o.run_with(|p| log::debug!("revision {index} iteration {}: c = {:.6e}, v = {:.4}", p.iteration, p.compliance, p.volume))
    }) {
        Ok(r) => r,
        Err(e) => return Ok(Err(e.to_string())),
    };
    log::info!(
        "revision {index}: {} iterations, compliance {:.6e}, volume {:.4}",
        result.iterations,
        result.final_compliance,
        result.final_volume
    );
    let rel = revision_dir(index);
    let dir = run_dir.join(&rel);
    let projected = result.densities.projected.clone();
    let density_rel = format!("{rel}/{DENSITY_FILE}");
    let density_path = run_dir.join(&density_rel);
    DensityGrid::new(&spec.mesh, &projected).save(&density_path).map_err(|e| RunError::Io {
        path: density_path.clone(),
        source: io::Error::other(e.to_string()),
    })?;
    render_sixpack(&projected, &spec.mesh, &spec.loads, &spec.bcs, options).save(&dir).map_err(io_err(&dir))?;
    Ok(Ok(Solved { summary: ResultSummary::from(&result), projected, renders: rel, densities: density_rel }))
}

/// Runs one replicate and persists its log under `run_dir`.
pub fn orchestrate(
    spec: &ProblemSpec,
    rules: &RevisionRules,
    config: &RunConfig,
    vision: &mut dyn ChatModel,
    judge: &mut dyn Judge,
    run_dir: &Path,
) -> Result<RunLog, RunError> {
    validate_value(&spec.to_value()).map_err(RunError::Invalid)?;
    let mut log = RunLog {
        replicate: config.replicate,
        preference: config.preference.clone(),
        ablation: config.ablation,
        budget: config.budget,
        rules: RulesSummary::from(rules),
        records: Vec::new(),
        judge_rounds: Vec::new(),
        transcript: Vec::new(),
        status: RunStatus::Completed,
    };
    // Projected densities per record, for judges that inspect the field.
    let mut fields: Vec<Vec<f64>> = Vec::new();
    let save = |log: &RunLog| log.save(run_dir).map_err(io_err(run_dir));

    let mut original = RevisionRecord {
        index: 0,
        base: None,
        spec: spec.clone(),
        diff: ParameterDiff::default(),
        clamp: ClampReport::default(),
        renders: None,
        densities: None,
        result: None,
        verdict: None,
        failure: None,
    };
    match solve(spec, 0, run_dir, &config.render)? {
        Ok(s) => {
            original.renders = Some(s.renders);
            original.densities = Some(s.densities);
            original.result = Some(s.summary);
            fields.push(s.projected);
            log.records.push(original);
        }
        Err(message) => {
            original.failure = Some(message.clone());
            log.records.push(original);
            log.status = RunStatus::SolverAborted { revision: 0, message };
            save(&log)?;
            return Ok(log);
        }
    }
    save(&log)?;

    for index in 1..=config.budget {
        let best = log.best().expect("at least one record");
        let base_spec = log.records[best].spec.clone();

        let proposal = {
            let images: Vec<Vec<PathBuf>> = (0..log.records.len()).map(|i| images_of(&log, run_dir, i)).collect();
            let history: Vec<HistoryEntry> = log
                .records
                .iter()
                .zip(images)
                .map(|(r, images)| HistoryEntry {
                    index: r.index,
                    base: r.base,
                    spec: &r.spec,
                    diff: &r.diff,
                    verdict: r.verdict.as_ref(),
                    images,
                })
                .collect();
            let req = VisionRequest {
                original: spec,
                preference: &config.preference,
                history: &history,
                best,
                rules,
                ablation: config.ablation,
            };
            let mut transcript = Vec::new();
            let out = vision_revise(vision, &req, index, &mut transcript);
            log.transcript.extend(transcript);
            out
        };

        let revised = proposal.map_err(|e| e.to_string()).and_then(|diff| {
            let diff = diff.rebase_onto(&base_spec);
            apply_revision(&base_spec, &diff, rules).map(|(s, clamp)| (diff, s, clamp)).map_err(|e| e.to_string())
        });

        let record = match revised {
            Ok((diff, new_spec, clamp)) => {
                if !clamp.is_empty() {
                    log::warn!("revision {index}: {} clamp(s), {} rejection(s)", clamp.clamps.len(), clamp.rejected.len());
                }
                let mut rec = RevisionRecord {
                    index,
                    base: Some(best),
                    spec: new_spec.clone(),
                    diff,
                    clamp,
                    renders: None,
                    densities: None,
                    result: None,
                    verdict: None,
                    failure: None,
                };
                match solve(&new_spec, index, run_dir, &config.render)? {
                    Ok(s) => {
                        rec.renders = Some(s.renders);
                        rec.densities = Some(s.densities);
                        rec.result = Some(s.summary);
                        fields.push(s.projected);
                        rec
                    }
                    Err(message) => {
                        rec.failure = Some(message.clone());
                        log.records.push(rec);
                        log.status = RunStatus::SolverAborted { revision: index, message };
                        save(&log)?;
                        return Ok(log);
                    }
                }
            }
            Err(message) => {
                log::warn!("revision {index} skipped: {message}");
                let base = &log.records[best];
                fields.push(fields[best].clone());
                RevisionRecord {
                    index,
                    base: Some(best),
                    spec: base.spec.clone(),
                    diff: ParameterDiff::default(),
                    clamp: ClampReport::default(),
                    renders: base.renders.clone(),
                    densities: base.densities.clone(),
                    result: base.result.clone(),
                    verdict: None,
                    failure: Some(message),
                }
            }
        };
        log.records.push(record);

        let designs: Vec<Design> = log
            .records
            .iter()
            .zip(&fields)
            .map(|(r, f)| Design {
                label: if r.index == 0 { "Original".to_string() } else { format!("Revision {}", r.index) },
                images: images_of(&log, run_dir, r.index),
                densities: f.clone(),
                mesh: r.spec.mesh,
            })
            .collect();
        let mut transcript = Vec::new();
        let verdicts = judge.judge(&designs, index, &mut transcript);
        log.transcript.extend(transcript);
        match verdicts {
            Ok(v) => {
                log.judge_rounds.push(JudgeRound { after_revision: index, scores: v.iter().map(|v| v.score).collect() });
                for (r, v) in log.records.iter_mut().zip(v) {
                    r.verdict = Some(v);
                }
            }
            Err(e) => {
                log.status = RunStatus::AgentAborted { revision: index, message: e.to_string() };
                save(&log)?;
                return Ok(log);
            }
        }
        save(&log)?;
    }
    Ok(log)
}

/// Render files of record `i` in manifest order; empty when unavailable.
fn images_of(log: &RunLog, run_dir: &Path, i: usize) -> Vec<PathBuf> {
    let Some(dir) = log.render_dir(run_dir, i) else { return Vec::new() };
    match log.manifest(run_dir, i) {
        Ok(m) => m.views.iter().map(|v| dir.join(&v.file)).collect(),
        Err(e) => {
            log::warn!("revision {i}: cannot read render manifest: {e}");
            Vec::new()
        }
    }
}
