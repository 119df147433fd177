//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;
use topoagent_agents::prompts::DEFAULT_PREFERENCE;
use topoagent_agents::{
    orchestrate, ChatModel, HttpChatModel, Judge, ModelEndpoint, ModelJudge, RunConfig, RunLog, RunStatus, ScriptedModel,
    StubJudge,
};
use topoagent_core::grid_io::DensityGrid;
use topoagent_core::manufacture::{
    add_supports, export_obj, marching_cubes, SupportPreset, DEFAULT_ISO, TARGET_LONGEST_EDGE_MM,
};
use topoagent_core::problem::{validate, Preset, ProblemSpec, RevisionRules};
use topoagent_core::render::{render_sixpack, RenderOptions};
use topoagent_core::simp::Optimizer;

use crate::analysis::{parameter_stats, score_trend, stats_csv};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("agent failure: {0}")]
    Agent(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Agent(_) => 3,
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Validation(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "topoagent", version, about = "Agent-guided 3D topology optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RenderArgs {
    #[arg(long, default_value_t = 1920)]
    pub width: usize,
    #[arg(long, default_value_t = 1080)]
    pub height: usize,
    /// Density threshold for the rendered surface.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub no_colorbar: bool,
}

impl RenderArgs {
    fn options(&self) -> RenderOptions {
        RenderOptions { width: self.width, height: self.height, threshold: self.threshold, colorbar: !self.no_colorbar }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SupportChoice {
    PhoneStand,
    None,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimization and write densities, renders and a summary.
    Solve {
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Run the agent revision loop.
    Run {
        spec: PathBuf,
        /// File holding the designer's request.
        #[arg(long)]
        preference: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        budget: usize,
        /// Hide history and images from the vision agent.
        #[arg(long)]
        ablation: bool,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Canned replies: a JSON array for the vision agent, or an object
        /// with "vision" and "judge" arrays.
        #[arg(long)]
        scripted: Option<PathBuf>,
        /// Score designs with the offline stub judge.
        #[arg(long)]
        stub_judge: bool,
        /// Revision rules preset; defaults to the one named by the spec label.
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long, default_value_t = topoagent_agents::client::DEFAULT_TEMPERATURE)]
        temperature: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Render a stored density field.
    Render {
        densities: PathBuf,
        spec: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Turn the best design of a run into a printable OBJ.
    Postprocess {
        runlog: PathBuf,
        #[arg(long, value_enum, default_value = "phone-stand")]
        preset: SupportChoice,
        #[arg(short = 'o', long, default_value = "out/best.obj")]
        output: PathBuf,
        /// Use this revision instead of the best-scoring one.
        #[arg(long)]
        revision: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_ISO)]
        iso: f64,
        #[arg(long, default_value_t = TARGET_LONGEST_EDGE_MM)]
        longest_mm: f64,
    },
    /// Parameter change statistics as CSV.
    Stats {
        #[arg(required = true)]
        runlogs: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Per-revision mean score and its least-squares slope.
    Trend {
        #[arg(required = true)]
        runlogs: Vec<PathBuf>,
    },
}

pub fn load_spec(path: &Path) -> Result<ProblemSpec, CliError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    validate(&text).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(|e| format!("  {e}")).collect();
        CliError::Validation(format!("{} is not a valid problem:\n{}", path.display(), lines.join("\n")))
    })
}

fn rules_for(spec: &ProblemSpec, preset: Option<Preset>) -> RevisionRules {
    match preset.or_else(|| spec.label.parse().ok()) {
        Some(p) => p.rules(),
        None => RevisionRules::default(),
    }
}

fn endpoint_from_env(prefix: &str, temperature: f64) -> Result<ModelEndpoint, CliError> {
    let var = |name: &str| std::env::var(format!("{prefix}_{name}")).ok().filter(|v| !v.is_empty());
    let url = var("ENDPOINT").ok_or_else(|| CliError::Agent(format!("{prefix}_ENDPOINT is not set")))?;
    let model = var("MODEL").ok_or_else(|| CliError::Agent(format!("{prefix}_MODEL is not set")))?;
    Ok(ModelEndpoint { api_key_env: Some(format!("{prefix}_API_KEY")), temperature, ..ModelEndpoint::new(url, model) })
}

struct Fixture {
    vision: Vec<String>,
    judge: Option<Vec<String>>,
}

fn load_fixture(path: &Path) -> Result<Fixture, CliError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let strings = |v: &serde_json::Value| -> Result<Vec<String>, CliError> {
        serde_json::from_value(v.clone()).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    };
    match &value {
        serde_json::Value::Array(_) => Ok(Fixture { vision: strings(&value)?, judge: None }),
        serde_json::Value::Object(m) => Ok(Fixture {
            vision: m.get("vision").map(strings).transpose()?.unwrap_or_default(),
            judge: m.get("judge").map(strings).transpose()?,
        }),
        _ => Err(CliError::Validation(format!("{}: expected a JSON array or object", path.display()))),
    }
}

fn solve(spec_path: &Path, out: &Path, render: &RenderArgs) -> Result<(), CliError> {
    let spec = load_spec(spec_path)?;
    let opt = Optimizer::new(&spec).map_err(|e| CliError::Solver(e.to_string()))?;
    let result = opt
        .run_with(|p| log::info!("iteration {}: c = {:.6e}, v = {:.4}", p.iteration, p.compliance, p.volume))
        .map_err(|e| CliError::Solver(e.to_string()))?;
    fs::create_dir_all(out).map_err(io(out))?;
    let densities = out.join("densities.bin");
    DensityGrid::new(&spec.mesh, &result.densities.projected)
        .save(&densities)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    render_sixpack(&result.densities.projected, &spec.mesh, &spec.loads, &spec.bcs, &render.options())
        .save(out)
        .map_err(io(out))?;
    let summary = out.join("result.json");
    let text = serde_json::to_string_pretty(&json!({
        "iterations": result.iterations,
        "termination": result.termination,
        "final_compliance": result.final_compliance,
        "final_volume": result.final_volume,
        "solver_warnings": result.solver_warnings,
        "compliance": result.compliance,
        "volume": result.volume,
    }))
    .expect("summary serializes");
    fs::write(&summary, text).map_err(io(&summary))?;
    println!(
        "{} iterations ({:?}), compliance {:.6e}, volume {:.4}; wrote {}",
        result.iterations,
        result.termination,
        result.final_compliance,
        result.final_volume,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run(
    spec_path: &Path,
    preference: Option<&Path>,
    budget: usize,
    ablation: bool,
    replicates: usize,
    scripted: Option<&Path>,
    stub_judge: bool,
    preset: Option<Preset>,
    temperature: f64,
    out: &Path,
    render: &RenderArgs,
) -> Result<(), CliError> {
    let spec = load_spec(spec_path)?;
    let rules = rules_for(&spec, preset);
    let preference = match preference {
        Some(p) => fs::read_to_string(p).map_err(io(p))?.trim().to_string(),
        None => DEFAULT_PREFERENCE.to_string(),
    };
    let fixture = scripted.map(load_fixture).transpose()?;
    let vision_endpoint = match &fixture {
        Some(_) => None,
        None => Some(endpoint_from_env("VISION", temperature)?),
    };
    let judge_endpoint = match (&fixture, stub_judge) {
        (_, true) | (Some(Fixture { judge: Some(_), .. }), _) => None,
        _ => Some(endpoint_from_env("JUDGE", temperature)?),
    };

    let logs: Vec<Result<RunLog, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..replicates.max(1))
            .map(|k| {
                let (spec, rules, preference, fixture) = (&spec, &rules, &preference, &fixture);
                let (vision_endpoint, judge_endpoint) = (&vision_endpoint, &judge_endpoint);
                scope.spawn(move || -> Result<RunLog, CliError> {
                    let mut vision: Box<dyn ChatModel> = match (fixture, vision_endpoint) {
                        (Some(f), _) => Box::new(ScriptedModel::new(f.vision.clone())),
                        (None, Some(ep)) => Box::new(HttpChatModel::new(ep.clone()).map_err(|e| CliError::Agent(e.to_string()))?),
                        (None, None) => unreachable!("vision endpoint resolved above"),
                    };
                    let mut judge: Box<dyn Judge> = match (stub_judge, fixture, judge_endpoint) {
                        (true, _, _) => Box::new(StubJudge),
                        (false, Some(Fixture { judge: Some(j), .. }), _) => Box::new(ModelJudge::new(ScriptedModel::new(j.clone()))),
                        (false, _, Some(ep)) => Box::new(ModelJudge::new(
                            HttpChatModel::new(ep.clone()).map_err(|e| CliError::Agent(e.to_string()))?,
                        )),
                        _ => unreachable!("judge resolved above"),
                    };
                    let config = RunConfig {
                        budget,
                        ablation,
                        replicate: k,
                        preference: preference.clone(),
                        render: render.options(),
                    };
                    let dir = if replicates > 1 { out.join(format!("replicate_{k}")) } else { out.to_path_buf() };
                    orchestrate(spec, rules, &config, vision.as_mut(), judge.as_mut(), &dir).map_err(|e| match e {
                        topoagent_agents::RunError::Invalid(_) => CliError::Validation(e.to_string()),
                        topoagent_agents::RunError::Io { .. } => CliError::Validation(e.to_string()),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("replicate thread panicked")).collect()
    });

    let mut worst: Option<CliError> = None;
    for (k, log) in logs.into_iter().enumerate() {
        let err = match log {
            Err(e) => Some(e),
            Ok(log) => {
                let best = log.best();
                println!(
                    "replicate {k}: {} record(s), best revision {}, status {:?}",
                    log.records.len(),
                    best.map_or("none".to_string(), |b| b.to_string()),
                    log.status
                );
                match log.status {
                    RunStatus::Completed => None,
                    RunStatus::SolverAborted { revision, message } => {
                        Some(CliError::Solver(format!("replicate {k}, revision {revision}: {message}")))
                    }
                    RunStatus::AgentAborted { revision, message } => {
                        Some(CliError::Agent(format!("replicate {k}, revision {revision}: {message}")))
                    }
                }
            }
        };
        if let Some(e) = err {
            log::error!("{e}");
            if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                worst = Some(e);
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn render_cmd(densities: &Path, spec_path: &Path, out: &Path, render: &RenderArgs) -> Result<(), CliError> {
    let spec = load_spec(spec_path)?;
    let grid = DensityGrid::load(densities).map_err(|e| CliError::Validation(e.to_string()))?;
    if grid.dims != spec.mesh.counts() {
        return Err(CliError::Validation(format!(
            "density grid is {:?} but the spec mesh is {:?}",
            grid.dims,
            spec.mesh.counts()
        )));
    }
    render_sixpack(&grid.values_f64(), &spec.mesh, &spec.loads, &spec.bcs, &render.options()).save(out).map_err(io(out))?;
    println!("wrote six views to {}", out.display());
    Ok(())
}

fn postprocess(
    runlog: &Path,
    preset: SupportChoice,
    output: &Path,
    revision: Option<usize>,
    iso: f64,
    longest_mm: f64,
) -> Result<(), CliError> {
    let log = RunLog::load(runlog).map_err(io(runlog))?;
    let dir = RunLog::run_dir(runlog);
    let index = match revision {
        Some(r) => r,
        None => log.best().ok_or_else(|| CliError::Validation("run log has no records".into()))?,
    };
    let record = log.records.get(index).ok_or_else(|| CliError::Validation(format!("no revision {index}")))?;
    let rel = record.densities.as_ref().ok_or_else(|| CliError::Validation(format!("revision {index} has no densities")))?;
    let grid = DensityGrid::load(&dir.join(rel)).map_err(|e| CliError::Validation(e.to_string()))?;
    let mesh = record.spec.mesh;
    let supports = match preset {
        SupportChoice::PhoneStand => SupportPreset::phone_stand(&mesh),
        SupportChoice::None => SupportPreset::none(),
    };
    let field = add_supports(&grid.values_f64(), &mesh, &supports);
    let surface = marching_cubes(&field, &mesh, iso);
    let scaled = export_obj(&surface, output, longest_mm).map_err(|e| CliError::Validation(e.to_string()))?;
    let e = scaled.extents();
    println!(
        "revision {index}: {} triangles, {:.1} x {:.1} x {:.1} mm, closed: {}; wrote {}",
        scaled.triangles.len(),
        e[0],
        e[1],
        e[2],
        scaled.is_closed_manifold(),
        output.display()
    );
    Ok(())
}

fn load_logs(paths: &[PathBuf]) -> Result<Vec<RunLog>, CliError> {
    paths.iter().map(|p| RunLog::load(p).map_err(io(p))).collect()
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { spec, out, render } => solve(&spec, &out, &render),
        Command::Run {
            spec,
            preference,
            budget,
            ablation,
            replicates,
            scripted,
            stub_judge,
            preset,
            temperature,
            out,
            render,
        } => run(
            &spec,
            preference.as_deref(),
            budget,
            ablation,
            replicates,
            scripted.as_deref(),
            stub_judge,
            preset,
            temperature,
            &out,
            &render,
        ),
        Command::Render { densities, spec, out, render } => render_cmd(&densities, &spec, &out, &render),
        Command::Postprocess { runlog, preset, output, revision, iso, longest_mm } => {
            postprocess(&runlog, preset, &output, revision, iso, longest_mm)
        }
        Command::Stats { runlogs, json } => {
            let stats = parameter_stats(&load_logs(&runlogs)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            } else {
                print!("{}", stats_csv(&stats));
            }
            Ok(())
        }
        Command::Trend { runlogs } => {
            let logs = load_logs(&runlogs)?;
            let mut groups = serde_json::Map::new();
            for (name, ablation) in [("full", false), ("ablation", true)] {
                let group: Vec<RunLog> = logs.iter().filter(|l| l.ablation == ablation).cloned().collect();
                if group.is_empty() {
                    continue;
                }
                let t = score_trend(&group).map_err(|e| CliError::Validation(e.to_string()))?;
                groups.insert(name.into(), serde_json::to_value(t).expect("trend serializes"));
            }
            println!("{}", serde_json::to_string_pretty(&groups).expect("json"));
            Ok(())
        }
    }
}
