//! Vision agent: shows the design history to a model and parses the
//! parameter diff it proposes.

use std::path::PathBuf;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::{Map, Value};
use topoagent_core::problem::{ParameterDiff, ProblemSpec, RevisionRules};

use crate::client::{AgentError, ChatModel};
use crate::judge::JudgeVerdict;
use crate::message::{ChatMessage, Part, Role};
use crate::prompts::{rules_block, vision_system_prompt, DIFF_FORMAT_INSTRUCTIONS, HISTORY_INSTRUCTIONS};
use crate::transcript::{converse, AgentKind, Exchange};

/// One earlier design as presented to the vision agent.
#[derive(Debug, Clone)]
pub struct HistoryEntry<'a> {
    pub index: usize,
    pub base: Option<usize>,
    pub spec: &'a ProblemSpec,
    pub diff: &'a ParameterDiff,
    pub verdict: Option<&'a JudgeVerdict>,
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct VisionRequest<'a> {
    pub original: &'a ProblemSpec,
    pub preference: &'a str,
    pub history: &'a [HistoryEntry<'a>],
    pub best: usize,
    pub rules: &'a RevisionRules,
    pub ablation: bool,
}

/// The tunable sections of a spec; loads and supports are described once in
/// the problem statement.
fn parameters(spec: &ProblemSpec) -> Value {
    let mut v = spec.to_value();
    if let Value::Object(m) = &mut v {
        m.retain(|k, _| !matches!(k.as_str(), "bcs" | "loads" | "label"));
    }
    v
}

fn fenced(v: &Value) -> String {
    format!("```json\n{}\n```", serde_json::to_string_pretty(v).expect("json value serializes"))
}

fn entry_text(e: &HistoryEntry) -> String {
    let title = match e.base {
        None => format!("Revision {} (original design)", e.index),
        Some(b) => format!("Revision {} (built on revision {b})", e.index),
    };
    let mut s = format!("{title}\nParameters:\n{}", fenced(&parameters(e.spec)));
    if !e.diff.is_empty() {
        s.push_str(&format!("\nChanges from its base:\n{}", fenced(&serde_json::to_value(e.diff).expect("diff serializes"))));
    }
    match e.verdict {
        Some(v) => s.push_str(&format!("\nAI Judge score: {:.1}\nAI Judge feedback: {}", v.score, v.justification)),
        None => s.push_str("\nAI Judge score: not yet judged"),
    }
    s.push_str("\nImages: front, back, top, bottom, left and right views.");
    s
}

pub fn vision_messages(req: &VisionRequest) -> Vec<ChatMessage> {
    let best_entry = req.history.iter().find(|e| e.index == req.best);
    let system = if req.ablation {
        vision_system_prompt(None)
    } else {
        vision_system_prompt(Some((req.best, best_entry.and_then(|e| e.verdict).map(|v| v.score))))
    };
    let problem = format!(
        "Problem description:\n{}\n\nDesigner request:\n{}",
        fenced(&req.original.to_value()),
        req.preference
    );
    let mut messages = vec![ChatMessage::system(system), ChatMessage::user(problem)];

    if !req.ablation {
        let mut parts = vec![Part::Text { text: HISTORY_INSTRUCTIONS.to_string() }];
        for e in req.history {
            parts.push(Part::Text { text: entry_text(e) });
            parts.extend(e.images.iter().map(|p| Part::Image { path: p.clone() }));
        }
        messages.push(ChatMessage::new(Role::User, parts));
    }

    let (base_name, base_spec) = match (req.ablation, best_entry) {
        (false, Some(e)) => (format!("revision {}", e.index), e.spec),
        _ => ("the original problem".to_string(), req.original),
    };
    messages.push(ChatMessage::user(format!(
        "{}\n\n{DIFF_FORMAT_INSTRUCTIONS}\n\nPropose changes relative to the parameters of {base_name}:\n{}",
        rules_block(req.rules),
        fenced(&parameters(base_spec))
    )));
    messages
}

fn fence() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\r?\n(.*?)```").expect("valid regex"))
}

/// Accepts `{"path": [old, new]}` and also a bare new value, whose old value is
/// filled in when the diff is rebased.
fn normalize(obj: Map<String, Value>) -> Value {
    let out: Map<String, Value> = obj
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                v if k == "rationale" => v,
                Value::Array(a) if a.len() == 2 => Value::Array(a),
                other => Value::Array(vec![Value::Null, other]),
            };
            (k, v)
        })
        .collect();
    Value::Object(out)
}

fn parse_candidate(text: &str) -> Result<ParameterDiff, String> {
    let value: Value = serde_json::from_str(text.trim()).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(obj) = value else {
        return Err("the JSON block must be an object".into());
    };
    let mut diff: ParameterDiff = serde_json::from_value(normalize(obj)).map_err(|e| e.to_string())?;
    diff.rationale = diff.rationale.trim().to_string();
    Ok(diff)
}

/// The diff in the last usable fenced JSON block of `reply`.
pub fn parse_diff(reply: &str) -> Result<ParameterDiff, String> {
    let blocks: Vec<&str> = fence().captures_iter(reply).map(|c| c.get(1).expect("group").as_str()).collect();
    if blocks.is_empty() {
        let trimmed = reply.trim();
        if trimmed.starts_with('{') {
            return parse_candidate(trimmed);
        }
        return Err("no fenced ```json block found".into());
    }
    let mut last_err = String::new();
    for b in blocks.iter().rev() {
        match parse_candidate(b) {
            Ok(d) => return Ok(d),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Asks the model for a revision; one reprompt on an unusable reply.
pub fn vision_revise(
    model: &mut dyn ChatModel,
    req: &VisionRequest,
    revision: usize,
    transcript: &mut Vec<Exchange>,
) -> Result<ParameterDiff, AgentError> {
    if req.history.is_empty() {
        return Err(AgentError::Precondition("vision agent needs at least one rendered design".into()));
    }
    let mut messages = vision_messages(req);
    let reply = converse(model, AgentKind::Vision, revision, messages.clone(), transcript)?;
    let err = match parse_diff(&reply) {
        Ok(d) => return Ok(d),
        Err(e) => e,
    };
    messages.push(ChatMessage::assistant(reply));
    messages.push(ChatMessage::user(format!(
        "Your reply could not be used: {err}. Reply again with exactly one fenced ```json block in the format described above."
    )));
    let retry = converse(model, AgentKind::Vision, revision, messages, transcript)?;
    parse_diff(&retry).map_err(|message| AgentError::Unparseable { agent: "vision", message })
}
