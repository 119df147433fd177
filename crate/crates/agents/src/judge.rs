//! Design judges: a chat-model judge and fixed-score stand-ins.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use topoagent_core::mesh::StructuredMesh;

use crate::client::{AgentError, ChatModel};
use crate::message::{ChatMessage, Part, Role};
use crate::prompts::{JUDGE_FORMAT_INSTRUCTIONS, JUDGE_SYSTEM_PROMPT};
use crate::transcript::{converse, AgentKind, Exchange};

/// Score of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    /// On the half-point lattice in [1, 5].
    pub score: f64,
    /// Score as given, before snapping to the lattice.
    pub raw_score: f64,
    pub rounded: bool,
    pub justification: String,
    pub confidence: Option<f64>,
}

impl JudgeVerdict {
    pub fn new(raw_score: f64, justification: impl Into<String>, confidence: Option<f64>) -> Self {
        let score = snap_score(raw_score);
        Self { score, raw_score, rounded: score != raw_score, justification: justification.into(), confidence }
    }
}

/// Nearest point of {1.0, 1.5, ..., 5.0}.
pub fn snap_score(s: f64) -> f64 {
    if s.is_nan() {
        return 1.0;
    }
    ((s * 2.0).round() / 2.0).clamp(1.0, 5.0)
}

/// One design as shown to a judge.
#[derive(Debug, Clone)]
pub struct Design {
    pub label: String,
    pub images: Vec<PathBuf>,
    /// Projected element densities.
    pub densities: Vec<f64>,
    pub mesh: StructuredMesh,
}

pub trait Judge {
    /// Scores every design; `revision` is the revision just completed.
    fn judge(
        &mut self,
        designs: &[Design],
        revision: usize,
        transcript: &mut Vec<Exchange>,
    ) -> Result<Vec<JudgeVerdict>, AgentError>;
}

fn require_two(designs: &[Design]) -> Result<(), AgentError> {
    if designs.len() < 2 {
        return Err(AgentError::Precondition(format!("judging needs at least two designs, got {}", designs.len())));
    }
    Ok(())
}

/// `A, B, ..., Z, AA, AB, ...`.
pub fn design_letter(i: usize) -> String {
    let mut n = i + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn judge_messages(designs: &[Design]) -> Vec<ChatMessage> {
    let mut parts = Vec::new();
    for (i, d) in designs.iter().enumerate() {
        parts.push(Part::Text { text: format!("Image {} ({}):", design_letter(i), d.label) });
        parts.extend(d.images.iter().map(|p| Part::Image { path: p.clone() }));
    }
    parts.push(Part::Text { text: JUDGE_FORMAT_INSTRUCTIONS.to_string() });
    vec![ChatMessage::system(JUDGE_SYSTEM_PROMPT), ChatMessage::new(Role::User, parts)]
}

fn score_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)image\s+([A-Z]{1,2})\b[^:\n]*:[\s*_]*score[\s*_]*(?:--|-|–|—|:)[\s*_]*([0-9]+(?:\.[0-9]+)?)")
            .expect("valid regex")
    })
}

fn confidence_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)confidence[\s*_]*:?[\s*_]*([0-9]+(?:\.[0-9]+)?)\s*%").expect("valid regex"))
}

fn justification_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)justification[\s*_]*:[\s*_]*(.*)").expect("valid regex"))
}

/// Verdicts keyed by design letter, in the order they appear in `text`.
pub fn parse_verdicts(text: &str) -> BTreeMap<String, JudgeVerdict> {
    let heads: Vec<_> = score_line().captures_iter(text).collect();
    let mut out = BTreeMap::new();
    for (k, cap) in heads.iter().enumerate() {
        let whole = cap.get(0).expect("match");
        let end = heads.get(k + 1).map_or(text.len(), |c| c.get(0).expect("match").start());
        let section = &text[whole.end()..end];
        let confidence = confidence_line().captures(section).and_then(|c| c[1].parse().ok()).map(|c: f64| c.clamp(0.0, 100.0));
        let body = confidence_line().split(section).next().unwrap_or("");
        let justification = justification_line()
            .captures(body)
            .map_or(body, |c| c.get(1).expect("group").as_str())
            .trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_' || c == '\\')
            .to_string();
        let raw: f64 = cap[2].parse().expect("numeric capture");
        out.entry(cap[1].to_ascii_uppercase()).or_insert_with(|| JudgeVerdict::new(raw, justification, confidence));
    }
    out
}

/// Judge backed by a chat model; re-asks once when scores are missing.
pub struct ModelJudge<M: ChatModel> {
    pub model: M,
}

impl<M: ChatModel> ModelJudge<M> {
    pub fn new(model: M) -> Self {
        Self { model }
    }
}

impl<M: ChatModel> Judge for ModelJudge<M> {
    fn judge(
        &mut self,
        designs: &[Design],
        revision: usize,
        transcript: &mut Vec<Exchange>,
    ) -> Result<Vec<JudgeVerdict>, AgentError> {
        require_two(designs)?;
        let letters: Vec<String> = (0..designs.len()).map(design_letter).collect();
        let mut messages = judge_messages(designs);
        let reply = converse(&mut self.model, AgentKind::Judge, revision, messages.clone(), transcript)?;
        let mut found = parse_verdicts(&reply);
        let missing: Vec<&String> = letters.iter().filter(|l| !found.contains_key(*l)).collect();
        if !missing.is_empty() {
            let list = missing.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ");
            messages.push(ChatMessage::assistant(reply));
            messages.push(ChatMessage::user(format!(
                "No score was found for image(s) {list}. Give a score for every image using the line format `Image <letter> (<label>): Score -- <score>`."
            )));
            let retry = converse(&mut self.model, AgentKind::Judge, revision, messages, transcript)?;
            for (k, v) in parse_verdicts(&retry) {
                found.insert(k, v);
            }
        }
        let mut out = Vec::with_capacity(designs.len());
        for l in &letters {
            match found.remove(l) {
                Some(v) => out.push(v),
                None => {
                    return Err(AgentError::Unparseable { agent: "judge", message: format!("no score for image {l}") })
                }
            }
        }
        for (l, v) in letters.iter().zip(&out) {
            if v.rounded {
                log::warn!("judge score {} for image {l} snapped to {}", v.raw_score, v.score);
            }
        }
        Ok(out)
    }
}

/// Returns preset scores by design position: design `i` gets `scores[i]`.
#[derive(Debug, Clone)]
pub struct FixedJudge {
    pub scores: Vec<f64>,
}

impl Judge for FixedJudge {
    fn judge(&mut self, designs: &[Design], _: usize, _: &mut Vec<Exchange>) -> Result<Vec<JudgeVerdict>, AgentError> {
        require_two(designs)?;
        (0..designs.len())
            .map(|i| {
                self.scores
                    .get(i)
                    .map(|s| JudgeVerdict::new(*s, "fixed score", None))
                    .ok_or_else(|| AgentError::Precondition(format!("no fixed score for design {i}")))
            })
            .collect()
    }
}
