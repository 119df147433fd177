//! Verbatim record of every model call.

use serde::{Deserialize, Serialize};

use crate::client::{AgentError, ChatModel};
use crate::message::ChatMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Vision,
    Judge,
}

/// One request and what came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub agent: AgentKind,
    /// Revision being proposed (vision) or just completed (judge).
    pub revision: usize,
    pub request: Vec<ChatMessage>,
    pub reply: Option<String>,
    pub error: Option<String>,
}

/// Sends `messages` and appends the exchange to `transcript`.
pub fn converse(
    model: &mut dyn ChatModel,
    agent: AgentKind,
    revision: usize,
    messages: Vec<ChatMessage>,
    transcript: &mut Vec<Exchange>,
) -> Result<String, AgentError> {
    let result = model.chat(&messages);
    let (reply, error) = match &result {
        Ok(text) => (Some(text.clone()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    transcript.push(Exchange { agent, revision, request: messages, reply, error });
    result
}
