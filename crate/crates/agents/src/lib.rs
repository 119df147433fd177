//! Agent layer for topology optimization: chat-model clients, the vision
//! agent that proposes parameter revisions, design judges, and the
//! orchestrator that runs the revision loop.

pub mod client;
pub mod judge;
pub mod message;
pub mod orchestrator;
pub mod prompts;
pub mod runlog;
pub mod stub_judge;
pub mod transcript;
pub mod vision;

pub use client::{AgentError, ChatModel, HttpChatModel, ModelEndpoint, ScriptedModel};
pub use judge::{Design, FixedJudge, Judge, JudgeVerdict, ModelJudge};
pub use message::{ChatMessage, Part, Role};
pub use orchestrator::{orchestrate, RunConfig, RunError};
pub use runlog::{RevisionRecord, RunLog, RunStatus};
pub use stub_judge::{stub_judge, StubJudge};
