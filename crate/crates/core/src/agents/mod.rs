//! Planner/executor loop: the evaluator plans, the editor executes one action
//! at a time, the environment checks each one and the evaluator replans on
//! failure.

mod bundle;
mod episode;
mod transport;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{CompileConfig, ConstraintError};
use crate::env::{Action, ActionOutcome, EnvConfig};
use crate::geometry::GeometryParams;

pub use bundle::{ContextBundle, View, ViewKind, ViewMode};
pub(crate) use episode::extract_json;
pub use episode::{request_action, request_plan, run_episode, Episode, EpisodeFailure, LlmEnricher};
pub use transport::{
    ChatClient, ChatMessage, ChatRequest, FnClient, HttpChatClient, Part, Role, ScriptLine, ScriptedClient, TransportError,
};

pub const EVALUATOR_PROMPT: &str = include_str!("../../prompts/evaluator_v1.txt");
pub const EDITOR_PROMPT: &str = include_str!("../../prompts/editor_v1.txt");
pub const JUDGE_PROMPT: &str = include_str!("../../prompts/judge_v1.txt");
pub const ENRICHER_PROMPT: &str = include_str!("../../prompts/enricher_v1.txt");
pub const PROMPT_VERSION: &str = "v1";

/// A connected agent: a chat client plus decoding settings.
#[derive(Clone)]
pub struct AgentEndpoint {
    pub role: Role,
    pub client: Arc<dyn ChatClient>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Send rendered views as image attachments instead of a text map.
    pub vision: bool,
}

impl AgentEndpoint {
    pub fn new(role: Role, client: Arc<dyn ChatClient>) -> Self {
        Self { role, client, temperature: 0.0, max_tokens: 2048, vision: false }
    }

    pub fn scripted(role: Role, transcript: &str) -> Result<Self, AgentError> {
        let c = ScriptedClient::parse(transcript).map_err(AgentError::Config)?;
        Ok(Self::new(role, Arc::new(c)))
    }
}

impl std::fmt::Debug for AgentEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentEndpoint").field("role", &self.role).field("vision", &self.vision).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpTransport {
    /// Root of an OpenAI-compatible API, e.g. `https://host/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

fn default_max_tokens() -> u32 {
    2048
}

/// Serializable endpoint descriptor. Exactly one of `transport` and `mock`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    #[serde(default)]
    pub transport: Option<HttpTransport>,
    /// Scripted transcript (JSONL) used instead of a live endpoint.
    #[serde(default)]
    pub mock: Option<PathBuf>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub vision: bool,
}

impl EndpointConfig {
    pub fn mock(path: impl Into<PathBuf>) -> Self {
        Self { transport: None, mock: Some(path.into()), temperature: 0.0, max_tokens: default_max_tokens(), vision: false }
    }

    pub fn connect(&self, role: Role) -> Result<AgentEndpoint, AgentError> {
        let client: Arc<dyn ChatClient> = match (&self.transport, &self.mock) {
            (Some(t), None) => {
                Arc::new(HttpChatClient::new(&t.base_url, &t.model, t.token_env.as_deref(), Duration::from_secs(t.timeout_secs))?)
            }
            (None, Some(p)) => Arc::new(ScriptedClient::from_file(p)?),
            _ => return Err(AgentError::Config(format!("{role:?} endpoint needs exactly one of `transport` and `mock`"))),
        };
        Ok(AgentEndpoint { role, client, temperature: self.temperature, max_tokens: self.max_tokens, vision: self.vision })
    }
}

/// Endpoint descriptors for a whole run, as read from an endpoint config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsConfig {
    #[serde(default)]
    pub evaluator: Option<EndpointConfig>,
    #[serde(default)]
    pub editor: Option<EndpointConfig>,
    #[serde(default)]
    pub judge: Option<EndpointConfig>,
}

impl EndpointsConfig {
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AgentError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct Endpoints {
    pub evaluator: AgentEndpoint,
    pub editor: AgentEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_plan_length: usize,
    pub max_feedback_rounds: usize,
    /// Extra editor calls allowed for unparseable output.
    pub editor_retry_limit: usize,
    /// Times the editor may retry a plan step after a collision or
    /// out-of-bounds rejection.
    pub correction_attempts: usize,
    pub collision_checking: bool,
    pub keep_in_room: bool,
    pub eps: f64,
    /// Simulate each plan on a copy and offer the predictions to the evaluator.
    pub dry_run: bool,
    /// How many recent outcomes go into each bundle.
    pub recent_outcomes: usize,
    /// Let the evaluator add soft constraints at compile time.
    pub enrich: bool,
    pub seed: u64,
    /// Where per-step views are written; none keeps them in memory.
    pub views_dir: Option<PathBuf>,
    pub compile: CompileConfig,
    pub geometry: GeometryParams,
}

impl Default for LoopConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            max_plan_length: 30,
            max_feedback_rounds: 3,
            editor_retry_limit: 2,
            correction_attempts: 1,
            collision_checking: env.collision_checking,
            keep_in_room: env.keep_in_room,
            eps: env.eps,
            dry_run: true,
            recent_outcomes: 5,
            enrich: false,
            seed: 0,
            views_dir: None,
            compile: CompileConfig::default(),
            geometry: GeometryParams::default(),
        }
    }
}

impl LoopConfig {
    pub fn env(&self) -> EnvConfig {
        EnvConfig { collision_checking: self.collision_checking, eps: self.eps, keep_in_room: self.keep_in_room }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        for (name, v) in [
            ("max_plan_length", self.max_plan_length),
            ("max_feedback_rounds", self.max_feedback_rounds),
            ("editor_retry_limit", self.editor_retry_limit),
        ] {
            if v == 0 {
                return Err(AgentError::Config(format!("`{name}` must be a positive integer")));
            }
        }
        self.env().validate().map_err(|e| AgentError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub rationale: String,
    /// Dry-run predictions, one per action; empty when no dry run took place.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicted: Vec<ActionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanIssue {
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("plan has no actions")]
    Empty,
    #[error("plan has {len} actions, limit is {max}")]
    TooLong { len: usize, max: usize },
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("plan could not be parsed: {0}")]
    PlanParseFailure(String),
    #[error("invalid plan: {0}")]
    PlanValidationFailure(PlanIssue),
    #[error("editor action rejected: {0}")]
    ActionParseFailure(String),
    #[error(transparent)]
    Constraints(#[from] ConstraintError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("hard constraints still unsatisfied after {rounds} feedback rounds")]
    EpisodeFailed { rounds: usize },
    #[error("writing views: {0}")]
    Io(String),
}
