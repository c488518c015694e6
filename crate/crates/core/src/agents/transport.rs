use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Evaluator,
    Editor,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text { text: String },
    Image { media_type: String, data_base64: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// `system`, `user` or `assistant`.
    pub role: String,
    pub parts: Vec<Part>,
}

impl ChatMessage {
    pub fn text(role: &str, text: impl Into<String>) -> Self {
        Self { role: role.into(), parts: vec![Part::Text { text: text.into() }] }
    }

    pub fn joined_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub role: Role,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    /// Reply an echoing mock gives: the hinted action for editors, empty otherwise.
    pub hint: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("http error: {0}")]
    Http(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("auth token variable `{0}` is not set")]
    MissingToken(String),
    #[error("unexpected response body: {0}")]
    BadResponse(String),
    #[error("scripted transcript exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error("cannot load transcript {path}: {message}")]
    Script { path: String, message: String },
}

/// A chat-completion backend. Implementations are shared across episodes.
pub trait ChatClient: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError>;
}

/// OpenAI-compatible `/chat/completions` over blocking HTTP.
pub struct HttpChatClient {
    base_url: String,
    model: String,
    token: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    /// Reads the bearer token from `token_env` now, if a name is given.
    pub fn new(base_url: &str, model: &str, token_env: Option<&str>, timeout: Duration) -> Result<Self, TransportError> {
        let token = match token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| TransportError::MissingToken(var.into()))?),
            None => None,
        };
        let http =
            reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| TransportError::Http(e.to_string()))?;
        Ok(Self { base_url: base_url.trim_end_matches('/').into(), model: model.into(), token, http })
    }

    pub fn body(&self, req: &ChatRequest) -> Value {
        let messages: Vec<Value> = req
            .messages
            .iter()
            .map(|m| {
                let content = match m.parts.as_slice() {
                    [Part::Text { text }] => Value::String(text.clone()),
                    parts => Value::Array(
                        parts
                            .iter()
                            .map(|p| match p {
                                Part::Text { text } => json!({"type": "text", "text": text}),
                                Part::Image { media_type, data_base64 } => json!({
                                    "type": "image_url",
                                    "image_url": {"url": format!("data:{media_type};base64,{data_base64}")}
                                }),
                            })
                            .collect(),
                    ),
                };
                json!({"role": m.role, "content": content})
            })
            .collect();
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        let mut call = self.http.post(format!("{}/chat/completions", self.base_url)).json(&self.body(req));
        if let Some(t) = &self.token {
            call = call.bearer_auth(t);
        }
        let resp = call.send().map_err(|e| TransportError::Http(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| TransportError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Status { status: status.as_u16(), body: text });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| TransportError::BadResponse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or(TransportError::BadResponse(text))
    }
}

/// One transcript line. `repeat` lines are never consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<Value>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub echo: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
}

impl ScriptLine {
    fn reply(&self, req: &ChatRequest) -> Result<String, TransportError> {
        match (&self.content, &self.json, self.echo, &self.error) {
            (Some(c), None, false, None) => Ok(c.clone()),
            (None, Some(v), false, None) => Ok(v.to_string()),
            (None, None, true, None) => Ok(req.hint.clone().unwrap_or_default()),
            (None, None, false, Some(e)) => Err(TransportError::Scripted(e.clone())),
            _ => Err(TransportError::Scripted("line needs exactly one of content, json, echo, error".into())),
        }
    }
}

/// Replays a JSONL transcript of replies in order.
#[derive(Debug)]
pub struct ScriptedClient {
    lines: Mutex<(VecDeque<ScriptLine>, usize)>,
}

impl ScriptedClient {
    pub fn new(lines: impl IntoIterator<Item = ScriptLine>) -> Self {
        Self { lines: Mutex::new((lines.into_iter().collect(), 0)) }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with("//"))
            .map(|(i, l)| serde_json::from_str::<ScriptLine>(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(lines))
    }

    pub fn from_file(path: &Path) -> Result<Self, TransportError> {
        let err = |message: String| TransportError::Script { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::parse(&text).map_err(err)
    }

    pub fn remaining(&self) -> usize {
        self.lines.lock().expect("script lock").0.len()
    }
}

impl ChatClient for ScriptedClient {
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        let mut guard = self.lines.lock().expect("script lock");
        let (queue, served) = &mut *guard;
        let line = match queue.front() {
            Some(l) if l.repeat => l.clone(),
            Some(_) => queue.pop_front().expect("front exists"),
            None => return Err(TransportError::ScriptExhausted(*served)),
        };
        *served += 1;
        line.reply(req)
    }
}

/// Closure-backed client, mostly for tests and examples.
pub struct FnClient<F>(pub F);

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(&self, req: &ChatRequest) -> Result<String, TransportError> {
        (self.0)(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(hint: Option<&str>) -> ChatRequest {
        ChatRequest {
            role: Role::Editor,
            messages: vec![ChatMessage::text("user", "hi")],
            temperature: 0.0,
            max_tokens: 16,
            seed: None,
            hint: hint.map(str::to_string),
        }
    }

    #[test]
    fn script_order_and_exhaustion() {
        let c = ScriptedClient::parse(
            "{\"content\": \"one\"}\n// comment\n{\"json\": {\"a\": 1}}\n{\"echo\": true}\n{\"error\": \"boom\"}\n",
        )
        .unwrap();
        assert_eq!(c.complete(&req(None)).unwrap(), "one");
        assert_eq!(c.complete(&req(None)).unwrap(), r#"{"a":1}"#);
        assert_eq!(c.complete(&req(Some("H"))).unwrap(), "H");
        assert_eq!(c.complete(&req(None)), Err(TransportError::Scripted("boom".into())));
        assert_eq!(c.complete(&req(None)), Err(TransportError::ScriptExhausted(4)));
    }

    #[test]
    fn sticky_lines() {
        let c = ScriptedClient::parse("{\"content\": \"a\"}\n{\"echo\": true, \"repeat\": true}\n").unwrap();
        assert_eq!(c.complete(&req(Some("x"))).unwrap(), "a");
        for _ in 0..5 {
            assert_eq!(c.complete(&req(Some("x"))).unwrap(), "x");
        }
        assert_eq!(c.remaining(), 1);
    }

    #[test]
    fn bad_lines() {
        assert!(ScriptedClient::parse("{\"contents\": \"a\"}").is_err());
        let c = ScriptedClient::parse("{\"content\": \"a\", \"echo\": true}").unwrap();
        assert!(c.complete(&req(None)).is_err());
    }

    #[test]
    fn http_body_shape() {
        let c = HttpChatClient::new("http://localhost:1/v1/", "m", None, Duration::from_secs(1)).unwrap();
        let mut r = req(None);
        r.seed = Some(3);
        r.messages.push(ChatMessage {
            role: "user".into(),
            parts: vec![
                Part::Text { text: "look".into() },
                Part::Image { media_type: "image/svg+xml".into(), data_base64: "AAA=".into() },
            ],
        });
        let b = c.body(&r);
        assert_eq!(b["messages"][0]["content"], "hi");
        assert_eq!(b["messages"][1]["content"][1]["image_url"]["url"], "data:image/svg+xml;base64,AAA=");
        assert_eq!(b["seed"], 3);
        assert_eq!(c.base_url, "http://localhost:1/v1");
    }

    #[test]
    fn missing_token() {
        let r = HttpChatClient::new("http://x", "m", Some("SCENE_AGENTS_SURELY_UNSET_VAR"), Duration::from_secs(1));
        assert!(matches!(r, Err(TransportError::MissingToken(_))));
    }
}
