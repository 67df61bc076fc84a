use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "KINETEXT_LLM_API_KEY";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Where and how to reach a chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Answer locally from a digest of the prompt; no network.
    pub mock: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "gpt-4".to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: DEFAULT_TIMEOUT,
            max_in_flight: 4,
            mock: false,
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

const MOCK_REPLIES: [&str; 4] = [
    "Nice effort! Slow the movement down and keep your trunk steady; if that feels hard, try the easier version first.",
    "You are doing well. Keep your back straight and move through a comfortable range; stop if the pain increases.",
    "Good work. Focus on even weight on both sides, and use a chair or wall for support if you need it.",
    "Great start! Breathe steadily, keep the movement controlled, and rest for a moment before the next repetition.",
];

/// Deterministic stand-in reply for offline runs.
pub fn mock_reply(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let tag: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    format!("[mock {tag}] {}", MOCK_REPLIES[digest[0] as usize % MOCK_REPLIES.len()])
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    limit: usize,
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut busy = self.busy.lock().unwrap_or_else(|e| e.into_inner());
        while *busy >= self.limit {
            busy = self.freed.wait(busy).unwrap_or_else(|e| e.into_inner());
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

/// Blocking chat-completion client, shareable across threads.
#[derive(Debug)]
pub struct LlmClient {
    config: LlmConfig,
    http: Option<reqwest::blocking::Client>,
    api_key: Option<String>,
    gate: Gate,
}

impl LlmClient {
    /// In live mode the credential is read from the environment now, so a
    /// missing key fails before any prompt is built.
    pub fn new(config: LlmConfig) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::validation("max_in_flight must be at least 1"));
        }
        let gate = Gate { limit: config.max_in_flight, busy: Mutex::new(0), freed: Condvar::new() };
        if config.mock {
            return Ok(Self { config, http: None, api_key: None, gate });
        }
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| Error::LlmCredential(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::with_key(config, key)
    }

    /// Live client with an explicit credential.
    pub fn with_key(config: LlmConfig, api_key: String) -> Result<Self> {
        if config.max_in_flight == 0 {
            return Err(Error::validation("max_in_flight must be at least 1"));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::LlmTransport(e.to_string()))?;
        let gate = Gate { limit: config.max_in_flight, busy: Mutex::new(0), freed: Condvar::new() };
        Ok(Self { config, http: Some(http), api_key: Some(api_key), gate })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    /// Send `prompt` as a single user message and return the first choice.
    pub fn generate(&self, prompt: &str) -> Result<String> {
        let (Some(http), Some(key)) = (&self.http, &self.api_key) else {
            return Ok(mock_reply(prompt));
        };
        let _permit = self.gate.acquire();
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        log::debug!("chat request to {url}: {prompt}");
        let body = ChatRequest { model: &self.config.model, messages: [ChatMessage { role: "user", content: prompt }] };
        let resp = http.post(&url).bearer_auth(key).json(&body).send().map_err(|e| self.transport(e))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| self.transport(e))?;
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(Error::LlmCredential(format!("endpoint answered HTTP {}", status.as_u16())));
        }
        if !status.is_success() {
            return Err(Error::LlmStatus { status: status.as_u16(), body: truncate(&text, 200) });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| Error::LlmResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Error::LlmResponse("no message content in first choice".to_string()))
    }

    fn transport(&self, e: reqwest::Error) -> Error {
        if e.is_timeout() {
            Error::LlmTimeout(self.config.timeout)
        } else {
            Error::LlmTransport(e.without_url().to_string())
        }
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}
