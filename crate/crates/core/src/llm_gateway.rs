//! Client for OpenAI-compatible chat-completion endpoints, plus the answer
//! parsers that turn model replies into labels.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::eval_metrics::{unify_label, DetectionLabel, LabelMap, NO_FALLACY};
use crate::textualizer::FallacyCatalog;

/// Label given to classification answers that name no known fallacy.
pub const UNPARSED: &str = "unparsed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Base URL such as `https://api.openai.com/v1`, or the full
    /// `/chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; `None` sends no
    /// `Authorization` header.
    pub auth_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub max_concurrent: usize,
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(with = "millis")]
    pub backoff: Duration,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl GatewayConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        GatewayConfig {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            auth_env: Some("OPENAI_API_KEY".to_string()),
            temperature: 0.0,
            max_tokens: Some(256),
            timeout: Duration::from_secs(60),
            max_concurrent: 4,
            max_retries: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::InvalidConfig(format!("temperature {} < 0", self.temperature)));
        }
        if self.max_concurrent == 0 {
            return Err(GatewayError::InvalidConfig("max_concurrent must be at least 1".into()));
        }
        if self.endpoint.is_empty() {
            return Err(GatewayError::InvalidConfig("empty endpoint".into()));
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
    #[error("environment variable {0} is not set")]
    MissingAuth(String),
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no logged response for `{0}`")]
    NotInLog(String),
    #[error("audit log: {0}")]
    Log(String),
}

enum Attempt {
    Done(String),
    Retry(GatewayError),
    Fail(GatewayError),
}

/// Shareable chat-completion client. Requests issued through one client
/// never exceed `max_concurrent` in flight.
#[derive(Debug)]
pub struct Client {
    config: GatewayConfig,
    http: reqwest::blocking::Client,
    token: Option<String>,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    requests: AtomicUsize,
}

impl Client {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let token = match &config.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::MissingAuth(var.clone()))?),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(Client {
            config,
            http,
            token,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            requests: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// HTTP requests sent so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Highest number of simultaneous in-flight requests observed.
    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    fn body(&self, prompt: &str) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        if let Some(n) = self.config.max_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.http.post(self.config.url()).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        let result = req.send().and_then(|resp| {
            let status = resp.status();
            resp.text().map(|text| (status, text))
        });
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        match result {
            Err(e) if e.is_timeout() => Attempt::Retry(GatewayError::Timeout { attempts: 0 }),
            Err(e) => Attempt::Retry(GatewayError::Transport {
                attempts: 0,
                message: e.to_string(),
            }),
            Ok((status, text)) if status.is_success() => match first_choice(&text) {
                Ok(answer) => Attempt::Done(answer),
                Err(e) => Attempt::Fail(e),
            },
            Ok((status, text)) if status.as_u16() == 429 || status.is_server_error() => {
                Attempt::Retry(GatewayError::Transport {
                    attempts: 0,
                    message: format!("HTTP {}: {}", status.as_u16(), snippet(&text)),
                })
            }
            Ok((status, text)) => Attempt::Fail(GatewayError::Status {
                status: status.as_u16(),
                body: snippet(&text),
            }),
        }
    }

    /// Sends one prompt and returns the first choice's message text.
    /// Transport failures, timeouts, 429 and 5xx responses are retried up
    /// to `max_retries` times with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let body = self.body(prompt);
        let mut delay = self.config.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempts > self.config.max_retries => {
                    return Err(match e {
                        GatewayError::Timeout { .. } => GatewayError::Timeout { attempts },
                        GatewayError::Transport { message, .. } => GatewayError::Transport { attempts, message },
                        other => other,
                    })
                }
                Attempt::Retry(e) => {
                    log::debug!("attempt {attempts} failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }

    /// Completes every `(id, prompt)` pair with at most `max_concurrent`
    /// requests in flight. Results keep input order. Each exchange is
    /// appended to `audit` when given.
    pub fn complete_batch(
        &self,
        items: &[(String, String)],
        audit: Option<&AuditLog>,
    ) -> Vec<Result<String, GatewayError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<String, GatewayError>>>> = items.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.config.max_concurrent.min(items.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some((id, prompt)) = items.get(i) else { break };
                    let result = self.complete(prompt);
                    if let Some(log) = audit {
                        if let Err(e) = log.record(id, prompt, &result) {
                            log::error!("{e}");
                        }
                    }
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
            .collect()
    }
}

/// Convenience one-shot completion with a fresh client.
pub fn complete(prompt: &str, config: &GatewayConfig) -> Result<String, GatewayError> {
    Client::new(config.clone())?.complete(prompt)
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

fn first_choice(text: &str) -> Result<String, GatewayError> {
    let value: Value = serde_json::from_str(text).map_err(|e| GatewayError::Malformed(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GatewayError::Malformed("missing choices[0].message.content".into()))
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only JSONL log of prompts and raw responses.
#[derive(Debug)]
pub struct AuditLog {
    out: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn create(path: &Path) -> Result<Self, GatewayError> {
        let file = File::create(path).map_err(|e| GatewayError::Log(format!("{}: {e}", path.display())))?;
        Ok(AuditLog {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn record(&self, id: &str, prompt: &str, result: &Result<String, GatewayError>) -> Result<(), GatewayError> {
        let exchange = Exchange {
            id: id.to_string(),
            prompt: prompt.to_string(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
        };
        let line = serde_json::to_string(&exchange).map_err(|e| GatewayError::Log(e.to_string()))?;
        let mut out = self.out.lock().unwrap();
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(|e| GatewayError::Log(e.to_string()))
    }
}

/// Logged responses keyed by record id, for re-scoring without a network.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayLog {
    exchanges: HashMap<String, Exchange>,
}

impl ReplayLog {
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let mut exchanges = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: Exchange =
                serde_json::from_str(line).map_err(|e| GatewayError::Log(format!("line {}: {e}", i + 1)))?;
            exchanges.insert(ex.id.clone(), ex);
        }
        Ok(ReplayLog { exchanges })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path).map_err(|e| GatewayError::Log(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.exchanges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exchanges.is_empty()
    }

    /// Logged answer for `id`. A logged error comes back as a transport error.
    pub fn response(&self, id: &str) -> Result<String, GatewayError> {
        let ex = self.exchanges.get(id).ok_or_else(|| GatewayError::NotInLog(id.to_string()))?;
        match (&ex.response, &ex.error) {
            (Some(r), _) => Ok(r.clone()),
            (None, Some(e)) => Err(GatewayError::Transport {
                attempts: 0,
                message: e.clone(),
            }),
            (None, None) => Err(GatewayError::Malformed(format!("log entry `{id}` has no response"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parsed<T> {
    pub label: T,
    /// Set when the answer could not be read and a fallback was used.
    pub diagnostic: Option<String>,
}

fn after_answer_marker(answer: &str) -> &str {
    let lower = answer.to_lowercase();
    match lower.rfind("answer:") {
        // Lowercasing can change byte lengths outside ASCII; fall back to the
        // whole answer when the offsets disagree.
        Some(pos) if lower.len() == answer.len() => &answer[pos + "answer:".len()..],
        _ => answer,
    }
}

/// Reads a yes/no detection answer. Anything else scores as `no_fallacy`
/// with a diagnostic.
pub fn parse_detection(answer: &str) -> Parsed<DetectionLabel> {
    let rest = after_answer_marker(answer)
        .trim_start_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation() || "\u{201C}\u{201D}\u{2018}\u{2019}".contains(c));
    let word: String = rest.chars().take_while(|c| c.is_alphanumeric()).collect();
    match word.to_lowercase().as_str() {
        "yes" => Parsed {
            label: DetectionLabel::Fallacy,
            diagnostic: None,
        },
        "no" => Parsed {
            label: DetectionLabel::NoFallacy,
            diagnostic: None,
        },
        _ => Parsed {
            label: DetectionLabel::NoFallacy,
            diagnostic: Some(format!("unparseable detection answer: {}", snippet(answer.trim()))),
        },
    }
}

fn is_word_boundary(s: &str, at: usize) -> bool {
    let before = s[..at].chars().next_back();
    before.is_none_or(|c| !c.is_alphanumeric())
}

/// Longest fallacy name or alias found in the answer, unified to its
/// canonical name. No match yields [`UNPARSED`] with a diagnostic.
pub fn parse_classification(answer: &str, catalog: &FallacyCatalog, map: &LabelMap) -> Parsed<String> {
    let hay = answer.to_lowercase();
    let names = catalog
        .entries()
        .flat_map(|e| std::iter::once(&e.name).chain(&e.aliases))
        .map(String::as_str)
        .chain(std::iter::once(NO_FALLACY));
    let mut best: Option<&str> = None;
    for name in names {
        let needle = name.to_lowercase();
        let found = hay.match_indices(&needle).any(|(i, m)| {
            is_word_boundary(&hay, i) && hay[i + m.len()..].chars().next().is_none_or(|c| !c.is_alphanumeric())
        });
        if found && best.is_none_or(|b| name.len() > b.len()) {
            best = Some(name);
        }
    }
    match best {
        Some(name) => Parsed {
            label: unify_label(name, map),
            diagnostic: None,
        },
        None => Parsed {
            label: UNPARSED.to_string(),
            diagnostic: Some(format!("no fallacy name in answer: {}", snippet(answer.trim()))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_answers() {
        assert_eq!(parse_detection("Yes").label, DetectionLabel::Fallacy);
        assert_eq!(parse_detection("Answer: No.").label, DetectionLabel::NoFallacy);
        assert!(parse_detection("Answer: No.").diagnostic.is_none());
        let p = parse_detection("It depends");
        assert_eq!(p.label, DetectionLabel::NoFallacy);
        assert!(p.diagnostic.is_some());
        assert_eq!(parse_detection("  \"yes,\" it is").label, DetectionLabel::Fallacy);
        assert_eq!(
            parse_detection("Let's think. Answer: a fallacy? Answer: YES.").label,
            DetectionLabel::Fallacy
        );
        assert!(parse_detection("Nope").diagnostic.is_some());
        assert!(parse_detection("").diagnostic.is_some());
    }

    #[test]
    fn classification_answers() {
        let cat = FallacyCatalog::builtin();
        let map = LabelMap::builtin();
        assert_eq!(parse_classification("Answer: Red Herring", &cat, &map).label, "Red Herring");
        assert_eq!(
            parse_classification("This is a false dilemma.", &cat, &map).label,
            "Black-and-White Fallacy"
        );
        let p = parse_classification("I cannot tell.", &cat, &map);
        assert_eq!(p.label, UNPARSED);
        assert!(p.diagnostic.is_some());
        assert_eq!(
            parse_classification("answer: evading the burden of proof", &cat, &map).label,
            "Evading Burden of Proof"
        );
    }

    #[test]
    fn config_url_and_validation() {
        let mut c = GatewayConfig::new("http://h/v1/", "m");
        assert_eq!(c.url(), "http://h/v1/chat/completions");
        c.endpoint = "http://h/v1/chat/completions".into();
        assert_eq!(c.url(), "http://h/v1/chat/completions");
        c.temperature = -0.1;
        assert!(c.validate().is_err());
        c.temperature = 0.0;
        c.max_concurrent = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_auth_env() {
        let mut c = GatewayConfig::new("http://127.0.0.1:9", "m");
        c.auth_env = Some("FALLACY_TREE_SURELY_UNSET_VAR".into());
        assert!(matches!(Client::new(c), Err(GatewayError::MissingAuth(_))));
    }

    #[test]
    fn replay_lookup() {
        let log = ReplayLog::parse(
            "{\"id\":\"a\",\"prompt\":\"p\",\"response\":\"Yes\"}\n{\"id\":\"b\",\"prompt\":\"p\",\"error\":\"boom\"}\n",
        )
        .unwrap();
        assert_eq!(log.response("a").unwrap(), "Yes");
        assert!(matches!(log.response("b"), Err(GatewayError::Transport { .. })));
        assert!(matches!(log.response("c"), Err(GatewayError::NotInLog(_))));
    }
}
