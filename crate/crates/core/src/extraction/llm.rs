//! Chat-completion backend: prompt construction, transport with retry, and
//! tolerant parsing of the model's reply into an [`AffectiveIndex`].
//!
//! The wire format is the common chat-completion shape:
//!
//! ```text
//! POST {endpoint}
//! {"model": "...", "messages": [{"role": "user", "content": "..."}], "temperature": 0.0}
//! ```
//!
//! Only `choices[0].message.content` of the reply is consumed. Transports
//! return the raw response body so recorded bodies can be replayed as-is.

use std::sync::OnceLock;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ExtractionError;
use crate::affect::{validate, AffectiveIndex, Emotion};

/// Placeholder substituted with the passage in a prompt template.
pub const PASSAGE_PLACEHOLDER: &str = "{passage}";

/// Largest `|sum - 1|` for which a reply is renormalized instead of rejected.
pub const RENORMALIZE_BAND: f64 = 0.05;

pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
Analyze the emotions expressed in the passage below. Estimate the intensity \
of each of Ekman's six basic emotions: happiness, sadness, anger, fear, \
surprise, and disgust. Normalize the intensities into probabilities that sum \
to 1. Reply with only a JSON object that has exactly the keys \"happiness\", \
\"sadness\", \"anger\", \"fear\", \"surprise\", \"disgust\" and numeric values.

Passage:
{passage}";

/// A prompt template holding exactly one `{passage}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate(String);

impl PromptTemplate {
    pub fn new(template: impl Into<String>) -> Result<Self, ExtractionError> {
        let template = template.into();
        match template.matches(PASSAGE_PLACEHOLDER).count() {
            1 => Ok(Self(template)),
            0 => Err(ExtractionError::TemplateInvalid(format!(
                "template has no {PASSAGE_PLACEHOLDER} placeholder"
            ))),
            n => Err(ExtractionError::TemplateInvalid(format!(
                "template repeats {PASSAGE_PLACEHOLDER} {n} times"
            ))),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self(DEFAULT_PROMPT_TEMPLATE.to_owned())
    }
}

pub fn build_prompt(text: &str, template: &PromptTemplate) -> String {
    template.0.replacen(PASSAGE_PLACEHOLDER, text, 1)
}

fn default_timeout_secs() -> u64 {
    30
}
fn default_max_retries() -> u32 {
    3
}
fn default_backoff_base_ms() -> u64 {
    1000
}
fn default_max_in_flight() -> usize {
    4
}
fn default_api_key_env() -> Option<String> {
    Some("AFFECTREC_LLM_API_KEY".to_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmBackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Uses [`DEFAULT_PROMPT_TEMPLATE`] when absent.
    #[serde(default)]
    pub prompt_template: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub temperature: f64,
    /// First retry delay; each further retry doubles it.
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Environment variable holding a bearer token, if any.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: Option<String>,
}

impl LlmBackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            prompt_template: None,
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            temperature: 0.0,
            backoff_base_ms: default_backoff_base_ms(),
            max_in_flight: default_max_in_flight(),
            api_key_env: default_api_key_env(),
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.timeout_secs == 0 {
            return Err("timeout_secs must be > 0".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be >= 1".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err("temperature must be a non-negative number".into());
        }
        if self.endpoint.trim().is_empty() || self.model.trim().is_empty() {
            return Err("endpoint and model are required".into());
        }
        Ok(())
    }

    pub fn template(&self) -> Result<PromptTemplate, ExtractionError> {
        match &self.prompt_template {
            Some(t) => PromptTemplate::new(t.clone()),
            None => Ok(PromptTemplate::default()),
        }
    }

    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.backoff_base_ms.saturating_mul(1u64 << attempt.min(20)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn user(model: &str, prompt: String, temperature: f64) -> Self {
        Self {
            model: model.to_owned(),
            messages: vec![ChatMessage {
                role: "user".to_owned(),
                content: prompt,
            }],
            temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError {
    pub retryable: bool,
    pub message: String,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        Self {
            retryable: true,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            retryable: false,
            message: message.into(),
        }
    }
}

/// Sends one chat request and returns the raw response body.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Blocking HTTP transport. The client is created on first use, so the
/// transport can be constructed from inside an async runtime.
pub struct HttpTransport {
    endpoint: String,
    timeout: Duration,
    api_key: Option<String>,
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpTransport {
    pub fn new(config: &LlmBackendConfig) -> Self {
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        Self {
            endpoint: config.endpoint.clone(),
            timeout: Duration::from_secs(config.timeout_secs),
            api_key,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, TransportError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| TransportError::fatal(format!("cannot build HTTP client: {e}")))?;
        Ok(self.client.get_or_init(|| client))
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut builder = self.client()?.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::retryable(format!("request failed: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| TransportError::retryable(format!("reading body failed: {e}")))?;
        if status.is_success() {
            Ok(body)
        } else if status.as_u16() == 429 || status.is_server_error() {
            Err(TransportError::retryable(format!("HTTP {status}")))
        } else {
            Err(TransportError::fatal(format!("HTTP {status}: {body}")))
        }
    }
}

/// Replays one recorded response body for every request.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    body: String,
}

impl FixtureTransport {
    pub fn new(body: impl Into<String>) -> Self {
        Self { body: body.into() }
    }
}

impl ChatTransport for FixtureTransport {
    fn send(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        Ok(self.body.clone())
    }
}

/// Counting semaphore capping concurrent remote calls.
pub struct InFlightLimiter {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightPermit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut active = self.active.lock();
        while *active >= self.limit {
            self.freed.wait(&mut active);
        }
        *active += 1;
        InFlightPermit(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.active.lock()
    }
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock();
        *active -= 1;
        self.0.freed.notify_one();
    }
}

pub struct LlmBackend {
    config: LlmBackendConfig,
    template: PromptTemplate,
    transport: Box<dyn ChatTransport>,
    limiter: InFlightLimiter,
}

impl std::fmt::Debug for LlmBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .finish_non_exhaustive()
    }
}

impl LlmBackend {
    pub fn new(
        config: LlmBackendConfig,
        transport: Box<dyn ChatTransport>,
    ) -> Result<Self, ExtractionError> {
        config.check().map_err(ExtractionError::Config)?;
        let template = config.template()?;
        let limiter = InFlightLimiter::new(config.max_in_flight);
        Ok(Self {
            config,
            template,
            transport,
            limiter,
        })
    }

    pub fn http(config: LlmBackendConfig) -> Result<Self, ExtractionError> {
        let transport = HttpTransport::new(&config);
        Self::new(config, Box::new(transport))
    }

    pub fn config(&self) -> &LlmBackendConfig {
        &self.config
    }

    pub fn limiter(&self) -> &InFlightLimiter {
        &self.limiter
    }

    pub fn extract(&self, text: &str) -> Result<AffectiveIndex, ExtractionError> {
        let prompt = build_prompt(text, &self.template);
        let request = ChatRequest::user(&self.config.model, prompt, self.config.temperature);
        let body = {
            let _permit = self.limiter.acquire();
            self.send_with_retry(&request)?
        };
        parse_llm_response(&body)
    }

    fn send_with_retry(&self, request: &ChatRequest) -> Result<String, ExtractionError> {
        let mut attempt = 0;
        loop {
            match self.transport.send(request) {
                Ok(body) => return Ok(body),
                Err(err) if err.retryable && attempt < self.config.max_retries => {
                    let delay = self.config.backoff(attempt);
                    log::warn!(
                        "chat request failed ({}), retry {} in {:?}",
                        err.message,
                        attempt + 1,
                        delay
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(err) => {
                    return Err(ExtractionError::BackendUnavailable(format!(
                        "{} (after {} attempt(s))",
                        err.message,
                        attempt + 1
                    )))
                }
            }
        }
    }
}

/// A parsed reply together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub index: AffectiveIndex,
    /// Sum of the six values as the model reported them.
    pub reported_sum: f64,
    pub renormalized: bool,
}

/// Extracts the Affective Index from a chat reply.
///
/// `body` may be a full chat-completion response or just the assistant's
/// message text. The first object holding all six emotion keys wins; both
/// JSON and single-quoted dictionary syntax are accepted.
pub fn parse_llm_response(body: &str) -> Result<AffectiveIndex, ExtractionError> {
    parse_llm_response_detailed(body).map(|p| p.index)
}

pub fn parse_llm_response_detailed(body: &str) -> Result<ParsedResponse, ExtractionError> {
    let content = assistant_content(body);
    let text = content.as_deref().unwrap_or(body);

    let mut closest_miss: Option<Vec<&str>> = None;
    for candidate in candidate_objects(text) {
        let Some(object) = parse_object(candidate) else {
            continue;
        };
        let missing: Vec<&str> = Emotion::ALL
            .iter()
            .map(|e| e.as_str())
            .filter(|k| !object.contains_key(*k))
            .collect();
        if missing.is_empty() {
            return index_from_object(&object);
        }
        if missing.len() < Emotion::COUNT
            && closest_miss.as_ref().is_none_or(|m| missing.len() < m.len())
        {
            closest_miss = Some(missing);
        }
    }
    Err(ExtractionError::ParseFailure(match closest_miss {
        Some(missing) => format!("emotion object is missing keys: {}", missing.join(", ")),
        None => "no object with the six emotion keys found in response".to_owned(),
    }))
}

fn index_from_object(object: &Map<String, Value>) -> Result<ParsedResponse, ExtractionError> {
    let mut probs = [0.0; Emotion::COUNT];
    for emotion in Emotion::ALL {
        let value = &object[emotion.as_str()];
        let p = value.as_f64().ok_or_else(|| {
            ExtractionError::ParseFailure(format!("{emotion} is not a number: {value}"))
        })?;
        if !p.is_finite() || p < 0.0 {
            return Err(ExtractionError::ParseFailure(format!(
                "{emotion} is negative: {p}"
            )));
        }
        probs[emotion.position()] = p;
    }
    let sum: f64 = probs.iter().sum();
    if validate(&probs).is_ok() {
        let index = AffectiveIndex::try_from_probs(probs).expect("validated");
        return Ok(ParsedResponse {
            index,
            reported_sum: sum,
            renormalized: false,
        });
    }
    if (sum - 1.0).abs() > RENORMALIZE_BAND {
        return Err(ExtractionError::SumOutOfRange { sum });
    }
    let raw = crate::affect::RawEmotionScores::new(probs)
        .map_err(|e| ExtractionError::ParseFailure(e.to_string()))?;
    let index = crate::affect::normalize(&raw).map_err(|_| ExtractionError::SumOutOfRange { sum })?;
    Ok(ParsedResponse {
        index,
        reported_sum: sum,
        renormalized: true,
    })
}

/// `choices[0].message.content` if `body` is a chat-completion response.
fn assistant_content(body: &str) -> Option<String> {
    let value: Value = serde_json::from_str(body.trim()).ok()?;
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_owned)
}

/// Every balanced `{...}` span in `text`, outermost-first by start position.
fn candidate_objects(text: &str) -> impl Iterator<Item = &str> {
    text.char_indices()
        .filter(|&(_, c)| c == '{')
        .filter_map(move |(start, _)| matching_brace(&text[start..]).map(|len| &text[start..start + len]))
}

/// Length of the object starting at `s[0] == '{'`, honoring quoted strings.
fn matching_brace(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_object(candidate: &str) -> Option<Map<String, Value>> {
    if let Ok(Value::Object(map)) = serde_json::from_str(candidate) {
        return Some(map);
    }
    match serde_json::from_str(&single_quotes_to_json(candidate)) {
        Ok(Value::Object(map)) => Some(map),
        _ => None,
    }
}

/// Rewrites single-quoted strings (dictionary-literal style) as JSON strings.
fn single_quotes_to_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        match quote {
            None => {
                if c == '\'' || c == '"' {
                    quote = Some(c);
                    out.push('"');
                } else {
                    out.push(c);
                }
            }
            Some(q) => {
                if c == '\\' {
                    match chars.next() {
                        Some('\'') => out.push('\''),
                        Some(n) => {
                            out.push('\\');
                            out.push(n);
                        }
                        None => out.push('\\'),
                    }
                } else if c == q {
                    quote = None;
                    out.push('"');
                } else if c == '"' {
                    out.push_str("\\\"");
                } else {
                    out.push(c);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::testing::{godfather, GODFATHER};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    const GODFATHER_DICT: &str = "{'happiness': 0.02571, 'sadness': 0.81373, 'anger': 0.05563, 'fear': 0.09933, 'surprise': 0.00486, 'disgust': 0.00074}";

    #[test]
    fn template_substitution() {
        let t = PromptTemplate::new("Rate: {passage}").unwrap();
        assert_eq!(build_prompt("abc", &t), "Rate: abc");
    }

    #[test]
    fn template_placeholder_count() {
        assert!(matches!(PromptTemplate::new("Rate:"), Err(ExtractionError::TemplateInvalid(_))));
        assert!(matches!(
            PromptTemplate::new("{passage} and {passage}"),
            Err(ExtractionError::TemplateInvalid(_))
        ));
    }

    #[test]
    fn passage_containing_placeholder_is_inserted_once() {
        let t = PromptTemplate::new("<{passage}>").unwrap();
        assert_eq!(build_prompt("x {passage} y", &t), "<x {passage} y>");
    }

    #[test]
    fn default_template_names_all_keys() {
        let prompt = build_prompt("plot", &PromptTemplate::default());
        for e in Emotion::ALL {
            assert!(prompt.contains(&format!("\"{}\"", e.as_str())));
        }
        assert!(prompt.ends_with("plot"));
    }

    #[test]
    fn parses_dictionary_literal_verbatim() {
        let body = format!("Here is the result:\nemotion_probs = {GODFATHER_DICT}\nDone.");
        let parsed = parse_llm_response_detailed(&body).unwrap();
        assert_eq!(parsed.index.probs(), GODFATHER);
        assert!(!parsed.renormalized);
    }

    #[test]
    fn parses_chat_completion_envelope() {
        let body = serde_json::json!({
            "id": "x",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": GODFATHER_DICT}}]
        })
        .to_string();
        assert_eq!(parse_llm_response(&body).unwrap(), godfather());
    }

    #[test]
    fn parses_nested_json_object() {
        let body = r#"{"result": {"emotions": {"happiness": 1, "sadness": 0, "anger": 0, "fear": 0, "surprise": 0, "disgust": 0}}}"#;
        assert_eq!(
            parse_llm_response(body).unwrap(),
            AffectiveIndex::one_hot(Emotion::Happiness)
        );
    }

    #[test]
    fn refusal_is_parse_failure() {
        assert!(matches!(
            parse_llm_response("I cannot help with that."),
            Err(ExtractionError::ParseFailure(_))
        ));
    }

    #[test]
    fn missing_key_is_reported() {
        let body = r#"{"happiness": 0.5, "sadness": 0.5, "anger": 0, "fear": 0, "surprise": 0}"#;
        match parse_llm_response(body) {
            Err(ExtractionError::ParseFailure(m)) => assert!(m.contains("disgust"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_negative_values_fail() {
        let body = r#"{"happiness": "high", "sadness": 0.5, "anger": 0, "fear": 0, "surprise": 0, "disgust": 0}"#;
        assert!(matches!(parse_llm_response(body), Err(ExtractionError::ParseFailure(_))));
        let body = r#"{"happiness": -0.1, "sadness": 1.1, "anger": 0, "fear": 0, "surprise": 0, "disgust": 0}"#;
        assert!(matches!(parse_llm_response(body), Err(ExtractionError::ParseFailure(_))));
    }

    #[test]
    fn renormalizes_within_band() {
        let v = 0.98 / 6.0;
        let body = serde_json::json!({
            "happiness": v, "sadness": v, "anger": v, "fear": v, "surprise": v, "disgust": v
        })
        .to_string();
        let parsed = parse_llm_response_detailed(&body).unwrap();
        assert!(parsed.renormalized);
        let sum = v * 6.0;
        for (_, p) in parsed.index.iter() {
            assert_eq!(p, v / sum);
        }
    }

    #[test]
    fn rejects_sum_outside_band() {
        let body = r#"{"happiness": 0.5, "sadness": 0.5, "anger": 0.5, "fear": 0, "surprise": 0, "disgust": 0}"#;
        assert!(matches!(
            parse_llm_response(body),
            Err(ExtractionError::SumOutOfRange { .. })
        ));
        let zeros = r#"{"happiness": 0, "sadness": 0, "anger": 0, "fear": 0, "surprise": 0, "disgust": 0}"#;
        assert!(matches!(
            parse_llm_response(zeros),
            Err(ExtractionError::SumOutOfRange { .. })
        ));
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_scanner() {
        let body = r#"Note: "{not json}" then {"happiness": 0, "sadness": 0, "anger": 0, "fear": 1, "surprise": 0, "disgust": 0, "why": "a } b"}"#;
        assert_eq!(parse_llm_response(body).unwrap(), AffectiveIndex::one_hot(Emotion::Fear));
    }

    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
        retryable: bool,
    }

    impl ChatTransport for Flaky {
        fn send(&self, _request: &ChatRequest) -> Result<String, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(TransportError {
                    retryable: self.retryable,
                    message: "boom".into(),
                })
            } else {
                Ok(GODFATHER_DICT.to_owned())
            }
        }
    }

    fn fast_config(max_retries: u32) -> LlmBackendConfig {
        LlmBackendConfig {
            max_retries,
            backoff_base_ms: 1,
            ..LlmBackendConfig::new("http://unused", "test-model")
        }
    }

    #[test]
    fn retries_then_succeeds() {
        let transport = Arc::new(Flaky {
            failures: 2,
            calls: AtomicUsize::new(0),
            retryable: true,
        });
        struct Shared(Arc<Flaky>);
        impl ChatTransport for Shared {
            fn send(&self, r: &ChatRequest) -> Result<String, TransportError> {
                self.0.send(r)
            }
        }
        let backend = LlmBackend::new(fast_config(2), Box::new(Shared(transport.clone()))).unwrap();
        assert_eq!(backend.extract("plot").unwrap(), godfather());
        assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let backend = LlmBackend::new(
            fast_config(2),
            Box::new(Flaky {
                failures: 10,
                calls: AtomicUsize::new(0),
                retryable: true,
            }),
        )
        .unwrap();
        match backend.extract("plot") {
            Err(ExtractionError::BackendUnavailable(m)) => assert!(m.contains("3 attempt"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fatal_errors_are_not_retried() {
        let backend = LlmBackend::new(
            fast_config(5),
            Box::new(Flaky {
                failures: 1,
                calls: AtomicUsize::new(0),
                retryable: false,
            }),
        )
        .unwrap();
        assert!(matches!(
            backend.extract("plot"),
            Err(ExtractionError::BackendUnavailable(_))
        ));
    }

    #[test]
    fn backoff_doubles() {
        let cfg = LlmBackendConfig::new("http://x", "m");
        assert_eq!(cfg.backoff(0), Duration::from_secs(1));
        assert_eq!(cfg.backoff(1), Duration::from_secs(2));
        assert_eq!(cfg.backoff(3), Duration::from_secs(8));
    }

    #[test]
    fn config_checks() {
        let mut cfg = LlmBackendConfig::new("http://x", "m");
        assert!(cfg.check().is_ok());
        cfg.timeout_secs = 0;
        assert!(cfg.check().is_err());
        let cfg: LlmBackendConfig =
            serde_json::from_str(r#"{"endpoint": "http://x", "model": "m"}"#).unwrap();
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.max_in_flight, 4);
    }

    #[test]
    fn limiter_caps_concurrency() {
        struct Slow {
            current: AtomicUsize,
            peak: AtomicUsize,
        }
        impl ChatTransport for Slow {
            fn send(&self, _r: &ChatRequest) -> Result<String, TransportError> {
                let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(20));
                self.current.fetch_sub(1, Ordering::SeqCst);
                Ok(GODFATHER_DICT.to_owned())
            }
        }
        let slow = Arc::new(Slow {
            current: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        struct Shared(Arc<Slow>);
        impl ChatTransport for Shared {
            fn send(&self, r: &ChatRequest) -> Result<String, TransportError> {
                self.0.send(r)
            }
        }
        let config = LlmBackendConfig {
            max_in_flight: 2,
            ..fast_config(0)
        };
        let backend = Arc::new(LlmBackend::new(config, Box::new(Shared(slow.clone()))).unwrap());
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let b = backend.clone();
                std::thread::spawn(move || b.extract("plot").unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), godfather());
        }
        assert!(slow.peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(backend.limiter().in_flight(), 0);
    }
}
