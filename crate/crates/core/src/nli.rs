//! Chat-completion detector backend: asks an external model for the
//! relation between two instructions and maps the answer to a [`Relation`].
//!
//! The prompt is a versioned data file (`data/nli_prompt.txt`) asking for
//! exactly one of ENTAILMENT / NEUTRAL / CONTRADICTION; the first such token
//! in the reply (case-insensitive, whole-word) wins. Requests are retried on
//! transport failures and 5xx statuses with capped exponential backoff and
//! full jitter; a reply with no recognizable label is retried once before
//! surfacing as an error. Transports are pluggable so tests and the `--mock`
//! CLI mode can replay recorded responses offline.

use std::collections::HashMap;
use std::sync::LazyLock;
use std::time::Duration;

use rand::RngExt as _;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::conflict::{Relation, RelationDetector};
use crate::error::{Error, Result};

/// Environment variable holding the API key for the external endpoint.
pub const API_KEY_ENV_VAR: &str = "HIER_RESOLVE_API_KEY";

/// Versioned prompt template; `#`-prefixed lines are metadata, stripped
/// before sending.
pub const PROMPT_TEMPLATE: &str = include_str!("../data/nli_prompt.txt");

/// Connection settings for the chat-completion endpoint. The API key never
/// travels through config files; it is read from [`API_KEY_ENV_VAR`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    /// Total attempts per query (first try included).
    pub max_retries: u32,
    pub backoff_initial_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: String::new(),
            model_name: String::new(),
            api_key: None,
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_initial_ms: 200,
            backoff_max_ms: 5_000,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_url.is_empty() {
            return Err(Error::Config("endpoint base_url must be non-empty".into()));
        }
        Ok(())
    }

    /// Fills `api_key` from the environment when not already set.
    pub fn resolve_api_key(&mut self) {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_ENV_VAR).ok();
        }
    }

    fn attempts_allowed(&self) -> u32 {
        self.max_retries.max(1)
    }
}

/// Builds the detection prompt from the versioned template.
pub fn render_prompt(premise: &str, hypothesis: &str) -> String {
    let body = PROMPT_TEMPLATE
        .lines()
        .filter(|line| !line.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    body.replace("{premise}", premise).replace("{hypothesis}", hypothesis)
}

/// Recovers the (premise, hypothesis) pair from a rendered prompt; used by
/// the replay transport to key its fixture table.
pub fn extract_pair_from_prompt(prompt: &str) -> Option<(String, String)> {
    let hypothesis_at = prompt.rfind("\nHYPOTHESIS: ")?;
    let hypothesis = prompt[hypothesis_at + "\nHYPOTHESIS: ".len()..].to_string();
    let head = &prompt[..hypothesis_at];
    let premise_at = head.rfind("\nPREMISE: ")?;
    let premise = head[premise_at + "\nPREMISE: ".len()..].to_string();
    Some((premise, hypothesis))
}

static LABEL_PATTERN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(entailment|neutral|contradiction)\b").expect("valid label pattern")
});

/// Scans a model reply for the first relation label token.
pub fn parse_relation_label(reply: &str) -> Option<Relation> {
    let found = LABEL_PATTERN.find(reply)?;
    match found.as_str().to_ascii_lowercase().as_str() {
        "entailment" => Some(Relation::Entailment),
        "neutral" => Some(Relation::Neutral),
        "contradiction" => Some(Relation::Contradiction),
        _ => unreachable!("pattern only matches the three labels"),
    }
}

/// Raw HTTP-level reply from a transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub status: u16,
    pub body: String,
}

/// One chat-completion round trip. `Err` carries a transport-level failure
/// description (connection refused, timeout, …), which is retryable.
pub trait ChatTransport: Sync {
    fn send(
        &self,
        config: &EndpointConfig,
        body: &serde_json::Value,
    ) -> std::result::Result<ChatResponse, String>;
}

/// Blocking HTTP transport against `<base_url>/chat/completions`.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(config: &EndpointConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::Config(format!("building HTTP client: {e}")))?;
        Ok(HttpTransport { client })
    }
}

impl ChatTransport for HttpTransport {
    fn send(
        &self,
        config: &EndpointConfig,
        body: &serde_json::Value,
    ) -> std::result::Result<ChatResponse, String> {
        let url = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        let mut request = self.client.post(&url).json(body);
        if let Some(key) = &config.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| e.to_string())?;
        Ok(ChatResponse { status, body })
    }
}

/// Offline transport replaying recorded replies keyed by exact
/// (premise, hypothesis) pairs, with an optional fallback reply.
#[derive(Debug, Clone, Default)]
pub struct MockTransport {
    responses: HashMap<(String, String), String>,
    default: Option<String>,
}

#[derive(Deserialize)]
struct MockFixtureEntry {
    premise: String,
    hypothesis: String,
    reply: String,
}

#[derive(Deserialize)]
struct MockFixture {
    #[serde(default)]
    default: Option<String>,
    #[serde(default)]
    responses: Vec<MockFixtureEntry>,
}

impl MockTransport {
    /// Parses a fixture document:
    /// `{"default": "NEUTRAL", "responses": [{"premise", "hypothesis", "reply"}, …]}`.
    pub fn from_fixture_json(text: &str) -> Result<Self> {
        let fixture: MockFixture = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("mock fixture: {e}")))?;
        Ok(MockTransport {
            responses: fixture
                .responses
                .into_iter()
                .map(|entry| ((entry.premise, entry.hypothesis), entry.reply))
                .collect(),
            default: fixture.default,
        })
    }

    pub fn with_default(reply: &str) -> Self {
        MockTransport { responses: HashMap::new(), default: Some(reply.to_string()) }
    }

    pub fn insert(&mut self, premise: &str, hypothesis: &str, reply: &str) {
        self.responses
            .insert((premise.to_string(), hypothesis.to_string()), reply.to_string());
    }
}

impl ChatTransport for MockTransport {
    fn send(
        &self,
        _config: &EndpointConfig,
        body: &serde_json::Value,
    ) -> std::result::Result<ChatResponse, String> {
        let prompt = body["messages"][0]["content"]
            .as_str()
            .ok_or_else(|| "mock transport: request has no message content".to_string())?;
        let (premise, hypothesis) = extract_pair_from_prompt(prompt)
            .ok_or_else(|| "mock transport: prompt does not carry a pair".to_string())?;
        let reply = self
            .responses
            .get(&(premise.clone(), hypothesis.clone()))
            .or(self.default.as_ref())
            .ok_or_else(|| {
                format!("mock transport: no recorded reply for ({premise:?}, {hypothesis:?})")
            })?;
        Ok(ChatResponse {
            status: 200,
            body: json!({"choices": [{"message": {"content": reply}}]}).to_string(),
        })
    }
}

/// Caps exponential backoff: `initial · 2^(attempt−1)`, clamped to `max`.
fn backoff_cap_ms(config: &EndpointConfig, attempt: u32) -> u64 {
    let doubled = config
        .backoff_initial_ms
        .saturating_mul(1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX));
    doubled.min(config.backoff_max_ms)
}

fn sleep_with_jitter(cap_ms: u64) {
    if cap_ms == 0 {
        return;
    }
    let jittered = rand::rng().random_range(0..=cap_ms);
    std::thread::sleep(Duration::from_millis(jittered));
}

/// Detector backed by a chat-completion endpoint through any transport.
pub struct NliDetector<T: ChatTransport> {
    config: EndpointConfig,
    transport: T,
}

impl NliDetector<HttpTransport> {
    /// HTTP-backed detector; pulls the API key from the environment.
    pub fn new(mut config: EndpointConfig) -> Result<Self> {
        config.validate()?;
        config.resolve_api_key();
        let transport = HttpTransport::new(&config)?;
        Ok(NliDetector { config, transport })
    }
}

impl<T: ChatTransport> NliDetector<T> {
    pub fn with_transport(config: EndpointConfig, transport: T) -> Result<Self> {
        config.validate()?;
        Ok(NliDetector { config, transport })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn request_body(&self, premise: &str, hypothesis: &str) -> serde_json::Value {
        json!({
            "model": self.config.model_name,
            "temperature": 0,
            "messages": [
                {"role": "user", "content": render_prompt(premise, hypothesis)}
            ],
        })
    }

    /// One labeled query with the full retry policy.
    pub fn query_relation(&self, premise: &str, hypothesis: &str) -> Result<Relation> {
        let body = self.request_body(premise, hypothesis);
        let mut malformed_retried = false;
        let mut attempts = 0u32;
        let mut last_failure = String::new();
        while attempts < self.config.attempts_allowed() {
            attempts += 1;
            match self.transport.send(&self.config, &body) {
                Err(transport_error) => {
                    log::debug!("attempt {attempts}: transport failure: {transport_error}");
                    last_failure = transport_error;
                }
                Ok(response) if (500..600).contains(&response.status) => {
                    log::debug!("attempt {attempts}: server error {}", response.status);
                    last_failure = format!("HTTP {}", response.status);
                }
                Ok(response) if response.status != 200 => {
                    return Err(Error::BackendUnavailable {
                        attempts,
                        detail: format!("HTTP {}", response.status),
                    });
                }
                Ok(response) => {
                    let content = serde_json::from_str::<serde_json::Value>(&response.body)
                        .ok()
                        .and_then(|v| {
                            v["choices"][0]["message"]["content"].as_str().map(str::to_string)
                        });
                    let label = content.as_deref().and_then(parse_relation_label);
                    match label {
                        Some(relation) => return Ok(relation),
                        None => {
                            let snippet: String = response.body.chars().take(120).collect();
                            if malformed_retried {
                                return Err(Error::MalformedResponse { snippet });
                            }
                            log::debug!("attempt {attempts}: no label in reply, retrying once");
                            malformed_retried = true;
                            last_failure = format!("unlabeled reply: {snippet}");
                        }
                    }
                }
            }
            if attempts < self.config.attempts_allowed() {
                sleep_with_jitter(backoff_cap_ms(&self.config, attempts));
            }
        }
        Err(Error::BackendUnavailable { attempts, detail: last_failure })
    }
}

impl<T: ChatTransport> RelationDetector for NliDetector<T> {
    fn detect(&self, premise: &str, hypothesis: &str) -> Result<Relation> {
        self.query_relation(premise, hypothesis)
    }
}

/// A gold-labeled evaluation pair; `gold_conflict` marks Contradiction as
/// the positive class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub premise: String,
    pub hypothesis: String,
    pub gold_conflict: bool,
}

/// Binary detection metrics with Contradiction as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorMetrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Scores a detector on labeled pairs. Ratios with a zero denominator
/// report 0.0.
pub fn benchmark_detector<D: RelationDetector + ?Sized>(
    detector: &D,
    pairs: &[LabeledPair],
) -> Result<DetectorMetrics> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("benchmark needs at least one labeled pair".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for pair in pairs {
        let predicted = detector.detect(&pair.premise, &pair.hypothesis)? == Relation::Contradiction;
        match (predicted, pair.gold_conflict) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let accuracy = ratio(tp + tn, tp + fp + tn + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(DetectorMetrics { precision, recall, accuracy, f1 })
}

/// Reads labeled pairs from JSONL (blank lines skipped).
pub fn read_labeled_pairs<R: std::io::BufRead>(reader: R) -> Result<Vec<LabeledPair>> {
    let mut pairs = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: LabeledPair = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("labeled pair on line {}: {e}", number + 1))
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;
    use std::sync::Mutex;

    fn test_config() -> EndpointConfig {
        EndpointConfig {
            base_url: "http://endpoint.test".to_string(),
            model_name: "relation-model".to_string(),
            backoff_initial_ms: 0,
            backoff_max_ms: 0,
            ..EndpointConfig::default()
        }
    }

    /// Test transport yielding a scripted sequence of outcomes.
    struct ScriptedTransport {
        script: Mutex<VecDeque<std::result::Result<ChatResponse, String>>>,
    }

    impl ScriptedTransport {
        fn new(outcomes: Vec<std::result::Result<ChatResponse, String>>) -> Self {
            ScriptedTransport { script: Mutex::new(outcomes.into()) }
        }

        fn reply(content: &str) -> std::result::Result<ChatResponse, String> {
            Ok(ChatResponse {
                status: 200,
                body: json!({"choices": [{"message": {"content": content}}]}).to_string(),
            })
        }

        fn status(code: u16) -> std::result::Result<ChatResponse, String> {
            Ok(ChatResponse { status: code, body: String::new() })
        }
    }

    impl ChatTransport for ScriptedTransport {
        fn send(
            &self,
            _config: &EndpointConfig,
            _body: &serde_json::Value,
        ) -> std::result::Result<ChatResponse, String> {
            self.script
                .lock()
                .unwrap()
                .pop_front()
                .expect("scripted transport ran out of outcomes")
        }
    }

    #[test]
    fn prompt_renders_and_extracts_the_pair() {
        let prompt = render_prompt("Respond in English.", "Respond in Chinese.");
        assert!(!prompt.contains('#'), "metadata lines must be stripped");
        assert!(prompt.contains("PREMISE: Respond in English."));
        assert!(prompt.contains("HYPOTHESIS: Respond in Chinese."));
        assert_eq!(
            extract_pair_from_prompt(&prompt),
            Some(("Respond in English.".to_string(), "Respond in Chinese.".to_string()))
        );
    }

    #[test]
    fn label_parsing_scans_for_the_first_whole_word_token() {
        assert_eq!(parse_relation_label("CONTRADICTION"), Some(Relation::Contradiction));
        assert_eq!(parse_relation_label("The relation is: neutral."), Some(Relation::Neutral));
        assert_eq!(
            parse_relation_label("Entailment, because the premise implies it."),
            Some(Relation::Entailment)
        );
        assert_eq!(
            parse_relation_label("neutral or contradiction? I say neutral"),
            Some(Relation::Neutral),
            "first token wins"
        );
        assert_eq!(parse_relation_label("entailments"), None, "whole-word only");
        assert_eq!(parse_relation_label("no verdict"), None);
    }

    #[test]
    fn mock_transport_replays_recorded_relations() {
        let fixture = r#"{
            "default": "NEUTRAL",
            "responses": [
                {"premise": "Use JSON.", "hypothesis": "Use plain text.", "reply": "CONTRADICTION"}
            ]
        }"#;
        let transport = MockTransport::from_fixture_json(fixture).unwrap();
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        assert_eq!(
            detector.query_relation("Use JSON.", "Use plain text.").unwrap(),
            Relation::Contradiction
        );
        assert_eq!(
            detector.query_relation("Anything.", "Else.").unwrap(),
            Relation::Neutral,
            "unmapped pairs fall back to the default reply"
        );
        assert_eq!(
            detector.query_relation("Use JSON.", "Use plain text.").unwrap(),
            Relation::Contradiction,
            "identical queries yield identical relations"
        );
    }

    #[test]
    fn mock_without_default_exhausts_retries() {
        let transport = MockTransport::default();
        let mut config = test_config();
        config.max_retries = 2;
        let detector = NliDetector::with_transport(config, transport).unwrap();
        let err = detector.query_relation("a", "b").unwrap_err();
        assert!(
            matches!(err, Error::BackendUnavailable { attempts: 2, .. }),
            "got: {err}"
        );
    }

    #[test]
    fn server_errors_exhaust_the_attempt_budget() {
        let transport = ScriptedTransport::new(vec![
            ScriptedTransport::status(500),
            ScriptedTransport::status(503),
            ScriptedTransport::status(500),
        ]);
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        let err = detector.query_relation("a", "b").unwrap_err();
        assert!(
            matches!(err, Error::BackendUnavailable { attempts: 3, .. }),
            "got: {err}"
        );
    }

    #[test]
    fn transport_failures_recover_on_a_later_attempt() {
        let transport = ScriptedTransport::new(vec![
            Err("connection refused".to_string()),
            ScriptedTransport::status(502),
            ScriptedTransport::reply("ENTAILMENT"),
        ]);
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        assert_eq!(detector.query_relation("a", "b").unwrap(), Relation::Entailment);
    }

    #[test]
    fn unlabeled_replies_retry_once_then_error() {
        let transport = ScriptedTransport::new(vec![
            ScriptedTransport::reply("I cannot decide."),
            ScriptedTransport::reply("Definitely a contradiction."),
        ]);
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        assert_eq!(detector.query_relation("a", "b").unwrap(), Relation::Contradiction);

        let transport = ScriptedTransport::new(vec![
            ScriptedTransport::reply("I cannot decide."),
            ScriptedTransport::reply("Still no verdict."),
        ]);
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        let err = detector.query_relation("a", "b").unwrap_err();
        assert!(matches!(err, Error::MalformedResponse { .. }), "got: {err}");
    }

    #[test]
    fn client_errors_fail_fast() {
        let transport = ScriptedTransport::new(vec![ScriptedTransport::status(401)]);
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        let err = detector.query_relation("a", "b").unwrap_err();
        assert!(
            matches!(err, Error::BackendUnavailable { attempts: 1, ref detail } if detail == "HTTP 401"),
            "got: {err}"
        );
    }

    #[test]
    fn request_body_pins_temperature_to_zero() {
        struct Capture(Mutex<Option<serde_json::Value>>);
        impl ChatTransport for Capture {
            fn send(
                &self,
                _config: &EndpointConfig,
                body: &serde_json::Value,
            ) -> std::result::Result<ChatResponse, String> {
                *self.0.lock().unwrap() = Some(body.clone());
                ScriptedTransport::reply("NEUTRAL")
            }
        }
        let capture = Capture(Mutex::new(None));
        let detector = NliDetector::with_transport(test_config(), capture).unwrap();
        detector.query_relation("p", "h").unwrap();
        let body = detector.transport.0.lock().unwrap().take().unwrap();
        assert_eq!(body["temperature"], json!(0));
        assert_eq!(body["model"], json!("relation-model"));
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], json!("user"));
    }

    #[test]
    fn config_validation_and_defaults() {
        let config = EndpointConfig::default();
        assert_eq!(config.timeout_ms, 30_000);
        assert_eq!(config.max_retries, 3);
        assert!(config.validate().is_err(), "empty base_url must be rejected");
        assert!(test_config().validate().is_ok());
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let config = EndpointConfig {
            backoff_initial_ms: 100,
            backoff_max_ms: 450,
            ..test_config()
        };
        assert_eq!(backoff_cap_ms(&config, 1), 100);
        assert_eq!(backoff_cap_ms(&config, 2), 200);
        assert_eq!(backoff_cap_ms(&config, 3), 400);
        assert_eq!(backoff_cap_ms(&config, 4), 450);
        assert_eq!(backoff_cap_ms(&config, 64), 450, "shift overflow saturates at the cap");
    }

    #[test]
    fn api_key_is_read_from_the_environment() {
        // SAFETY: this is the only test touching this variable, and no other
        // test reads the process environment concurrently.
        unsafe { std::env::set_var(API_KEY_ENV_VAR, "test-key") };
        let mut config = test_config();
        config.resolve_api_key();
        assert_eq!(config.api_key.as_deref(), Some("test-key"));
        unsafe { std::env::remove_var(API_KEY_ENV_VAR) };

        let mut preset = test_config();
        preset.api_key = Some("explicit".to_string());
        preset.resolve_api_key();
        assert_eq!(preset.api_key.as_deref(), Some("explicit"));
    }

    #[test]
    fn perfect_detector_scores_ones() {
        let pairs = vec![
            LabeledPair {
                premise: "p0".into(),
                hypothesis: "h0".into(),
                gold_conflict: true,
            },
            LabeledPair {
                premise: "p1".into(),
                hypothesis: "h1".into(),
                gold_conflict: false,
            },
        ];
        let mut transport = MockTransport::default();
        transport.insert("p0", "h0", "CONTRADICTION");
        transport.insert("p1", "h1", "NEUTRAL");
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        let metrics = benchmark_detector(&detector, &pairs).unwrap();
        assert_eq!(metrics.precision, 1.0);
        assert_eq!(metrics.recall, 1.0);
        assert_eq!(metrics.accuracy, 1.0);
        assert_eq!(metrics.f1, 1.0);
    }

    #[test]
    fn all_positive_detector_on_a_balanced_set() {
        let pairs: Vec<LabeledPair> = (0..10)
            .map(|i| LabeledPair {
                premise: format!("p{i}"),
                hypothesis: format!("h{i}"),
                gold_conflict: i % 2 == 0,
            })
            .collect();
        let transport = MockTransport::with_default("CONTRADICTION");
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        let metrics = benchmark_detector(&detector, &pairs).unwrap();
        assert_eq!(metrics.precision, 0.5);
        assert_eq!(metrics.recall, 1.0);
        assert_eq!(metrics.accuracy, 0.5);
        assert!((metrics.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_report_zero() {
        let pairs = vec![LabeledPair {
            premise: "p".into(),
            hypothesis: "h".into(),
            gold_conflict: false,
        }];
        let transport = MockTransport::with_default("NEUTRAL");
        let detector = NliDetector::with_transport(test_config(), transport).unwrap();
        let metrics = benchmark_detector(&detector, &pairs).unwrap();
        assert_eq!(metrics.precision, 0.0);
        assert_eq!(metrics.recall, 0.0);
        assert_eq!(metrics.accuracy, 1.0);
        assert_eq!(metrics.f1, 0.0);

        assert!(benchmark_detector(&detector, &[]).is_err());
    }

    #[test]
    fn labeled_pairs_parse_from_jsonl() {
        let text = "\
{\"premise\": \"a\", \"hypothesis\": \"b\", \"gold_conflict\": true}\n\
\n\
{\"premise\": \"c\", \"hypothesis\": \"d\", \"gold_conflict\": false}\n";
        let pairs = read_labeled_pairs(text.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(pairs[0].gold_conflict);

        let err = read_labeled_pairs("{\"premise\": \"a\"}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "got: {err}");
    }

    proptest! {
        /// Metrics stay in [0,1]; f1 is the harmonic mean whenever defined;
        /// accuracy matches its defining ratio.
        #[test]
        fn benchmark_metrics_are_coherent(labels in proptest::collection::vec((proptest::bool::ANY, proptest::bool::ANY), 1..24)) {
            let mut transport = MockTransport::default();
            let mut pairs = Vec::new();
            let mut correct = 0usize;
            for (i, (gold, predicted)) in labels.iter().enumerate() {
                let premise = format!("p{i}");
                let hypothesis = format!("h{i}");
                transport.insert(
                    &premise,
                    &hypothesis,
                    if *predicted { "CONTRADICTION" } else { "NEUTRAL" },
                );
                pairs.push(LabeledPair { premise, hypothesis, gold_conflict: *gold });
                if gold == predicted {
                    correct += 1;
                }
            }
            let detector = NliDetector::with_transport(test_config(), transport).unwrap();
            let metrics = benchmark_detector(&detector, &pairs).unwrap();
            for value in [metrics.precision, metrics.recall, metrics.accuracy, metrics.f1] {
                prop_assert!((0.0..=1.0).contains(&value));
            }
            prop_assert!(
                (metrics.accuracy - correct as f64 / labels.len() as f64).abs() < 1e-12
            );
            if metrics.precision + metrics.recall > 0.0 {
                let harmonic = 2.0 * metrics.precision * metrics.recall
                    / (metrics.precision + metrics.recall);
                prop_assert!((metrics.f1 - harmonic).abs() < 1e-12);
            } else {
                prop_assert_eq!(metrics.f1, 0.0);
            }
        }
    }
}
