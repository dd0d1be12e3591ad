//! Tripartite tutoring-dialogue simulation: a teacher agent, a student
//! agent, and a dean agent that controls turn-taking and termination, all
//! speaking through a pluggable chat backend.
//!
//! The dean is consulted before every utterance, including the first. Its
//! reply must contain exactly one of the literal tokens TEACHER, STUDENT,
//! or TERMINATE (case-insensitive, first occurrence wins); anything else is
//! a parse error, never a silent default. With a scripted backend the whole
//! loop is bit-deterministic.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::corpus::{Corpus, Dialogue, Group, Speaker, Utterance};

/// Inputs for one simulated dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct SimulationScenario {
    pub problem_id: String,
    /// The math problem text.
    pub question: String,
    /// The distilled core tutoring approach used as a constraint.
    pub tutoring_approach: String,
    /// Knowledge-gap description for the student agent.
    #[serde(default)]
    pub student_profile: String,
}

/// The three agent roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentRole {
    Teacher,
    Student,
    Dean,
}

/// One agent's prompt template plus opaque generation parameters that are
/// passed through to the backend untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentConfig {
    pub role: AgentRole,
    /// Template with placeholders {question}, {approach}, {profile},
    /// {history}.
    pub prompt_template: String,
    pub params: BTreeMap<String, String>,
}

/// The full agent trio.
#[derive(Debug, Clone)]
pub struct AgentSet {
    pub teacher: AgentConfig,
    pub student: AgentConfig,
    pub dean: AgentConfig,
}

impl AgentSet {
    /// Templates bundled with the crate (templates/*.txt).
    pub fn default_templates() -> AgentSet {
        AgentSet {
            teacher: AgentConfig {
                role: AgentRole::Teacher,
                prompt_template: include_str!("../templates/teacher.txt").to_string(),
                params: BTreeMap::new(),
            },
            student: AgentConfig {
                role: AgentRole::Student,
                prompt_template: include_str!("../templates/student.txt").to_string(),
                params: BTreeMap::new(),
            },
            dean: AgentConfig {
                role: AgentRole::Dean,
                prompt_template: include_str!("../templates/dean.txt").to_string(),
                params: BTreeMap::new(),
            },
        }
    }
}

/// What the dean decided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnDecision {
    pub action: TurnAction,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnAction {
    SpeakTeacher,
    SpeakStudent,
    Terminate,
}

/// One message of a backend conversation. Role tags are relative to the
/// requesting agent: its own prior utterances are "assistant", everything
/// else "user".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: String,
    pub text: String,
}

/// A chat-completion request. `params` carries generation parameters plus
/// routing metadata ("agent", "problem_id") for backends that want it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendRequest {
    pub system_text: String,
    pub messages: Vec<ChatMessage>,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub text: String,
    /// Usage metadata as reported by the backend, when any.
    pub usage: BTreeMap<String, u64>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("backend script exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("dean reply does not contain TEACHER, STUDENT, or TERMINATE; raw reply: {raw:?}")]
    UnparseableDecision { raw: String },
    #[error("backend returned an empty reply")]
    EmptyReply,
    #[error("dean terminated before the dialogue had a teacher and a student utterance")]
    PrematureTerminate,
    #[error("scenario file line {line}: {message}")]
    Scenario { line: usize, message: String },
}

/// A chat-completion endpoint. Implementations must be safe for concurrent
/// use; batch simulation calls them from several threads.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<BackendReply, SimError>;
}

/// Deterministic test double serving canned replies in order and recording
/// every request.
pub struct ScriptedBackend {
    replies: Mutex<std::collections::VecDeque<String>>,
    requests: Mutex<Vec<BackendRequest>>,
    served: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(script: Vec<String>) -> Self {
        ScriptedBackend {
            replies: Mutex::new(script.into()),
            requests: Mutex::new(Vec::new()),
            served: AtomicUsize::new(0),
        }
    }

    /// All requests seen so far, in call order.
    pub fn recorded_requests(&self) -> Vec<BackendRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendReply, SimError> {
        self.requests.lock().unwrap().push(request.clone());
        let reply = self.replies.lock().unwrap().pop_front();
        match reply {
            Some(text) => {
                self.served.fetch_add(1, Ordering::SeqCst);
                Ok(BackendReply {
                    text,
                    usage: BTreeMap::new(),
                })
            }
            None => Err(SimError::ScriptExhausted(self.served.load(Ordering::SeqCst))),
        }
    }
}

/// Scripted backend with one reply queue per problem_id, so concurrent
/// dialogues cannot interleave each other's scripts. Routing uses the
/// "problem_id" entry the simulation loop puts into every request.
pub struct KeyedScriptedBackend {
    scripts: BTreeMap<String, Mutex<std::collections::VecDeque<String>>>,
}

impl KeyedScriptedBackend {
    pub fn new(scripts: BTreeMap<String, Vec<String>>) -> Self {
        KeyedScriptedBackend {
            scripts: scripts
                .into_iter()
                .map(|(k, v)| (k, Mutex::new(v.into())))
                .collect(),
        }
    }

    /// Parse the script file format: one `problem_id<TAB>reply` per line.
    /// `\n` escapes inside a reply become newlines.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut scripts: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((key, reply)) = line.split_once('\t') else {
                return Err(SimError::Scenario {
                    line: idx + 1,
                    message: "expected problem_id<TAB>reply".to_string(),
                });
            };
            scripts
                .entry(key.to_string())
                .or_default()
                .push(reply.replace("\\n", "\n"));
        }
        Ok(KeyedScriptedBackend::new(scripts))
    }
}

impl ChatBackend for KeyedScriptedBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendReply, SimError> {
        let key = request
            .params
            .get("problem_id")
            .ok_or_else(|| SimError::Backend("request carries no problem_id".to_string()))?;
        let queue = self
            .scripts
            .get(key)
            .ok_or_else(|| SimError::Backend(format!("no script for problem {key:?}")))?;
        match queue.lock().unwrap().pop_front() {
            Some(text) => Ok(BackendReply {
                text,
                usage: BTreeMap::new(),
            }),
            None => Err(SimError::ScriptExhausted(0)),
        }
    }
}

/// HTTP chat-completions client. Posts `{model, messages, ...params}` to
/// `<base_url>/chat/completions` with a bearer token taken from the
/// environment variable named at construction.
pub struct HttpBackend {
    base_url: String,
    model: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(base_url: &str, model: &str, token_env: &str) -> Self {
        HttpBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            token: std::env::var(token_env).ok(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendReply, SimError> {
        let mut messages = vec![json!({"role": "system", "content": request.system_text})];
        for m in &request.messages {
            messages.push(json!({"role": m.role, "content": m.text}));
        }
        let mut body = json!({"model": self.model, "messages": messages});
        for (key, value) in &request.params {
            if key == "problem_id" || key == "agent" {
                continue; // routing metadata, not generation parameters
            }
            body[key] = value
                .parse::<f64>()
                .map(|v| json!(v))
                .unwrap_or_else(|_| json!(value));
        }
        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let response = req.send().map_err(|e| SimError::Backend(e.to_string()))?;
        if !response.status().is_success() {
            return Err(SimError::Backend(format!(
                "backend returned status {}",
                response.status()
            )));
        }
        let value: serde_json::Value =
            response.json().map_err(|e| SimError::Backend(e.to_string()))?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| SimError::Backend("reply has no choices[0].message.content".to_string()))?
            .to_string();
        if text.is_empty() {
            return Err(SimError::EmptyReply);
        }
        let mut usage = BTreeMap::new();
        if let Some(map) = value["usage"].as_object() {
            for (k, v) in map {
                if let Some(n) = v.as_u64() {
                    usage.insert(k.clone(), n);
                }
            }
        }
        Ok(BackendReply { text, usage })
    }
}

/// Loop limits. Exhausting them truncates the dialogue (flagged, not fatal).
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_turns: usize,
    pub max_chars: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_turns: 30,
            max_chars: 100_000,
        }
    }
}

/// Parse a dean reply against the token grammar: the first occurrence of
/// TEACHER, STUDENT, or TERMINATE (case-insensitive) wins; the whole reply
/// is kept as the rationale.
pub fn parse_decision(reply: &str) -> Result<TurnDecision, SimError> {
    let upper = reply.to_uppercase();
    let hits = [
        (upper.find("TEACHER"), TurnAction::SpeakTeacher),
        (upper.find("STUDENT"), TurnAction::SpeakStudent),
        (upper.find("TERMINATE"), TurnAction::Terminate),
    ];
    let action = hits
        .iter()
        .filter_map(|(pos, action)| pos.map(|p| (p, *action)))
        .min_by_key(|(p, _)| *p)
        .map(|(_, action)| action);
    match action {
        Some(action) => Ok(TurnDecision {
            action,
            rationale: reply.to_string(),
        }),
        None => Err(SimError::UnparseableDecision {
            raw: reply.to_string(),
        }),
    }
}

fn render_template(template: &str, scenario: &SimulationScenario, history: &str) -> String {
    template
        .replace("{question}", &scenario.question)
        .replace("{approach}", &scenario.tutoring_approach)
        .replace("{profile}", &scenario.student_profile)
        .replace("{history}", history)
}

fn history_text(history: &[(Speaker, String)]) -> String {
    if history.is_empty() {
        return "(no utterances yet)".to_string();
    }
    history
        .iter()
        .map(|(speaker, text)| match speaker {
            Speaker::Teacher => format!("Teacher: {text}"),
            Speaker::Student => format!("Student: {text}"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const RETRY_ATTEMPTS: usize = 3;
const RETRY_BASE_DELAY_MS: u64 = 50;

fn complete_with_retry(
    backend: &dyn ChatBackend,
    request: &BackendRequest,
) -> Result<BackendReply, SimError> {
    let mut last = None;
    for attempt in 0..RETRY_ATTEMPTS {
        match backend.complete(request) {
            Ok(reply) => {
                if reply.text.is_empty() {
                    return Err(SimError::EmptyReply);
                }
                return Ok(reply);
            }
            Err(SimError::Backend(msg)) => {
                last = Some(SimError::Backend(msg));
                if attempt + 1 < RETRY_ATTEMPTS {
                    std::thread::sleep(std::time::Duration::from_millis(
                        RETRY_BASE_DELAY_MS << attempt,
                    ));
                }
            }
            Err(other) => return Err(other),
        }
    }
    Err(last.unwrap())
}

fn agent_request(
    config: &AgentConfig,
    scenario: &SimulationScenario,
    history: &[(Speaker, String)],
    agent_name: &str,
) -> BackendRequest {
    let own_speaker = match config.role {
        AgentRole::Teacher => Some(Speaker::Teacher),
        AgentRole::Student => Some(Speaker::Student),
        AgentRole::Dean => None,
    };
    let messages = history
        .iter()
        .map(|(speaker, text)| ChatMessage {
            role: if own_speaker == Some(*speaker) {
                "assistant".to_string()
            } else {
                "user".to_string()
            },
            text: text.clone(),
        })
        .collect();
    let mut params = config.params.clone();
    params.insert("agent".to_string(), agent_name.to_string());
    params.insert("problem_id".to_string(), scenario.problem_id.clone());
    BackendRequest {
        system_text: render_template(&config.prompt_template, scenario, &history_text(history)),
        messages,
        params,
    }
}

/// Ask the dean for the next action. An unparseable reply is retried once
/// with an appended clarification instruction, then fails.
pub fn dean_decide(
    history: &[(Speaker, String)],
    dean: &AgentConfig,
    scenario: &SimulationScenario,
    backend: &dyn ChatBackend,
) -> Result<TurnDecision, SimError> {
    let request = agent_request(dean, scenario, history, "dean");
    let reply = complete_with_retry(backend, &request)?;
    match parse_decision(&reply.text) {
        Ok(decision) => Ok(decision),
        Err(_) => {
            let mut retry = request.clone();
            retry.system_text.push_str(
                "\nAnswer with exactly one of the tokens TEACHER, STUDENT, or TERMINATE.",
            );
            let reply = complete_with_retry(backend, &retry)?;
            parse_decision(&reply.text)
        }
    }
}

/// One finished simulation: the dialogue plus loop diagnostics.
#[derive(Debug, Clone)]
pub struct SimulatedDialogue {
    pub dialogue: Dialogue,
    /// True when a limit ended the loop instead of a dean TERMINATE.
    pub truncated: bool,
    pub decisions: Vec<TurnDecision>,
}

/// Run the dean-mediated loop for one scenario. The dean is consulted
/// before every utterance; limits truncate rather than fail.
pub fn run_simulation(
    scenario: &SimulationScenario,
    agents: &AgentSet,
    backend: &dyn ChatBackend,
    limits: &Limits,
) -> Result<SimulatedDialogue, SimError> {
    let mut history: Vec<(Speaker, String)> = Vec::new();
    let mut decisions = Vec::new();
    let mut chars = 0usize;
    let mut truncated = false;

    loop {
        if history.len() >= limits.max_turns || chars >= limits.max_chars {
            truncated = true;
            break;
        }
        let decision = dean_decide(&history, &agents.dean, scenario, backend)?;
        let action = decision.action;
        decisions.push(decision);
        let (config, speaker, name) = match action {
            TurnAction::Terminate => {
                let has_teacher = history.iter().any(|(s, _)| *s == Speaker::Teacher);
                let has_student = history.iter().any(|(s, _)| *s == Speaker::Student);
                if history.len() < 2 || !has_teacher || !has_student {
                    return Err(SimError::PrematureTerminate);
                }
                break;
            }
            TurnAction::SpeakTeacher => (&agents.teacher, Speaker::Teacher, "teacher"),
            TurnAction::SpeakStudent => (&agents.student, Speaker::Student, "student"),
        };
        let request = agent_request(config, scenario, &history, name);
        let reply = complete_with_retry(backend, &request)?;
        chars += reply.text.chars().count();
        history.push((speaker, reply.text));
    }

    let dialogue = Dialogue {
        id: format!("sim-{}", scenario.problem_id),
        group: Group::Ai,
        problem_id: scenario.problem_id.clone(),
        utterances: history
            .into_iter()
            .map(|(speaker, text)| Utterance::new(speaker, text))
            .collect(),
    };
    Ok(SimulatedDialogue {
        dialogue,
        truncated,
        decisions,
    })
}

/// A batch failure record.
#[derive(Debug, Clone)]
pub struct SimulationFailure {
    pub problem_id: String,
    pub error: String,
}

/// Batch output: the ai-group corpus (sorted by problem_id) plus failures.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub corpus: Corpus,
    pub failures: Vec<SimulationFailure>,
}

/// Simulate every scenario, running up to `concurrency` dialogues at once.
/// Output is sorted by problem_id and independent of the concurrency
/// setting; per-scenario failures are collected, never fatal.
pub fn batch_simulate(
    scenarios: &[SimulationScenario],
    agents: &AgentSet,
    backend: &dyn ChatBackend,
    limits: &Limits,
    concurrency: usize,
) -> BatchResult {
    let concurrency = concurrency.max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SimulatedDialogue, SimError>>>> =
        (0..scenarios.len()).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..concurrency.min(scenarios.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= scenarios.len() {
                    break;
                }
                let outcome = run_simulation(&scenarios[i], agents, backend, limits);
                *slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut results: Vec<(usize, Result<SimulatedDialogue, SimError>)> = slots
        .into_iter()
        .enumerate()
        .map(|(i, slot)| (i, slot.into_inner().unwrap().expect("worker filled slot")))
        .collect();
    results.sort_by(|(a, _), (b, _)| scenarios[*a].problem_id.cmp(&scenarios[*b].problem_id));

    let mut dialogues = Vec::new();
    let mut truncated_ids = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in results {
        match outcome {
            Ok(sim) => {
                if sim.truncated {
                    truncated_ids.push(sim.dialogue.id.clone());
                }
                dialogues.push(sim.dialogue);
            }
            Err(err) => failures.push(SimulationFailure {
                problem_id: scenarios[i].problem_id.clone(),
                error: err.to_string(),
            }),
        }
    }
    let mut corpus = Corpus::new(dialogues);
    if !truncated_ids.is_empty() {
        corpus
            .metadata
            .insert("truncated".to_string(), truncated_ids.join(","));
    }
    BatchResult { corpus, failures }
}

/// Parse a scenario file: one JSON object per line with keys `problem_id`,
/// `question`, `tutoring_approach`, `student_profile`.
pub fn parse_scenarios(text: &str) -> Result<Vec<SimulationScenario>, SimError> {
    let mut scenarios = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let scenario: SimulationScenario =
            serde_json::from_str(line).map_err(|e| SimError::Scenario {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if scenario.question.is_empty() || scenario.tutoring_approach.is_empty() {
            return Err(SimError::Scenario {
                line: idx + 1,
                message: "question and tutoring_approach must be non-empty".to_string(),
            });
        }
        scenarios.push(scenario);
    }
    Ok(scenarios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::scheme_default;
    use crate::corpus::{serialize_corpus, validate};

    fn scenario() -> SimulationScenario {
        SimulationScenario {
            problem_id: "p1".to_string(),
            question: "What is 5+3?".to_string(),
            tutoring_approach: "Guide with questions, never state the answer.".to_string(),
            student_profile: "Struggles with carrying.".to_string(),
        }
    }

    fn six_turn_script() -> Vec<String> {
        vec![
            "TEACHER first".to_string(),
            "Let's look at 5+3. What do you think?".to_string(),
            "STUDENT next".to_string(),
            "Is it 7?".to_string(),
            "TEACHER next".to_string(),
            "Close. Count up from 5 by 3.".to_string(),
            "STUDENT next".to_string(),
            "6, 7, 8. It's 8!".to_string(),
            "TEACHER next".to_string(),
            "Well done. Why does counting up work?".to_string(),
            "STUDENT next".to_string(),
            "Because adding means counting forward.".to_string(),
            "TERMINATE goal reached".to_string(),
        ]
    }

    #[test]
    fn decision_parsing() {
        let d = parse_decision("TEACHER: student needs another hint").unwrap();
        assert_eq!(d.action, TurnAction::SpeakTeacher);
        assert_eq!(d.rationale, "TEACHER: student needs another hint");

        let d = parse_decision("I think we should TERMINATE now").unwrap();
        assert_eq!(d.action, TurnAction::Terminate);

        // first occurrence wins
        let d = parse_decision("the student is stuck; TEACHER should speak").unwrap();
        assert_eq!(d.action, TurnAction::SpeakStudent);

        assert!(matches!(
            parse_decision("maybe?"),
            Err(SimError::UnparseableDecision { .. })
        ));
    }

    #[test]
    fn scripted_backend_serves_in_order_and_records() {
        let backend = ScriptedBackend::new(vec!["a".into(), "b".into(), "c".into()]);
        let req = BackendRequest {
            system_text: "s".to_string(),
            messages: vec![],
            params: BTreeMap::new(),
        };
        assert_eq!(backend.complete(&req).unwrap().text, "a");
        assert_eq!(backend.complete(&req).unwrap().text, "b");
        assert_eq!(backend.complete(&req).unwrap().text, "c");
        assert!(matches!(
            backend.complete(&req),
            Err(SimError::ScriptExhausted(3))
        ));
        assert_eq!(backend.recorded_requests().len(), 4);
    }

    #[test]
    fn scripted_six_turn_dialogue() {
        let backend = ScriptedBackend::new(six_turn_script());
        let sim = run_simulation(
            &scenario(),
            &AgentSet::default_templates(),
            &backend,
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(sim.dialogue.utterances.len(), 6);
        assert!(!sim.truncated);
        assert_eq!(sim.dialogue.group, Group::Ai);
        assert_eq!(sim.dialogue.problem_id, "p1");
        let speakers: Vec<Speaker> = sim.dialogue.utterances.iter().map(|u| u.speaker).collect();
        assert_eq!(
            speakers,
            [
                Speaker::Teacher,
                Speaker::Student,
                Speaker::Teacher,
                Speaker::Student,
                Speaker::Teacher,
                Speaker::Student
            ]
        );
        let corpus = Corpus::new(vec![sim.dialogue]);
        assert!(validate(&corpus, &scheme_default()).is_empty());
    }

    #[test]
    fn minimum_two_turn_dialogue() {
        let backend = ScriptedBackend::new(vec![
            "TEACHER".to_string(),
            "What is 5+3?".to_string(),
            "STUDENT".to_string(),
            "8".to_string(),
            "TERMINATE".to_string(),
        ]);
        let sim = run_simulation(
            &scenario(),
            &AgentSet::default_templates(),
            &backend,
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(sim.dialogue.utterances.len(), 2);
        assert!(!sim.truncated);
    }

    #[test]
    fn premature_terminate_is_an_error() {
        let backend = ScriptedBackend::new(vec!["TERMINATE".to_string()]);
        let err = run_simulation(
            &scenario(),
            &AgentSet::default_templates(),
            &backend,
            &Limits::default(),
        )
        .unwrap_err();
        assert!(matches!(err, SimError::PrematureTerminate));
    }

    #[test]
    fn never_terminating_dean_hits_max_turns() {
        let mut script = Vec::new();
        for i in 0..100 {
            if i % 2 == 0 {
                script.push("TEACHER".to_string());
                script.push(format!("teacher turn {i}"));
            } else {
                script.push("STUDENT".to_string());
                script.push(format!("student turn {i}"));
            }
        }
        let backend = ScriptedBackend::new(script);
        let limits = Limits {
            max_turns: 8,
            max_chars: 1_000_000,
        };
        let sim = run_simulation(&scenario(), &AgentSet::default_templates(), &backend, &limits)
            .unwrap();
        assert_eq!(sim.dialogue.utterances.len(), 8);
        assert!(sim.truncated);
    }

    #[test]
    fn unparseable_dean_retries_once_with_clarification() {
        let backend = ScriptedBackend::new(vec![
            "maybe?".to_string(),
            "TEACHER".to_string(),
            "hello".to_string(),
            "TERMINATE".to_string(),
        ]);
        let decision = dean_decide(
            &[],
            &AgentSet::default_templates().dean,
            &scenario(),
            &backend,
        )
        .unwrap();
        assert_eq!(decision.action, TurnAction::SpeakTeacher);
        let requests = backend.recorded_requests();
        assert_eq!(requests.len(), 2);
        assert!(requests[1].system_text.contains("exactly one of the tokens"));
    }

    #[test]
    fn scripted_runs_are_bit_deterministic() {
        let run = || {
            let backend = ScriptedBackend::new(six_turn_script());
            let sim = run_simulation(
                &scenario(),
                &AgentSet::default_templates(),
                &backend,
                &Limits::default(),
            )
            .unwrap();
            serialize_corpus(&Corpus::new(vec![sim.dialogue]))
        };
        let first = run();
        assert_eq!(run(), first);
    }

    fn keyed_backend(n: usize) -> KeyedScriptedBackend {
        let mut scripts = BTreeMap::new();
        for i in 0..n {
            scripts.insert(
                format!("p{i:02}"),
                vec![
                    "TEACHER".to_string(),
                    format!("question for problem {i}"),
                    "STUDENT".to_string(),
                    format!("answer for problem {i}"),
                    "TERMINATE".to_string(),
                ],
            );
        }
        KeyedScriptedBackend::new(scripts)
    }

    fn scenarios(n: usize) -> Vec<SimulationScenario> {
        (0..n)
            .map(|i| SimulationScenario {
                problem_id: format!("p{i:02}"),
                question: format!("question {i}"),
                tutoring_approach: "socratic".to_string(),
                student_profile: String::new(),
            })
            .collect()
    }

    #[test]
    fn batch_of_49_scenarios() {
        let backend = keyed_backend(49);
        let result = batch_simulate(
            &scenarios(49),
            &AgentSet::default_templates(),
            &backend,
            &Limits::default(),
            4,
        );
        assert_eq!(result.corpus.dialogues.len(), 49);
        assert!(result.failures.is_empty());
        let sorted: Vec<&str> = result
            .corpus
            .dialogues
            .iter()
            .map(|d| d.problem_id.as_str())
            .collect();
        let mut expected = sorted.clone();
        expected.sort();
        assert_eq!(sorted, expected);
    }

    #[test]
    fn empty_batch() {
        let backend = keyed_backend(0);
        let result = batch_simulate(
            &[],
            &AgentSet::default_templates(),
            &backend,
            &Limits::default(),
            4,
        );
        assert!(result.corpus.dialogues.is_empty());
        assert!(result.failures.is_empty());
    }

    #[test]
    fn batch_collects_failures_without_aborting() {
        // p01 has no script: its dialogue fails, the others succeed
        let mut scripts = BTreeMap::new();
        for i in [0usize, 2] {
            scripts.insert(
                format!("p{i:02}"),
                vec![
                    "TEACHER".to_string(),
                    "q".to_string(),
                    "STUDENT".to_string(),
                    "a".to_string(),
                    "TERMINATE".to_string(),
                ],
            );
        }
        let backend = KeyedScriptedBackend::new(scripts);
        let result = batch_simulate(
            &scenarios(3),
            &AgentSet::default_templates(),
            &backend,
            &Limits::default(),
            2,
        );
        assert_eq!(result.corpus.dialogues.len(), 2);
        assert_eq!(result.failures.len(), 1);
        assert_eq!(result.failures[0].problem_id, "p01");
    }

    #[test]
    fn scenario_file_parsing() {
        let text = r#"{"problem_id":"p1","question":"q","tutoring_approach":"a","student_profile":"s"}
{"problem_id":"p2","question":"q2","tutoring_approach":"a2"}"#;
        let scenarios = parse_scenarios(text).unwrap();
        assert_eq!(scenarios.len(), 2);
        assert_eq!(scenarios[1].student_profile, "");

        let bad = r#"{"problem_id":"p1","question":"","tutoring_approach":"a"}"#;
        assert!(parse_scenarios(bad).is_err());
    }
}
