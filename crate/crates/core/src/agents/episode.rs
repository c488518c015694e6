use std::fmt::Write as _;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    AgentEndpoint, AgentError, ChatMessage, ChatRequest, ContextBundle, Endpoints, LoopConfig, Plan, PlanIssue, EDITOR_PROMPT,
    ENRICHER_PROMPT, EVALUATOR_PROMPT, PROMPT_VERSION,
};
use crate::constraints::{
    compile_constraints_with, evaluate, CompileConfig, Constraint, ConstraintEnricher, ConstraintReport, ConstraintSet,
};
use crate::env::{apply_action, Action, ActionOutcome, EditEnv, EpisodeLog, LogEntry, PlanRecord, Reason};
use crate::scene::SceneGraph;

/// Parses a reply that must be one JSON value, tolerating a surrounding
/// markdown code fence.
pub(crate) fn extract_json(text: &str) -> Result<Value, String> {
    let mut t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let body = rest.split_once('\n').map_or("", |(_, b)| b);
        t = body.trim_end().strip_suffix("```").unwrap_or(body).trim();
    }
    serde_json::from_str(t).map_err(|e| format!("not a JSON value: {e}"))
}

fn decode<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, String> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at `{path}`: {}", e.inner())
        }
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    actions: Vec<Action>,
    #[serde(default)]
    rationale: String,
}

fn parse_plan(text: &str) -> Result<Plan, String> {
    let raw: RawPlan = decode(extract_json(text)?)?;
    Ok(Plan { actions: raw.actions, rationale: raw.rationale, predicted: Vec::new() })
}

enum Confirmation {
    Confirm,
    Revised(Plan),
}

fn parse_confirmation(text: &str) -> Result<Confirmation, String> {
    let v = extract_json(text)?;
    if v.get("confirm").is_some() {
        return match v.as_object().map(|o| o.len()) {
            Some(1) if v["confirm"] == Value::Bool(true) => Ok(Confirmation::Confirm),
            _ => Err("expected exactly {\"confirm\": true} or a replacement plan".into()),
        };
    }
    let raw: RawPlan = decode(v)?;
    Ok(Confirmation::Revised(Plan { actions: raw.actions, rationale: raw.rationale, predicted: Vec::new() }))
}

fn validate_plan(plan: &Plan, g: &SceneGraph, max: usize) -> Result<(), PlanIssue> {
    if plan.actions.is_empty() {
        return Err(PlanIssue::Empty);
    }
    if plan.actions.len() > max {
        return Err(PlanIssue::TooLong { len: plan.actions.len(), max });
    }
    match plan.actions.iter().find(|a| g.object(&a.object_id).is_none()) {
        Some(a) => Err(PlanIssue::UnknownObject(a.object_id.clone())),
        None => Ok(()),
    }
}

fn call(ep: &AgentEndpoint, messages: &[ChatMessage], cfg: &LoopConfig, hint: Option<String>) -> Result<String, AgentError> {
    let req = ChatRequest {
        role: ep.role,
        messages: messages.to_vec(),
        temperature: ep.temperature,
        max_tokens: ep.max_tokens,
        seed: Some(cfg.seed),
        hint,
    };
    Ok(ep.client.complete(&req)?)
}

/// One call plus one reprompt carrying the parse error.
fn call_parsed<T>(
    ep: &AgentEndpoint,
    messages: &mut Vec<ChatMessage>,
    cfg: &LoopConfig,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, AgentError> {
    let reply = call(ep, messages, cfg, None)?;
    let err = match parse(&reply) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };
    messages.push(ChatMessage::text("assistant", reply));
    messages.push(ChatMessage::text("user", format!("Your reply could not be parsed: {err}. Reply with only the JSON object.")));
    let reply = call(ep, messages, cfg, None)?;
    parse(&reply).map_err(AgentError::PlanParseFailure)
}

fn simulate(g: &SceneGraph, plan: &Plan, cfg: &LoopConfig) -> Vec<ActionOutcome> {
    let env = cfg.env();
    let mut g = g.clone();
    plan.actions
        .iter()
        .map(|a| {
            let (next, out) = apply_action(&g, a, &env);
            g = next;
            out
        })
        .collect()
}

/// Asks the evaluator for a plan and validates it against the bundle's scene.
///
/// With `cfg.dry_run`, a plan whose simulation predicts any rejection is sent
/// back with the predictions; the evaluator confirms it or replaces it.
pub fn request_plan(evaluator: &AgentEndpoint, bundle: &ContextBundle, cfg: &LoopConfig) -> Result<Plan, AgentError> {
    let mode = bundle.mode(evaluator.vision);
    let mut messages = vec![ChatMessage::text("system", EVALUATOR_PROMPT), bundle.evaluator_message(mode, cfg)];
    let mut plan = call_parsed(evaluator, &mut messages, cfg, parse_plan)?;
    let check = |p: &Plan| validate_plan(p, &bundle.scene, cfg.max_plan_length).map_err(AgentError::PlanValidationFailure);
    check(&plan)?;
    if !cfg.dry_run {
        return Ok(plan);
    }
    let predicted = simulate(&bundle.scene, &plan, cfg);
    if predicted.iter().all(|o| o.accepted) {
        plan.predicted = predicted;
        return Ok(plan);
    }
    let mut text = String::from("SIMULATED OUTCOMES\n");
    for (i, (a, o)) in plan.actions.iter().zip(&predicted).enumerate() {
        let _ = writeln!(text, "- {}: {} -> {o}", i + 1, serde_json::to_string(a).expect("action serializes"));
    }
    text.push_str("Reply {\"confirm\": true} to run this plan, or with a complete replacement plan.");
    messages.push(ChatMessage::text(
        "assistant",
        serde_json::to_string(&json!({"actions": plan.actions, "rationale": plan.rationale})).expect("plan serializes"),
    ));
    messages.push(ChatMessage::text("user", text));
    match call_parsed(evaluator, &mut messages, cfg, parse_confirmation)? {
        Confirmation::Confirm => plan.predicted = predicted,
        Confirmation::Revised(mut p) => {
            check(&p)?;
            p.predicted = simulate(&bundle.scene, &p, cfg);
            plan = p;
        }
    }
    Ok(plan)
}

/// Asks the editor to carry out `hint`. The editor may change parameters
/// but not the object or the operation.
pub fn request_action(
    editor: &AgentEndpoint,
    bundle: &ContextBundle,
    hint: &Action,
    cfg: &LoopConfig,
) -> Result<Action, AgentError> {
    let mode = bundle.mode(editor.vision);
    let hint_text = serde_json::to_string(hint).expect("action serializes");
    let mut messages = vec![ChatMessage::text("system", EDITOR_PROMPT), bundle.editor_message(hint, mode, cfg)];
    let mut last = String::new();
    for _ in 0..=cfg.editor_retry_limit {
        let reply = call(editor, &messages, cfg, Some(hint_text.clone()))?;
        match extract_json(&reply).and_then(decode::<Action>) {
            Ok(a) if a.same_target(hint) => return Ok(a),
            Ok(a) => {
                return Err(AgentError::ActionParseFailure(format!(
                    "plan step is {} on `{}`, editor answered {} on `{}`",
                    hint.op.name(),
                    hint.object_id,
                    a.op.name(),
                    a.object_id
                )))
            }
            Err(e) => {
                messages.push(ChatMessage::text("assistant", reply));
                messages.push(ChatMessage::text(
                    "user",
                    format!("Your reply could not be parsed: {e}. Reply with only one JSON action."),
                ));
                last = e;
            }
        }
    }
    Err(AgentError::ActionParseFailure(format!("after {} attempts: {last}", cfg.editor_retry_limit + 1)))
}

/// Proposes extra soft constraints through the evaluator endpoint.
pub struct LlmEnricher<'a> {
    pub endpoint: &'a AgentEndpoint,
    pub cfg: &'a LoopConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnrichment {
    constraints: Vec<Constraint>,
}

impl ConstraintEnricher for LlmEnricher<'_> {
    fn enrich(&self, goal_text: &str, g0: &SceneGraph, base: &ConstraintSet) -> Result<Vec<Constraint>, String> {
        let text = format!(
            "GOAL\n{goal_text}\n\nSCENE\n{}\n\nCONSTRAINTS\n{}\n",
            serde_json::to_string(g0).expect("scene serializes"),
            serde_json::to_string(&base.constraints).expect("constraints serialize"),
        );
        let mut messages = vec![ChatMessage::text("system", ENRICHER_PROMPT), ChatMessage::text("user", text)];
        call_parsed(self.endpoint, &mut messages, self.cfg, |r| decode::<RawEnrichment>(extract_json(r)?))
            .map(|r| r.constraints)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub scene: SceneGraph,
    pub log: EpisodeLog,
    pub report: ConstraintReport,
    pub constraints: ConstraintSet,
    /// Replanning rounds used after the first plan.
    pub feedback_rounds: usize,
}

/// A failed episode with whatever it produced before failing.
#[derive(Debug)]
pub struct EpisodeFailure {
    pub error: AgentError,
    pub scene: SceneGraph,
    pub log: Option<EpisodeLog>,
    pub constraints: Option<ConstraintSet>,
    pub report: Option<ConstraintReport>,
}

/// Compile, plan, execute step by step with feedback, evaluate, and replan
/// while hard constraints fail and rounds remain.
pub fn run_episode(g0: &SceneGraph, goal: &str, endpoints: &Endpoints, cfg: &LoopConfig) -> Result<Episode, Box<EpisodeFailure>> {
    let fail = |error, scene: &SceneGraph, log, constraints, report| {
        Box::new(EpisodeFailure { error, scene: scene.clone(), log, constraints, report })
    };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, g0, None, None, None));
    }
    let snapshot = json!({"loop": cfg, "prompts": PROMPT_VERSION});
    let mut env = EditEnv::new(g0.clone(), cfg.env(), cfg.seed, snapshot).expect("validated config");

    let enricher = cfg.enrich.then_some(LlmEnricher { endpoint: &endpoints.evaluator, cfg });
    let compile = CompileConfig { allow_overlap: cfg.compile.allow_overlap || !cfg.collision_checking, ..cfg.compile.clone() };
    let constraints = match compile_constraints_with(goal, g0, &compile, enricher.as_ref().map(|e| e as &dyn ConstraintEnricher))
    {
        Ok(c) => c,
        Err(e) => return Err(fail(e.into(), g0, Some(env.log().clone()), None, None)),
    };

    let mut recent: Vec<(usize, Action, ActionOutcome)> = Vec::new();
    let mut report: Option<ConstraintReport> = None;
    for round in 0..=cfg.max_feedback_rounds {
        let result = (|| -> Result<ConstraintReport, AgentError> {
            let bundle = ContextBundle::build(env.scene(), &constraints, report.as_ref(), &recent, env.steps(), cfg)?;
            let mode = bundle.mode(endpoints.evaluator.vision);
            let plan = match request_plan(&endpoints.evaluator, &bundle, cfg) {
                Ok(p) => p,
                // An empty replan spends the round without touching the scene.
                Err(AgentError::PlanValidationFailure(PlanIssue::Empty)) => {
                    Plan { actions: Vec::new(), rationale: String::new(), predicted: Vec::new() }
                }
                Err(e) => return Err(e),
            };
            env.record(LogEntry::Plan(PlanRecord {
                round,
                actions: plan.actions.clone(),
                rationale: plan.rationale.clone(),
                views: mode.as_str().into(),
                predicted: plan.predicted.clone(),
            }));
            for (i, hint) in plan.actions.iter().enumerate() {
                let mut corrections = 0;
                loop {
                    let bundle = ContextBundle::build(env.scene(), &constraints, report.as_ref(), &recent, env.steps(), cfg)?;
                    let action = request_action(&endpoints.editor, &bundle, hint, cfg)?;
                    let outcome = env.step(action.clone(), round, i);
                    recent.push((env.steps(), action, outcome.clone()));
                    let correctable = matches!(outcome.reason, Reason::Collision | Reason::OutOfBounds);
                    if outcome.accepted || !correctable || corrections >= cfg.correction_attempts {
                        break;
                    }
                    corrections += 1;
                }
            }
            let r = evaluate(&constraints, env.scene(), &cfg.geometry)?;
            env.record(LogEntry::Report { round, report: r.clone() });
            Ok(r)
        })();
        match result {
            Ok(r) if r.overall_hard_ok => {
                let (scene, log) = env.into_parts();
                return Ok(Episode { scene, log, report: r, constraints, feedback_rounds: round });
            }
            Ok(r) => report = Some(r),
            Err(e) => {
                let (scene, log) = env.into_parts();
                return Err(fail(e, &scene, Some(log), Some(constraints), report));
            }
        }
    }
    let (scene, log) = env.into_parts();
    Err(fail(AgentError::EpisodeFailed { rounds: cfg.max_feedback_rounds }, &scene, Some(log), Some(constraints), report))
}
