use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{apply_action, scene_hash, Action, ActionOutcome, EnvConfig, Hash64};
use crate::constraints::ConstraintReport;
use crate::scene::SceneGraph;

pub const LOG_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: String,
    pub rng_seed: u64,
    pub env: EnvConfig,
    /// Orchestrator settings, opaque to the environment.
    pub loop_config: serde_json::Value,
    pub initial_scene_hash: Hash64,
}

impl LogHeader {
    pub fn new(rng_seed: u64, env: EnvConfig, loop_config: serde_json::Value, initial_scene_hash: Hash64) -> Self {
        Self { schema_version: LOG_SCHEMA_VERSION.into(), rng_seed, env, loop_config, initial_scene_hash }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub round: usize,
    pub actions: Vec<Action>,
    pub rationale: String,
    /// How views reached the planner: `image`, `text` or `none`.
    pub views: String,
    /// Outcomes predicted by simulating the plan on a copy; empty without a dry run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicted: Vec<ActionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based, contiguous across the whole episode.
    pub step: usize,
    pub round: usize,
    pub plan_index: usize,
    pub action: Action,
    pub outcome: ActionOutcome,
    pub post_hash: Hash64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogEntry {
    Header(LogHeader),
    Plan(PlanRecord),
    Step(StepRecord),
    Report { round: usize, report: ConstraintReport },
}

/// One JSONL line: the entry plus a digest over the previous line's digest
/// and this entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    #[serde(flatten)]
    pub entry: LogEntry,
    pub chain: Hash64,
}

fn chain_digest(prev: Option<&Hash64>, entry: &LogEntry) -> Hash64 {
    let body = serde_json::to_string(entry).expect("log entry serializes");
    let prev = prev.map(Hash64::as_str).unwrap_or("");
    Hash64::of(format!("{prev}\n{body}").as_bytes())
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("first line must be the header record")]
    MissingHeader,
}

/// Append-only episode record; the first line is always the header.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub lines: Vec<LogLine>,
}

impl EpisodeLog {
    pub fn new(header: LogHeader) -> Self {
        let entry = LogEntry::Header(header);
        let chain = chain_digest(None, &entry);
        Self { lines: vec![LogLine { entry, chain }] }
    }

    pub fn header(&self) -> &LogHeader {
        match &self.lines[0].entry {
            LogEntry::Header(h) => h,
            _ => unreachable!("constructors guarantee a header"),
        }
    }

    pub fn push(&mut self, entry: LogEntry) {
        let chain = chain_digest(self.lines.last().map(|l| &l.chain), &entry);
        self.lines.push(LogLine { entry, chain });
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.lines.iter().filter_map(|l| match &l.entry {
            LogEntry::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn plans(&self) -> impl Iterator<Item = &PlanRecord> {
        self.lines.iter().filter_map(|l| match &l.entry {
            LogEntry::Plan(p) => Some(p),
            _ => None,
        })
    }

    /// Hash after the last step, or the initial hash for a step-free log.
    pub fn final_hash(&self) -> &Hash64 {
        self.steps().last().map(|s| &s.post_hash).unwrap_or(&self.header().initial_scene_hash)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&serde_json::to_string(l).expect("log line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<LogLine>(l).map_err(|e| LogError::Malformed { line: i + 1, message: e.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        match lines.first() {
            Some(LogLine { entry: LogEntry::Header(_), .. }) => {}
            _ => return Err(LogError::MissingHeader),
        }
        if lines[1..].iter().any(|l| matches!(l.entry, LogEntry::Header(_))) {
            return Err(LogError::Malformed { line: 0, message: "more than one header record".into() });
        }
        Ok(Self { lines })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    /// `step` is the step index where replay diverged; 0 means the header or
    /// the initial scene. `line` is the 0-based log line.
    #[error("hash mismatch at step {step} (log line {line}): {detail}")]
    HashMismatch { step: usize, line: usize, detail: String },
}

/// Re-applies every logged action to `g0` under `cfg`, checking the chain,
/// each verdict and each post-state hash.
pub fn replay(g0: &SceneGraph, log: &EpisodeLog, cfg: &EnvConfig) -> Result<SceneGraph, ReplayError> {
    let mismatch = |step, line, detail: String| ReplayError::HashMismatch { step, line, detail };
    let mut prev: Option<&Hash64> = None;
    let mut g = g0.clone();
    let mut done = 0usize;
    for (i, line) in log.lines.iter().enumerate() {
        let next_step = done + 1;
        if chain_digest(prev, &line.entry) != line.chain {
            return Err(mismatch(if i == 0 { 0 } else { next_step }, i, "chain digest does not match".into()));
        }
        prev = Some(&line.chain);
        match &line.entry {
            LogEntry::Header(h) if i == 0 => {
                let h0 = scene_hash(g0);
                if h.initial_scene_hash != h0 {
                    return Err(mismatch(0, 0, format!("initial scene hashes to {h0}, log says {}", h.initial_scene_hash)));
                }
            }
            LogEntry::Header(_) => return Err(mismatch(next_step, i, "unexpected header".into())),
            LogEntry::Step(s) => {
                if s.step != next_step {
                    return Err(mismatch(next_step, i, format!("expected step {next_step}, found {}", s.step)));
                }
                let (next, outcome) = apply_action(&g, &s.action, cfg);
                if outcome != s.outcome {
                    return Err(mismatch(s.step, i, format!("verdict {outcome} differs from logged {}", s.outcome)));
                }
                let h = scene_hash(&next);
                if h != s.post_hash {
                    return Err(mismatch(s.step, i, format!("post-state hashes to {h}, log says {}", s.post_hash)));
                }
                g = next;
                done = s.step;
            }
            LogEntry::Plan(_) | LogEntry::Report { .. } => {}
        }
    }
    if !matches!(log.lines.first().map(|l| &l.entry), Some(LogEntry::Header(_))) {
        return Err(mismatch(0, 0, "missing header".into()));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EditEnv;
    use crate::scene::test_scenes::*;
    use crate::scene::Point3;

    fn episode() -> (SceneGraph, EpisodeLog) {
        let mut g = empty_scene(4.0, 3.0);
        g.objects.push(boxed("box_a", 1.0, 1.0, 0.5, 0.5));
        g.objects.push(boxed("box_b", 3.0, 2.0, 0.5, 0.5));
        let mut env = EditEnv::new(g.clone(), EnvConfig::default(), 7, serde_json::json!({"k": 1})).unwrap();
        env.step(Action::move_to("box_a", Point3::new(3.0, 0.5, 2.0)), 0, 0);
        env.step(Action::move_to("box_a", Point3::new(2.0, 0.5, 2.0)), 0, 0);
        env.step(Action::rotate("box_b", 30.0), 0, 1);
        env.step(Action::delete("box_b"), 0, 2);
        (g, env.into_parts().1)
    }

    #[test]
    fn empty_log_is_identity() {
        let g = empty_scene(4.0, 3.0);
        let env = EditEnv::new(g.clone(), EnvConfig::default(), 0, serde_json::Value::Null).unwrap();
        let (_, log) = env.into_parts();
        assert_eq!(replay(&g, &log, &EnvConfig::default()).unwrap(), g);
    }

    #[test]
    fn replay_reproduces_and_survives_jsonl() {
        let (g, log) = episode();
        let text = log.to_jsonl();
        let back = EpisodeLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
        let out = replay(&g, &back, &EnvConfig::default()).unwrap();
        assert_eq!(&scene_hash(&out), back.final_hash());
        assert_eq!(log.steps().count(), 4);
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn wrong_initial_scene() {
        let (mut g, log) = episode();
        g.objects[0].position.x += 0.001;
        let err = replay(&g, &log, &EnvConfig::default()).unwrap_err();
        assert!(matches!(err, ReplayError::HashMismatch { step: 0, .. }));
    }

    #[test]
    fn eps_flip_detected_at_the_boundary_step() {
        let mut g = empty_scene(4.0, 3.0);
        g.objects.push(boxed("box_a", 1.0, 1.0, 0.5, 0.5));
        g.objects.push(boxed("box_b", 2.0, 1.0, 0.5, 0.5));
        let mut env = EditEnv::new(g.clone(), EnvConfig::default(), 0, serde_json::Value::Null).unwrap();
        env.step(Action::rotate("box_a", 0.0), 0, 0);
        // 0.5 mm of penetration: a collision at eps 1e-6, contact at eps 1e-3
        let out = env.step(Action::move_to("box_a", Point3::new(1.5005, 0.5, 1.0)), 0, 1);
        assert!(!out.accepted);
        let (_, log) = env.into_parts();
        let loose = EnvConfig { eps: 1e-3, ..EnvConfig::default() };
        let err = replay(&g, &log, &loose).unwrap_err();
        assert!(matches!(err, ReplayError::HashMismatch { step: 2, line: 2, .. }), "{err}");
    }

    #[test]
    fn single_mutations_detected() {
        let (g, log) = episode();
        let cfg = EnvConfig::default();
        let mut bad = log.clone();
        if let LogEntry::Step(s) = &mut bad.lines[2].entry {
            s.action = Action::move_to("box_a", Point3::new(2.0, 0.5, 2.5));
        }
        assert!(matches!(replay(&g, &bad, &cfg), Err(ReplayError::HashMismatch { step: 2, .. })));
        let mut bad = log.clone();
        if let LogEntry::Header(h) = &mut bad.lines[0].entry {
            h.rng_seed = 8;
        }
        assert!(matches!(replay(&g, &bad, &cfg), Err(ReplayError::HashMismatch { step: 0, .. })));
        let mut bad = log.clone();
        bad.lines[4].chain = bad.lines[3].chain.clone();
        assert!(matches!(replay(&g, &bad, &cfg), Err(ReplayError::HashMismatch { step: 4, .. })));
    }
}
