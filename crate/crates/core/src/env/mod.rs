//! The editing environment: applies one action at a time to a scene and keeps
//! a hash-chained log that can be replayed exactly.

mod log;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{colliders, footprint_within_room, world_aabb, DEFAULT_EPS};
use crate::scene::{normalize_yaw, serialize_scene, Point3, SceneGraph};

pub use log::{replay, EpisodeLog, LogEntry, LogError, LogHeader, LogLine, PlanRecord, ReplayError, StepRecord};

/// 64-bit digest rendered as 16 lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hash64(String);

impl Hash64 {
    pub fn of(bytes: &[u8]) -> Self {
        let d = Sha256::digest(bytes);
        Self(d[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Hash64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Digest of the canonical serialization.
pub fn scene_hash(g: &SceneGraph) -> Hash64 {
    Hash64::of(serialize_scene(g).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    /// Absolute target position of the object's centre.
    Move {
        position: Point3,
    },
    /// Absolute target yaw in degrees.
    Rotate {
        yaw: f64,
    },
    Delete,
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Move { .. } => "move",
            Operation::Rotate { .. } => "rotate",
            Operation::Delete => "delete",
        }
    }
}

/// `{"object_id", "operation", "parameters"}` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAction", into = "RawAction")]
pub struct Action {
    pub object_id: String,
    pub op: Operation,
}

impl Action {
    pub fn new(object_id: impl Into<String>, op: Operation) -> Self {
        Self { object_id: object_id.into(), op }
    }

    pub fn move_to(object_id: impl Into<String>, position: Point3) -> Self {
        Self::new(object_id, Operation::Move { position })
    }

    pub fn rotate(object_id: impl Into<String>, yaw: f64) -> Self {
        Self::new(object_id, Operation::Rotate { yaw })
    }

    pub fn delete(object_id: impl Into<String>) -> Self {
        Self::new(object_id, Operation::Delete)
    }

    /// Same object and same operation kind.
    pub fn same_target(&self, other: &Action) -> bool {
        self.object_id == other.object_id && self.op.name() == other.op.name()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OpName {
    Move,
    Rotate,
    Delete,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    yaw: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAction {
    object_id: String,
    operation: OpName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parameters: Option<RawParams>,
}

impl TryFrom<RawAction> for Action {
    type Error = String;

    fn try_from(r: RawAction) -> Result<Self, String> {
        let p = r.parameters.unwrap_or_default();
        let op = match (r.operation, p.position, p.yaw) {
            (OpName::Move, Some(position), None) => Operation::Move { position },
            (OpName::Rotate, None, Some(yaw)) => Operation::Rotate { yaw },
            (OpName::Delete, None, None) => Operation::Delete,
            (OpName::Move, ..) => return Err("move takes exactly `parameters.position` as [x, y, z]".into()),
            (OpName::Rotate, ..) => return Err("rotate takes exactly `parameters.yaw` in degrees".into()),
            (OpName::Delete, ..) => return Err("delete takes no parameters".into()),
        };
        Ok(Action { object_id: r.object_id, op })
    }
}

impl From<Action> for RawAction {
    fn from(a: Action) -> Self {
        let (operation, parameters) = match a.op {
            Operation::Move { position } => (OpName::Move, Some(RawParams { position: Some(position), yaw: None })),
            Operation::Rotate { yaw } => (OpName::Rotate, Some(RawParams { position: None, yaw: Some(yaw) })),
            Operation::Delete => (OpName::Delete, None),
        };
        RawAction { object_id: a.object_id, operation, parameters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Ok,
    Collision,
    OutOfBounds,
    UnknownObject,
    Immovable,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Ok => "ok",
            Reason::Collision => "collision",
            Reason::OutOfBounds => "out_of_bounds",
            Reason::UnknownObject => "unknown_object",
            Reason::Immovable => "immovable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub accepted: bool,
    pub reason: Reason,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub colliding_ids: Vec<String>,
}

impl ActionOutcome {
    fn ok() -> Self {
        Self { accepted: true, reason: Reason::Ok, colliding_ids: Vec::new() }
    }

    fn reject(reason: Reason) -> Self {
        Self { accepted: false, reason, colliding_ids: Vec::new() }
    }
}

impl fmt::Display for ActionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason.as_str())?;
        if !self.colliding_ids.is_empty() {
            write!(f, " with {}", self.colliding_ids.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub collision_checking: bool,
    pub eps: f64,
    pub keep_in_room: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { collision_checking: true, eps: DEFAULT_EPS, keep_in_room: true }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("eps must be a finite value >= 0, got {0}")]
pub struct EnvConfigError(pub f64);

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvConfigError> {
        if self.eps >= 0.0 && self.eps.is_finite() {
            Ok(())
        } else {
            Err(EnvConfigError(self.eps))
        }
    }
}

/// Applies `a` to a copy of `g`. Rejections return `g` unchanged; this never fails.
pub fn apply_action(g: &SceneGraph, a: &Action, cfg: &EnvConfig) -> (SceneGraph, ActionOutcome) {
    let Some(idx) = g.objects.iter().position(|o| o.id == a.object_id) else {
        return (g.clone(), ActionOutcome::reject(Reason::UnknownObject));
    };
    let mut candidate = g.objects[idx].clone();
    match a.op {
        Operation::Delete => {
            let mut next = g.clone();
            next.objects.remove(idx);
            return (next, ActionOutcome::ok());
        }
        _ if !candidate.movable => return (g.clone(), ActionOutcome::reject(Reason::Immovable)),
        Operation::Move { position } => {
            if !position.is_finite() {
                return (g.clone(), ActionOutcome::reject(Reason::OutOfBounds));
            }
            candidate.position = position;
        }
        Operation::Rotate { yaw } => {
            if !yaw.is_finite() {
                return (g.clone(), ActionOutcome::reject(Reason::OutOfBounds));
            }
            candidate.yaw = normalize_yaw(yaw);
        }
    }
    let eps = cfg.eps.max(0.0);
    let bb = world_aabb(&candidate);
    if cfg.keep_in_room && !footprint_within_room(&g.room, &bb, eps) {
        return (g.clone(), ActionOutcome::reject(Reason::OutOfBounds));
    }
    if cfg.collision_checking {
        let hits = colliders(g, &bb, &candidate.id, eps);
        if !hits.is_empty() {
            return (g.clone(), ActionOutcome { accepted: false, reason: Reason::Collision, colliding_ids: hits });
        }
    }
    let mut next = g.clone();
    next.objects[idx] = candidate;
    (next, ActionOutcome::ok())
}

/// One episode's mutable scene plus its log. Single writer.
#[derive(Debug)]
pub struct EditEnv {
    scene: SceneGraph,
    cfg: EnvConfig,
    log: EpisodeLog,
    steps: usize,
}

impl EditEnv {
    pub fn new(g0: SceneGraph, cfg: EnvConfig, rng_seed: u64, loop_config: serde_json::Value) -> Result<Self, EnvConfigError> {
        cfg.validate()?;
        let header = LogHeader::new(rng_seed, cfg, loop_config, scene_hash(&g0));
        Ok(Self { scene: g0, cfg, log: EpisodeLog::new(header), steps: 0 })
    }

    pub fn scene(&self) -> &SceneGraph {
        &self.scene
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Applies and logs one action. `round` and `plan_index` tie it to the plan step it executes.
    pub fn step(&mut self, a: Action, round: usize, plan_index: usize) -> ActionOutcome {
        let (next, outcome) = apply_action(&self.scene, &a, &self.cfg);
        self.scene = next;
        self.steps += 1;
        self.log.push(LogEntry::Step(StepRecord {
            step: self.steps,
            round,
            plan_index,
            action: a,
            outcome: outcome.clone(),
            post_hash: scene_hash(&self.scene),
        }));
        outcome
    }

    pub fn record(&mut self, entry: LogEntry) {
        debug_assert!(!matches!(entry, LogEntry::Step(_)), "steps go through EditEnv::step");
        self.log.push(entry);
    }

    pub fn into_parts(self) -> (SceneGraph, EpisodeLog) {
        (self.scene, self.log)
    }
}
