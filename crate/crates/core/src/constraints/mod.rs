//! Constraint sets compiled from a goal sentence and a starting scene, and
//! their evaluation against any scene.
//!
//! Compilation is template driven and deterministic. An optional
//! [`ConstraintEnricher`] may append soft constraints; it can never remove or
//! tighten a template constraint.

mod evaluate;
mod templates;

pub use evaluate::{evaluate, ConstraintReport, ConstraintResult};
pub use templates::{match_goal, GoalFamily, GoalMatch};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryParams;
use crate::scene::{SceneGraph, DEFAULT_LARGE_OBJECT_THRESHOLD};

pub const CONSTRAINT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Collision,
    Spatial,
    Safety,
    Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    NoOverlap,
    MinClearance,
    GridAlignment,
    Proximity,
    ExitUnobstructed,
    DoorBlockedByLarge,
    Custom,
}

impl Kind {
    /// Domain this kind belongs to; `None` for [`Kind::Custom`], which may sit anywhere.
    pub fn domain(self) -> Option<Domain> {
        match self {
            Kind::NoOverlap => Some(Domain::Collision),
            Kind::MinClearance | Kind::GridAlignment | Kind::Proximity => Some(Domain::Spatial),
            Kind::ExitUnobstructed => Some(Domain::Safety),
            Kind::DoorBlockedByLarge => Some(Domain::Goal),
            Kind::Custom => None,
        }
    }

    fn required(self) -> &'static [(&'static str, ParamType)] {
        use ParamType::*;
        match self {
            Kind::NoOverlap => &[],
            Kind::MinClearance => &[("threshold", Number)],
            Kind::GridAlignment => &[("pitch", Number), ("tolerance", Number)],
            Kind::Proximity => &[("a", Text), ("b", Text), ("max_distance", Number)],
            Kind::ExitUnobstructed => &[("door", Text)],
            Kind::DoorBlockedByLarge => &[("door", Text), ("large_object_threshold", Number), ("required_coverage", Number)],
            Kind::Custom => &[("check", Text)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Flag(bool),
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ParamType {
    Number,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub id: String,
    pub domain: Domain,
    pub kind: Kind,
    #[serde(default)]
    pub params: BTreeMap<String, Param>,
    pub severity: Severity,
}

impl Constraint {
    pub fn number(&self, key: &str) -> Option<f64> {
        match self.params.get(key) {
            Some(Param::Number(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.params.get(key) {
            Some(Param::Text(v)) => Some(v),
            _ => None,
        }
    }

    /// Checks kind/domain consistency and presence and type of required params.
    pub fn check(&self) -> Result<(), ConstraintError> {
        let bad = |message: String| ConstraintError::Schema { id: self.id.clone(), message };
        if self.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        if let Some(d) = self.kind.domain() {
            if d != self.domain {
                return Err(bad(format!("kind {:?} belongs to domain {:?}", self.kind, d)));
            }
        }
        for (key, ty) in self.kind.required() {
            let ok = match (ty, self.params.get(*key)) {
                (ParamType::Number, Some(Param::Number(v))) => v.is_finite(),
                (ParamType::Text, Some(Param::Text(_))) => true,
                _ => false,
            };
            if !ok {
                return Err(bad(format!("missing or ill-typed param `{key}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSet {
    pub schema_version: String,
    pub goal_text: String,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn get(&self, id: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn hard(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.severity == Severity::Hard)
    }

    pub fn domains(&self) -> HashSet<Domain> {
        self.constraints.iter().map(|c| c.domain).collect()
    }

    pub fn check(&self) -> Result<(), ConstraintError> {
        let mut ids = HashSet::new();
        for c in &self.constraints {
            c.check()?;
            if !ids.insert(c.id.as_str()) {
                return Err(ConstraintError::DuplicateId(c.id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConstraintError {
    #[error("goal text matches no template: {0:?}")]
    UnrecognizedGoal(String),
    #[error("constraint references missing door or object `{0}`")]
    DanglingReference(String),
    #[error("constraint `{id}`: {message}")]
    Schema { id: String, message: String },
    #[error("duplicate constraint id `{0}`")]
    DuplicateId(String),
    #[error("malformed constraint document: {0}")]
    Malformed(String),
    #[error("enrichment failed: {0}")]
    Enrichment(String),
    #[error("compile precondition: {0}")]
    InvalidScene(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileConfig {
    /// Clearance radius (m) demanded by the min-clearance constraint.
    pub clearance: f64,
    pub large_object_threshold: f64,
    /// Coverage a blocking placement must reach on top of impassability.
    pub required_coverage: f64,
    /// Keep the door nearest the room centroid open as a secondary exit.
    pub preserve_secondary: bool,
    /// Emit a soft grid-alignment constraint at this lattice pitch (m).
    pub grid_pitch: Option<f64>,
    pub grid_tolerance: f64,
    /// Demote no-overlap to soft, for runs where interpenetration is allowed.
    pub allow_overlap: bool,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            clearance: GeometryParams::default().clearance_radius,
            large_object_threshold: DEFAULT_LARGE_OBJECT_THRESHOLD,
            required_coverage: 0.0,
            preserve_secondary: false,
            grid_pitch: None,
            grid_tolerance: 0.05,
            allow_overlap: false,
        }
    }
}

/// Extra constraints proposed by a model or a rule base.
pub trait ConstraintEnricher {
    fn enrich(&self, goal_text: &str, g0: &SceneGraph, base: &ConstraintSet) -> Result<Vec<Constraint>, String>;
}

pub fn compile_constraints(goal_text: &str, g0: &SceneGraph, cfg: &CompileConfig) -> Result<ConstraintSet, ConstraintError> {
    compile_constraints_with(goal_text, g0, cfg, None)
}

pub fn compile_constraints_with(
    goal_text: &str,
    g0: &SceneGraph,
    cfg: &CompileConfig,
    enricher: Option<&dyn ConstraintEnricher>,
) -> Result<ConstraintSet, ConstraintError> {
    let report = crate::scene::validate_scene(g0);
    if !report.is_empty() {
        return Err(ConstraintError::InvalidScene(report.summary()));
    }
    let family = match_goal(goal_text);
    if family.is_none() && enricher.is_none() {
        return Err(ConstraintError::UnrecognizedGoal(goal_text.to_string()));
    }
    let mut set = ConstraintSet {
        schema_version: CONSTRAINT_SCHEMA_VERSION.into(),
        goal_text: goal_text.to_string(),
        constraints: templates::base_constraints(cfg),
    };
    if let Some(m) = family {
        set.constraints.extend(templates::family_constraints(&m, g0, cfg));
    }
    if let Some(e) = enricher {
        let extra = e.enrich(goal_text, g0, &set).map_err(ConstraintError::Enrichment)?;
        for mut c in extra {
            c.severity = Severity::Soft;
            if !c.id.starts_with("enriched/") {
                c.id = format!("enriched/{}", c.id);
            }
            c.check().map_err(|e| ConstraintError::Enrichment(e.to_string()))?;
            set.constraints.push(c);
        }
    }
    set.check()?;
    Ok(set)
}

pub fn parse_constraints(text: &str) -> Result<ConstraintSet, ConstraintError> {
    let set: ConstraintSet = serde_json::from_str(text).map_err(|e| ConstraintError::Malformed(e.to_string()))?;
    if set.schema_version != CONSTRAINT_SCHEMA_VERSION {
        return Err(ConstraintError::Malformed(format!("unsupported schema_version {:?}", set.schema_version)));
    }
    set.check()?;
    Ok(set)
}

pub fn serialize_constraints(set: &ConstraintSet) -> String {
    let mut s = serde_json::to_string_pretty(set).expect("constraint set serializes");
    s.push('\n');
    s
}
