use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{CompileConfig, Constraint, Domain, Kind, Param, Severity};
use crate::scene::SceneGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalFamily {
    /// "A {room_type}, where doors are blocked with large objects."
    BlockedDoors,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalMatch {
    pub family: GoalFamily,
    pub room_type: Option<String>,
}

fn library() -> &'static [(GoalFamily, Regex)] {
    static LIB: OnceLock<Vec<(GoalFamily, Regex)>> = OnceLock::new();
    LIB.get_or_init(|| {
        [
            r"(?i)^\s*an?\s+(?P<room>.+?),\s*where\s+(?:the\s+|all\s+)?doors?\s+(?:is|are)\s+blocked\s+(?:with|by)\s+(?:large|big)\s+objects\s*\.?\s*$",
            r"(?i)^\s*an?\s+(?P<room>.+?)\s+with\s+(?:the\s+|all\s+)?doors?\s+blocked\s+(?:with|by)\s+(?:large|big)\s+objects\s*\.?\s*$",
        ]
        .into_iter()
        .map(|p| (GoalFamily::BlockedDoors, Regex::new(p).expect("goal pattern compiles")))
        .collect()
    })
}

pub fn match_goal(goal_text: &str) -> Option<GoalMatch> {
    library().iter().find_map(|(family, re)| {
        re.captures(goal_text)
            .map(|c| GoalMatch { family: *family, room_type: c.name("room").map(|m| m.as_str().trim().to_string()) })
    })
}

fn params<const N: usize>(kv: [(&str, Param); N]) -> BTreeMap<String, Param> {
    kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub(super) fn base_constraints(cfg: &CompileConfig) -> Vec<Constraint> {
    let mut out = vec![
        Constraint {
            id: "collision/no_overlap".into(),
            domain: Domain::Collision,
            kind: Kind::NoOverlap,
            params: BTreeMap::new(),
            severity: if cfg.allow_overlap { Severity::Soft } else { Severity::Hard },
        },
        Constraint {
            id: "spatial/min_clearance".into(),
            domain: Domain::Spatial,
            kind: Kind::MinClearance,
            params: params([("threshold", Param::Number(cfg.clearance))]),
            severity: Severity::Soft,
        },
        Constraint {
            id: "safety/structural_boundaries".into(),
            domain: Domain::Safety,
            kind: Kind::Custom,
            params: params([("check", Param::Text("within_room".into()))]),
            severity: Severity::Hard,
        },
    ];
    if let Some(pitch) = cfg.grid_pitch {
        out.push(Constraint {
            id: "spatial/grid_alignment".into(),
            domain: Domain::Spatial,
            kind: Kind::GridAlignment,
            params: params([("pitch", Param::Number(pitch)), ("tolerance", Param::Number(cfg.grid_tolerance))]),
            severity: Severity::Soft,
        });
    }
    out
}

pub(super) fn family_constraints(m: &GoalMatch, g0: &SceneGraph, cfg: &CompileConfig) -> Vec<Constraint> {
    match m.family {
        GoalFamily::BlockedDoors => blocked_doors(g0, cfg),
    }
}

fn blocked_doors(g0: &SceneGraph, cfg: &CompileConfig) -> Vec<Constraint> {
    let doors = &g0.room.doors;
    let preserved: Option<&str> = if cfg.preserve_secondary && doors.len() >= 2 {
        let c = g0.room.centroid();
        doors.iter().min_by(|a, b| a.center.dist(c).total_cmp(&b.center.dist(c))).map(|d| d.id.as_str())
    } else {
        None
    };
    let mut out = Vec::new();
    for d in doors.iter().filter(|d| Some(d.id.as_str()) != preserved) {
        out.push(Constraint {
            id: format!("goal/door_blocked/{}", d.id),
            domain: Domain::Goal,
            kind: Kind::DoorBlockedByLarge,
            params: params([
                ("door", Param::Text(d.id.clone())),
                ("large_object_threshold", Param::Number(cfg.large_object_threshold)),
                ("required_coverage", Param::Number(cfg.required_coverage)),
            ]),
            severity: Severity::Hard,
        });
    }
    let mut open: Vec<&str> = g0.exits.iter().map(String::as_str).filter(|e| Some(*e) == preserved).collect();
    if let Some(p) = preserved {
        if open.is_empty() {
            open.push(p);
        }
    }
    for e in open {
        out.push(Constraint {
            id: format!("safety/exit_unobstructed/{e}"),
            domain: Domain::Safety,
            kind: Kind::ExitUnobstructed,
            params: params([("door", Param::Text(e.to_string()))]),
            severity: Severity::Hard,
        });
    }
    out
}
