use std::fmt::Write as _;
use std::path::PathBuf;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{AgentError, ChatMessage, LoopConfig, Part};
use crate::constraints::{ConstraintReport, ConstraintSet};
use crate::env::{Action, ActionOutcome};
use crate::geometry::occupancy_grid;
use crate::render::{render_occupancy, render_text_map, render_topdown, RenderOptions};
use crate::scene::SceneGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Topdown,
    Occupancy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub kind: ViewKind,
    pub media_type: &'static str,
    /// File the view was written to, when a views directory is configured.
    pub path: Option<PathBuf>,
    pub content: String,
}

/// How views were presented to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    Image,
    Text,
}

impl ViewMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewMode::Image => "image",
            ViewMode::Text => "text",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContextBundle {
    pub scene: SceneGraph,
    pub constraints: ConstraintSet,
    pub views: Vec<View>,
    pub latest_report: Option<ConstraintReport>,
    /// `(step, action, outcome)`, oldest first.
    pub recent_outcomes: Vec<(usize, Action, ActionOutcome)>,
}

impl ContextBundle {
    /// Renders views for step `step`, writing them under `cfg.views_dir` if set.
    pub fn build(
        scene: &SceneGraph,
        constraints: &ConstraintSet,
        latest_report: Option<&ConstraintReport>,
        recent: &[(usize, Action, ActionOutcome)],
        step: usize,
        cfg: &LoopConfig,
    ) -> Result<Self, AgentError> {
        let svg = render_topdown(scene, &RenderOptions { palette_seed: cfg.seed, ..RenderOptions::default() })
            .expect("default scale is positive");
        let grid = occupancy_grid(scene, cfg.geometry.grid_cell).map_err(|e| AgentError::Config(e.to_string()))?;
        let mut views = vec![
            View { kind: ViewKind::Topdown, media_type: "image/svg+xml", path: None, content: svg },
            View {
                kind: ViewKind::Occupancy,
                media_type: "image/x-portable-graymap",
                path: None,
                content: render_occupancy(&grid),
            },
        ];
        if let Some(dir) = &cfg.views_dir {
            std::fs::create_dir_all(dir).map_err(|e| AgentError::Io(e.to_string()))?;
            for v in &mut views {
                let name = match v.kind {
                    ViewKind::Topdown => format!("view_t{step}.svg"),
                    ViewKind::Occupancy => format!("occ_t{step}.pgm"),
                };
                let p = dir.join(name);
                std::fs::write(&p, &v.content).map_err(|e| AgentError::Io(format!("{}: {e}", p.display())))?;
                v.path = Some(p);
            }
        }
        let skip = recent.len().saturating_sub(cfg.recent_outcomes);
        Ok(Self {
            scene: scene.clone(),
            constraints: constraints.clone(),
            views,
            latest_report: latest_report.cloned(),
            recent_outcomes: recent[skip..].to_vec(),
        })
    }

    pub(crate) fn mode(&self, vision: bool) -> ViewMode {
        if vision && self.views.iter().any(|v| v.kind == ViewKind::Topdown) {
            ViewMode::Image
        } else {
            ViewMode::Text
        }
    }

    /// Image attachment in image mode, a character map otherwise.
    fn view_parts(&self, mode: ViewMode, cfg: &LoopConfig) -> Vec<Part> {
        match mode {
            ViewMode::Image => self
                .views
                .iter()
                .filter(|v| v.kind == ViewKind::Topdown)
                .map(|v| Part::Image {
                    media_type: v.media_type.into(),
                    data_base64: base64::engine::general_purpose::STANDARD.encode(&v.content),
                })
                .collect(),
            ViewMode::Text => {
                vec![Part::Text { text: format!("MAP\n{}", render_text_map(&self.scene, 0.1, cfg.geometry.door_depth)) }]
            }
        }
    }

    fn outcomes_text(&self) -> String {
        let mut s = String::new();
        for (step, a, o) in &self.recent_outcomes {
            let _ = writeln!(s, "- step {step}: {} -> {o}", serde_json::to_string(a).expect("action serializes"));
        }
        s
    }

    pub(crate) fn evaluator_message(&self, mode: ViewMode, cfg: &LoopConfig) -> ChatMessage {
        let mut text = format!(
            "GOAL\n{}\n\nCONSTRAINTS\n{}\n\nSCENE\n{}\n",
            self.constraints.goal_text,
            serde_json::to_string(&self.constraints.constraints).expect("constraints serialize"),
            serde_json::to_string(&self.scene).expect("scene serializes"),
        );
        if let Some(r) = &self.latest_report {
            let _ = write!(text, "\nLATEST REPORT\n{}\n", serde_json::to_string(r).expect("report serializes"));
        }
        if !self.recent_outcomes.is_empty() {
            let _ = write!(text, "\nRECENT OUTCOMES\n{}", self.outcomes_text());
        }
        let mut parts = vec![Part::Text { text }];
        parts.extend(self.view_parts(mode, cfg));
        ChatMessage { role: "user".into(), parts }
    }

    pub(crate) fn editor_message(&self, hint: &Action, mode: ViewMode, cfg: &LoopConfig) -> ChatMessage {
        let target = self
            .scene
            .object(&hint.object_id)
            .map_or_else(|| "absent".to_string(), |o| serde_json::to_string(o).expect("object serializes"));
        let mut text = format!(
            "PLANNED ACTION\n{}\n\nTARGET OBJECT\n{target}\n\nSCENE\n{}\n",
            serde_json::to_string(hint).expect("action serializes"),
            serde_json::to_string(&self.scene).expect("scene serializes"),
        );
        if !self.recent_outcomes.is_empty() {
            let _ = write!(text, "\nRECENT OUTCOMES\n{}", self.outcomes_text());
        }
        let mut parts = vec![Part::Text { text }];
        parts.extend(self.view_parts(mode, cfg));
        ChatMessage { role: "user".into(), parts }
    }
}
