//! Batch driver: one episode per input scene, per-scene artefacts, and a
//! dataset manifest written last.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{run_episode, AgentEndpoint, EndpointConfig, Endpoints, LoopConfig, Role};
use crate::constraints::{serialize_constraints, ConstraintReport};
use crate::env::Hash64;
use crate::geometry::{occupancy_grid, world_aabb, Aabb};
use crate::render::{render_occupancy, render_topdown, render_trajectory, RenderOptions};
use crate::scene::{parse_scene, serialize_scene, Point3, SceneGraph};

pub const ROOM_TYPE_PLACEHOLDER: &str = "{room_type}";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub scenes_dir: PathBuf,
    /// Goal text; `{room_type}` is replaced by the scene's room type.
    pub goal_template: String,
    pub out_dir: PathBuf,
    /// Require the `{room_type}` placeholder (one goal per room type).
    #[serde(default = "yes")]
    pub batch: bool,
    /// Evaluator endpoint; a `mock` path may be a transcript file or a
    /// directory of per-scene transcripts.
    pub evaluator: EndpointConfig,
    pub editor: EndpointConfig,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub loop_config: LoopConfig,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetadata {
    pub id: String,
    pub class_label: String,
    pub position: Point3,
    pub yaw: f64,
    pub aabb: Aabb,
}

/// One record per object, with its world AABB.
pub fn export_metadata(g: &SceneGraph) -> Vec<ObjectMetadata> {
    g.objects
        .iter()
        .map(|o| ObjectMetadata {
            id: o.id.clone(),
            class_label: o.class_label.clone(),
            position: o.position,
            yaw: o.yaw,
            aabb: world_aabb(o),
        })
        .collect()
}

/// Per-scene record. Output paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub stem: String,
    pub room_type: String,
    pub goal: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub initial_scene: String,
    pub final_scene: Option<String>,
    pub episode_log: Option<String>,
    pub constraints: Option<String>,
    pub report: Option<String>,
    pub final_report: Option<ConstraintReport>,
    pub renders: Vec<String>,
    pub feedback_rounds: Option<usize>,
    pub steps: usize,
    pub objects: Vec<ObjectMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: String,
    pub goal_template: String,
    pub seed: u64,
    pub collision_checking: bool,
    pub records: Vec<SceneRecord>,
    /// Seconds since the Unix epoch; ignored by [`DatasetManifest::same_content`].
    pub generated_at: u64,
}

impl DatasetManifest {
    pub fn same_content(&self, other: &Self) -> bool {
        Self { generated_at: 0, ..self.clone() } == Self { generated_at: 0, ..other.clone() }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(path, e))
    }
}

/// `living_room.json` → `living room`.
pub fn room_type_of(stem: &str) -> String {
    stem.replace('_', " ")
}

fn list_scenes(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let p = entry.map_err(|e| io_err(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Resolves a mock directory to `<stem>.<role>.jsonl`, else `<stem>.jsonl`.
fn endpoint_for(cfg: &EndpointConfig, role: Role, stem: &str, role_name: &str) -> Result<AgentEndpoint, String> {
    let mut cfg = cfg.clone();
    if let Some(dir) = cfg.mock.as_ref().filter(|p| p.is_dir()) {
        let specific = dir.join(format!("{stem}.{role_name}.jsonl"));
        cfg.mock = Some(if specific.exists() { specific } else { dir.join(format!("{stem}.jsonl")) });
    }
    cfg.connect(role).map_err(|e| e.to_string())
}

fn episode_seed(seed: u64, stem: &str) -> u64 {
    let h = Hash64::of(format!("{seed}:{stem}").as_bytes());
    u64::from_str_radix(h.as_str(), 16).expect("hex digest")
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

struct Job<'a> {
    cfg: &'a PipelineConfig,
    shared: Option<&'a Endpoints>,
}

impl Job<'_> {
    fn run(&self, scene_path: &Path) -> SceneRecord {
        let stem = scene_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let room_type = room_type_of(&stem);
        let goal = self.cfg.goal_template.replace(ROOM_TYPE_PLACEHOLDER, &room_type);
        let mut rec = SceneRecord {
            stem: stem.clone(),
            room_type,
            goal,
            status: Status::Failed,
            error: None,
            initial_scene: scene_path.display().to_string(),
            final_scene: None,
            episode_log: None,
            constraints: None,
            report: None,
            final_report: None,
            renders: Vec::new(),
            feedback_rounds: None,
            steps: 0,
            objects: Vec::new(),
        };
        if let Err(e) = self.execute(scene_path, &mut rec) {
            rec.status = Status::Failed;
            rec.error = Some(e);
        }
        rec
    }

    fn execute(&self, scene_path: &Path, rec: &mut SceneRecord) -> Result<(), String> {
        let text = std::fs::read_to_string(scene_path).map_err(|e| e.to_string())?;
        let g0 = parse_scene(&text).map_err(|e| e.to_string())?;
        let endpoints = match self.shared {
            Some(e) => e.clone(),
            None => Endpoints {
                evaluator: endpoint_for(&self.cfg.evaluator, Role::Evaluator, &rec.stem, "evaluator")?,
                editor: endpoint_for(&self.cfg.editor, Role::Editor, &rec.stem, "editor")?,
            },
        };
        let out = self.cfg.out_dir.join(&rec.stem);
        std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
        let loop_cfg = LoopConfig {
            seed: episode_seed(self.cfg.seed, &rec.stem),
            views_dir: Some(out.join("views")),
            ..self.cfg.loop_config.clone()
        };
        let rel = |name: &str| format!("{}/{name}", rec.stem);
        let (scene, log, report, constraints, rounds, err) = match run_episode(&g0, &rec.goal, &endpoints, &loop_cfg) {
            Ok(ep) => (ep.scene, Some(ep.log), Some(ep.report), Some(ep.constraints), Some(ep.feedback_rounds), None),
            Err(f) => (f.scene, f.log, f.report, f.constraints, None, Some(f.error.to_string())),
        };
        let w = |name: &str, text: &str| write(&out.join(name), text).map_err(|e| e.to_string());
        w("final_scene.json", &serialize_scene(&scene))?;
        rec.final_scene = Some(rel("final_scene.json"));
        let opts = RenderOptions { palette_seed: self.cfg.seed, ..RenderOptions::default() };
        w("final_topdown.svg", &render_topdown(&scene, &opts).map_err(|e| e.to_string())?)?;
        let grid = occupancy_grid(&scene, loop_cfg.geometry.grid_cell).map_err(|e| e.to_string())?;
        w("final_occupancy.pgm", &render_occupancy(&grid))?;
        rec.renders = vec![rel("final_topdown.svg"), rel("final_occupancy.pgm")];
        if let Some(log) = &log {
            w("episode.jsonl", &log.to_jsonl())?;
            rec.episode_log = Some(rel("episode.jsonl"));
            rec.steps = log.steps().count();
            if let Ok(svg) = render_trajectory(&g0, log, &opts) {
                w("trajectory.svg", &svg)?;
                rec.renders.push(rel("trajectory.svg"));
            }
        }
        if let Some(c) = &constraints {
            w("constraints.json", &serialize_constraints(c))?;
            rec.constraints = Some(rel("constraints.json"));
        }
        if let Some(r) = &report {
            w("report.json", &(serde_json::to_string_pretty(r).expect("report serializes") + "\n"))?;
            rec.report = Some(rel("report.json"));
        }
        rec.final_report = report;
        rec.feedback_rounds = rounds;
        rec.objects = export_metadata(&scene);
        match err {
            None => {
                rec.status = Status::Ok;
                Ok(())
            }
            Some(e) => Err(e),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !self.scenes_dir.is_dir() {
            return Err(PipelineError::Config(format!("scene directory {} does not exist", self.scenes_dir.display())));
        }
        if self.batch && !self.goal_template.contains(ROOM_TYPE_PLACEHOLDER) {
            return Err(PipelineError::Config(format!("goal template must contain {ROOM_TYPE_PLACEHOLDER} in batch mode")));
        }
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        self.loop_config.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Live endpoints are connected once and shared by all episodes; mocks are
/// loaded per scene.
fn shared_endpoints(cfg: &PipelineConfig) -> Result<Option<Endpoints>, PipelineError> {
    if cfg.evaluator.mock.is_some() || cfg.editor.mock.is_some() {
        return Ok(None);
    }
    let c = |e: &EndpointConfig, role| e.connect(role).map_err(|e| PipelineError::Config(e.to_string()));
    Ok(Some(Endpoints { evaluator: c(&cfg.evaluator, Role::Evaluator)?, editor: c(&cfg.editor, Role::Editor)? }))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<DatasetManifest, PipelineError> {
    cfg.validate()?;
    let scenes = list_scenes(&cfg.scenes_dir)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let shared = shared_endpoints(cfg)?;
    let job = Job { cfg, shared: shared.as_ref() };

    let next = AtomicUsize::new(0);
    let done: Mutex<BTreeMap<usize, SceneRecord>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.min(scenes.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(path) = scenes.get(i) else { break };
                let rec = job.run(path);
                done.lock().expect("record lock").insert(i, rec);
            });
        }
    });
    let records: Vec<SceneRecord> = done.into_inner().expect("record lock").into_values().collect();

    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION.into(),
        goal_template: cfg.goal_template.clone(),
        seed: cfg.seed,
        collision_checking: cfg.loop_config.collision_checking,
        records,
        generated_at: std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let path = cfg.out_dir.join(MANIFEST_FILE);
    let tmp = cfg.out_dir.join(format!(".{MANIFEST_FILE}.tmp"));
    write(&tmp, &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}
