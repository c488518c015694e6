use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scene_agents::agents::{EndpointConfig, EndpointsConfig, LoopConfig, Role};
use scene_agents::env::{replay, EpisodeLog};
use scene_agents::eval::{self, PairManifest, PairingConfig, SealedTruth, ServerConfig};
use scene_agents::geometry::{occupancy_grid, GeometryParams};
use scene_agents::pipeline::{run_pipeline, PipelineConfig, Status};
use scene_agents::render::{render_occupancy, render_topdown, render_trajectory, RenderOptions};
use scene_agents::scene::{convert_holodeck, parse_scene, serialize_scene, SceneError};

type CliResult = Result<(), String>;

#[derive(Parser)]
#[command(name = "scene-agents", version, about = "Scene editing agents, geometry checks and blinded evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the edit loop over every scene in a directory.
    Generate(GenerateArgs),
    /// Parse and validate scene files.
    Validate { scenes: Vec<PathBuf> },
    /// Render a scene, optionally with an episode trajectory.
    Render(RenderArgs),
    /// Convert a Holodeck-style layout to the native schema.
    Convert {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blinded pairwise evaluation tools.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    scenes: PathBuf,
    /// Goal template; `{room_type}` is filled from each scene name.
    #[arg(long)]
    goal: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "on")]
    collision: Toggle,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allow a goal without the `{room_type}` placeholder.
    #[arg(long)]
    single_goal: bool,
    #[arg(long)]
    mock_evaluator: Option<PathBuf>,
    #[arg(long)]
    mock_editor: Option<PathBuf>,
    /// JSON file with `evaluator` and `editor` endpoint descriptors.
    #[arg(long)]
    endpoint_config: Option<PathBuf>,
    /// JSON loop configuration.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Episode log whose trajectory is drawn over the scene.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    scale: f64,
}

#[derive(Subcommand)]
enum EvaluateCommand {
    /// Build blinded pairs from two image directories.
    Pairs {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "a")]
        name_a: String,
        #[arg(long, default_value = "b")]
        name_b: String,
        #[arg(long, default_value = "A {room_type}, where doors are blocked with large objects.")]
        goal: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes pairs.json and truth.json here.
        #[arg(long)]
        out: PathBuf,
    },
    /// Preference counts, agreement and mean opinion scores.
    Aggregate {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Side-swapped forced choice with a model judge.
    Judge {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        endpoint_config: Option<PathBuf>,
        #[arg(long)]
        mock_judge: Option<PathBuf>,
    },
    /// Serve the annotation API.
    Serve {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn endpoint(mock: Option<PathBuf>, file: Option<&EndpointConfig>, role: &str) -> Result<EndpointConfig, String> {
    match (mock, file) {
        (Some(p), _) => Ok(EndpointConfig::mock(p)),
        (None, Some(c)) => Ok(c.clone()),
        (None, None) => Err(format!("no {role} endpoint: pass --mock-{role} or --endpoint-config")),
    }
}

fn generate(a: GenerateArgs) -> CliResult {
    let file = match &a.endpoint_config {
        Some(p) => EndpointsConfig::load(p).map_err(|e| e.to_string())?,
        None => EndpointsConfig::default(),
    };
    let mut loop_config: LoopConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => LoopConfig::default(),
    };
    loop_config.collision_checking = matches!(a.collision, Toggle::On);
    let cfg = PipelineConfig {
        scenes_dir: a.scenes,
        goal_template: a.goal,
        out_dir: a.out.clone(),
        batch: !a.single_goal,
        evaluator: endpoint(a.mock_evaluator, file.evaluator.as_ref(), "evaluator")?,
        editor: endpoint(a.mock_editor, file.editor.as_ref(), "editor")?,
        jobs: a.jobs,
        seed: a.seed,
        loop_config,
    };
    let manifest = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    for r in &manifest.records {
        match r.status {
            Status::Ok => println!("ok      {} ({} steps, {} feedback rounds)", r.stem, r.steps, r.feedback_rounds.unwrap_or(0)),
            Status::Failed => println!("failed  {}: {}", r.stem, r.error.as_deref().unwrap_or("")),
        }
    }
    println!("manifest: {}", a.out.join(scene_agents::pipeline::MANIFEST_FILE).display());
    Ok(())
}

fn validate(scenes: Vec<PathBuf>) -> CliResult {
    let mut bad = 0;
    for p in &scenes {
        match parse_scene(&read(p)?) {
            Ok(g) => println!("{}: ok ({} objects, {} doors)", p.display(), g.objects.len(), g.room.doors.len()),
            Err(SceneError::InvariantViolation(report)) => {
                bad += 1;
                println!("{}: invalid", p.display());
                for i in &report.issues {
                    println!("  {} at {}{}", i.code, i.path, i.subject.as_ref().map(|s| format!(" ({s})")).unwrap_or_default());
                }
            }
            Err(e) => {
                bad += 1;
                println!("{}: {e}", p.display());
            }
        }
    }
    if bad == 0 {
        Ok(())
    } else {
        Err(format!("{bad} of {} scenes invalid", scenes.len()))
    }
}

fn render(a: RenderArgs) -> CliResult {
    let g = parse_scene(&read(&a.scene)?).map_err(|e| e.to_string())?;
    let opts = RenderOptions { scale: a.scale, ..RenderOptions::default() };
    let cell = GeometryParams::default().grid_cell;
    write(&a.out.join("topdown.svg"), &render_topdown(&g, &opts).map_err(|e| e.to_string())?)?;
    let grid = occupancy_grid(&g, cell).map_err(|e| e.to_string())?;
    write(&a.out.join("occupancy.pgm"), &render_occupancy(&grid))?;
    if let Some(log_path) = a.log {
        let log = EpisodeLog::from_jsonl(&read(&log_path)?).map_err(|e| e.to_string())?;
        write(&a.out.join("trajectory.svg"), &render_trajectory(&g, &log, &opts).map_err(|e| e.to_string())?)?;
        let last = replay(&g, &log, &log.header().env).map_err(|e| e.to_string())?;
        write(&a.out.join("final_topdown.svg"), &render_topdown(&last, &opts).map_err(|e| e.to_string())?)?;
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn evaluate(cmd: EvaluateCommand) -> CliResult {
    match cmd {
        EvaluateCommand::Pairs { a, b, name_a, name_b, goal, seed, out } => {
            let cfg = PairingConfig { system_a: name_a, system_b: name_b, goal_template: goal, seed };
            let (manifest, truth) = eval::make_pairs(&a, &b, &cfg).map_err(|e| e.to_string())?;
            write(&out.join("pairs.json"), &serde_json::to_string_pretty(&manifest).expect("serializable"))?;
            write(&out.join("truth.json"), &serde_json::to_string_pretty(&truth).expect("serializable"))?;
            println!("{} pairs written to {}", manifest.pairs.len(), out.display());
            Ok(())
        }
        EvaluateCommand::Aggregate { responses, truth } => {
            let truth: SealedTruth = load_json(&truth)?;
            let responses = eval::load_responses(&responses).map_err(|e| e.to_string())?;
            let prefs = eval::aggregate_preferences(&responses, &truth).map_err(|e| e.to_string())?;
            let mos = match eval::aggregate_mos(&responses, &truth) {
                Ok(m) => serde_json::to_value(m).expect("serializable"),
                Err(eval::EvalError::NoLikertData) => serde_json::Value::Null,
                Err(e) => return Err(e.to_string()),
            };
            print_json(&serde_json::json!({ "preferences": prefs, "mos": mos }));
            Ok(())
        }
        EvaluateCommand::Judge { pairs, truth, endpoint_config, mock_judge } => {
            let manifest: PairManifest = load_json(&pairs)?;
            let truth: SealedTruth = load_json(&truth)?;
            let cfg = match (mock_judge, endpoint_config) {
                (Some(p), _) => EndpointConfig::mock(p),
                (None, Some(f)) => {
                    EndpointsConfig::load(&f).map_err(|e| e.to_string())?.judge.ok_or("endpoint config has no `judge` entry")?
                }
                (None, None) => return Err("pass --mock-judge or --endpoint-config".into()),
            };
            let judge = cfg.connect(Role::Judge).map_err(|e| e.to_string())?;
            print_json(&eval::run_dce(&manifest, &truth, &judge).map_err(|e| e.to_string())?);
            Ok(())
        }
        EvaluateCommand::Serve { pairs, store, addr, ui } => {
            let manifest: PairManifest = load_json(&pairs)?;
            let server = eval::spawn_annotation_server(ServerConfig { manifest, store_path: store, ui_dir: ui }, &addr)
                .map_err(|e| e.to_string())?;
            println!("annotation server listening on {}", server.url());
            server.wait();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Validate { scenes } => validate(scenes),
        Command::Render(a) => render(a),
        Command::Convert { input, out } => convert_holodeck(&read(&input).unwrap_or_default())
            .map_err(|e| e.to_string())
            .and_then(|g| write(&out, &serialize_scene(&g))),
        Command::Evaluate(cmd) => evaluate(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
