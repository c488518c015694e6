//! Batch-generate the fixture dataset with scripted agents into a temp dir.

use scene_agents::agents::{EndpointConfig, LoopConfig};
use scene_agents::pipeline::{run_pipeline, PipelineConfig};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        scenes_dir: root.join("scenes"),
        goal_template: "A {room_type}, where doors are blocked with large objects.".into(),
        out_dir: out.path().to_path_buf(),
        batch: true,
        evaluator: EndpointConfig::mock(root.join("transcripts")),
        editor: EndpointConfig::mock(root.join("transcripts")),
        jobs: 4,
        seed: 1,
        loop_config: LoopConfig::default(),
    };
    let manifest = run_pipeline(&cfg).unwrap();
    for r in &manifest.records {
        println!("{:<12} {:?} steps={} renders={}", r.stem, r.status, r.steps, r.renders.len());
    }
    println!("dataset in {} (removed on exit)", out.path().display());
}
