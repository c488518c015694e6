//! Step the edit environment by hand, write the log as JSONL, replay it and
//! show that a tampered line is caught.

use scene_agents::env::{replay, scene_hash, Action, EditEnv, EnvConfig, EpisodeLog};
use scene_agents::scene::{parse_scene, Point3};

fn main() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scenes/study.json")).unwrap();
    let g0 = parse_scene(&text).unwrap();
    let mut env = EditEnv::new(g0.clone(), EnvConfig::default(), 7, serde_json::Value::Null).unwrap();
    let id = g0.objects.iter().find(|o| o.movable).expect("a movable object").id.clone();
    let p = g0.object(&id).unwrap().position;
    for (i, a) in [
        Action::move_to(&id, Point3::new(p.x + 0.1, p.y, p.z)),
        Action::rotate(&id, 90.0),
        Action::move_to(&id, Point3::new(-9.0, p.y, -9.0)),
        Action::delete("no_such_object"),
    ]
    .into_iter()
    .enumerate()
    {
        println!("{:<40} {}", format!("{:?}", a.op), env.step(a, 0, i));
    }
    let (last, log) = env.into_parts();
    let jsonl = log.to_jsonl();
    println!("{} log lines, final hash {}", jsonl.lines().count(), scene_hash(&last));

    let back = EpisodeLog::from_jsonl(&jsonl).unwrap();
    let replayed = replay(&g0, &back, &back.header().env).unwrap();
    println!("replay matches: {}", replayed == last);

    let tampered = jsonl.replacen("\"yaw\":90.0", "\"yaw\":91.0", 1);
    let bad = EpisodeLog::from_jsonl(&tampered).unwrap();
    println!("tampered log: {}", replay(&g0, &bad, &bad.header().env).unwrap_err());
}
