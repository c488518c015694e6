//! Unblind the bundled annotation fixture and print preferences, kappa and MOS.

use scene_agents::eval::{aggregate_mos, aggregate_preferences, cohens_kappa, load_responses, AgreementMatrix, SealedTruth};

fn main() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/eval");
    let truth: SealedTruth = serde_json::from_str(&std::fs::read_to_string(root.join("truth.json")).unwrap()).unwrap();
    let responses = load_responses(&root.join("responses.jsonl")).unwrap();
    let prefs = aggregate_preferences(&responses, &truth).unwrap();
    println!("unanimous: {:?}, split: {}", prefs.unanimous, prefs.split);
    for a in &prefs.agreement {
        println!("{} vs {}: {:?} kappa {:?}", a.first, a.second, a.matrix.counts, a.kappa);
    }
    for (system, qs) in aggregate_mos(&responses, &truth).unwrap() {
        for (q, m) in qs {
            println!("{system:<10} {q:<14} {:.2} (n={})", m.mean, m.count);
        }
    }
    println!("kappa of [[20, 5], [5, 23]]: {:.4}", cohens_kappa(&AgreementMatrix::new([[20, 5], [5, 23]])).unwrap());
}
