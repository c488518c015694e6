//! Blinded A/B evaluation: pair manifests, agreement statistics, Likert
//! means and forced-choice model judging.

mod server;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use base64::Engine as _;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{extract_json, AgentEndpoint, ChatMessage, ChatRequest, Part, TransportError, JUDGE_PROMPT};
use crate::env::Hash64;

pub use server::{annotation_app, presentation_order, spawn_annotation_server, AnnotationServer, ResponseStore, ServerConfig};

const IMAGE_EXTENSIONS: [&str; 5] = ["svg", "png", "jpg", "jpeg", "webp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub pair_id: String,
    pub left_image: PathBuf,
    pub right_image: PathBuf,
    pub goal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairManifest {
    pub seed: u64,
    pub pairs: Vec<Pair>,
}

impl PairManifest {
    pub fn get(&self, pair_id: &str) -> Option<&Pair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTruth {
    /// Image file name shared by both systems.
    pub name: String,
    pub left: String,
    pub right: String,
}

impl PairTruth {
    pub fn system(&self, side: Side) -> &str {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Side-to-system mapping, kept out of anything served to annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedTruth {
    pub system_a: String,
    pub system_b: String,
    pub pairs: BTreeMap<String, PairTruth>,
}

impl SealedTruth {
    pub fn systems(&self) -> [&str; 2] {
        [&self.system_a, &self.system_b]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("image sets differ; only in A: {only_a:?}, only in B: {only_b:?}")]
    NameMismatch { only_a: Vec<String>, only_b: Vec<String> },
    #[error("agreement matrix is empty")]
    EmptyMatrix,
    #[error("all judgments fall in one category on both sides but disagree; kappa undefined")]
    DegenerateMarginals,
    #[error("response names unknown pair `{0}`")]
    UnknownPair(String),
    #[error("annotator `{annotator}` answered pair `{pair}` twice")]
    DuplicateResponse { annotator: String, pair: String },
    #[error("no response carries Likert ratings")]
    NoLikertData,
    #[error("judge output could not be parsed: {0}")]
    JudgeParseFailure(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn image_names(dir: &Path) -> Result<BTreeSet<String>, EvalError> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let p = entry.map_err(|e| io_err(dir, e))?.path();
        let ext = p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if p.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.insert(p.file_name().expect("file has a name").to_string_lossy().into_owned());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PairingConfig {
    pub system_a: String,
    pub system_b: String,
    /// Shown goal; `{room_type}` is replaced by the image stem with `_` as spaces.
    pub goal_template: String,
    pub seed: u64,
}

/// One pair per image name present in both directories, sides assigned by
/// a seeded shuffle so that the two systems appear on the left a number of
/// times differing by at most one.
pub fn make_pairs(dir_a: &Path, dir_b: &Path, cfg: &PairingConfig) -> Result<(PairManifest, SealedTruth), EvalError> {
    let (a, b) = (image_names(dir_a)?, image_names(dir_b)?);
    if a != b {
        return Err(EvalError::NameMismatch {
            only_a: a.difference(&b).cloned().collect(),
            only_b: b.difference(&a).cloned().collect(),
        });
    }
    let names: Vec<String> = a.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = names.len() / 2 + usize::from(names.len() % 2 == 1 && rng.gen_bool(0.5));
    let mut a_left: Vec<bool> = (0..names.len()).map(|i| i < half).collect();
    a_left.shuffle(&mut rng);

    let mut pairs = Vec::with_capacity(names.len());
    let mut truth = BTreeMap::new();
    for (name, a_left) in names.iter().zip(a_left) {
        let pair_id = format!("p{}", Hash64::of(format!("{}:{name}", cfg.seed).as_bytes()));
        let (pa, pb) = (dir_a.join(name), dir_b.join(name));
        let stem = Path::new(name).file_stem().map(|s| s.to_string_lossy().replace('_', " ")).unwrap_or_default();
        let (left, right, ls, rs) =
            if a_left { (pa, pb, &cfg.system_a, &cfg.system_b) } else { (pb, pa, &cfg.system_b, &cfg.system_a) };
        pairs.push(Pair {
            pair_id: pair_id.clone(),
            left_image: left,
            right_image: right,
            goal: cfg.goal_template.replace("{room_type}", &stem),
        });
        truth.insert(pair_id, PairTruth { name: name.clone(), left: ls.clone(), right: rs.clone() });
    }
    pairs.sort_by(|x, y| x.pair_id.cmp(&y.pair_id));
    Ok((
        PairManifest { seed: cfg.seed, pairs },
        SealedTruth { system_a: cfg.system_a.clone(), system_b: cfg.system_b.clone(), pairs: truth },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Likert {
    pub effectiveness: u8,
    pub arrangement: u8,
    pub scale: u8,
}

impl Likert {
    pub fn values(&self) -> [u8; 3] {
        [self.effectiveness, self.arrangement, self.scale]
    }

    pub fn is_valid(&self) -> bool {
        self.values().iter().all(|v| (1..=7).contains(v))
    }
}

pub const LIKERT_QUESTIONS: [&str; 3] = ["effectiveness", "arrangement", "scale"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub pair_id: String,
    pub annotator_id: String,
    pub choice: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likert: Option<Likert>,
    /// Side the Likert block rates; defaults to the chosen side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rated: Option<Side>,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl Response {
    pub fn validate(&self) -> Result<(), String> {
        if self.pair_id.is_empty() || self.annotator_id.is_empty() {
            return Err("pair_id and annotator_id must be non-empty".into());
        }
        match self.likert {
            Some(l) if !l.is_valid() => Err("likert values must be integers in 1..=7".into()),
            _ => Ok(()),
        }
    }
}

pub fn load_responses(path: &Path) -> Result<Vec<Response>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| io_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// 2×2 counts; index 0 is system A, 1 is system B. Rows: first annotator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub counts: [[u64; 2]; 2],
}

impl AgreementMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Cohen's kappa, computed from exact integer sums.
pub fn cohens_kappa(m: &AgreementMatrix) -> Result<f64, EvalError> {
    let c = m.counts;
    let t = m.total() as u128;
    if t == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let rows = [c[0][0] + c[0][1], c[1][0] + c[1][1]].map(u128::from);
    let cols = [c[0][0] + c[1][0], c[0][1] + c[1][1]].map(u128::from);
    let trace = u128::from(c[0][0] + c[1][1]);
    let chance = rows[0] * cols[0] + rows[1] * cols[1];
    let (tt, observed) = (t * t, t * trace);
    if chance == tt {
        return if observed == tt { Ok(1.0) } else { Err(EvalError::DegenerateMarginals) };
    }
    Ok((observed as f64 - chance as f64) / (tt as f64 - chance as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorAgreement {
    pub first: String,
    pub second: String,
    pub matrix: AgreementMatrix,
    /// None when kappa is undefined for this matrix.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSummary {
    /// Individual votes per system.
    pub selections: BTreeMap<String, u64>,
    /// Pairs where every annotator picked the same system, per system.
    pub unanimous: BTreeMap<String, u64>,
    /// Pairs where annotators disagreed.
    pub split: u64,
    pub agreement: Vec<AnnotatorAgreement>,
}

fn check_responses<'a>(
    responses: &'a [Response],
    truth: &'a SealedTruth,
) -> Result<Vec<(&'a Response, &'a PairTruth)>, EvalError> {
    let mut seen = BTreeSet::new();
    responses
        .iter()
        .map(|r| {
            let t = truth.pairs.get(&r.pair_id).ok_or_else(|| EvalError::UnknownPair(r.pair_id.clone()))?;
            if !seen.insert((&r.annotator_id, &r.pair_id)) {
                return Err(EvalError::DuplicateResponse { annotator: r.annotator_id.clone(), pair: r.pair_id.clone() });
            }
            Ok((r, t))
        })
        .collect()
}

pub fn aggregate_preferences(responses: &[Response], truth: &SealedTruth) -> Result<PreferenceSummary, EvalError> {
    let checked = check_responses(responses, truth)?;
    let systems = truth.systems();
    let index = |s: &str| usize::from(s != systems[0]);
    let mut selections: BTreeMap<String, u64> = systems.iter().map(|s| (s.to_string(), 0)).collect();
    let mut by_pair: BTreeMap<&str, BTreeMap<&str, &str>> = BTreeMap::new();
    for (r, t) in &checked {
        let sys = t.system(r.choice);
        *selections.get_mut(sys).expect("known system") += 1;
        by_pair.entry(&r.pair_id).or_default().insert(&r.annotator_id, sys);
    }
    let mut unanimous: BTreeMap<String, u64> = systems.iter().map(|s| (s.to_string(), 0)).collect();
    let mut split = 0;
    for votes in by_pair.values() {
        let distinct: BTreeSet<&str> = votes.values().copied().collect();
        match distinct.len() {
            1 => *unanimous.get_mut(*distinct.first().expect("one")).expect("known system") += 1,
            _ => split += 1,
        }
    }
    let annotators: BTreeSet<&str> = checked.iter().map(|(r, _)| r.annotator_id.as_str()).collect();
    let annotators: Vec<&str> = annotators.into_iter().collect();
    let mut agreement = Vec::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let mut m = AgreementMatrix::default();
            for votes in by_pair.values() {
                if let (Some(x), Some(y)) = (votes.get(a), votes.get(b)) {
                    m.counts[index(x)][index(y)] += 1;
                }
            }
            agreement.push(AnnotatorAgreement {
                first: a.to_string(),
                second: b.to_string(),
                matrix: m,
                kappa: cohens_kappa(&m).ok(),
            });
        }
    }
    Ok(PreferenceSummary { selections, unanimous, split, agreement })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mean {
    pub mean: f64,
    pub count: u64,
}

/// Mean opinion score per system and question.
pub fn aggregate_mos(responses: &[Response], truth: &SealedTruth) -> Result<BTreeMap<String, BTreeMap<String, Mean>>, EvalError> {
    let checked = check_responses(responses, truth)?;
    let mut sums: BTreeMap<String, [(u64, u64); 3]> = BTreeMap::new();
    for (r, t) in &checked {
        let Some(l) = r.likert else { continue };
        let sys = t.system(r.rated.unwrap_or(r.choice));
        let acc = sums.entry(sys.to_string()).or_default();
        for (slot, v) in acc.iter_mut().zip(l.values()) {
            slot.0 += u64::from(v);
            slot.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(EvalError::NoLikertData);
    }
    Ok(sums
        .into_iter()
        .map(|(sys, acc)| {
            let per_q = LIKERT_QUESTIONS
                .iter()
                .zip(acc)
                .map(|(q, (sum, n))| (q.to_string(), Mean { mean: sum as f64 / n as f64, count: n }))
                .collect();
            (sys, per_q)
        })
        .collect())
}

/// Outcome of a side-swapped judge query, in terms of the original sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "side")]
pub enum DceVerdict {
    Consistent(Side),
    Inconsistent,
}

fn media_type(path: &Path) -> &'static str {
    match path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase()).as_deref() {
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

fn image_part(label: &str, path: &Path, vision: bool) -> Result<Vec<Part>, EvalError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let head = Part::Text { text: format!("{label}:") };
    let body = if vision {
        Part::Image { media_type: media_type(path).into(), data_base64: base64::engine::general_purpose::STANDARD.encode(&bytes) }
    } else {
        // Text-only judges read the schematic's source.
        let text = String::from_utf8(bytes)
            .map_err(|_| EvalError::Invalid(format!("{} is binary; text-only judges need a vector image", path.display())))?;
        Part::Text { text }
    };
    Ok(vec![head, body])
}

fn parse_side(text: &str) -> Result<Side, String> {
    if let Ok(v) = extract_json(text) {
        return match v.get("choice").and_then(|c| c.as_str()) {
            Some("left") => Ok(Side::Left),
            Some("right") => Ok(Side::Right),
            _ => Err(format!("expected {{\"choice\": \"left\"|\"right\"}}, got {v}")),
        };
    }
    let word = text.trim().trim_matches(|c: char| !c.is_ascii_alphabetic()).to_ascii_lowercase();
    match word.as_str() {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        _ => Err(format!("expected left or right, got {:?}", text.trim())),
    }
}

fn ask_judge(judge: &AgentEndpoint, goal: &str, left: &Path, right: &Path) -> Result<Side, EvalError> {
    let mut parts = vec![Part::Text { text: format!("GOAL\n{goal}") }];
    parts.extend(image_part("LEFT", left, judge.vision)?);
    parts.extend(image_part("RIGHT", right, judge.vision)?);
    let mut messages = vec![ChatMessage::text("system", JUDGE_PROMPT), ChatMessage { role: "user".into(), parts }];
    let mut last = String::new();
    for _ in 0..2 {
        let req = ChatRequest {
            role: judge.role,
            messages: messages.clone(),
            temperature: judge.temperature,
            max_tokens: judge.max_tokens,
            seed: None,
            hint: None,
        };
        let reply = judge.client.complete(&req)?;
        match parse_side(&reply) {
            Ok(s) => return Ok(s),
            Err(e) => {
                messages.push(ChatMessage::text("assistant", reply));
                messages.push(ChatMessage::text(
                    "user",
                    format!("Could not parse your answer: {e}. Reply {{\"choice\": \"left\"}} or {{\"choice\": \"right\"}}."),
                ));
                last = e;
            }
        }
    }
    Err(EvalError::JudgeParseFailure(last))
}

/// Asks the judge twice with the sides swapped. Consistent verdicts name the
/// side of the original presentation.
pub fn judge_dce(pair: &Pair, judge: &AgentEndpoint) -> Result<DceVerdict, EvalError> {
    let first = ask_judge(judge, &pair.goal, &pair.left_image, &pair.right_image)?;
    let second = ask_judge(judge, &pair.goal, &pair.right_image, &pair.left_image)?;
    Ok(if first == second.flip() { DceVerdict::Consistent(first) } else { DceVerdict::Inconsistent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DceSummary {
    pub wins: BTreeMap<String, u64>,
    pub inconsistent: u64,
    pub total: u64,
    pub verdicts: BTreeMap<String, DceVerdict>,
}

pub fn run_dce(manifest: &PairManifest, truth: &SealedTruth, judge: &AgentEndpoint) -> Result<DceSummary, EvalError> {
    let mut wins: BTreeMap<String, u64> = truth.systems().iter().map(|s| (s.to_string(), 0)).collect();
    let mut verdicts = BTreeMap::new();
    let mut inconsistent = 0;
    for p in &manifest.pairs {
        let t = truth.pairs.get(&p.pair_id).ok_or_else(|| EvalError::UnknownPair(p.pair_id.clone()))?;
        let v = judge_dce(p, judge)?;
        match v {
            DceVerdict::Consistent(side) => *wins.get_mut(t.system(side)).expect("known system") += 1,
            DceVerdict::Inconsistent => inconsistent += 1,
        }
        verdicts.insert(p.pair_id.clone(), v);
    }
    Ok(DceSummary { wins, inconsistent, total: manifest.pairs.len() as u64, verdicts })
}
