//! On-disk schemas and validated loaders. Every record carries a `schema`
//! tag; loaders report the offending file and line on validation failures.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use signspot::core::{Alphabet, Box2D, ScoredSegment, TimeSegment};
use signspot::ctc::Posteriorgram;
use signspot::lm::{NGramModel, Outcome};

use crate::error::{CliError, CliResult};

pub fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}", path.display()), e))
}

fn check_schema(path: &Path, line: usize, got: &str, want: &str) -> CliResult<()> {
    if got != want {
        return Err(CliError::Data(format!(
            "{}:{line}: schema {got:?}, expected {want:?}",
            path.display()
        )));
    }
    Ok(())
}

/// Parses one JSON-Lines file, handing each non-empty line to `parse` with
/// its 1-based line number.
fn each_line<T, F>(path: &Path, mut parse: F) -> CliResult<Vec<T>>
where
    F: FnMut(usize, &str) -> CliResult<T>,
{
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(i + 1, line)?);
    }
    Ok(out)
}

fn parse_json<'a, T: Deserialize<'a>>(path: &Path, line: usize, text: &'a str) -> CliResult<T> {
    serde_json::from_str(text)
        .map_err(|e| CliError::Data(format!("{}:{line}: {e}", path.display())))
}

// ---- pg/1: posteriorgram ----

#[derive(Debug, Deserialize)]
struct PosteriorgramFile {
    schema: String,
    alphabet: Vec<String>,
    blank_index: usize,
    noletter_index: Option<usize>,
    frames: Vec<Vec<f64>>,
}

pub fn load_posteriorgram(path: &Path) -> CliResult<Posteriorgram> {
    let text = read_to_string(path)?;
    let file: PosteriorgramFile = parse_json(path, 1, &text)?;
    check_schema(path, 1, &file.schema, "pg/1")?;
    let n = file.alphabet.len();
    if file.blank_index != n {
        return Err(CliError::Data(format!(
            "{}: blank_index must be {n} (appended after the letters), got {}",
            path.display(),
            file.blank_index
        )));
    }
    if let Some(idx) = file.noletter_index {
        if idx != n + 1 {
            return Err(CliError::Data(format!(
                "{}: noletter_index must be {} (after blank), got {idx}",
                path.display(),
                n + 1
            )));
        }
    }
    let alphabet = Alphabet::new(file.alphabet, file.noletter_index.is_some())
        .map_err(|e| CliError::data(path.display(), e))?;
    Posteriorgram::new(alphabet, file.frames).map_err(|e| CliError::data(path.display(), e))
}

// ---- seg/1: segments (ground truth, predictions, spotted signs) ----

#[derive(Debug, Clone, Deserialize)]
pub struct SegRecord {
    pub schema: String,
    pub video_id: String,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub word: Option<String>,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub transcript: Option<String>,
}

pub struct LoadedSegment {
    pub video_id: String,
    pub segment: TimeSegment,
    pub word: Option<String>,
    pub score: Option<f64>,
    pub transcript: Option<String>,
}

pub fn load_segments(path: &Path) -> CliResult<Vec<LoadedSegment>> {
    each_line(path, |line, text| {
        let rec: SegRecord = parse_json(path, line, text)?;
        check_schema(path, line, &rec.schema, "seg/1")?;
        let segment = TimeSegment::new(rec.start, rec.end)
            .map_err(|e| CliError::Data(format!("{}:{line}: {e}", path.display())))?;
        if let Some(s) = rec.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(CliError::Data(format!(
                    "{}:{line}: score {s} outside [0, 1]",
                    path.display()
                )));
            }
        }
        Ok(LoadedSegment {
            video_id: rec.video_id,
            segment,
            word: rec.word,
            score: rec.score,
            transcript: rec.transcript,
        })
    })
}

/// Scored segment, or a data error for records that must carry a score.
pub fn require_scored(path: &Path, seg: &LoadedSegment) -> CliResult<ScoredSegment> {
    let score = seg.score.ok_or_else(|| {
        CliError::Data(format!(
            "{}: segment [{}, {}) of video {:?} is missing a score",
            path.display(),
            seg.segment.start(),
            seg.segment.end(),
            seg.video_id
        ))
    })?;
    ScoredSegment::new(seg.segment, score).map_err(|e| CliError::data(path.display(), e))
}

// ---- fb/1: per-frame boxes ----

#[derive(Debug, Deserialize)]
struct BoxRecord {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct FrameBoxesRecord {
    schema: String,
    video_id: String,
    frame: usize,
    boxes: Vec<BoxRecord>,
}

/// Per-video frame boxes; frames must cover 0..T without gaps or duplicates.
pub fn load_frame_boxes(path: &Path) -> CliResult<BTreeMap<String, Vec<Vec<Box2D>>>> {
    let records = each_line(path, |line, text| {
        let rec: FrameBoxesRecord = parse_json(path, line, text)?;
        check_schema(path, line, &rec.schema, "fb/1")?;
        let boxes = rec
            .boxes
            .iter()
            .map(|b| Box2D::new(b.x1, b.y1, b.x2, b.y2, b.score))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{}:{line}: {e}", path.display())))?;
        Ok((rec.video_id, rec.frame, boxes))
    })?;

    let mut by_video: BTreeMap<String, BTreeMap<usize, Vec<Box2D>>> = BTreeMap::new();
    for (video_id, frame, boxes) in records {
        if by_video
            .entry(video_id.clone())
            .or_default()
            .insert(frame, boxes)
            .is_some()
        {
            return Err(CliError::Data(format!(
                "{}: duplicate frame {frame} for video {video_id:?}",
                path.display()
            )));
        }
    }
    let mut out = BTreeMap::new();
    for (video_id, frames) in by_video {
        let t = frames.len();
        if frames.keys().next() != Some(&0) || *frames.keys().last().unwrap() != t - 1 {
            return Err(CliError::Data(format!(
                "{}: video {video_id:?} frames must be contiguous from 0",
                path.display()
            )));
        }
        out.insert(video_id, frames.into_values().collect());
    }
    Ok(out)
}

// ---- emb/1: embeddings ----

#[derive(Debug, Deserialize)]
struct EmbRecord {
    schema: String,
    id: String,
    kind: String,
    vector: Vec<f64>,
}

pub struct Embeddings {
    /// Text embeddings keyed by word.
    pub text: BTreeMap<String, Vec<f64>>,
    /// Video-segment embeddings keyed by "(video_id, start, end)".
    pub video_segments: BTreeMap<(String, usize, usize), Vec<f64>>,
}

/// Video-segment embedding ids follow `<video_id>:<start>-<end>`.
pub fn load_embeddings(path: &Path) -> CliResult<Embeddings> {
    let mut text = BTreeMap::new();
    let mut video_segments = BTreeMap::new();
    each_line(path, |line, json| {
        let rec: EmbRecord = parse_json(path, line, json)?;
        check_schema(path, line, &rec.schema, "emb/1")?;
        let fail = |msg: String| CliError::Data(format!("{}:{line}: {msg}", path.display()));
        match rec.kind.as_str() {
            "text" => {
                if text.insert(rec.id.clone(), rec.vector).is_some() {
                    return Err(fail(format!("duplicate text embedding {:?}", rec.id)));
                }
            }
            "video_segment" => {
                let key = parse_segment_id(&rec.id)
                    .ok_or_else(|| fail(format!(
                        "id {:?} is not <video_id>:<start>-<end>",
                        rec.id
                    )))?;
                if video_segments.insert(key, rec.vector).is_some() {
                    return Err(fail(format!("duplicate segment embedding {:?}", rec.id)));
                }
            }
            other => return Err(fail(format!("unknown embedding kind {other:?}"))),
        }
        Ok(())
    })?;
    Ok(Embeddings {
        text,
        video_segments,
    })
}

fn parse_segment_id(id: &str) -> Option<(String, usize, usize)> {
    let (video, range) = id.rsplit_once(':')?;
    let (start, end) = range.split_once('-')?;
    Some((video.to_string(), start.parse().ok()?, end.parse().ok()?))
}

pub fn segment_id(video_id: &str, segment: &TimeSegment) -> String {
    format!("{video_id}:{}-{}", segment.start(), segment.end())
}

// ---- wp/1: window probabilities ----

#[derive(Debug, Deserialize)]
struct WpRecord {
    schema: String,
    video_id: String,
    start: usize,
    end: usize,
    probs: BTreeMap<String, f64>,
}

pub type VideoWindows = BTreeMap<String, Vec<(TimeSegment, BTreeMap<String, f64>)>>;

pub fn load_window_probs(path: &Path) -> CliResult<VideoWindows> {
    let mut out: VideoWindows = BTreeMap::new();
    each_line(path, |line, json| {
        let rec: WpRecord = parse_json(path, line, json)?;
        check_schema(path, line, &rec.schema, "wp/1")?;
        let segment = TimeSegment::new(rec.start, rec.end)
            .map_err(|e| CliError::Data(format!("{}:{line}: {e}", path.display())))?;
        let sum: f64 = rec.probs.values().sum();
        if rec.probs.values().any(|p| !(0.0..=1.0).contains(p)) || sum > 1.0 + 1e-6 {
            return Err(CliError::Data(format!(
                "{}:{line}: window probabilities invalid (sum {sum})",
                path.display()
            )));
        }
        out.entry(rec.video_id).or_default().push((segment, rec.probs));
        Ok(())
    })?;
    Ok(out)
}

// ---- sent/1: per-video sentences ----

#[derive(Debug, Deserialize)]
struct SentRecord {
    schema: String,
    video_id: String,
    text: String,
}

pub fn load_sentences(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    each_line(path, |line, json| {
        let rec: SentRecord = parse_json(path, line, json)?;
        check_schema(path, line, &rec.schema, "sent/1")?;
        if out.insert(rec.video_id.clone(), rec.text).is_some() {
            return Err(CliError::Data(format!(
                "{}:{line}: duplicate sentence for video {:?}",
                path.display(),
                rec.video_id
            )));
        }
        Ok(())
    })?;
    Ok(out)
}

// ---- rel/1: relevance pairs ----

#[derive(Debug, Deserialize)]
struct RelRecord {
    schema: String,
    video_id: String,
    word: String,
}

pub fn load_relevance(path: &Path) -> CliResult<Vec<(String, String)>> {
    each_line(path, |line, json| {
        let rec: RelRecord = parse_json(path, line, json)?;
        check_schema(path, line, &rec.schema, "rel/1")?;
        Ok((rec.video_id, rec.word))
    })
}

// ---- vid/1: per-video frame counts ----

#[derive(Debug, Deserialize)]
struct VideoMetaRecord {
    schema: String,
    video_id: String,
    frames: usize,
}

pub fn load_video_meta(path: &Path) -> CliResult<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    each_line(path, |line, json| {
        let rec: VideoMetaRecord = parse_json(path, line, json)?;
        check_schema(path, line, &rec.schema, "vid/1")?;
        out.insert(rec.video_id, rec.frames);
        Ok(())
    })?;
    Ok(out)
}

// ---- lm/1: language model ----

#[derive(Debug, Deserialize)]
struct LmFile {
    schema: String,
    order: usize,
    k: f64,
    vocab: Vec<String>,
    contexts: BTreeMap<String, BTreeMap<String, u64>>,
}

pub const EOS_KEY: &str = "</s>";

pub fn load_lm(path: &Path) -> CliResult<NGramModel> {
    let text = read_to_string(path)?;
    let file: LmFile = parse_json(path, 1, &text)?;
    check_schema(path, 1, &file.schema, "lm/1")?;
    let counts = file
        .contexts
        .into_iter()
        .map(|(ctx, outcomes)| {
            let ctx_symbols: Vec<String> = ctx.chars().map(|c| c.to_string()).collect();
            let outcomes = outcomes
                .into_iter()
                .map(|(key, n)| {
                    let outcome = if key == EOS_KEY {
                        Outcome::Eos
                    } else {
                        Outcome::Symbol(key)
                    };
                    (outcome, n)
                })
                .collect();
            (ctx_symbols, outcomes)
        })
        .collect();
    NGramModel::from_counts(file.order, file.k, file.vocab, counts)
        .map_err(|e| CliError::data(path.display(), e))
}

/// Serializes a model to the lm/1 JSON value. Context keys join the context
/// symbols, so the format supports single-character symbols only.
pub fn lm_to_value(model: &NGramModel) -> CliResult<Value> {
    let mut contexts = serde_json::Map::new();
    for (ctx, outcomes) in model.context_counts() {
        if ctx.iter().any(|s| s.chars().count() != 1) {
            return Err(CliError::Data(
                "lm/1 files support single-character symbols only".into(),
            ));
        }
        let key = ctx.concat();
        let mut map = serde_json::Map::new();
        for (outcome, n) in outcomes {
            let okey = match outcome {
                Outcome::Eos => EOS_KEY.to_string(),
                Outcome::Symbol(s) => s.clone(),
            };
            map.insert(okey, Value::from(*n));
        }
        contexts.insert(key, Value::Object(map));
    }
    Ok(serde_json::json!({
        "schema": "lm/1",
        "order": model.order(),
        "k": model.smoothing_k(),
        "vocab": model.vocab(),
        "contexts": Value::Object(contexts),
    }))
}

/// Writes a report or record file, or stdout when the path is "-".
pub fn write_output(path: &str, content: &str) -> CliResult<()> {
    if path == "-" {
        print!("{content}");
        Ok(())
    } else {
        std::fs::write(path, content)
            .map_err(|e| CliError::data(format!("cannot write {path}"), e))
    }
}
