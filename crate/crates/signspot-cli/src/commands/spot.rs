use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;

use signspot::core::{symbols_from_str, symbols_to_string, LabeledSegment, ScoredSegment};
use signspot::spot::{normalize_word, spot_fingerspelling, spot_lexical, WindowProbs};

use crate::config::resolve;
use crate::emit::to_canonical_line;
use crate::error::{CliError, CliResult};
use crate::formats::{load_segments, load_sentences, load_window_probs, require_scored, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Sliding-window word probabilities (wp/1).
    #[arg(long)]
    windows: PathBuf,
    /// Per-video sentences (sent/1).
    #[arg(long)]
    sentences: PathBuf,
    /// Fingerspelling proposals (seg/1) with scores and hypothesis transcripts.
    #[arg(long)]
    proposals: Option<PathBuf>,
    /// Minimum lexical word probability.
    #[arg(long)]
    delta_l: Option<f64>,
    /// Maximum normalized edit distance for fingerspelling assignment.
    #[arg(long)]
    delta_f: Option<f64>,
    /// Proposals at or below this confidence are dropped.
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long, default_value = "-")]
    output: String,
}

struct VideoInput {
    windows: Vec<(signspot::core::TimeSegment, BTreeMap<String, f64>)>,
    proposals: Vec<(ScoredSegment, Vec<String>)>,
    sentence: String,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let delta_l = resolve(args.delta_l, ctx.config.f64("delta-l")?, 0.6);
    let delta_f = resolve(args.delta_f, ctx.config.f64("delta-f")?, 0.2);
    let min_conf = resolve(args.min_confidence, ctx.config.f64("min-confidence")?, 0.5);

    let window_probs = load_window_probs(&args.windows)?;
    let sentences = load_sentences(&args.sentences)?;
    let mut proposals: BTreeMap<String, Vec<(ScoredSegment, Vec<String>)>> = BTreeMap::new();
    if let Some(path) = &args.proposals {
        for seg in load_segments(path)? {
            let scored = require_scored(path, &seg)?;
            let hyp = seg
                .transcript
                .as_deref()
                .map(symbols_from_str)
                .unwrap_or_default();
            proposals
                .entry(seg.video_id.clone())
                .or_default()
                .push((scored, hyp));
        }
    }

    let mut video_ids: Vec<String> = window_probs.keys().cloned().collect();
    video_ids.extend(proposals.keys().cloned());
    video_ids.sort();
    video_ids.dedup();

    let mut inputs: Vec<(String, VideoInput)> = Vec::new();
    for id in video_ids {
        let sentence = sentences.get(&id).cloned().ok_or_else(|| {
            CliError::Data(format!(
                "{}: no sentence for video {id:?}",
                args.sentences.display()
            ))
        })?;
        inputs.push((
            id.clone(),
            VideoInput {
                windows: window_probs.get(&id).cloned().unwrap_or_default(),
                proposals: proposals.remove(&id).unwrap_or_default(),
                sentence,
            },
        ));
    }

    let per_video: Vec<Vec<String>> = inputs
        .par_iter()
        .map(|(video_id, input)| -> CliResult<Vec<String>> {
            let spotted = spot_video(input, delta_l, delta_f, min_conf)
                .map_err(|e| CliError::Data(format!("video {video_id:?}: {e}")))?;
            Ok(spotted
                .iter()
                .map(|s| {
                    to_canonical_line(&json!({
                        "schema": "seg/1",
                        "video_id": video_id,
                        "start": s.segment.start(),
                        "end": s.segment.end(),
                        "word": symbols_to_string(&s.transcript),
                        "score": null,
                        "transcript": null,
                    }))
                })
                .collect())
        })
        .collect::<CliResult<_>>()?;

    let mut body = per_video.concat().join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_output(&args.output, &body)
}

fn spot_video(
    input: &VideoInput,
    delta_l: f64,
    delta_f: f64,
    min_conf: f64,
) -> Result<Vec<LabeledSegment>, signspot::Error> {
    // Vocabulary over normalized window-probability keys.
    let mut vocab: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = input
        .windows
        .iter()
        .flat_map(|(_, probs)| probs.keys())
        .map(|w| normalize_word(w))
        .filter(|w| !w.is_empty())
        .collect();
    names.sort();
    names.dedup();
    for (i, name) in names.iter().enumerate() {
        vocab.insert(name.clone(), i);
    }
    let windows = input
        .windows
        .iter()
        .map(|(seg, probs)| {
            let mut row = vec![0.0f64; names.len()];
            for (word, &p) in probs {
                if let Some(&i) = vocab.get(&normalize_word(word)) {
                    row[i] = row[i].max(p);
                }
            }
            (*seg, row)
        })
        .collect();
    let wp = WindowProbs::new(windows)?;

    let sentence_words: Vec<String> = input
        .sentence
        .split_whitespace()
        .map(str::to_string)
        .collect();
    let mut spotted = spot_lexical(&wp, &sentence_words, &vocab, delta_l)?;

    let segments: Vec<ScoredSegment> = input.proposals.iter().map(|(s, _)| *s).collect();
    let hyps: Vec<Vec<String>> = input.proposals.iter().map(|(_, h)| h.clone()).collect();
    spotted.extend(spot_fingerspelling(
        &segments,
        &hyps,
        &sentence_words,
        delta_f,
        min_conf,
    )?);
    spotted.sort_by_key(|s| {
        (
            s.segment.start(),
            s.segment.end(),
            symbols_to_string(&s.transcript),
        )
    });
    Ok(spotted)
}
