use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};

use signspot::core::ScoredSegment;
use signspot::matching::{retrieval_eval, score_clip, EmbeddingVector, QueryMetrics};

use crate::config::resolve;
use crate::emit::to_canonical_pretty;
use crate::error::{CliError, CliResult};
use crate::formats::{load_embeddings, load_relevance, load_segments, require_scored, segment_id, write_output};
use crate::Ctx;

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    /// Fingerspelled word search: rank words for each video.
    Fws,
    /// Fingerspelling-based video search: rank videos for each word.
    Fvs,
}

#[derive(clap::Args)]
pub struct Args {
    /// Text and video-segment embeddings (emb/1). Segment ids follow
    /// `<video_id>:<start>-<end>`.
    #[arg(long)]
    embeddings: PathBuf,
    /// Scored proposals (seg/1), one embedding per proposal.
    #[arg(long)]
    proposals: PathBuf,
    /// Relevant (video, word) pairs (rel/1).
    #[arg(long)]
    relevance: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    /// Detection-score exponent in clip scoring.
    #[arg(long)]
    beta: Option<f64>,
    /// Proposals kept per video (highest score first).
    #[arg(long)]
    max_proposals: Option<usize>,
    /// Cutoff for P@N / R@N.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "-")]
    output: String,
    /// Optional path for the video x word score matrix.
    #[arg(long)]
    matrix_out: Option<String>,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let beta = resolve(args.beta, ctx.config.f64("beta")?, 1.0);
    let n = resolve(args.n, ctx.config.usize("n")?, 10);
    let max_proposals = resolve(args.max_proposals, ctx.config.usize("max-proposals")?, 50);
    if n == 0 || max_proposals == 0 {
        return Err(CliError::Usage("--n and --max-proposals must be >= 1".into()));
    }

    let embeddings = load_embeddings(&args.embeddings)?;
    let words: Vec<String> = embeddings.text.keys().cloned().collect();
    if words.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no text embeddings",
            args.embeddings.display()
        )));
    }
    let word_vectors: Vec<EmbeddingVector> = words
        .iter()
        .map(|w| EmbeddingVector::new(embeddings.text[w].clone()).map_err(CliError::from))
        .collect::<CliResult<_>>()?;

    // Proposals per video, each with its embedding.
    let mut by_video: BTreeMap<String, Vec<(ScoredSegment, EmbeddingVector)>> = BTreeMap::new();
    for seg in load_segments(&args.proposals)? {
        let scored = require_scored(&args.proposals, &seg)?;
        let key = (seg.video_id.clone(), seg.segment.start(), seg.segment.end());
        let vector = embeddings.video_segments.get(&key).ok_or_else(|| {
            CliError::Data(format!(
                "{}: no embedding for proposal {}",
                args.embeddings.display(),
                segment_id(&seg.video_id, &seg.segment)
            ))
        })?;
        by_video
            .entry(seg.video_id.clone())
            .or_default()
            .push((scored, EmbeddingVector::new(vector.clone())?));
    }
    if by_video.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no proposals",
            args.proposals.display()
        )));
    }
    for proposals in by_video.values_mut() {
        proposals.sort_by(|(a, _), (b, _)| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are not NaN")
                .then_with(|| (a.segment.start(), a.segment.end()).cmp(&(b.segment.start(), b.segment.end())))
        });
        proposals.truncate(max_proposals);
    }

    // All inputs load and validate before anything is written.
    let pairs = load_relevance(&args.relevance)?;

    let videos: Vec<String> = by_video.keys().cloned().collect();
    let scores: Vec<Vec<f64>> = videos
        .par_iter()
        .map(|video| -> CliResult<Vec<f64>> {
            let proposals = &by_video[video];
            word_vectors
                .iter()
                .map(|w| {
                    score_clip(w, proposals, beta)
                        .map(|(s, _)| s)
                        .map_err(CliError::from)
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;

    if let Some(path) = &args.matrix_out {
        let matrix = json!({
            "schema": "scores/1",
            "videos": videos,
            "words": words,
            "scores": scores,
        });
        write_output(path, &to_canonical_pretty(&matrix))?;
    }

    let (queries, items, matrix, relevant) = match args.task {
        Task::Fws => {
            let mut rel: HashMap<String, HashSet<String>> = HashMap::new();
            for (video, word) in pairs {
                rel.entry(video).or_default().insert(word);
            }
            (videos.clone(), words.clone(), scores.clone(), rel)
        }
        Task::Fvs => {
            let mut rel: HashMap<String, HashSet<String>> = HashMap::new();
            for (video, word) in pairs {
                rel.entry(word).or_default().insert(video);
            }
            let transposed: Vec<Vec<f64>> = (0..words.len())
                .map(|w| (0..videos.len()).map(|v| scores[v][w]).collect())
                .collect();
            (words.clone(), videos.clone(), transposed, rel)
        }
    };

    let report = retrieval_eval(&queries, &items, &matrix, &relevant, n)?;
    let per_query: serde_json::Map<String, Value> = report
        .per_query
        .iter()
        .map(|(q, m)| (q.clone(), query_value(m)))
        .collect();
    let out = json!({
        "schema": "retrieval-report/1",
        "task": match args.task { Task::Fws => "fws", Task::Fvs => "fvs" },
        "N": n,
        "beta": beta,
        "queries": queries.len(),
        "items": items.len(),
        "mAP": opt(report.mean_ap),
        "mF1": opt(report.mean_f1),
        "P@N": report.mean_p_at_n,
        "R@N": report.mean_r_at_n,
        "per_query": per_query,
    });
    write_output(&args.output, &to_canonical_pretty(&out))
}

fn query_value(m: &QueryMetrics) -> Value {
    json!({
        "AP": opt(m.ap),
        "maxF1": opt(m.max_f1),
        "P@N": m.p_at_n,
        "R@N": m.r_at_n,
    })
}

fn opt(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(x),
        None => Value::Null,
    }
}
