//! Cross-modal retrieval math: cosine distance, positive-pair filtering,
//! semi-hard negative mining, triplet loss, detection-weighted clip scoring,
//! the recognizer baseline score, and word/video search evaluation drivers.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{temporal_iou, temporal_is, LabeledSegment, ScoredSegment, TimeSegment};
use crate::metrics::{precision_recall_at_n, retrieval_ap_f1};
use crate::spot::normalized_edit_distance;
use crate::{Error, Result};

/// A d-dimensional embedding with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Matching-model thresholds and weights.
#[derive(Debug, Clone, Copy)]
pub struct MatchConfig {
    /// IoU gate for positive proposals. The comparison is strict except at
    /// the degenerate threshold 1.0, where `>=` is used — a strict `>` there
    /// would exclude every proposal, including exact matches.
    pub delta_iou: f64,
    /// Strict IS gate for positive proposals.
    pub delta_is: f64,
    /// Proposals sampled into the positive set.
    pub sample_k: usize,
    /// Triplet margin.
    pub margin: f64,
    pub negatives_per_set: usize,
    /// Detection-score exponent in clip scoring.
    pub beta: f64,
    /// Detection-loss weight in the combined training loss.
    pub lambda_det: f64,
    /// Proposals kept per clip at test time.
    pub test_proposals: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            delta_iou: 1.0,
            delta_is: 0.8,
            sample_k: 5,
            margin: 0.45,
            negatives_per_set: 5,
            beta: 1.0,
            lambda_det: 0.1,
            test_proposals: 50,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta_iou) || !(0.0..=1.0).contains(&self.delta_is) {
            return Err(Error::InvalidConfig(
                "delta_iou and delta_is must be in [0, 1]".into(),
            ));
        }
        if [self.margin, self.beta, self.lambda_det].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidConfig(
                "margin, beta, and lambda_det must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Cosine distance `1 - a·b / (|a||b|)`, in [0, 2].
pub fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dims {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok(1.0 - dot / (na * nb))
}

/// Combined training loss `lambda_det * detection_loss + triplet_loss`.
pub fn overall_loss(detection_loss: f64, triplet_loss: f64, lambda_det: f64) -> f64 {
    lambda_det * detection_loss + triplet_loss
}

/// Builds the positive set: the ground-truth pairs plus up to `sample_k`
/// proposals (sampled uniformly with the given seed) that pass the IoU and IS
/// gates against some ground truth, labeled with that ground truth's word.
/// Duplicate (segment, word) pairs are dropped.
pub fn build_positive_set(
    gts: &[LabeledSegment],
    proposals: &[TimeSegment],
    cfg: &MatchConfig,
    rng_seed: u64,
) -> Result<Vec<LabeledSegment>> {
    cfg.validate()?;
    let iou_passes = |iou: f64| {
        if cfg.delta_iou == 1.0 {
            iou >= 1.0
        } else {
            iou > cfg.delta_iou
        }
    };

    let mut qualifying: Vec<LabeledSegment> = Vec::new();
    for proposal in proposals {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            let iou = temporal_iou(proposal, &gt.segment);
            if iou_passes(iou)
                && temporal_is(proposal, &gt.segment) > cfg.delta_is
                && best.is_none_or(|(_, b)| iou > b)
            {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            qualifying.push(LabeledSegment::new(*proposal, gts[gi].transcript.clone())?);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked: Vec<usize> = (0..qualifying.len()).collect();
    picked.shuffle(&mut rng);
    picked.truncate(cfg.sample_k);
    picked.sort_unstable();

    let mut out: Vec<LabeledSegment> = gts.to_vec();
    for i in picked {
        if !out.contains(&qualifying[i]) {
            out.push(qualifying[i].clone());
        }
    }
    Ok(out)
}

/// Semi-hard negative indices: candidates whose distance from the anchor (for
/// words) or to the positive word (for segments) strictly exceeds the
/// positive pair's distance. Each set is truncated to the `limit` qualifying
/// candidates of smallest distance.
pub fn semi_hard_negatives(
    anchor_v: &EmbeddingVector,
    pos_word_x: &EmbeddingVector,
    candidate_words_x: &[EmbeddingVector],
    candidate_segments_v: &[EmbeddingVector],
    limit: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let pos_distance = cosine_distance(anchor_v, pos_word_x)?;
    let filter = |distances: Vec<(usize, f64)>| {
        let mut qualifying: Vec<(usize, f64)> = distances
            .into_iter()
            .filter(|&(_, d)| d > pos_distance)
            .collect();
        qualifying.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("distances are not NaN")
                .then(a.0.cmp(&b.0))
        });
        qualifying.truncate(limit);
        qualifying.into_iter().map(|(i, _)| i).collect::<Vec<_>>()
    };

    let word_distances = candidate_words_x
        .iter()
        .enumerate()
        .map(|(i, w)| Ok((i, cosine_distance(anchor_v, w)?)))
        .collect::<Result<Vec<_>>>()?;
    let segment_distances = candidate_segments_v
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((i, cosine_distance(v, pos_word_x)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((filter(word_distances), filter(segment_distances)))
}

/// One positive pair with its mined negatives, expressed as embeddings.
#[derive(Debug, Clone)]
pub struct TripletItem {
    pub visual: EmbeddingVector,
    pub text: EmbeddingVector,
    /// Embeddings of negative words (compared against `visual`).
    pub negative_words: Vec<EmbeddingVector>,
    /// Embeddings of negative segments (compared against `text`).
    pub negative_segments: Vec<EmbeddingVector>,
}

/// Two-term hinge triplet loss summed over pairs:
/// `max(m + d(pos) - mean d(v, w'), 0) + max(m + d(pos) - mean d(v', w), 0)`.
/// An empty negative set contributes zero for its term.
pub fn triplet_loss(items: &[TripletItem], margin: f64) -> Result<f64> {
    let mut total = 0.0;
    for item in items {
        let pos = cosine_distance(&item.visual, &item.text)?;
        let hinge = |mean_negative: Option<f64>| -> f64 {
            match mean_negative {
                Some(mean) => (margin + pos - mean).max(0.0),
                None => 0.0,
            }
        };
        let mean_of = |negatives: &[EmbeddingVector], against: &EmbeddingVector, word_side: bool| {
            if negatives.is_empty() {
                return Ok::<Option<f64>, Error>(None);
            }
            let mut sum = 0.0;
            for n in negatives {
                sum += if word_side {
                    cosine_distance(against, n)?
                } else {
                    cosine_distance(n, against)?
                };
            }
            Ok(Some(sum / negatives.len() as f64))
        };
        total += hinge(mean_of(&item.negative_words, &item.visual, true)?);
        total += hinge(mean_of(&item.negative_segments, &item.text, false)?);
    }
    Ok(total)
}

/// Per-proposal score `p_det^beta * (1 - d(e_v, e_x))`, maximized over the
/// clip's proposals. Returns the clip score and the argmax proposal index
/// (ties to the earliest).
pub fn score_clip(
    word_x: &EmbeddingVector,
    proposals: &[(ScoredSegment, EmbeddingVector)],
    beta: f64,
) -> Result<(f64, usize)> {
    if proposals.is_empty() {
        return Err(Error::EmptyInput("clip proposals".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, (scored, emb)) in proposals.iter().enumerate() {
        let s = scored.score.powf(beta) * (1.0 - cosine_distance(emb, word_x)?);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, i));
        }
    }
    let (score, index) = best.expect("proposals are non-empty");
    Ok((score, index))
}

/// Recognizer baseline: hypotheses are split into words on the separator
/// symbol; the score is `1 - min` normalized edit distance between the query
/// and any hypothesis word. No hypothesis words at all scores 0.
pub fn recognizer_baseline_score(hyps: &[Vec<String>], separator: &str, word: &str) -> f64 {
    let query: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    let mut min_distance: f64 = 1.0;
    for hyp in hyps {
        for chunk in hyp.split(|s| s == separator) {
            if chunk.is_empty() {
                continue;
            }
            min_distance = min_distance.min(normalized_edit_distance(&query, chunk));
        }
    }
    1.0 - min_distance
}

/// Per-query retrieval metrics plus their means. Queries without relevant
/// items carry no AP/maxF1 and are excluded from those means.
#[derive(Debug, Clone)]
pub struct RetrievalReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub mean_ap: Option<f64>,
    pub mean_f1: Option<f64>,
    pub mean_p_at_n: f64,
    pub mean_r_at_n: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QueryMetrics {
    pub ap: Option<f64>,
    pub max_f1: Option<f64>,
    pub p_at_n: f64,
    pub r_at_n: f64,
}

/// Ranks items per query (descending score, ties by item id) and evaluates
/// AP, max F1, P@N and R@N. `scores[q][i]` pairs `queries[q]` with `items[i]`.
pub fn retrieval_eval(
    queries: &[String],
    items: &[String],
    scores: &[Vec<f64>],
    relevant: &HashMap<String, HashSet<String>>,
    n: usize,
) -> Result<RetrievalReport> {
    if scores.len() != queries.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} score rows for {} queries",
            scores.len(),
            queries.len()
        )));
    }
    let empty = HashSet::new();
    let mut per_query = BTreeMap::new();
    let mut ap_values = Vec::new();
    let mut f1_values = Vec::new();
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    for (q, row) in queries.iter().zip(scores) {
        if row.len() != items.len() {
            return Err(Error::ShapeMismatch(format!(
                "query {q:?} has {} scores for {} items",
                row.len(),
                items.len()
            )));
        }
        let ranked: Vec<(String, f64)> = items
            .iter()
            .cloned()
            .zip(row.iter().copied())
            .collect();
        let rel = relevant.get(q).unwrap_or(&empty);
        let ap_f1 = retrieval_ap_f1(&ranked, rel);
        let (p_at_n, r_at_n) = precision_recall_at_n(&ranked, rel, n)?;
        if let Some((ap, f1)) = ap_f1 {
            ap_values.push(ap);
            f1_values.push(f1);
        }
        p_sum += p_at_n;
        r_sum += r_at_n;
        per_query.insert(
            q.clone(),
            QueryMetrics {
                ap: ap_f1.map(|(ap, _)| ap),
                max_f1: ap_f1.map(|(_, f1)| f1),
                p_at_n,
                r_at_n,
            },
        );
    }
    let mean = |values: &[f64]| {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    Ok(RetrievalReport {
        mean_ap: mean(&ap_values),
        mean_f1: mean(&f1_values),
        mean_p_at_n: p_sum / queries.len().max(1) as f64,
        mean_r_at_n: r_sum / queries.len().max(1) as f64,
        per_query,
    })
}
