//! Detection, recognition-aware, translation, and retrieval metrics.
//!
//! Average precision follows the detection convention: greedy score-ordered
//! matching, then the mean over `N_r` equally spaced recall levels of the
//! maximum precision at recall at or above each level.

use std::collections::HashSet;

use crate::core::{
    edit_distance, letter_accuracy, temporal_iou, LabeledSegment, ScoredSegment, Symbols,
    TimeSegment, NOLETTER_SYMBOL,
};
use crate::detect::temporal_nms;
use crate::{Error, Result};

/// Evaluation thresholds and recall resolution.
#[derive(Debug, Clone)]
pub struct MetricConfig {
    pub iou_thresholds: Vec<f64>,
    pub acc_thresholds: Vec<f64>,
    /// IoU gate used by AP@Acc matching (non-zero overlap by default).
    pub acc_iou_threshold: f64,
    pub recall_levels: usize,
    /// Score grid for the MSA sweep; `None` sweeps the distinct prediction
    /// scores plus a sentinel above all of them.
    pub msa_grid: Option<Vec<f64>>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.1, 0.3, 0.5],
            acc_thresholds: vec![0.0, 0.2, 0.4],
            acc_iou_threshold: 0.0,
            recall_levels: 100,
            msa_grid: None,
        }
    }
}

/// Indices into a prediction list, sorted by descending score (stable on
/// ties, so earlier inputs win).
fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .expect("scores are not NaN")
            .then(i.cmp(&j))
    });
    order
}

/// AP from ranked true-positive flags: mean over recall levels
/// `i / recall_levels` (i = 1..recall_levels) of the maximum precision at
/// recall >= the level.
fn ap_from_matches(tp_flags: &[bool], num_gts: usize, recall_levels: usize) -> f64 {
    assert!(recall_levels > 0, "AP needs at least one recall level");
    let mut points = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (i, &hit) in tp_flags.iter().enumerate() {
        tp += usize::from(hit);
        points.push((tp as f64 / num_gts as f64, tp as f64 / (i + 1) as f64));
    }
    // Suffix maximum of precision (recall is non-decreasing down the ranking).
    let mut suffix_max = vec![0.0f64; points.len()];
    let mut running: f64 = 0.0;
    for i in (0..points.len()).rev() {
        running = running.max(points[i].1);
        suffix_max[i] = running;
    }
    let mut total = 0.0;
    for i in 1..=recall_levels {
        let level = i as f64 / recall_levels as f64;
        let at = points.iter().position(|&(r, _)| r >= level);
        if let Some(idx) = at {
            total += suffix_max[idx];
        }
    }
    total / recall_levels as f64
}

/// AP with greedy IoU matching: each prediction (by descending score) claims
/// the unmatched ground truth of highest IoU above `delta_iou`. Returns
/// `None` when there are no ground truths.
pub fn ap_at_iou(
    preds: &[ScoredSegment],
    gts: &[TimeSegment],
    delta_iou: f64,
    recall_levels: usize,
) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let mut matched = vec![false; gts.len()];
    let tp_flags: Vec<bool> = rank_by_score(&scores)
        .into_iter()
        .map(|pi| {
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[gi] {
                    continue;
                }
                let iou = temporal_iou(&preds[pi].segment, gt);
                if iou > delta_iou && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((gi, iou));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Some(ap_from_matches(&tp_flags, gts.len(), recall_levels))
}

/// AP matched on recognizer letter accuracy: each prediction claims the
/// unmatched ground truth maximizing accuracy, subject to accuracy above
/// `delta_acc` and IoU above `delta_iou`.
pub fn ap_at_acc(
    preds: &[(ScoredSegment, Symbols)],
    gts: &[LabeledSegment],
    delta_acc: f64,
    delta_iou: f64,
    recall_levels: usize,
) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let scores: Vec<f64> = preds.iter().map(|(p, _)| p.score).collect();
    let mut matched = vec![false; gts.len()];
    let tp_flags: Vec<bool> = rank_by_score(&scores)
        .into_iter()
        .map(|pi| {
            let (pred, transcript) = &preds[pi];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[gi] {
                    continue;
                }
                if temporal_iou(&pred.segment, &gt.segment) <= delta_iou {
                    continue;
                }
                let acc = letter_accuracy(&gt.transcript, transcript)
                    .expect("ground-truth transcripts are non-empty");
                if acc > delta_acc && best.is_none_or(|(_, b)| acc > b) {
                    best = Some((gi, acc));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Some(ap_from_matches(&tp_flags, gts.len(), recall_levels))
}

/// Corpus AP@IoU: predictions from all videos share one ranking; matching
/// stays within each prediction's own video. `None` without ground truths.
pub fn corpus_ap_at_iou(
    videos: &[(Vec<ScoredSegment>, Vec<TimeSegment>)],
    delta_iou: f64,
    recall_levels: usize,
) -> Option<f64> {
    let total_gts: usize = videos.iter().map(|(_, g)| g.len()).sum();
    if total_gts == 0 {
        return None;
    }
    let mut pool: Vec<(usize, ScoredSegment)> = Vec::new();
    for (vi, (preds, _)) in videos.iter().enumerate() {
        pool.extend(preds.iter().map(|p| (vi, *p)));
    }
    let scores: Vec<f64> = pool.iter().map(|(_, p)| p.score).collect();
    let mut matched: Vec<Vec<bool>> = videos.iter().map(|(_, g)| vec![false; g.len()]).collect();
    let tp_flags: Vec<bool> = rank_by_score(&scores)
        .into_iter()
        .map(|i| {
            let (vi, pred) = &pool[i];
            let gts = &videos[*vi].1;
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[*vi][gi] {
                    continue;
                }
                let iou = temporal_iou(&pred.segment, gt);
                if iou > delta_iou && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((gi, iou));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[*vi][gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Some(ap_from_matches(&tp_flags, total_gts, recall_levels))
}

/// One video's transcript-carrying predictions and labeled ground truths.
pub type LabeledVideo = (Vec<(ScoredSegment, Symbols)>, Vec<LabeledSegment>);

/// Corpus AP@Acc, pooled across videos the same way as [`corpus_ap_at_iou`].
pub fn corpus_ap_at_acc(
    videos: &[LabeledVideo],
    delta_acc: f64,
    delta_iou: f64,
    recall_levels: usize,
) -> Option<f64> {
    let total_gts: usize = videos.iter().map(|(_, g)| g.len()).sum();
    if total_gts == 0 {
        return None;
    }
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for (vi, (preds, _)) in videos.iter().enumerate() {
        pool.extend((0..preds.len()).map(|pi| (vi, pi)));
    }
    let scores: Vec<f64> = pool
        .iter()
        .map(|&(vi, pi)| videos[vi].0[pi].0.score)
        .collect();
    let mut matched: Vec<Vec<bool>> = videos.iter().map(|(_, g)| vec![false; g.len()]).collect();
    let tp_flags: Vec<bool> = rank_by_score(&scores)
        .into_iter()
        .map(|i| {
            let (vi, pi) = pool[i];
            let (pred, transcript) = &videos[vi].0[pi];
            let gts = &videos[vi].1;
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if matched[vi][gi] {
                    continue;
                }
                if temporal_iou(&pred.segment, &gt.segment) <= delta_iou {
                    continue;
                }
                let acc = letter_accuracy(&gt.transcript, transcript)
                    .expect("ground-truth transcripts are non-empty");
                if acc > delta_acc && best.is_none_or(|(_, b)| acc > b) {
                    best = Some((gi, acc));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[vi][gi] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    Some(ap_from_matches(&tp_flags, total_gts, recall_levels))
}

/// Builds the full-video letter sequence: transcripts in time order with the
/// no-letter symbol inserted wherever uncovered frames exist — before the
/// first segment, in gaps between segments, and after the last one. With no
/// segments at all both boundary insertions fire, yielding `∅ ∅`.
fn video_sequence(segments: &[(TimeSegment, &Symbols)], total_frames: usize) -> Symbols {
    let mut ordered: Vec<&(TimeSegment, &Symbols)> = segments.iter().collect();
    ordered.sort_by_key(|(seg, _)| (seg.start(), seg.end()));
    let noletter = || NOLETTER_SYMBOL.to_string();
    if ordered.is_empty() {
        // Both boundary insertion points see uncovered frames.
        return if total_frames > 0 {
            vec![noletter(), noletter()]
        } else {
            Vec::new()
        };
    }
    let mut out = Vec::new();
    if ordered[0].0.start() > 0 {
        out.push(noletter());
    }
    for i in 0..ordered.len() {
        out.extend(ordered[i].1.iter().cloned());
        let covered_to = ordered[i].0.end();
        let next_start = ordered
            .get(i + 1)
            .map_or(total_frames, |(s, _)| s.start());
        if next_start > covered_to {
            out.push(noletter());
        }
    }
    out
}

fn check_disjoint(gts: &[LabeledSegment]) -> Result<()> {
    let mut sorted: Vec<&LabeledSegment> = gts.iter().collect();
    sorted.sort_by_key(|g| (g.segment.start(), g.segment.end()));
    for w in sorted.windows(2) {
        if w[0].segment.end() > w[1].segment.start() {
            return Err(Error::InvalidInput(format!(
                "ground-truth segments overlap: [{}, {}) and [{}, {})",
                w[0].segment.start(),
                w[0].segment.end(),
                w[1].segment.start(),
                w[1].segment.end()
            )));
        }
    }
    Ok(())
}

/// One video's predictions (with transcripts), ground truths, and length.
#[derive(Debug, Clone)]
pub struct MsaVideo {
    pub preds: Vec<(ScoredSegment, Symbols)>,
    pub gts: Vec<LabeledSegment>,
    pub total_frames: usize,
}

impl MsaVideo {
    fn validate(&self) -> Result<()> {
        check_disjoint(&self.gts)?;
        let max_end = self
            .gts
            .iter()
            .map(|g| g.segment.end())
            .chain(self.preds.iter().map(|(p, _)| p.segment.end()))
            .max()
            .unwrap_or(0);
        if self.total_frames < max_end.max(1) {
            return Err(Error::InvalidInput(format!(
                "total frames {} below last segment end {max_end}",
                self.total_frames
            )));
        }
        Ok(())
    }

    fn reference(&self) -> Symbols {
        let segs: Vec<(TimeSegment, &Symbols)> = self
            .gts
            .iter()
            .map(|g| (g.segment, &g.transcript))
            .collect();
        video_sequence(&segs, self.total_frames)
    }

    /// Predicted full-video sequence at one score threshold: drop predictions
    /// scoring below it, suppress any remaining overlap, concatenate.
    fn hypothesis(&self, delta_f: f64) -> Symbols {
        let kept: Vec<ScoredSegment> = self
            .preds
            .iter()
            .filter(|(p, _)| p.score >= delta_f)
            .map(|(p, _)| *p)
            .collect();
        let surviving = temporal_nms(&kept, 0.0).expect("threshold 0 is valid");
        let segs: Vec<(TimeSegment, &Symbols)> = surviving
            .iter()
            .map(|s| {
                let (_, transcript) = self
                    .preds
                    .iter()
                    .find(|(p, _)| p.segment == s.segment && p.score == s.score)
                    .expect("kept segment came from preds");
                (s.segment, transcript)
            })
            .collect();
        video_sequence(&segs, self.total_frames)
    }
}

fn msa_sweep_grid(videos: &[MsaVideo], grid: Option<&[f64]>) -> Vec<f64> {
    match grid {
        Some(g) => {
            let mut g = g.to_vec();
            g.sort_by(|a, b| a.partial_cmp(b).expect("grid values are not NaN"));
            g.dedup();
            if g.is_empty() {
                vec![0.0]
            } else {
                g
            }
        }
        None => {
            let mut scores: Vec<f64> = videos
                .iter()
                .flat_map(|v| v.preds.iter().map(|(p, _)| p.score))
                .collect();
            scores.sort_by(|a, b| a.partial_cmp(b).expect("scores are not NaN"));
            scores.dedup();
            scores.push(f64::INFINITY); // the empty keep-set is achievable too
            if scores.len() == 1 {
                vec![0.0]
            } else {
                scores
            }
        }
    }
}

/// Maximum sequence accuracy for a single video: the max over the score
/// threshold sweep of the letter accuracy between the ground-truth and
/// predicted full-video sequences. Returns the accuracy and the best
/// threshold (smallest on ties).
pub fn msa(
    preds: &[(ScoredSegment, Symbols)],
    gts: &[LabeledSegment],
    total_frames: usize,
    grid: Option<&[f64]>,
) -> Result<(f64, f64)> {
    let video = MsaVideo {
        preds: preds.to_vec(),
        gts: gts.to_vec(),
        total_frames,
    };
    corpus_msa(std::slice::from_ref(&video), grid)
}

/// Corpus MSA: one global threshold, letter accuracy aggregated as
/// `1 - (total edit distance) / (total reference length)`.
pub fn corpus_msa(videos: &[MsaVideo], grid: Option<&[f64]>) -> Result<(f64, f64)> {
    if videos.is_empty() {
        return Err(Error::EmptyInput("MSA videos".into()));
    }
    for v in videos {
        v.validate()?;
    }
    let references: Vec<Symbols> = videos.iter().map(|v| v.reference()).collect();
    let ref_total: usize = references.iter().map(|r| r.len()).sum();
    if ref_total == 0 {
        return Err(Error::EmptyInput("MSA reference sequences".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &delta in &msa_sweep_grid(videos, grid) {
        let distance: usize = videos
            .iter()
            .zip(&references)
            .map(|(v, r)| edit_distance(r, &v.hypothesis(delta)))
            .sum();
        let acc = 1.0 - distance as f64 / ref_total as f64;
        if best.is_none_or(|(b, _)| acc > b) {
            best = Some((acc, delta));
        }
    }
    Ok(best.expect("grid is never empty"))
}

/// Ranked precision-recall over binary frame labels. Returns the PR curve
/// (one point per rank) and AP, or `None` without positive frames.
pub fn frame_ap(
    frame_scores: &[f64],
    frame_labels: &[bool],
    recall_levels: usize,
) -> Option<(Vec<(f64, f64)>, f64)> {
    assert_eq!(frame_scores.len(), frame_labels.len());
    let positives = frame_labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let tp_flags: Vec<bool> = rank_by_score(frame_scores)
        .into_iter()
        .map(|i| frame_labels[i])
        .collect();
    let mut curve = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (i, &hit) in tp_flags.iter().enumerate() {
        tp += usize::from(hit);
        curve.push((tp as f64 / positives as f64, tp as f64 / (i + 1) as f64));
    }
    let ap = ap_from_matches(&tp_flags, positives, recall_levels);
    Some((curve, ap))
}

/// Corpus BLEU with uniform n-gram weights up to `max_n`, clipped counts, and
/// brevity penalty `exp(1 - r/c)` when the hypothesis corpus is shorter.
/// Single reference per hypothesis.
pub fn bleu_n(hyps: &[Vec<String>], refs: &[Vec<String>], max_n: usize) -> Result<f64> {
    if hyps.is_empty() {
        return Err(Error::EmptyInput("BLEU corpus".into()));
    }
    if hyps.len() != refs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} hypotheses vs {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if !(1..=4).contains(&max_n) {
        return Err(Error::InvalidConfig(format!("max_n must be in 1..=4, got {max_n}")));
    }

    fn ngram_counts(tokens: &[String], n: usize) -> std::collections::HashMap<&[String], usize> {
        let mut counts = std::collections::HashMap::new();
        if tokens.len() >= n {
            for w in tokens.windows(n) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        counts
    }

    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    for (hyp, reference) in hyps.iter().zip(refs) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=max_n {
            let hc = ngram_counts(hyp, n);
            let rc = ngram_counts(reference, n);
            for (gram, &count) in &hc {
                total[n - 1] += count;
                matched[n - 1] += count.min(rc.get(gram).copied().unwrap_or(0));
            }
        }
    }

    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_precision = 0.0;
    for n in 0..max_n {
        if matched[n] == 0 || total[n] == 0 {
            return Ok(0.0);
        }
        log_precision += (matched[n] as f64 / total[n] as f64).ln() / max_n as f64;
    }
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * log_precision.exp())
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1, averaged over sentence pairs: per pair,
/// `P = LCS/|hyp|`, `R = LCS/|ref|`, `F = 2PR/(P+R)`.
pub fn rouge_l(hyps: &[Vec<String>], refs: &[Vec<String>]) -> Result<f64> {
    if hyps.is_empty() {
        return Err(Error::EmptyInput("ROUGE corpus".into()));
    }
    if hyps.len() != refs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} hypotheses vs {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let mut sum = 0.0;
    for (hyp, reference) in hyps.iter().zip(refs) {
        if hyp.is_empty() || reference.is_empty() {
            continue;
        }
        let lcs = lcs_length(hyp, reference) as f64;
        if lcs == 0.0 {
            continue;
        }
        let p = lcs / hyp.len() as f64;
        let r = lcs / reference.len() as f64;
        sum += 2.0 * p * r / (p + r);
    }
    Ok(sum / hyps.len() as f64)
}

/// Canonical retrieval ordering: descending score, ties by ascending id.
fn rank_items(items: &[(String, f64)]) -> Vec<&(String, f64)> {
    let mut ranked: Vec<&(String, f64)> = items.iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("retrieval scores are not NaN")
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

/// Average precision (mean over the relevant set of precision at each hit)
/// and the maximum F1 over rank cutoffs. `None` when `relevant` is empty.
pub fn retrieval_ap_f1(
    items: &[(String, f64)],
    relevant: &HashSet<String>,
) -> Option<(f64, f64)> {
    if relevant.is_empty() {
        return None;
    }
    let ranked = rank_items(items);
    let mut hits = 0usize;
    let mut ap_sum = 0.0;
    let mut max_f1: f64 = 0.0;
    for (rank, (id, _)) in ranked.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            ap_sum += hits as f64 / (rank + 1) as f64;
        }
        let p = hits as f64 / (rank + 1) as f64;
        let r = hits as f64 / relevant.len() as f64;
        if p + r > 0.0 {
            max_f1 = max_f1.max(2.0 * p * r / (p + r));
        }
    }
    Some((ap_sum / relevant.len() as f64, max_f1))
}

/// `P@N` (correct in top N over N) and `R@N` (correct in top N over all
/// relevant; 0 when nothing is relevant).
pub fn precision_recall_at_n(
    items: &[(String, f64)],
    relevant: &HashSet<String>,
    n: usize,
) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::InvalidConfig("N must be >= 1".into()));
    }
    let ranked = rank_items(items);
    let hits = ranked
        .iter()
        .take(n)
        .filter(|(id, _)| relevant.contains(id))
        .count();
    let precision = hits as f64 / n as f64;
    let recall = if relevant.is_empty() {
        0.0
    } else {
        hits as f64 / relevant.len() as f64
    };
    Ok((precision, recall))
}
