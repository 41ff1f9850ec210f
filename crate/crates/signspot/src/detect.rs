//! Detection post-processing: frame posteriors to segments, anchor labeling,
//! center/length delta encoding, and temporal NMS.

use crate::core::{temporal_iou, ScoredSegment, TimeSegment};
use crate::{Error, Result};

/// Fixed-length temporal anchors placed at every feature-map position.
/// Position `p` maps to the frame center `p * stride`.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    lengths: Vec<usize>,
    stride: usize,
    num_positions: usize,
}

impl AnchorSet {
    pub fn new(lengths: Vec<usize>, stride: usize, num_positions: usize) -> Result<Self> {
        if lengths.is_empty() || stride == 0 || num_positions == 0 {
            return Err(Error::InvalidConfig(
                "anchor set needs lengths, a positive stride, and positions".into(),
            ));
        }
        if lengths.windows(2).any(|w| w[0] >= w[1]) || lengths[0] == 0 {
            return Err(Error::InvalidConfig(
                "anchor lengths must be positive, ascending, and distinct".into(),
            ));
        }
        Ok(Self {
            lengths,
            stride,
            num_positions,
        })
    }

    /// The 20 anchor scales used for fingerspelling proposals, multiplied by
    /// the feature stride.
    pub fn fingerspelling_default(stride: usize, num_positions: usize) -> Result<Self> {
        const SCALES: [usize; 20] = [
            1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 14, 16, 18, 20, 24, 32, 40, 60, 75,
        ];
        Self::new(SCALES.iter().map(|s| s * stride).collect(), stride, num_positions)
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn num_positions(&self) -> usize {
        self.num_positions
    }

    /// Enumerates anchors position-major. Anchors that would start before
    /// frame 0 are skipped.
    pub fn segments(&self) -> Vec<TimeSegment> {
        let mut out = Vec::new();
        for p in 0..self.num_positions {
            let center = p * self.stride;
            for &len in &self.lengths {
                let half = len / 2;
                if center >= half {
                    let start = center - half;
                    out.push(TimeSegment::new(start, start + len).expect("positive length"));
                }
            }
        }
        out
    }
}

/// Thresholds for anchor labeling, NMS, and confidence filtering.
#[derive(Debug, Clone, Copy)]
pub struct DetectConfig {
    pub pos_iou: f64,
    pub neg_iou: f64,
    pub nms_iou: f64,
    pub min_confidence: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            pos_iou: 0.7,
            neg_iou: 0.3,
            nms_iou: 0.7,
            min_confidence: 0.5,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.neg_iou)
            || !(0.0..=1.0).contains(&self.pos_iou)
            || self.neg_iou > self.pos_iou
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= neg_iou ({}) <= pos_iou ({}) <= 1",
                self.neg_iou, self.pos_iou
            )));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) || !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::InvalidConfig(
                "nms_iou and min_confidence must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Threshold sweep used to turn frame posteriors into segments when the
/// caller does not supply one: 0.9 down to 0.1.
pub fn default_threshold_sweep() -> Vec<f64> {
    (1..=9).rev().map(|i| i as f64 / 10.0).collect()
}

/// For each threshold, maximal runs of frames with probability >= threshold
/// become segments scored by their mean probability. Results are pooled over
/// thresholds, identical intervals merged keeping the max score, and sorted
/// by interval.
pub fn frame_probs_to_segments(
    probs: &[f64],
    thresholds: &[f64],
) -> Result<Vec<ScoredSegment>> {
    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidInput("frame probabilities must be in [0, 1]".into()));
    }
    let mut pooled: std::collections::BTreeMap<TimeSegment, f64> = std::collections::BTreeMap::new();
    for &bar in thresholds {
        let mut start: Option<usize> = None;
        for t in 0..=probs.len() {
            let on = t < probs.len() && probs[t] >= bar;
            match (start, on) {
                (None, true) => start = Some(t),
                (Some(s), false) => {
                    let segment = TimeSegment::new(s, t)?;
                    let mean = probs[s..t].iter().sum::<f64>() / (t - s) as f64;
                    let entry = pooled.entry(segment).or_insert(mean);
                    if mean > *entry {
                        *entry = mean;
                    }
                    start = None;
                }
                _ => {}
            }
        }
    }
    pooled
        .into_iter()
        .map(|(segment, score)| ScoredSegment::new(segment, score))
        .collect()
}

/// Anchor label: matched to a ground-truth index, negative, or ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Positive(usize),
    Negative,
    Ignore,
}

/// Labels each anchor positive (IoU with some ground truth above `pos_iou`,
/// matched to the argmax), negative (max IoU below `neg_iou`), or ignore.
pub fn label_anchors(
    anchors: &[TimeSegment],
    gts: &[TimeSegment],
    cfg: &DetectConfig,
) -> Result<Vec<AnchorLabel>> {
    cfg.validate()?;
    Ok(anchors
        .iter()
        .map(|anchor| {
            let mut best_iou = 0.0;
            let mut best_gt = None;
            for (j, gt) in gts.iter().enumerate() {
                let iou = temporal_iou(anchor, gt);
                if iou > best_iou {
                    best_iou = iou;
                    best_gt = Some(j);
                }
            }
            if best_iou > cfg.pos_iou {
                AnchorLabel::Positive(best_gt.expect("positive IoU implies a match"))
            } else if best_iou < cfg.neg_iou {
                AnchorLabel::Negative
            } else {
                AnchorLabel::Ignore
            }
        })
        .collect())
}

/// Center/length offsets from an anchor to a ground-truth segment:
/// `dc = (c* - c) / l`, `dl = ln(l* / l)`.
pub fn delta_encode(anchor: &TimeSegment, gt: &TimeSegment) -> (f64, f64) {
    let dc = (gt.center() - anchor.center()) / anchor.len() as f64;
    let dl = (gt.len() as f64 / anchor.len() as f64).ln();
    (dc, dl)
}

/// Decoded segment: exact real-valued endpoints plus the integer segment
/// after half-up rounding, with a flag when clamping was needed to keep the
/// segment valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedSegment {
    pub real_start: f64,
    pub real_end: f64,
    pub segment: TimeSegment,
    pub clamped: bool,
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Inverts [`delta_encode`]: `c* = c + dc * l`, `l* = l * exp(dl)`, endpoints
/// rounded half-up to integer frames. A decoded length below one frame is
/// clamped to one; a negative start is clamped to zero. Both set `clamped`.
pub fn delta_decode(anchor: &TimeSegment, dc: f64, dl: f64) -> DecodedSegment {
    let center = anchor.center() + dc * anchor.len() as f64;
    let len = anchor.len() as f64 * dl.exp();
    let real_start = center - len / 2.0;
    let real_end = center + len / 2.0;

    let mut clamped = false;
    let mut start = round_half_up(real_start);
    if start < 0.0 {
        start = 0.0;
        clamped = true;
    }
    let mut end = round_half_up(real_end);
    if end < start + 1.0 {
        end = start + 1.0;
        clamped = true;
    }
    DecodedSegment {
        real_start,
        real_end,
        segment: TimeSegment::new(start as usize, end as usize).expect("end > start by clamping"),
        clamped,
    }
}

/// Greedy temporal NMS: keep the highest-score segment (ties to the lower
/// original index), suppress segments with IoU above the threshold.
pub fn temporal_nms(segs: &[ScoredSegment], iou_threshold: f64) -> Result<Vec<ScoredSegment>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidConfig(format!(
            "NMS IoU threshold must be in [0, 1], got {iou_threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&i, &j| {
        segs[j]
            .score
            .partial_cmp(&segs[i].score)
            .expect("segment scores are not NaN")
            .then(i.cmp(&j))
    });
    let mut kept: Vec<ScoredSegment> = Vec::new();
    for idx in order {
        if kept
            .iter()
            .all(|k| temporal_iou(&k.segment, &segs[idx].segment) <= iou_threshold)
        {
            kept.push(segs[idx]);
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn seg(s: usize, e: usize) -> TimeSegment {
        TimeSegment::new(s, e).unwrap()
    }

    fn sseg(s: usize, e: usize, score: f64) -> ScoredSegment {
        ScoredSegment::new(seg(s, e), score).unwrap()
    }

    #[test]
    fn run_scan_cases() {
        let all = frame_probs_to_segments(&[0.9, 0.8, 0.7], &[0.5]).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].segment, seg(0, 3));
        assert!((all[0].score - 0.8).abs() < 1e-12);

        assert!(frame_probs_to_segments(&[0.1, 0.2], &[0.5, 0.3]).unwrap().is_empty());

        let mixed = frame_probs_to_segments(&[0.9, 0.2, 0.8, 0.8], &[0.5]).unwrap();
        assert_eq!(mixed.len(), 2);
        assert_eq!(mixed[0].segment, seg(0, 1));
        assert!((mixed[0].score - 0.9).abs() < 1e-12);
        assert_eq!(mixed[1].segment, seg(2, 4));
        assert!((mixed[1].score - 0.8).abs() < 1e-12);

        assert!(frame_probs_to_segments(&[1.2], &[0.5]).is_err());
    }

    #[test]
    fn runs_tile_super_threshold_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let probs: Vec<f64> = (0..rng.random_range(1..15)).map(|_| rng.random()).collect();
            let bar = rng.random_range(0.0..1.0);
            let segs = frame_probs_to_segments(&probs, &[bar]).unwrap();
            let mut covered = vec![false; probs.len()];
            for s in &segs {
                for c in &mut covered[s.segment.start()..s.segment.end()] {
                    assert!(!*c, "segments overlap");
                    *c = true;
                }
            }
            for (&c, &p) in covered.iter().zip(&probs) {
                assert_eq!(c, p >= bar);
            }
        }
    }

    #[test]
    fn pooled_thresholds_merge_duplicates() {
        // Both thresholds produce [0, 2); the higher mean must win (identical
        // here) and the interval must appear once.
        let segs = frame_probs_to_segments(&[0.9, 0.8], &[0.7, 0.5]).unwrap();
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn anchor_labels() {
        let cfg = DetectConfig::default();
        let gts = [seg(10, 20)];
        let labels = label_anchors(&[seg(10, 20), seg(40, 50), seg(8, 20)], &gts, &cfg).unwrap();
        assert_eq!(labels[0], AnchorLabel::Positive(0));
        assert_eq!(labels[1], AnchorLabel::Negative);
        // IoU 10/12 ≈ 0.83 > 0.7 positive; now craft an in-between IoU 0.5.
        assert_eq!(labels[2], AnchorLabel::Positive(0));
        let half = label_anchors(&[seg(10, 15)], &gts, &cfg).unwrap();
        assert_eq!(half[0], AnchorLabel::Ignore);
    }

    #[test]
    fn raising_pos_threshold_never_adds_positives() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let anchors: Vec<TimeSegment> = (0..10)
                .map(|_| {
                    let s = rng.random_range(0..30);
                    seg(s, s + rng.random_range(1..20))
                })
                .collect();
            let gts: Vec<TimeSegment> = (0..3)
                .map(|_| {
                    let s = rng.random_range(0..30);
                    seg(s, s + rng.random_range(1..20))
                })
                .collect();
            let loose = DetectConfig {
                pos_iou: 0.5,
                neg_iou: 0.3,
                ..DetectConfig::default()
            };
            let strict = DetectConfig {
                pos_iou: 0.8,
                neg_iou: 0.3,
                ..DetectConfig::default()
            };
            let count = |cfg: &DetectConfig| {
                label_anchors(&anchors, &gts, cfg)
                    .unwrap()
                    .iter()
                    .filter(|l| matches!(l, AnchorLabel::Positive(_)))
                    .count()
            };
            assert!(count(&strict) <= count(&loose));
        }
    }

    #[test]
    fn delta_encode_cases() {
        let a = seg(0, 4);
        assert_eq!(delta_encode(&a, &a), (0.0, 0.0));
        let (dc, dl) = delta_encode(&a, &seg(2, 6));
        assert!((dc - 0.5).abs() < 1e-12 && dl.abs() < 1e-12);
        let (dc, dl) = delta_encode(&a, &seg(0, 8));
        assert!((dc - 0.5).abs() < 1e-12);
        assert!((dl - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn delta_decode_cases() {
        let a = seg(0, 4);
        let d = delta_decode(&a, 0.0, 0.0);
        assert_eq!(d.segment, a);
        assert!(!d.clamped);
        let d = delta_decode(&a, 0.5, 2.0f64.ln());
        assert_eq!(d.segment, seg(0, 8));
        // Tiny decoded length clamps to one frame.
        let tiny = delta_decode(&a, 0.0, -10.0);
        assert!(tiny.clamped);
        assert_eq!(tiny.segment.len(), 1);
        // Far-left decode clamps the start at zero.
        let left = delta_decode(&a, -5.0, 0.0);
        assert!(left.clamped);
        assert_eq!(left.segment.start(), 0);
    }

    #[test]
    fn anchor_set_generation() {
        let set = AnchorSet::new(vec![2, 4], 8, 3).unwrap();
        let segs = set.segments();
        // Position 0 center 0: both anchors would start below 0 except len 0.. 2/2=1 > 0 -> skipped.
        assert!(segs.contains(&seg(7, 9)));
        assert!(segs.contains(&seg(6, 10)));
        assert!(segs.contains(&seg(15, 17)));
        assert!(AnchorSet::new(vec![4, 2], 8, 3).is_err());
        assert!(AnchorSet::new(vec![2, 2], 8, 3).is_err());
        let fs = AnchorSet::fingerspelling_default(4, 10).unwrap();
        assert_eq!(fs.lengths().len(), 20);
        assert_eq!(fs.lengths()[0], 4);
        assert_eq!(*fs.lengths().last().unwrap(), 300);
    }

    #[test]
    fn temporal_nms_cases() {
        let single = vec![sseg(0, 5, 0.7)];
        assert_eq!(temporal_nms(&single, 0.5).unwrap(), single);
        let dup = vec![sseg(0, 5, 0.4), sseg(0, 5, 0.9)];
        assert_eq!(temporal_nms(&dup, 0.5).unwrap(), vec![sseg(0, 5, 0.9)]);
    }

    #[test]
    fn temporal_nms_matches_reference_greedy() {
        /// Independent greedy reimplementation.
        fn oracle(segs: &[ScoredSegment], thr: f64) -> Vec<ScoredSegment> {
            let mut remaining: Vec<(usize, ScoredSegment)> =
                segs.iter().copied().enumerate().collect();
            let mut kept = Vec::new();
            while !remaining.is_empty() {
                let best = (0..remaining.len())
                    .max_by(|&i, &j| {
                        remaining[i]
                            .1
                            .score
                            .partial_cmp(&remaining[j].1.score)
                            .unwrap()
                            .then(remaining[j].0.cmp(&remaining[i].0))
                    })
                    .unwrap();
                let (_, chosen) = remaining.remove(best);
                kept.push(chosen);
                remaining.retain(|(_, s)| temporal_iou(&chosen.segment, &s.segment) <= thr);
            }
            kept
        }
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let segs: Vec<ScoredSegment> = (0..rng.random_range(1..=6))
                .map(|_| {
                    let s = rng.random_range(0..20);
                    sseg(s, s + rng.random_range(1..10), rng.random())
                })
                .collect();
            let thr = rng.random_range(0.0..1.0);
            assert_eq!(temporal_nms(&segs, thr).unwrap(), oracle(&segs, thr));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn delta_roundtrip_is_exact_before_rounding(
            a_start in 0usize..50, a_len in 1usize..40,
            g_start in 0usize..50, g_len in 1usize..40,
        ) {
            let anchor = seg(a_start, a_start + a_len);
            let gt = seg(g_start, g_start + g_len);
            let (dc, dl) = delta_encode(&anchor, &gt);
            let decoded = delta_decode(&anchor, dc, dl);
            prop_assert!((decoded.real_start - g_start as f64).abs() < 1e-9);
            prop_assert!((decoded.real_end - (g_start + g_len) as f64).abs() < 1e-9);
            prop_assert_eq!(decoded.segment, gt);
        }

        #[test]
        fn labels_partition_anchors(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let anchors: Vec<TimeSegment> = (0..8).map(|_| {
                let s = rng.random_range(0..20);
                seg(s, s + rng.random_range(1..12))
            }).collect();
            let gts: Vec<TimeSegment> = (0..2).map(|_| {
                let s = rng.random_range(0..20);
                seg(s, s + rng.random_range(1..12))
            }).collect();
            let labels = label_anchors(&anchors, &gts, &DetectConfig::default()).unwrap();
            prop_assert_eq!(labels.len(), anchors.len());
            for l in labels {
                if let AnchorLabel::Positive(j) = l {
                    prop_assert!(j < gts.len());
                }
            }
        }
    }
}
