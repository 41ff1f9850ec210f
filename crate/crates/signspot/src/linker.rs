//! Per-frame NMS, Viterbi tube linking of scored boxes across frames, tube
//! smoothing, and attention-peak box extraction.

use crate::core::{box_iou, Box2D};
use crate::fusion::Tensor2D;
use crate::{Error, Result};

/// Per-frame candidate boxes for one video.
#[derive(Debug, Clone)]
pub struct FrameBoxes {
    frames: Vec<Vec<Box2D>>,
}

impl FrameBoxes {
    pub fn new(frames: Vec<Vec<Box2D>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("frame boxes".into()));
        }
        Ok(Self { frames })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &[Box2D] {
        &self.frames[t]
    }
}

/// Tube-linking parameters. `lambda_link` defaults to 0.3 for detector tubes;
/// attention tubes use 0.1.
#[derive(Debug, Clone, Copy)]
pub struct LinkConfig {
    pub lambda_link: f64,
    /// Half-window `a` of the coordinate moving average (window `2a + 1`).
    pub smooth_half_window: usize,
    /// Peaks per attention map turned into candidate boxes.
    pub top_k: usize,
    /// Zoom box size relative to the frame, in (0, 1].
    pub zoom_ratio: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            lambda_link: 0.3,
            smooth_half_window: 5,
            top_k: 3,
            zoom_ratio: 0.9,
        }
    }
}

impl LinkConfig {
    pub fn attention_default() -> Self {
        Self {
            lambda_link: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_link.is_nan() || self.lambda_link < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda_link
            )));
        }
        if self.top_k < 1 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if !(self.zoom_ratio > 0.0 && self.zoom_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "zoom ratio must be in (0, 1], got {}",
                self.zoom_ratio
            )));
        }
        Ok(())
    }
}

/// Greedy NMS: keep the highest-score box (ties to the lower original index),
/// suppress boxes overlapping it by more than `iou_threshold`, repeat until
/// `max_keep` boxes are kept or none remain.
pub fn frame_nms(boxes: &[Box2D], iou_threshold: f64, max_keep: usize) -> Result<Vec<Box2D>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::InvalidConfig(format!(
            "NMS IoU threshold must be in [0, 1], got {iou_threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[j]
            .score
            .partial_cmp(&boxes[i].score)
            .expect("box scores are not NaN")
            .then(i.cmp(&j))
    });
    let mut kept: Vec<Box2D> = Vec::new();
    for idx in order {
        if kept.len() == max_keep {
            break;
        }
        if kept.iter().all(|k| box_iou(k, &boxes[idx]) <= iou_threshold) {
            kept.push(boxes[idx]);
        }
    }
    Ok(kept)
}

/// Pairwise linking score `s_t + s_{t+1} + lambda * IoU(b_t, b_{t+1})`.
fn link_score(a: &Box2D, b: &Box2D, lambda: f64) -> f64 {
    a.score + b.score + lambda * box_iou(a, b)
}

/// Finds the box index sequence maximizing
/// `(1/T) * sum_t [s_t + s_{t+1} + lambda * IoU]` by dynamic programming.
/// Ties resolve to the lexicographically smallest index sequence. For `T = 1`
/// there are no pairwise terms; the max-score box wins and the sequence score
/// is its box score.
pub fn link_tube(fb: &FrameBoxes, cfg: &LinkConfig) -> Result<(Vec<usize>, f64)> {
    cfg.validate()?;
    let t_len = fb.num_frames();
    for t in 0..t_len {
        if fb.frame(t).is_empty() {
            return Err(Error::EmptyInput(format!("frame {t} has no boxes")));
        }
    }

    if t_len == 1 {
        let frame = fb.frame(0);
        let mut best = 0;
        for (i, b) in frame.iter().enumerate() {
            if b.score > frame[best].score {
                best = i;
            }
        }
        return Ok((vec![best], frame[best].score));
    }

    // Backward pass: suffix[t][j] = best total pairwise score of any path
    // starting at frame t with box j.
    let mut suffix: Vec<Vec<f64>> = vec![Vec::new(); t_len];
    suffix[t_len - 1] = vec![0.0; fb.frame(t_len - 1).len()];
    for t in (0..t_len - 1).rev() {
        let cur = fb.frame(t);
        let nxt = fb.frame(t + 1);
        suffix[t] = cur
            .iter()
            .map(|b| {
                nxt.iter()
                    .enumerate()
                    .map(|(j, nb)| link_score(b, nb, cfg.lambda_link) + suffix[t + 1][j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }

    // Forward reconstruction, preferring the smallest index on exact ties so
    // the result is the lexicographically smallest optimal sequence.
    let argmax_first = |values: &[f64]| {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        best
    };
    let mut indices = Vec::with_capacity(t_len);
    indices.push(argmax_first(&suffix[0]));
    for t in 0..t_len - 1 {
        let prev = &fb.frame(t)[indices[t]];
        let scores: Vec<f64> = fb
            .frame(t + 1)
            .iter()
            .enumerate()
            .map(|(j, b)| link_score(prev, b, cfg.lambda_link) + suffix[t + 1][j])
            .collect();
        indices.push(argmax_first(&scores));
    }

    let score = suffix[0][indices[0]] / t_len as f64;
    Ok((indices, score))
}

/// Coordinate-wise moving average over `[n - a, n + a]`, the window clipped at
/// the sequence edges. Scores are averaged alongside the coordinates.
pub fn smooth_tube(boxes: &[Box2D], a: usize) -> Vec<Box2D> {
    let n = boxes.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(a);
            let hi = (i + a).min(n - 1);
            let count = (hi - lo + 1) as f64;
            let mut acc = [0.0f64; 5];
            for b in &boxes[lo..=hi] {
                acc[0] += b.x1;
                acc[1] += b.y1;
                acc[2] += b.x2;
                acc[3] += b.y2;
                acc[4] += b.score;
            }
            Box2D {
                x1: acc[0] / count,
                y1: acc[1] / count,
                x2: acc[2] / count,
                y2: acc[3] / count,
                score: acc[4] / count,
            }
        })
        .collect()
}

/// Places a box of size `zoom_ratio * (w, h)` centered on each of the `k`
/// largest attention cells (ties in row-major order), clipped to the frame,
/// scored by the peak value.
pub fn peaks_to_boxes(
    attn: &Tensor2D,
    k: usize,
    zoom_ratio: f64,
    frame_size: (f64, f64),
) -> Result<Vec<Box2D>> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if !(zoom_ratio > 0.0 && zoom_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "zoom ratio must be in (0, 1], got {zoom_ratio}"
        )));
    }
    let (w, h) = frame_size;
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::InvalidConfig("frame size must be positive".into()));
    }
    if attn.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("attention map must be nonnegative".into()));
    }

    let mut cells: Vec<(usize, f64)> = attn.data().iter().copied().enumerate().collect();
    cells.sort_by(|(ia, va), (ib, vb)| {
        vb.partial_cmp(va)
            .expect("attention values are not NaN")
            .then(ia.cmp(ib))
    });

    let cols = attn.cols();
    let rows = attn.rows();
    let bw = zoom_ratio * w;
    let bh = zoom_ratio * h;
    cells
        .into_iter()
        .take(k)
        .map(|(idx, value)| {
            let row = idx / cols;
            let col = idx % cols;
            let cx = (col as f64 + 0.5) * w / cols as f64;
            let cy = (row as f64 + 0.5) * h / rows as f64;
            Box2D::new(
                (cx - bw / 2.0).max(0.0),
                (cy - bh / 2.0).max(0.0),
                (cx + bw / 2.0).min(w),
                (cy + bh / 2.0).min(h),
                value,
            )
        })
        .collect()
}
