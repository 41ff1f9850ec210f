//! Shared domain types: alphabets, time segments, boxes, edit distance and
//! letter accuracy.
//!
//! Segments are half-open integer frame intervals `[start, end)`. Inclusive
//! start/end frame indices from annotation files map to `[s, t+1)` on
//! ingestion (see [`TimeSegment::from_inclusive`]). IoU and IS on segments
//! measure frame counts.

use crate::{Error, Result};

/// A symbol sequence (each element is one grapheme, e.g. a letter).
pub type Symbols = Vec<String>;

/// Splits a string into per-character symbols.
pub fn symbols_from_str(s: &str) -> Symbols {
    s.chars().map(|c| c.to_string()).collect()
}

/// Joins a symbol sequence back into a string.
pub fn symbols_to_string(symbols: &[String]) -> String {
    symbols.concat()
}

/// Output label inventory: letters plus a reserved blank, plus an optional
/// reserved no-letter symbol `∅` used by detection-style transcripts.
///
/// Label indices are laid out as `letters[0..n]`, then blank at `n`, then
/// (when present) no-letter at `n + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    letters: Vec<String>,
    has_noletter: bool,
}

/// Display form of the no-letter symbol in transcripts.
pub const NOLETTER_SYMBOL: &str = "∅";

impl Alphabet {
    pub fn new(letters: Vec<String>, with_noletter: bool) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidAlphabet("no letters".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &letters {
            if l.is_empty() {
                return Err(Error::InvalidAlphabet("empty letter".into()));
            }
            if l == NOLETTER_SYMBOL {
                return Err(Error::InvalidAlphabet(
                    "the no-letter symbol cannot be a letter".into(),
                ));
            }
            if !seen.insert(l.clone()) {
                return Err(Error::InvalidAlphabet(format!("duplicate letter {l:?}")));
            }
        }
        Ok(Self {
            letters,
            has_noletter: with_noletter,
        })
    }

    /// Builds an alphabet from single characters.
    pub fn from_chars(chars: &str, with_noletter: bool) -> Result<Self> {
        Self::new(chars.chars().map(|c| c.to_string()).collect(), with_noletter)
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    /// Number of letters (excluding reserved symbols).
    pub fn num_letters(&self) -> usize {
        self.letters.len()
    }

    /// Total label count including blank and (if present) no-letter.
    pub fn size(&self) -> usize {
        self.letters.len() + 1 + usize::from(self.has_noletter)
    }

    pub fn blank_index(&self) -> usize {
        self.letters.len()
    }

    pub fn noletter_index(&self) -> Option<usize> {
        self.has_noletter.then(|| self.letters.len() + 1)
    }

    pub fn is_blank(&self, index: usize) -> bool {
        index == self.blank_index()
    }

    pub fn is_noletter(&self, index: usize) -> bool {
        self.noletter_index() == Some(index)
    }

    /// Index of a letter or the no-letter symbol; blank has no symbol form.
    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        if symbol == NOLETTER_SYMBOL {
            return self.noletter_index();
        }
        self.letters.iter().position(|l| l == symbol)
    }

    /// Symbol at a non-blank index; blank has no symbol form.
    pub fn symbol_at(&self, index: usize) -> Result<&str> {
        if index < self.letters.len() {
            Ok(&self.letters[index])
        } else if self.is_noletter(index) {
            Ok(NOLETTER_SYMBOL)
        } else {
            Err(Error::InvalidLabelIndex(index, self.size()))
        }
    }

    /// Maps a symbol sequence to label indices, rejecting unknown symbols.
    pub fn indices_of(&self, symbols: &[String]) -> Result<Vec<usize>> {
        symbols
            .iter()
            .map(|s| {
                self.index_of(s)
                    .ok_or_else(|| Error::UnknownSymbol(s.clone()))
            })
            .collect()
    }
}

/// Half-open frame interval `[start, end)` with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeSegment {
    start: usize,
    end: usize,
}

impl TimeSegment {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidSegment { start, end });
        }
        Ok(Self { start, end })
    }

    /// Maps inclusive frame indices `(s, t)` to the half-open `[s, t+1)`.
    pub fn from_inclusive(first: usize, last: usize) -> Result<Self> {
        Self::new(first, last + 1)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    /// Number of frames covered; segments are never empty.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn intersection_len(&self, other: &TimeSegment) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn overlaps(&self, other: &TimeSegment) -> bool {
        self.intersection_len(other) > 0
    }

    /// Real-valued center `(start + end) / 2`.
    pub fn center(&self) -> f64 {
        (self.start + self.end) as f64 / 2.0
    }
}

/// Intersection over union of two segments, measured in frames.
pub fn temporal_iou(a: &TimeSegment, b: &TimeSegment) -> f64 {
    let inter = a.intersection_len(b);
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Normalized intersection `|x ∩ y| / |y|`: the fraction of `y` covered by `x`.
pub fn temporal_is(x: &TimeSegment, y: &TimeSegment) -> f64 {
    x.intersection_len(y) as f64 / y.len() as f64
}

/// A segment with its transcript (non-empty symbol sequence).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSegment {
    pub segment: TimeSegment,
    pub transcript: Symbols,
}

impl LabeledSegment {
    pub fn new(segment: TimeSegment, transcript: Symbols) -> Result<Self> {
        if transcript.is_empty() {
            return Err(Error::EmptyInput("transcript".into()));
        }
        Ok(Self {
            segment,
            transcript,
        })
    }
}

/// A segment with a detection confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSegment {
    pub segment: TimeSegment,
    pub score: f64,
}

impl ScoredSegment {
    pub fn new(segment: TimeSegment, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidScore(score));
        }
        Ok(Self { segment, score })
    }
}

/// Axis-aligned box with a confidence in `[0, 1]`; `x1 < x2`, `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
}

impl Box2D {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, score: f64) -> Result<Self> {
        for v in [x1, y1, x2, y2] {
            if !v.is_finite() {
                return Err(Error::InvalidBox("non-finite coordinate".into()));
            }
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::InvalidBox(format!(
                "degenerate extents ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidScore(score));
        }
        Ok(Self { x1, y1, x2, y2, score })
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Area intersection over union of two boxes.
pub fn box_iou(a: &Box2D, b: &Box2D) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Levenshtein distance: minimum substitutions + insertions + deletions.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    if reference.is_empty() {
        return hypothesis.len();
    }
    if hypothesis.is_empty() {
        return reference.len();
    }
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0usize; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// Letter accuracy `1 - D(ref, hyp) / |ref|`. Can be negative when the
/// hypothesis is much longer than the reference.
pub fn letter_accuracy<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("letter accuracy reference".into()));
    }
    let d = edit_distance(reference, hypothesis);
    Ok(1.0 - d as f64 / reference.len() as f64)
}
