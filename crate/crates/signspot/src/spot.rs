//! Sign spotting: assigning sentence words to candidate intervals using
//! lexical recognizer probabilities and fingerspelling hypotheses.
//!
//! Word matching is case-insensitive with leading/trailing punctuation
//! stripped. Spotted transcripts carry the matched word's characters.

use std::collections::HashMap;

use crate::core::{edit_distance, symbols_from_str, LabeledSegment, ScoredSegment, TimeSegment};
use crate::{Error, Result};

/// Spotting thresholds and windowing parameters.
#[derive(Debug, Clone, Copy)]
pub struct SpotConfig {
    pub window_len: usize,
    pub stride: usize,
    /// Minimum lexical word probability.
    pub delta_l: f64,
    /// Maximum normalized edit distance for fingerspelling assignment.
    pub delta_f: f64,
    /// Fingerspelling proposals at or below this confidence are dropped.
    pub detector_min_confidence: f64,
}

impl Default for SpotConfig {
    fn default() -> Self {
        Self {
            window_len: 32,
            stride: 8,
            delta_l: 0.6,
            delta_f: 0.2,
            detector_min_confidence: 0.5,
        }
    }
}

impl SpotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta_l) || !(0.0..=1.0).contains(&self.delta_f) {
            return Err(Error::InvalidConfig(
                "delta_l and delta_f must be in [0, 1]".into(),
            ));
        }
        if self.window_len == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(
                "window length and stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sliding-window recognizer outputs: one probability vector over the lexical
/// vocabulary per window. Vectors are nonnegative and sum to at most 1
/// (within 1e-6).
#[derive(Debug, Clone)]
pub struct WindowProbs {
    windows: Vec<(TimeSegment, Vec<f64>)>,
}

impl WindowProbs {
    pub fn new(windows: Vec<(TimeSegment, Vec<f64>)>) -> Result<Self> {
        for (seg, probs) in &windows {
            let mut sum = 0.0;
            for &p in probs {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "window [{}, {}) has invalid probability {p}",
                        seg.start(),
                        seg.end()
                    )));
                }
                sum += p;
            }
            if sum > 1.0 + 1e-6 {
                return Err(Error::InvalidInput(format!(
                    "window [{}, {}) probabilities sum to {sum}",
                    seg.start(),
                    seg.end()
                )));
            }
        }
        Ok(Self { windows })
    }

    pub fn windows(&self) -> &[(TimeSegment, Vec<f64>)] {
        &self.windows
    }
}

/// Lowercases and strips leading/trailing non-alphanumeric characters.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Distinct normalized sentence words in first-occurrence order.
fn sentence_vocabulary(sentence_words: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for w in sentence_words {
        let norm = normalize_word(w);
        if !norm.is_empty() && seen.insert(norm.clone()) {
            out.push(norm);
        }
    }
    out
}

/// Spots lexical signs: every window whose probability for a sentence word
/// reaches `delta_l` emits that word; overlapping emissions of the same word
/// collapse to the single highest-probability window (ties to the earliest).
/// Assignment is restricted to the sentence's words.
pub fn spot_lexical(
    wp: &WindowProbs,
    sentence_words: &[String],
    vocab: &HashMap<String, usize>,
    delta_l: f64,
) -> Result<Vec<LabeledSegment>> {
    if !(0.0..=1.0).contains(&delta_l) {
        return Err(Error::InvalidConfig(format!(
            "delta_l must be in [0, 1], got {delta_l}"
        )));
    }
    // Canonical time ordering makes the output independent of input order.
    let mut windows: Vec<&(TimeSegment, Vec<f64>)> = wp.windows().iter().collect();
    windows.sort_by_key(|(seg, _)| (seg.start(), seg.end()));

    let mut candidates: Vec<(String, TimeSegment, f64)> = Vec::new();
    for word in sentence_vocabulary(sentence_words) {
        let Some(&index) = vocab.get(&word) else {
            continue;
        };
        for (segment, probs) in &windows {
            let p = probs.get(index).copied().unwrap_or(0.0);
            if p >= delta_l {
                candidates.push((word.clone(), *segment, p));
            }
        }
    }
    Ok(dedup_overlapping(candidates))
}

/// Keeps, per word, the best-scoring candidate among mutually overlapping
/// ones: candidates sorted by (probability desc, start, end) greedily
/// suppress overlapping same-word candidates.
fn dedup_overlapping(mut candidates: Vec<(String, TimeSegment, f64)>) -> Vec<LabeledSegment> {
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("probabilities are not NaN")
            .then_with(|| (a.1.start(), a.1.end(), &a.0).cmp(&(b.1.start(), b.1.end(), &b.0)))
    });
    let mut kept: Vec<(String, TimeSegment, f64)> = Vec::new();
    for (word, segment, p) in candidates {
        let clash = kept
            .iter()
            .any(|(w, s, _)| *w == word && s.overlaps(&segment));
        if !clash {
            kept.push((word, segment, p));
        }
    }
    kept.sort_by_key(|(w, s, _)| (s.start(), s.end(), w.clone()));
    kept.into_iter()
        .map(|(word, segment, _)| {
            LabeledSegment::new(segment, symbols_from_str(&word)).expect("word is non-empty")
        })
        .collect()
}

/// Normalized edit distance `D(a, b) / max(|a|, |b|)`; 0 when both are empty.
pub fn normalized_edit_distance(a: &[String], b: &[String]) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / denom as f64
}

/// Spots fingerspelled signs: proposals at or below `min_conf` are dropped;
/// each survivor is assigned the sentence word minimizing the normalized edit
/// distance to its recognizer hypothesis, if that distance is at most
/// `delta_f`. One word per proposal; per word, only the lowest-distance
/// proposal survives (ties to the earlier proposal).
pub fn spot_fingerspelling(
    proposals: &[ScoredSegment],
    hyps: &[Vec<String>],
    sentence_words: &[String],
    delta_f: f64,
    min_conf: f64,
) -> Result<Vec<LabeledSegment>> {
    if proposals.len() != hyps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} proposals but {} hypotheses",
            proposals.len(),
            hyps.len()
        )));
    }
    if !(0.0..=1.0).contains(&delta_f) {
        return Err(Error::InvalidConfig(format!(
            "delta_f must be in [0, 1], got {delta_f}"
        )));
    }
    let words = sentence_vocabulary(sentence_words);
    let word_symbols: Vec<Vec<String>> = words.iter().map(|w| symbols_from_str(w)).collect();

    let mut ordered: Vec<(usize, &ScoredSegment)> = proposals.iter().enumerate().collect();
    ordered.sort_by_key(|(i, p)| (p.segment.start(), p.segment.end(), *i));

    // (word index, segment, distance), one candidate per surviving proposal.
    let mut candidates: Vec<(usize, TimeSegment, f64)> = Vec::new();
    for (i, proposal) in ordered {
        if proposal.score <= min_conf {
            continue;
        }
        let hyp = normalize_hyp(&hyps[i]);
        let mut best: Option<(usize, f64)> = None;
        for (wi, symbols) in word_symbols.iter().enumerate() {
            let d = normalized_edit_distance(symbols, &hyp);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((wi, d));
            }
        }
        if let Some((wi, d)) = best {
            if d <= delta_f {
                candidates.push((wi, proposal.segment, d));
            }
        }
    }

    // One best proposal per word: smallest distance, ties to the earlier
    // segment.
    let mut best_per_word: HashMap<usize, (TimeSegment, f64)> = HashMap::new();
    for (wi, segment, d) in candidates {
        match best_per_word.get(&wi) {
            Some(&(existing, bd))
                if bd < d
                    || (bd == d
                        && (existing.start(), existing.end()) <= (segment.start(), segment.end())) => {}
            _ => {
                best_per_word.insert(wi, (segment, d));
            }
        }
    }
    let mut out: Vec<(TimeSegment, String)> = best_per_word
        .into_iter()
        .map(|(wi, (segment, _))| (segment, words[wi].clone()))
        .collect();
    out.sort_by_key(|(s, w)| (s.start(), s.end(), w.clone()));
    Ok(out
        .into_iter()
        .map(|(segment, word)| {
            LabeledSegment::new(segment, symbols_from_str(&word)).expect("word is non-empty")
        })
        .collect())
}

fn normalize_hyp(hyp: &[String]) -> Vec<String> {
    hyp.iter().map(|s| s.to_lowercase()).collect()
}
