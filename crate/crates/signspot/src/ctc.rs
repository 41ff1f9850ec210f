//! CTC path probability, marginal sequence likelihood, greedy decoding, and
//! LM-weighted prefix beam search over posteriorgrams.
//!
//! All probability math runs in natural-log space with log-sum-exp. The beam
//! search merges the standard (blank-ending, non-blank-ending) probability
//! pair per collapsed prefix and applies the language model during expansion;
//! ties break lexicographically on the hypothesis symbols.

use std::collections::HashMap;

use crate::core::{Alphabet, Symbols};
use crate::lm::{NGramModel, Outcome};
use crate::{Error, Result};

/// Per-frame label probabilities over an alphabet (T rows, one per frame).
#[derive(Debug, Clone)]
pub struct Posteriorgram {
    alphabet: Alphabet,
    frames: Vec<Vec<f64>>,
}

impl Posteriorgram {
    /// Validates that every row has one probability per label, entries are
    /// nonnegative, and each row sums to 1 within 1e-6.
    pub fn new(alphabet: Alphabet, frames: Vec<Vec<f64>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidPosteriorgram("no frames".into()));
        }
        for (t, row) in frames.iter().enumerate() {
            if row.len() != alphabet.size() {
                return Err(Error::InvalidPosteriorgram(format!(
                    "row {t} has {} entries, alphabet has {} labels",
                    row.len(),
                    alphabet.size()
                )));
            }
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidPosteriorgram(format!(
                        "row {t} contains invalid probability {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPosteriorgram(format!(
                    "row {t} sums to {sum}"
                )));
            }
        }
        Ok(Self { alphabet, frames })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t]
    }
}

/// Beam search parameters.
#[derive(Debug, Clone, Copy)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub lm_weight: f64,
    pub insertion_bias: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 16,
            lm_weight: 0.0,
            insertion_bias: 0.0,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width < 1 {
            return Err(Error::InvalidConfig("beam width must be >= 1".into()));
        }
        if self.lm_weight.is_nan() || self.lm_weight < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lm weight must be >= 0, got {}",
                self.lm_weight
            )));
        }
        if !self.insertion_bias.is_finite() {
            return Err(Error::InvalidConfig("insertion bias must be finite".into()));
        }
        Ok(())
    }
}

/// Marginal log probability of a label sequence, with a feasibility flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceScore {
    pub log_prob: f64,
    /// False when no frame path can produce the labels (too few frames);
    /// `log_prob` is then `-inf`.
    pub feasible: bool,
}

/// A decoded hypothesis with its combined beam score.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub symbols: Symbols,
    /// `ctc + lm_weight * lm + insertion_bias * len(symbols)`.
    pub score: f64,
    pub ctc_log_prob: f64,
    /// Full LM log probability of the hypothesis including eos (0 without an LM).
    pub lm_log_prob: f64,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Applies the CTC collapsing function B: merge consecutive duplicate frame
/// labels, then drop blanks.
pub fn collapse(path: &[usize], alphabet: &Alphabet) -> Result<Symbols> {
    let mut out = Vec::new();
    let mut prev: Option<usize> = None;
    for &label in path {
        if label >= alphabet.size() {
            return Err(Error::InvalidLabelIndex(label, alphabet.size()));
        }
        if prev != Some(label) && !alphabet.is_blank(label) {
            out.push(alphabet.symbol_at(label)?.to_string());
        }
        prev = Some(label);
    }
    Ok(out)
}

/// Marginal log probability of `labels` under the posteriorgram: the log-sum
/// over all frame paths that collapse to `labels`, computed by the forward
/// algorithm over the blank-augmented label sequence.
pub fn sequence_log_prob(post: &Posteriorgram, labels: &[String]) -> Result<SequenceScore> {
    let alphabet = post.alphabet();
    let label_ids = alphabet.indices_of(labels)?;
    let t_len = post.num_frames();

    // Minimum frames: one per label plus a separating blank between repeats.
    let repeats = label_ids.windows(2).filter(|w| w[0] == w[1]).count();
    if label_ids.len() + repeats > t_len {
        return Ok(SequenceScore {
            log_prob: f64::NEG_INFINITY,
            feasible: false,
        });
    }

    let blank = alphabet.blank_index();
    let mut augmented = Vec::with_capacity(2 * label_ids.len() + 1);
    augmented.push(blank);
    for &id in &label_ids {
        augmented.push(id);
        augmented.push(blank);
    }
    let s_len = augmented.len();

    let log_frame = |t: usize, label: usize| post.frame(t)[label].ln();
    let mut alpha = vec![f64::NEG_INFINITY; s_len];
    alpha[0] = log_frame(0, augmented[0]);
    if s_len > 1 {
        alpha[1] = log_frame(0, augmented[1]);
    }
    let mut next = vec![f64::NEG_INFINITY; s_len];
    for t in 1..t_len {
        for s in 0..s_len {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = log_sum_exp(acc, alpha[s - 1]);
            }
            if s >= 2 && augmented[s] != blank && augmented[s] != augmented[s - 2] {
                acc = log_sum_exp(acc, alpha[s - 2]);
            }
            next[s] = acc + log_frame(t, augmented[s]);
        }
        std::mem::swap(&mut alpha, &mut next);
    }

    let mut log_prob = alpha[s_len - 1];
    if s_len > 1 {
        log_prob = log_sum_exp(log_prob, alpha[s_len - 2]);
    }
    Ok(SequenceScore {
        log_prob,
        feasible: true,
    })
}

/// Picks the highest-probability label at each frame (ties toward the lowest
/// index) and collapses. Returns the symbols and the frame-level path.
pub fn greedy_decode(post: &Posteriorgram) -> (Symbols, Vec<usize>) {
    let path: Vec<usize> = (0..post.num_frames())
        .map(|t| {
            let row = post.frame(t);
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    let symbols = collapse(&path, post.alphabet()).expect("argmax indices are in range");
    (symbols, path)
}

#[derive(Debug, Clone, Copy)]
struct PrefixMass {
    /// Log mass of paths ending in blank.
    blank: f64,
    /// Log mass of paths ending in the prefix's final symbol.
    non_blank: f64,
    /// Unweighted LM log probability of the prefix symbols (no eos term).
    lm_partial: f64,
}

impl PrefixMass {
    fn total(&self) -> f64 {
        log_sum_exp(self.blank, self.non_blank)
    }
}

/// Prefix beam search with optional character LM rescoring applied during
/// expansion. Returns hypotheses ranked by combined score
/// `ctc + lm_weight * lm + insertion_bias * |hyp|`, ties broken
/// lexicographically on the symbols.
///
/// The LM vocabulary must contain every posteriorgram letter. The no-letter
/// symbol `∅` is outside LM scope: it contributes no LM term and does not
/// enter the LM context.
pub fn beam_decode(
    post: &Posteriorgram,
    model: Option<&NGramModel>,
    cfg: &BeamConfig,
) -> Result<Vec<BeamHypothesis>> {
    cfg.validate()?;
    let alphabet = post.alphabet();
    if let Some(m) = model {
        for letter in alphabet.letters() {
            if !m.contains(letter) {
                return Err(Error::InvalidConfig(format!(
                    "LM vocabulary is missing posteriorgram letter {letter:?}"
                )));
            }
        }
    }

    // LM increment for appending label `id` to a prefix whose letter context
    // (no-letter symbols excluded) is `ctx`.
    let lm_step = |ctx: &[String], id: usize| -> f64 {
        match model {
            Some(m) if !alphabet.is_noletter(id) => {
                let sym = alphabet.symbol_at(id).expect("non-blank label");
                m.log_prob(ctx, &Outcome::Symbol(sym.to_string()))
            }
            _ => 0.0,
        }
    };
    let letter_context = |prefix: &[usize]| -> Vec<String> {
        prefix
            .iter()
            .filter(|&&id| !alphabet.is_noletter(id))
            .map(|&id| alphabet.symbol_at(id).expect("non-blank label").to_string())
            .collect()
    };

    let blank = alphabet.blank_index();
    let mut beams: HashMap<Vec<usize>, PrefixMass> = HashMap::new();
    beams.insert(
        Vec::new(),
        PrefixMass {
            blank: 0.0,
            non_blank: f64::NEG_INFINITY,
            lm_partial: 0.0,
        },
    );

    for t in 0..post.num_frames() {
        let row = post.frame(t);
        let mut next: HashMap<Vec<usize>, PrefixMass> = HashMap::new();
        let mut merge = |prefix: Vec<usize>, lm_partial: f64, blank_mass: f64, nb_mass: f64| {
            let entry = next.entry(prefix).or_insert(PrefixMass {
                blank: f64::NEG_INFINITY,
                non_blank: f64::NEG_INFINITY,
                lm_partial,
            });
            entry.blank = log_sum_exp(entry.blank, blank_mass);
            entry.non_blank = log_sum_exp(entry.non_blank, nb_mass);
        };
        for (prefix, mass) in &beams {
            let total = mass.total();
            let ctx = letter_context(prefix);
            for (id, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let lp = p.ln();
                if id == blank {
                    merge(prefix.clone(), mass.lm_partial, total + lp, f64::NEG_INFINITY);
                } else if prefix.last() == Some(&id) {
                    // Repeated label: same prefix from non-blank paths, an
                    // extension only from blank-ending paths.
                    merge(
                        prefix.clone(),
                        mass.lm_partial,
                        f64::NEG_INFINITY,
                        mass.non_blank + lp,
                    );
                    let mut ext = prefix.clone();
                    ext.push(id);
                    merge(
                        ext,
                        mass.lm_partial + lm_step(&ctx, id),
                        f64::NEG_INFINITY,
                        mass.blank + lp,
                    );
                } else {
                    let mut ext = prefix.clone();
                    ext.push(id);
                    merge(
                        ext,
                        mass.lm_partial + lm_step(&ctx, id),
                        f64::NEG_INFINITY,
                        total + lp,
                    );
                }
            }
        }

        let mut ranked: Vec<(Vec<usize>, PrefixMass)> = next.into_iter().collect();
        let key = |prefix: &[usize], mass: &PrefixMass| {
            mass.total()
                + cfg.lm_weight * mass.lm_partial
                + cfg.insertion_bias * prefix.len() as f64
        };
        ranked.sort_by(|(pa, ma), (pb, mb)| {
            key(pb, mb)
                .partial_cmp(&key(pa, ma))
                .expect("beam scores are not NaN")
                .then_with(|| symbols_of(alphabet, pa).cmp(&symbols_of(alphabet, pb)))
        });
        ranked.truncate(cfg.beam_width);
        beams = ranked.into_iter().collect();
    }

    let mut hyps: Vec<BeamHypothesis> = beams
        .into_iter()
        .map(|(prefix, mass)| {
            let ctc_log_prob = mass.total();
            let lm_log_prob = match model {
                Some(m) => {
                    let ctx = letter_context(&prefix);
                    mass.lm_partial + m.log_prob(&ctx, &Outcome::Eos)
                }
                None => 0.0,
            };
            let symbols = symbols_of(alphabet, &prefix);
            let score = ctc_log_prob
                + cfg.lm_weight * lm_log_prob
                + cfg.insertion_bias * symbols.len() as f64;
            BeamHypothesis {
                symbols,
                score,
                ctc_log_prob,
                lm_log_prob,
            }
        })
        .collect();
    hyps.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("hypothesis scores are not NaN")
            .then_with(|| a.symbols.cmp(&b.symbols))
    });
    Ok(hyps)
}

fn symbols_of(alphabet: &Alphabet, prefix: &[usize]) -> Symbols {
    prefix
        .iter()
        .map(|&id| alphabet.symbol_at(id).expect("non-blank label").to_string())
        .collect()
}

// An LM-free convenience wrapper used by tests and exhaustive comparisons.
pub fn beam_decode_no_lm(post: &Posteriorgram, beam_width: usize) -> Result<Vec<BeamHypothesis>> {
    beam_decode(
        post,
        None,
        &BeamConfig {
            beam_width,
            ..BeamConfig::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::symbols_from_str;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn abc(n: usize) -> Alphabet {
        Alphabet::from_chars(&"abc"[..n], false).unwrap()
    }

    fn pg(alphabet: Alphabet, rows: &[&[f64]]) -> Posteriorgram {
        Posteriorgram::new(alphabet, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn random_pg(rng: &mut impl Rng, t: usize, letters: usize) -> Posteriorgram {
        let alphabet = abc(letters);
        let frames = (0..t)
            .map(|_| {
                let mut row: Vec<f64> = (0..alphabet.size()).map(|_| rng.random::<f64>() + 1e-3).collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                row
            })
            .collect();
        Posteriorgram::new(alphabet, frames).unwrap()
    }

    /// Exhaustive path enumeration: marginal probability of every collapsed
    /// sequence, by brute force over all |L'|^T paths.
    fn enumerate_marginals(post: &Posteriorgram) -> BTreeMap<Vec<String>, f64> {
        let size = post.alphabet().size();
        let t_len = post.num_frames();
        let mut out: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        let mut path = vec![0usize; t_len];
        loop {
            let p: f64 = (0..t_len).map(|t| post.frame(t)[path[t]]).product();
            let symbols = collapse(&path, post.alphabet()).unwrap();
            *out.entry(symbols).or_insert(0.0) += p;
            // Odometer increment over base-`size` digits.
            let mut pos = 0;
            loop {
                if pos == t_len {
                    return out;
                }
                path[pos] += 1;
                if path[pos] < size {
                    break;
                }
                path[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn collapse_cases() {
        let a = abc(2);
        let blank = a.blank_index();
        assert_eq!(collapse(&[0, 0, blank, 0], &a).unwrap(), symbols_from_str("aa"));
        assert_eq!(collapse(&[blank, blank], &a).unwrap(), Vec::<String>::new());
        assert_eq!(
            collapse(&[0, blank, 1, 1, blank, 1], &a).unwrap(),
            symbols_from_str("abb")
        );
        assert!(collapse(&[7], &a).is_err());
    }

    #[test]
    fn collapse_idempotent_on_clean_paths() {
        let a = abc(3);
        let path = [0usize, 1, 2, 0];
        let once = collapse(&path, &a).unwrap();
        let ids = a.indices_of(&once).unwrap();
        assert_eq!(collapse(&ids, &a).unwrap(), once);
    }

    #[test]
    fn single_frame_certain_letter() {
        let post = pg(abc(1), &[&[1.0, 0.0]]);
        let s = sequence_log_prob(&post, &symbols_from_str("a")).unwrap();
        assert!(s.feasible);
        assert!(s.log_prob.abs() < 1e-12);
    }

    #[test]
    fn two_frame_uniform_marginal() {
        // T=2 uniform over {a, blank}: P("a") = 3/4.
        let post = pg(abc(1), &[&[0.5, 0.5], &[0.5, 0.5]]);
        let s = sequence_log_prob(&post, &symbols_from_str("a")).unwrap();
        assert!((s.log_prob.exp() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn infeasible_lengths_are_flagged() {
        let post = pg(abc(2), &[&[0.5, 0.25, 0.25]]);
        let s = sequence_log_prob(&post, &symbols_from_str("ab")).unwrap();
        assert!(!s.feasible);
        assert_eq!(s.log_prob, f64::NEG_INFINITY);
        // "aa" needs a separating blank: 2 frames is still infeasible.
        let post2 = pg(abc(1), &[&[0.5, 0.5], &[0.5, 0.5]]);
        let s2 = sequence_log_prob(&post2, &symbols_from_str("aa")).unwrap();
        assert!(!s2.feasible);
    }

    #[test]
    fn forward_matches_enumeration_and_mass_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let t = rng.random_range(1..=5);
            let letters = rng.random_range(1..=3);
            let post = random_pg(&mut rng, t, letters);
            let marginals = enumerate_marginals(&post);
            let mass: f64 = marginals.values().sum();
            assert!((mass - 1.0).abs() < 1e-9);
            for (symbols, &expected) in &marginals {
                let got = sequence_log_prob(&post, symbols).unwrap();
                assert!(
                    (got.log_prob.exp() - expected).abs() < 1e-9,
                    "sequence {symbols:?}: forward {} vs enumeration {expected}",
                    got.log_prob.exp()
                );
            }
        }
    }

    #[test]
    fn greedy_matches_per_frame_argmax() {
        let post = pg(
            abc(1),
            &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]],
        );
        let (symbols, path) = greedy_decode(&post);
        assert_eq!(symbols, symbols_from_str("aa"));
        assert_eq!(path, vec![0, 1, 0]);

        let all_blank = pg(abc(1), &[&[0.2, 0.8], &[0.3, 0.7]]);
        assert_eq!(greedy_decode(&all_blank).0, Vec::<String>::new());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let post = random_pg(&mut rng, 3, 3);
        let (_, path) = greedy_decode(&post);
        for (t, &id) in path.iter().enumerate() {
            let row = post.frame(t);
            assert!(row.iter().all(|&p| p <= row[id]));
        }
    }

    #[test]
    fn beam_matches_exhaustive_argmax_without_lm() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..25 {
            let t = rng.random_range(1..=5);
            let letters = rng.random_range(1..=3);
            let post = random_pg(&mut rng, t, letters);
            let marginals = enumerate_marginals(&post);
            let best = marginals
                .iter()
                .max_by(|(sa, pa), (sb, pb)| {
                    pa.partial_cmp(pb).unwrap().then_with(|| sb.cmp(sa))
                })
                .unwrap();
            let hyps = beam_decode_no_lm(&post, 4096).unwrap();
            assert_eq!(&hyps[0].symbols, best.0);
            assert!((hyps[0].ctc_log_prob.exp() - best.1).abs() < 1e-9);
        }
    }

    #[test]
    fn one_hot_posteriorgram_scores_zero() {
        let post = pg(abc(2), &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let hyps = beam_decode_no_lm(&post, 8).unwrap();
        assert_eq!(hyps[0].symbols, symbols_from_str("ab"));
        assert!(hyps[0].score.abs() < 1e-12);
        assert_eq!(hyps.len(), 1);
    }

    #[test]
    fn huge_negative_insertion_bias_prefers_empty() {
        let post = pg(abc(1), &[&[0.6, 0.4], &[0.6, 0.4]]);
        let cfg = BeamConfig {
            beam_width: 64,
            lm_weight: 0.0,
            insertion_bias: -100.0,
        };
        let hyps = beam_decode(&post, None, &cfg).unwrap();
        assert_eq!(hyps[0].symbols, Vec::<String>::new());
    }

    #[test]
    fn lm_shifts_ranking() {
        // Acoustically ambiguous between "a" and "b"; LM trained on "b".
        let post = pg(abc(2), &[&[0.45, 0.55, 0.0]]);
        let model = crate::lm::train_ngram(
            &[symbols_from_str("ab"), symbols_from_str("b"), symbols_from_str("bb")],
            2,
            0.1,
        )
        .unwrap();
        let no_lm = beam_decode_no_lm(&post, 8).unwrap();
        assert_eq!(no_lm[0].symbols, symbols_from_str("b"));
        let cfg = BeamConfig {
            beam_width: 8,
            lm_weight: 5.0,
            insertion_bias: 0.0,
        };
        let with_lm = beam_decode(&post, Some(&model), &cfg).unwrap();
        assert_eq!(with_lm[0].symbols, symbols_from_str("b"));
        // Scores decompose exactly.
        for h in &with_lm {
            let recomputed = h.ctc_log_prob + 5.0 * h.lm_log_prob;
            assert!((h.score - recomputed).abs() < 1e-12);
            let direct = crate::lm::sequence_log_prob(&model, &h.symbols).unwrap();
            assert!((h.lm_log_prob - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn lm_vocabulary_must_cover_letters() {
        let post = pg(abc(2), &[&[0.5, 0.5, 0.0]]);
        let model = crate::lm::train_ngram(&[symbols_from_str("a")], 2, 0.1).unwrap();
        let cfg = BeamConfig::default();
        assert!(beam_decode(&post, Some(&model), &cfg).is_err());
    }

    #[test]
    fn noletter_passes_through_decoding() {
        let a = Alphabet::from_chars("ab", true).unwrap();
        let noletter = a.noletter_index().unwrap();
        let mut rows = vec![vec![0.0; a.size()]; 3];
        rows[0][0] = 1.0;
        rows[1][noletter] = 1.0;
        rows[2][1] = 1.0;
        let post = Posteriorgram::new(a, rows).unwrap();
        let (symbols, _) = greedy_decode(&post);
        assert_eq!(symbols, vec!["a", crate::core::NOLETTER_SYMBOL, "b"]);
        let s = sequence_log_prob(&post, &symbols).unwrap();
        assert!(s.log_prob.abs() < 1e-12);
    }

    #[test]
    fn beam_with_lm_skips_noletter_in_context() {
        // Alphabet includes the no-letter symbol; the LM covers letters only.
        let a = Alphabet::from_chars("ab", true).unwrap();
        let noletter = a.noletter_index().unwrap();
        let mut rows = vec![vec![0.0; a.size()]; 3];
        rows[0][0] = 1.0; // a
        rows[1][noletter] = 1.0; // ∅
        rows[2][1] = 1.0; // b
        let post = Posteriorgram::new(a, rows).unwrap();
        let model = crate::lm::train_ngram(
            &[symbols_from_str("ab"), symbols_from_str("ba")],
            2,
            0.5,
        )
        .unwrap();
        let cfg = BeamConfig {
            beam_width: 8,
            lm_weight: 1.0,
            insertion_bias: 0.0,
        };
        let hyps = beam_decode(&post, Some(&model), &cfg).unwrap();
        assert_eq!(hyps[0].symbols, vec!["a", crate::core::NOLETTER_SYMBOL, "b"]);
        // The LM term must equal the LM's score of the letters alone: the
        // ∅ neither contributes a term nor enters the context.
        let letters_only = symbols_from_str("ab");
        let expected = crate::lm::sequence_log_prob(&model, &letters_only).unwrap();
        assert!((hyps[0].lm_log_prob - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_posteriorgrams() {
        assert!(Posteriorgram::new(abc(1), vec![]).is_err());
        assert!(Posteriorgram::new(abc(1), vec![vec![0.9, 0.6]]).is_err());
        assert!(Posteriorgram::new(abc(1), vec![vec![1.0]]).is_err());
        assert!(Posteriorgram::new(abc(1), vec![vec![-0.2, 1.2]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn marginal_invariant_to_joint_symbol_permutation(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let post = random_pg(&mut rng, 4, 3);
            let labels = symbols_from_str("ab");
            let base = sequence_log_prob(&post, &labels).unwrap();

            // Swap letters a<->b jointly in the alphabet rows and the labels.
            let swapped_alphabet = Alphabet::from_chars("abc", false).unwrap();
            let frames: Vec<Vec<f64>> = (0..post.num_frames())
                .map(|t| {
                    let r = post.frame(t);
                    vec![r[1], r[0], r[2], r[3]]
                })
                .collect();
            let swapped = Posteriorgram::new(swapped_alphabet, frames).unwrap();
            let swapped_labels = symbols_from_str("ba");
            let permuted = sequence_log_prob(&swapped, &swapped_labels).unwrap();
            prop_assert!((base.log_prob - permuted.log_prob).abs() < 1e-12);
        }
    }
}
