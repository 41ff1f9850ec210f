pub mod bleu;
pub mod ctc_decode;
pub mod detect_eval;
pub mod fusion_check;
pub mod link_tube;
pub mod lm_ppl;
pub mod lm_train;
pub mod retrieve_eval;
pub mod spot;

use std::path::Path;

use crate::error::CliResult;
use crate::formats::read_to_string;

/// Loads a text corpus: one symbol sequence per non-empty line, one symbol
/// per character.
pub fn load_char_corpus(path: &Path) -> CliResult<Vec<Vec<String>>> {
    let text = read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.chars().map(|c| c.to_string()).collect())
        .collect())
}
