use std::path::PathBuf;

use serde_json::json;

use signspot::lm::perplexity;

use crate::commands::load_char_corpus;
use crate::emit::to_canonical_pretty;
use crate::error::CliResult;
use crate::formats::{load_lm, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Language model JSON (lm/1).
    #[arg(long)]
    lm: PathBuf,
    /// Evaluation text: one symbol sequence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "-")]
    output: String,
}

pub fn run(args: Args, _ctx: &Ctx) -> CliResult<()> {
    let model = load_lm(&args.lm)?;
    let corpus = load_char_corpus(&args.corpus)?;
    let ppl = perplexity(&model, &corpus)?;
    let symbols: usize = corpus.iter().map(|s| s.len() + 1).sum();
    let report = json!({
        "schema": "ppl-report/1",
        "perplexity": ppl,
        "sequences": corpus.len(),
        "predicted_symbols": symbols,
    });
    write_output(&args.output, &to_canonical_pretty(&report))
}
