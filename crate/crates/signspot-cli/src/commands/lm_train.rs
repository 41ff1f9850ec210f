use std::path::PathBuf;

use signspot::lm::train_ngram;

use crate::commands::load_char_corpus;
use crate::config::resolve;
use crate::emit::to_canonical_pretty;
use crate::error::CliResult;
use crate::formats::{lm_to_value, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Training text: one symbol sequence per line, one symbol per character.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    smoothing_k: Option<f64>,
    #[arg(long, default_value = "-")]
    output: String,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let corpus = load_char_corpus(&args.corpus)?;
    let order = resolve(args.order, ctx.config.usize("order")?, 5);
    let k = resolve(args.smoothing_k, ctx.config.f64("smoothing-k")?, 1.0);
    let model = train_ngram(&corpus, order, k)?;
    write_output(&args.output, &to_canonical_pretty(&lm_to_value(&model)?))
}
