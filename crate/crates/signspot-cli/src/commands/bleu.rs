use std::path::PathBuf;

use serde_json::json;

use signspot::metrics::{bleu_n, rouge_l};

use crate::config::resolve;
use crate::emit::to_canonical_pretty;
use crate::error::{CliError, CliResult};
use crate::formats::{read_to_string, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Hypotheses, one sentence per line.
    #[arg(long)]
    hypotheses: PathBuf,
    /// References, one sentence per line, parallel to the hypotheses.
    #[arg(long)]
    references: PathBuf,
    /// Highest n-gram order to report (1..=4).
    #[arg(long)]
    max_n: Option<usize>,
    #[arg(long, default_value = "-")]
    output: String,
}

/// Whitespace tokenization, lowercased.
fn tokenize(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(|t| t.to_lowercase()).collect())
        .collect()
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let max_n = resolve(args.max_n, ctx.config.usize("max-n")?, 4);
    let hyps = tokenize(&read_to_string(&args.hypotheses)?);
    let refs = tokenize(&read_to_string(&args.references)?);
    if hyps.len() != refs.len() {
        return Err(CliError::Data(format!(
            "{} has {} lines but {} has {}",
            args.hypotheses.display(),
            hyps.len(),
            args.references.display(),
            refs.len()
        )));
    }

    let mut report = serde_json::Map::new();
    report.insert("schema".into(), json!("bleu-report/1"));
    report.insert("sentences".into(), json!(hyps.len()));
    for order in 1..=max_n {
        report.insert(format!("BLEU-{order}"), json!(bleu_n(&hyps, &refs, order)?));
    }
    report.insert("ROUGE-L".into(), json!(rouge_l(&hyps, &refs)?));
    write_output(
        &args.output,
        &to_canonical_pretty(&serde_json::Value::Object(report)),
    )
}
