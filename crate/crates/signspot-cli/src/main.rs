//! `signspot` — command-line toolkit for sign-spotting pipelines: CTC
//! decoding, character LM training, tube linking, detection evaluation,
//! spotting, retrieval evaluation, BLEU scoring, and gradient checks.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data validation
//! error (with file and line diagnostics).

mod commands;
mod config;
mod emit;
mod error;
mod formats;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{resolve, ConfigMap};
use error::CliResult;

#[derive(Parser)]
#[command(name = "signspot", version, about = "Sign spotting and fingerspelling search toolkit")]
struct Cli {
    /// JSON config file supplying flag defaults (flags override).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for record-parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for seeded operations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a posteriorgram greedily or by LM-weighted beam search.
    CtcDecode(commands::ctc_decode::Args),
    /// Train an add-k character n-gram language model.
    LmTrain(commands::lm_train::Args),
    /// Report language-model perplexity on a corpus.
    LmPpl(commands::lm_ppl::Args),
    /// Link per-frame boxes into a smoothed tube per video.
    LinkTube(commands::link_tube::Args),
    /// Evaluate detections: AP@IoU, AP@Acc, and MSA.
    DetectEval(commands::detect_eval::Args),
    /// Spot lexical and fingerspelled signs against sentences.
    Spot(commands::spot::Args),
    /// Score clips against words and evaluate retrieval.
    RetrieveEval(commands::retrieve_eval::Args),
    /// Corpus BLEU and ROUGE-L.
    Bleu(commands::bleu::Args),
    /// Finite-difference checks of the fusion gradients.
    FusionCheck(commands::fusion_check::Args),
}

/// Shared command context: resolved config map and the run seed.
pub struct Ctx {
    pub config: ConfigMap,
    pub seed: u64,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = ConfigMap::load(cli.config.as_deref())?;
    let jobs = resolve(cli.jobs, config.usize("jobs")?, 1);
    if jobs == 0 {
        return Err(error::CliError::Usage("--jobs must be >= 1".into()));
    }
    let seed = resolve(cli.seed, config.u64("seed")?, 0);
    let ctx = Ctx { config, seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| error::CliError::Usage(format!("cannot build worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::CtcDecode(args) => commands::ctc_decode::run(args, &ctx),
        Command::LmTrain(args) => commands::lm_train::run(args, &ctx),
        Command::LmPpl(args) => commands::lm_ppl::run(args, &ctx),
        Command::LinkTube(args) => commands::link_tube::run(args, &ctx),
        Command::DetectEval(args) => commands::detect_eval::run(args, &ctx),
        Command::Spot(args) => commands::spot::run(args, &ctx),
        Command::RetrieveEval(args) => commands::retrieve_eval::run(args, &ctx),
        Command::Bleu(args) => commands::bleu::run(args, &ctx),
        Command::FusionCheck(args) => commands::fusion_check::run(args, &ctx),
    })
}
