use std::path::PathBuf;

use serde_json::json;

use signspot::core::symbols_to_string;
use signspot::ctc::{beam_decode, greedy_decode, BeamConfig};

use crate::config::resolve;
use crate::emit::to_canonical_pretty;
use crate::error::CliResult;
use crate::formats::{load_lm, load_posteriorgram, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Posteriorgram JSON (pg/1).
    #[arg(long)]
    posteriorgram: PathBuf,
    /// Language model JSON (lm/1).
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    beam_width: Option<usize>,
    #[arg(long)]
    lm_weight: Option<f64>,
    #[arg(long)]
    insertion_bias: Option<f64>,
    /// Greedy decode instead of beam search.
    #[arg(long)]
    greedy: bool,
    /// Hypotheses to report (default: the full beam).
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, default_value = "-")]
    output: String,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let post = load_posteriorgram(&args.posteriorgram)?;
    let model = args.lm.as_deref().map(load_lm).transpose()?;

    let hypotheses = if args.greedy {
        let (symbols, path) = greedy_decode(&post);
        let log_prob: f64 = path
            .iter()
            .enumerate()
            .map(|(t, &label)| post.frame(t)[label].ln())
            .sum();
        vec![json!({
            "rank": 1,
            "text": symbols_to_string(&symbols),
            "score": log_prob,
            "ctc_log_prob": log_prob,
            "lm_log_prob": 0.0,
        })]
    } else {
        let cfg = BeamConfig {
            beam_width: resolve(args.beam_width, ctx.config.usize("beam-width")?, 16),
            lm_weight: resolve(args.lm_weight, ctx.config.f64("lm-weight")?, 0.0),
            insertion_bias: resolve(args.insertion_bias, ctx.config.f64("insertion-bias")?, 0.0),
        };
        let top = resolve(args.top, ctx.config.usize("top")?, cfg.beam_width);
        beam_decode(&post, model.as_ref(), &cfg)?
            .into_iter()
            .take(top)
            .enumerate()
            .map(|(i, h)| {
                json!({
                    "rank": i + 1,
                    "text": symbols_to_string(&h.symbols),
                    "score": h.score,
                    "ctc_log_prob": h.ctc_log_prob,
                    "lm_log_prob": h.lm_log_prob,
                })
            })
            .collect()
    };

    let report = json!({
        "schema": "hyp/1",
        "frames": post.num_frames(),
        "mode": if args.greedy { "greedy" } else { "beam" },
        "hypotheses": hypotheses,
    });
    write_output(&args.output, &to_canonical_pretty(&report))
}
