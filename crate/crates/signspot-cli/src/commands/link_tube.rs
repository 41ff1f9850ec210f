use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;

use signspot::core::Box2D;
use signspot::linker::{frame_nms, link_tube, smooth_tube, FrameBoxes, LinkConfig};

use crate::config::resolve;
use crate::emit::to_canonical_line;
use crate::error::{CliError, CliResult};
use crate::formats::{load_frame_boxes, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Per-frame boxes JSON-Lines (fb/1).
    #[arg(long)]
    boxes: PathBuf,
    /// Pairwise IoU weight in the linking score.
    #[arg(long)]
    lambda: Option<f64>,
    /// Per-frame NMS IoU threshold applied before linking.
    #[arg(long)]
    nms_iou: Option<f64>,
    /// Boxes kept per frame after NMS.
    #[arg(long)]
    max_boxes: Option<usize>,
    /// Half-window of the tube moving average.
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long, default_value = "-")]
    output: String,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let videos = load_frame_boxes(&args.boxes)?;
    let lambda = resolve(args.lambda, ctx.config.f64("lambda")?, 0.3);
    let nms_iou = resolve(args.nms_iou, ctx.config.f64("nms-iou")?, 0.9);
    let max_boxes = resolve(args.max_boxes, ctx.config.usize("max-boxes")?, 50);
    let half_window = resolve(args.smooth_window, ctx.config.usize("smooth-window")?, 5);
    let cfg = LinkConfig {
        lambda_link: lambda,
        smooth_half_window: half_window,
        ..LinkConfig::default()
    };

    let items: Vec<(String, Vec<Vec<Box2D>>)> = videos.into_iter().collect();
    let lines: Vec<String> = items
        .into_par_iter()
        .map(|(video_id, frames)| -> CliResult<String> {
            let context = |e: signspot::Error| {
                CliError::Data(format!("video {video_id:?}: {e}"))
            };
            let pruned: Vec<Vec<Box2D>> = frames
                .iter()
                .map(|f| frame_nms(f, nms_iou, max_boxes))
                .collect::<Result<_, _>>()
                .map_err(context)?;
            let fb = FrameBoxes::new(pruned).map_err(context)?;
            let (indices, score) = link_tube(&fb, &cfg).map_err(context)?;
            let chosen: Vec<Box2D> = indices
                .iter()
                .enumerate()
                .map(|(t, &i)| fb.frame(t)[i])
                .collect();
            let smoothed = smooth_tube(&chosen, cfg.smooth_half_window);
            let boxes: Vec<serde_json::Value> = smoothed
                .iter()
                .enumerate()
                .map(|(t, b)| {
                    json!({
                        "frame": t,
                        "x1": b.x1, "y1": b.y1, "x2": b.x2, "y2": b.y2,
                        "score": b.score,
                    })
                })
                .collect();
            Ok(to_canonical_line(&json!({
                "schema": "tube/1",
                "video_id": video_id,
                "score": score,
                "boxes": boxes,
            })))
        })
        .collect::<CliResult<_>>()?;

    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    write_output(&args.output, &body)
}
