use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};

use signspot::core::{symbols_from_str, LabeledSegment, ScoredSegment, Symbols, TimeSegment};
use signspot::metrics::{corpus_ap_at_acc, corpus_ap_at_iou, corpus_msa, LabeledVideo, MetricConfig, MsaVideo};

use crate::config::{parse_threshold_list, resolve};
use crate::emit::to_canonical_pretty;
use crate::error::{CliError, CliResult};
use crate::formats::{load_segments, load_video_meta, require_scored, write_output};
use crate::Ctx;

#[derive(clap::Args)]
pub struct Args {
    /// Predicted segments (seg/1) with scores; transcripts enable AP@Acc/MSA.
    #[arg(long)]
    predictions: PathBuf,
    /// Ground-truth segments (seg/1); transcripts enable AP@Acc/MSA.
    #[arg(long)]
    ground_truth: PathBuf,
    /// Per-video frame counts (vid/1); defaults to the last segment end.
    #[arg(long)]
    video_meta: Option<PathBuf>,
    /// Comma-separated AP@IoU thresholds.
    #[arg(long)]
    iou_thresholds: Option<String>,
    /// Comma-separated AP@Acc accuracy thresholds.
    #[arg(long)]
    acc_thresholds: Option<String>,
    /// IoU gate inside AP@Acc matching.
    #[arg(long)]
    acc_iou_threshold: Option<f64>,
    #[arg(long)]
    recall_levels: Option<usize>,
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Default)]
struct VideoData {
    preds: Vec<(ScoredSegment, Symbols)>,
    gts: Vec<(TimeSegment, Option<Symbols>)>,
}

pub fn run(args: Args, ctx: &Ctx) -> CliResult<()> {
    let defaults = MetricConfig::default();
    let iou_thresholds = match args.iou_thresholds.or(ctx.config.string("iou-thresholds")?) {
        Some(list) => parse_threshold_list(&list)?,
        None => defaults.iou_thresholds.clone(),
    };
    let acc_thresholds = match args.acc_thresholds.or(ctx.config.string("acc-thresholds")?) {
        Some(list) => parse_threshold_list(&list)?,
        None => defaults.acc_thresholds.clone(),
    };
    let acc_iou = resolve(
        args.acc_iou_threshold,
        ctx.config.f64("acc-iou-threshold")?,
        defaults.acc_iou_threshold,
    );
    let recall_levels = resolve(
        args.recall_levels,
        ctx.config.usize("recall-levels")?,
        defaults.recall_levels,
    );
    if recall_levels == 0 {
        return Err(CliError::Usage("--recall-levels must be >= 1".into()));
    }

    let mut videos: BTreeMap<String, VideoData> = BTreeMap::new();
    for seg in load_segments(&args.predictions)? {
        let scored = require_scored(&args.predictions, &seg)?;
        let transcript = seg
            .transcript
            .as_deref()
            .map(symbols_from_str)
            .unwrap_or_default();
        videos
            .entry(seg.video_id.clone())
            .or_default()
            .preds
            .push((scored, transcript));
    }
    let mut total_gts = 0usize;
    for seg in load_segments(&args.ground_truth)? {
        // A ground truth's word doubles as its transcript when none is given.
        let transcript = seg
            .transcript
            .as_deref()
            .or(seg.word.as_deref())
            .map(symbols_from_str);
        if let Some(t) = &transcript {
            if t.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: empty transcript for video {:?}",
                    args.ground_truth.display(),
                    seg.video_id
                )));
            }
        }
        total_gts += 1;
        videos
            .entry(seg.video_id.clone())
            .or_default()
            .gts
            .push((seg.segment, transcript));
    }
    let meta = args
        .video_meta
        .as_deref()
        .map(load_video_meta)
        .transpose()?
        .unwrap_or_default();

    let iou_videos: Vec<(Vec<ScoredSegment>, Vec<TimeSegment>)> = videos
        .values()
        .map(|v| {
            (
                v.preds.iter().map(|(p, _)| *p).collect(),
                v.gts.iter().map(|(g, _)| *g).collect(),
            )
        })
        .collect();

    // AP@Acc and MSA need a transcript on every ground truth.
    let labeled: Option<Vec<(String, LabeledVideo)>> =
        videos
            .iter()
            .map(|(id, v)| {
                let gts = v
                    .gts
                    .iter()
                    .map(|(seg, t)| {
                        t.clone()
                            .and_then(|t| LabeledSegment::new(*seg, t).ok())
                    })
                    .collect::<Option<Vec<_>>>()?;
                Some((id.clone(), (v.preds.clone(), gts)))
            })
            .collect();

    let mut report = serde_json::Map::new();
    report.insert("schema".into(), json!("detect-report/1"));
    report.insert("videos".into(), json!(videos.len()));
    report.insert(
        "predictions".into(),
        json!(videos.values().map(|v| v.preds.len()).sum::<usize>()),
    );
    report.insert("ground_truths".into(), json!(total_gts));
    report.insert("recall_levels".into(), json!(recall_levels));

    let ap_iou: Vec<(f64, Option<f64>)> = iou_thresholds
        .par_iter()
        .map(|&delta| (delta, corpus_ap_at_iou(&iou_videos, delta, recall_levels)))
        .collect();
    for (delta, ap) in ap_iou {
        report.insert(format!("AP@IoU={delta}"), opt_value(ap));
    }

    match &labeled {
        Some(videos_labeled) => {
            let acc_input: Vec<LabeledVideo> =
                videos_labeled.iter().map(|(_, v)| v.clone()).collect();
            let ap_acc: Vec<(f64, Option<f64>)> = acc_thresholds
                .par_iter()
                .map(|&delta| {
                    (
                        delta,
                        corpus_ap_at_acc(&acc_input, delta, acc_iou, recall_levels),
                    )
                })
                .collect();
            for (delta, ap) in ap_acc {
                report.insert(format!("AP@Acc={delta}"), opt_value(ap));
            }

            let msa_videos: Vec<MsaVideo> = videos_labeled
                .iter()
                .map(|(id, (preds, gts))| {
                    let max_end = preds
                        .iter()
                        .map(|(p, _)| p.segment.end())
                        .chain(gts.iter().map(|g| g.segment.end()))
                        .max()
                        .unwrap_or(1);
                    MsaVideo {
                        preds: preds.clone(),
                        gts: gts.clone(),
                        total_frames: meta.get(id).copied().unwrap_or(max_end),
                    }
                })
                .collect();
            let (msa_value, best_delta) = corpus_msa(&msa_videos, None)?;
            report.insert("MSA".into(), json!(msa_value));
            // An infinite threshold means "keep no predictions".
            report.insert(
                "MSA_best_delta_f".into(),
                if best_delta.is_finite() {
                    json!(best_delta)
                } else {
                    Value::Null
                },
            );
        }
        None => {
            for delta in &acc_thresholds {
                report.insert(format!("AP@Acc={delta}"), Value::Null);
            }
            report.insert("MSA".into(), Value::Null);
            report.insert("MSA_best_delta_f".into(), Value::Null);
        }
    }

    write_output(&args.output, &to_canonical_pretty(&Value::Object(report)))
}

fn opt_value(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(x),
        None => Value::Null,
    }
}
