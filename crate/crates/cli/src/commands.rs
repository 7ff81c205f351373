use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde_json::{json, Value};

use herdtrack_core::filters::PenRegion;
use herdtrack_core::image::GrayImage;
use herdtrack_core::io::{load_clip, load_pen, read_json, write_atomic, FramesFile, TracksFile};
use herdtrack_core::metrics::{evaluate, sweep_thresholds, threshold_range, ScoredBox, SweepImage};
use herdtrack_core::pipeline::{post_qc, run_long_term, Backends, Clip, ReferenceDetector, ReferencePropagator};
use herdtrack_core::reid::ReferenceEmbedder;
use herdtrack_core::render::overlay;
use herdtrack_core::simgen::{generate_scenario, ScenarioSpec};
use herdtrack_core::track::{visible_at, Track};

use crate::config::{resolve, RunConfig};
use crate::output::{provenance, write_json, write_text};
use crate::{Command, Common};

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct CmdError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T> = Result<T, CmdError>;

/// Bad flags, missing or malformed inputs, invalid configuration.
pub fn usage(e: impl Display) -> CmdError {
    CmdError {
        code: 2,
        error: anyhow!("{e}"),
    }
}

/// Failure while processing valid inputs.
pub fn runtime(e: impl Display) -> CmdError {
    CmdError {
        code: 1,
        error: anyhow!("{e}"),
    }
}

pub fn run(cmd: Command) -> CmdResult<()> {
    match cmd {
        Command::Track {
            input,
            pen,
            threshold,
            report,
            common,
        } => {
            let mut cfg = config(&common)?;
            if let Some(t) = threshold {
                cfg.pipeline.detection_threshold = t;
                cfg.validate().map_err(usage)?;
            }
            track(&cfg, pick_many(input, &cfg.io.inputs), pen.or(cfg.io.pen.clone()), out(&common, &cfg)?, report)
        }
        Command::Evaluate {
            input,
            gt,
            threshold,
            csv,
            common,
        } => {
            let mut cfg = config(&common)?;
            if let Some(t) = threshold {
                cfg.metrics.iou_threshold = t;
                cfg.validate().map_err(usage)?;
            }
            let pred = input
                .or_else(|| cfg.io.inputs.first().cloned())
                .ok_or_else(|| usage("evaluate needs --input"))?;
            let gt = gt.or(cfg.io.gt.clone()).ok_or_else(|| usage("evaluate needs --gt"))?;
            cmd_evaluate(&cfg, &pred, &gt, &out(&common, &cfg)?, csv.as_deref())
        }
        Command::Sweep {
            input,
            gt,
            threshold,
            csv,
            common,
        } => {
            let mut cfg = config(&common)?;
            if let Some(t) = threshold {
                cfg.metrics.iou_threshold = t;
                cfg.validate().map_err(usage)?;
            }
            let gt = gt.or(cfg.io.gt.clone()).ok_or_else(|| usage("sweep needs --gt"))?;
            cmd_sweep(&cfg, &pick_many(input, &cfg.io.inputs), &gt, &out(&common, &cfg)?, csv.as_deref())
        }
        Command::Simulate {
            input,
            seed,
            no_images,
            common,
        } => {
            let cfg = config(&common)?;
            cmd_simulate(&cfg, input.as_deref(), seed, !no_images, &out(&common, &cfg)?)
        }
        Command::Render { input, frames, common } => {
            let cfg = config(&common)?;
            let tracks = input
                .or_else(|| cfg.io.inputs.first().cloned())
                .ok_or_else(|| usage("render needs --input"))?;
            cmd_render(&tracks, &pick_many(frames, &cfg.io.frames), &out(&common, &cfg)?)
        }
        Command::QcReport { input, common } => {
            let cfg = config(&common)?;
            let tracks = input
                .or_else(|| cfg.io.inputs.first().cloned())
                .ok_or_else(|| usage("qc-report needs --input"))?;
            cmd_qc(&cfg, &tracks, &out(&common, &cfg)?)
        }
    }
}

fn config(common: &Common) -> CmdResult<RunConfig> {
    resolve(common.config.as_deref(), &common.overrides).map_err(|e| usage(format!("{e:#}")))
}

fn out(common: &Common, cfg: &RunConfig) -> CmdResult<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.io.out.clone())
        .ok_or_else(|| usage("--out is required"))
}

fn pick_many(flags: Vec<PathBuf>, from_config: &[PathBuf]) -> Vec<PathBuf> {
    if flags.is_empty() {
        from_config.to_vec()
    } else {
        flags
    }
}

fn load_clips(paths: &[PathBuf]) -> CmdResult<Vec<Clip>> {
    if paths.is_empty() {
        return Err(usage("at least one frames file is required (--input)"));
    }
    let mut clips = paths
        .iter()
        .map(|p| load_clip(p).map_err(usage))
        .collect::<CmdResult<Vec<_>>>()?;
    clips.sort_by_key(|c| c.index);
    for w in clips.windows(2) {
        if w[0].index == w[1].index {
            return Err(usage(format!("clip index {} appears twice", w[0].index)));
        }
        if w[1].first_frame() <= w[0].last_frame() {
            return Err(usage(format!("clips {} and {} overlap in frame indices", w[0].index, w[1].index)));
        }
    }
    Ok(clips)
}

fn load_tracks_file(path: &Path) -> CmdResult<(TracksFile, Vec<Track>)> {
    let file: TracksFile = read_json(path).map_err(usage)?;
    let tracks = file.to_tracks().map_err(usage)?;
    Ok((file, tracks))
}

fn track(
    cfg: &RunConfig,
    inputs: Vec<PathBuf>,
    pen: Option<PathBuf>,
    out: PathBuf,
    report: Option<PathBuf>,
) -> CmdResult<()> {
    let pen_path = pen.ok_or_else(|| usage("a pen configuration is required (--pen)"))?;
    let pen_cfg = load_pen(&pen_path).map_err(usage)?;
    let clips = load_clips(&inputs)?;
    for c in &clips {
        if [c.width, c.height] != pen_cfg.frame_size {
            return Err(usage(format!(
                "clip {} is {}x{} but the pen is drawn for {:?}",
                c.index, c.width, c.height, pen_cfg.frame_size
            )));
        }
    }
    let pen = PenRegion::from_config(&pen_cfg).map_err(usage)?;

    let detector = ReferenceDetector {
        threshold: cfg.pipeline.detection_threshold,
    };
    let backends = Backends {
        detector: &detector,
        propagator: &ReferencePropagator::default(),
        embedder: &ReferenceEmbedder,
    };
    let result = run_long_term(&clips, &backends, &pen, &cfg.tracking()).map_err(runtime)?;
    for e in &result.report.events {
        log::warn!("clip {}: {}", e.clip, e.message);
    }

    let mut inputs_used: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    inputs_used.push(&pen_path);
    let prov = provenance("track", cfg, &inputs_used)?;
    let mut file = TracksFile::from_tracks(&result.tracks);
    file.qc = result.report.final_qc.flags.clone();
    file.excluded_spans = result.report.excluded_spans.clone();
    file.provenance = Some(prov.clone());
    write_json(&out, &file)?;
    if let Some(path) = report {
        write_json(&path, &json!({ "provenance": prov, "report": result.report }))?;
    }
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, pred_path: &Path, gt_path: &Path, out: &Path, csv: Option<&Path>) -> CmdResult<()> {
    let (_, pred) = load_tracks_file(pred_path)?;
    let (_, gt) = load_tracks_file(gt_path)?;
    let report = evaluate(&pred, &gt, &cfg.metrics).map_err(runtime)?;
    let mut value = serde_json::to_value(&report).map_err(runtime)?;
    let prov = provenance("evaluate", cfg, &[pred_path, gt_path])?;
    if let Value::Object(map) = &mut value {
        map.insert("provenance".into(), prov);
    }
    write_json(out, &value)?;
    if let Some(path) = csv {
        write_text(path, &report.per_frame_csv())?;
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, inputs: &[PathBuf], gt_path: &Path, out: &Path, csv: Option<&Path>) -> CmdResult<()> {
    let clips = load_clips(inputs)?;
    let (_, gt) = load_tracks_file(gt_path)?;
    let images: Vec<SweepImage> = clips
        .iter()
        .flat_map(|c| &c.frames)
        .map(|f| SweepImage {
            preds: f
                .detections
                .iter()
                .map(|d| ScoredBox {
                    bbox: d.bbox,
                    confidence: d.confidence,
                })
                .collect(),
            gts: visible_at(&gt, f.index)
                .into_iter()
                .filter_map(|(_, m)| m.bbox())
                .collect(),
        })
        .collect();
    let s = &cfg.sweep;
    let thresholds = threshold_range(s.start, s.end, s.step);
    let table = sweep_thresholds(&images, &thresholds, cfg.metrics.iou_threshold);

    let mut paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    paths.push(gt_path);
    let prov = provenance("sweep", cfg, &paths)?;
    write_json(out, &json!({ "provenance": prov, "sweep": table }))?;
    if let Some(path) = csv {
        let mut text = String::from("threshold,tp,fp,fn,precision,recall,f1\n");
        for r in &table.rows {
            text.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6}\n",
                r.threshold, r.counts.tp, r.counts.fp, r.counts.fn_, r.prf.precision, r.prf.recall, r.prf.f1
            ));
        }
        write_text(path, &text)?;
    }
    Ok(())
}

fn encode_pgm(img: &GrayImage) -> CmdResult<Vec<u8>> {
    let mut bytes = Vec::new();
    img.write_pgm(&mut bytes).map_err(runtime)?;
    Ok(bytes)
}

fn cmd_simulate(cfg: &RunConfig, spec_path: Option<&Path>, seed: Option<u64>, images: bool, out: &Path) -> CmdResult<()> {
    let mut spec: ScenarioSpec = match spec_path {
        Some(p) => read_json(p).map_err(usage)?,
        None => ScenarioSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let scenario = generate_scenario(&spec).map_err(usage)?;
    let inputs: Vec<&Path> = spec_path.into_iter().collect();
    let mut prov = provenance("simulate", cfg, &inputs)?;
    prov["scenario"] = serde_json::to_value(&spec).map_err(runtime)?;

    for clip in &scenario.clips {
        let image_dir = format!("images/clip{}", clip.index);
        if images {
            for f in &clip.frames {
                if let Some(img) = f.load_image().map_err(runtime)? {
                    let rel = format!("{image_dir}/{:06}.pgm", f.index);
                    write_atomic(&out.join(&rel), &encode_pgm(&img)?).map_err(runtime)?;
                }
            }
        }
        let mut file = FramesFile::from_clip(clip, |f| images.then(|| format!("{image_dir}/{:06}.pgm", f.index)));
        file.provenance = Some(prov.clone());
        write_json(&out.join(format!("clip_{}.json", clip.index)), &file)?;
    }
    let mut gt = TracksFile::from_tracks(&scenario.gt);
    gt.provenance = Some(prov.clone());
    write_json(&out.join("gt.json"), &gt)?;
    write_json(&out.join("pen.json"), &scenario.pen_config)?;
    write_json(&out.join("scenario.json"), &prov)?;
    Ok(())
}

fn cmd_render(tracks_path: &Path, frames: &[PathBuf], out: &Path) -> CmdResult<()> {
    let (file, tracks) = load_tracks_file(tracks_path)?;
    let clips = load_clips(frames)?;
    let mut flagged: BTreeSet<u64> = file.qc.iter().map(|f| f.frame).collect();
    for s in &file.excluded_spans {
        flagged.extend(s.span.start..=s.span.end);
    }
    for clip in &clips {
        for f in &clip.frames {
            let background = f
                .load_image()
                .map_err(runtime)?
                .unwrap_or_else(|| GrayImage::new(clip.width, clip.height));
            let img = overlay(&background, &tracks, f.index, flagged.contains(&f.index)).map_err(runtime)?;
            let mut bytes = Vec::new();
            img.write_ppm(&mut bytes).map_err(runtime)?;
            write_atomic(&out.join(format!("frame_{:06}.ppm", f.index)), &bytes).map_err(runtime)?;
        }
    }
    Ok(())
}

fn cmd_qc(cfg: &RunConfig, tracks_path: &Path, out: &Path) -> CmdResult<()> {
    let (_, tracks) = load_tracks_file(tracks_path)?;
    let report = post_qc(&tracks, &cfg.pipeline).map_err(runtime)?;
    let prov = provenance("qc-report", cfg, &[tracks_path])?;
    write_json(
        out,
        &json!({ "provenance": prov, "flags": report.flags, "error_spans": report.error_spans }),
    )
}
