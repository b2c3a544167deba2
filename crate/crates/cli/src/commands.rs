use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, ensure, Context, Result};
use drivable_core::geometry::convex_hull;
use drivable_core::metrics::{confusion, iou, miou, ConfusionCounts};
use drivable_core::overlay::render_overlay;
use drivable_core::pipeline::net::{run_remote, serve_connection};
use drivable_core::pipeline::source::list_masks;
use drivable_core::pipeline::{dir_source, gen_source, GenSpec, MaskFrame, NullSink, PipelineConfig, PipelineStats};
use drivable_core::pnm::{read_mask, write_mask};
use drivable_core::report::RegionDocument;
use drivable_core::scenes::{generate, raster_iou, SceneOracle, SceneSpec};
use drivable_core::{extract_regions, gradcheck, loss, ClassId, Lane, PolygonSet, RoadClass, VERSION};
use serde::Serialize;
use serde_json::{json, Value};

use crate::endpoints::{SinkArg, SourceArg};
use crate::{Cli, Command, EvalMode};

/// Writes `value` as pretty JSON to `out`, or stdout.
fn emit(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn with_overrides(mut cfg: PipelineConfig, workers: Option<usize>, queue: Option<usize>) -> Result<PipelineConfig> {
    if let Some(w) = workers {
        cfg = cfg.with_worker_pool_size(w)?;
    }
    if let Some(q) = queue {
        cfg = cfg.with_queue_capacity(q)?;
    }
    Ok(cfg)
}

fn report(command: &str, cli: &Cli, config: &PipelineConfig, result: Value) -> Value {
    json!({
        "command": command,
        "version": VERSION,
        "seed": cli.seed,
        "config": config,
        "result": result,
    })
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once('x').with_context(|| format!("size {s:?} must be WxH"))?;
    Ok((w.parse().context("width")?, h.parse().context("height")?))
}

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Process { mask, road_class, overlay, frame_id } => {
            process(cli, &cfg, mask, road_class.as_deref(), overlay.as_deref(), *frame_id)
        }
        Command::Run { source, sink, workers, queue, stats, remote } => {
            let cfg = with_overrides(cfg, *workers, *queue)?;
            run(cli, &cfg, source, sink, stats.as_deref(), remote.as_deref())
        }
        Command::Eval { pred, gt, mode } => eval(cli, &cfg, pred, gt, *mode),
        Command::Gen { count, out_dir, size, spec } => gen(cli, &cfg, *count, out_dir, size, spec.as_deref()),
        Command::LossCheck { cases, step, tolerance } => loss_check(cli, &cfg, *cases, *step, *tolerance),
        Command::Bench { frames, warmup, size, workers, queue } => {
            let cfg = with_overrides(cfg, *workers, *queue)?;
            bench(cli, &cfg, *frames, *warmup, size)
        }
    }
}

fn process(cli: &Cli, cfg: &PipelineConfig, mask_path: &Path, road_class: Option<&str>, overlay: Option<&Path>, frame_id: u32) -> Result<ExitCode> {
    let (mask, stored) = read_mask(mask_path).with_context(|| format!("reading {}", mask_path.display()))?;
    let rc = match road_class {
        Some(name) => name.parse::<RoadClass>()?,
        None => stored.unwrap_or_default(),
    };
    let set = extract_regions(&mask, cfg.extraction())?;
    let doc = RegionDocument::new(frame_id, rc, &set).to_bytes();
    // Everything is computed before the first write, so a failure leaves no
    // partial output behind.
    let image = overlay.map(|_| render_overlay(&mask, &set).encode_ppm());
    if let (Some(path), Some(bytes)) = (overlay, image) {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    match &cli.out {
        Some(p) => fs::write(p, &doc).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout();
            out.write_all(&doc)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli, cfg: &PipelineConfig, source: &str, sink: &str, stats_path: Option<&Path>, remote: Option<&str>) -> Result<ExitCode> {
    let source_arg = SourceArg::parse(source, cli.seed)?;
    let sink_arg = SinkArg::parse(sink)?;
    let mut target = sink_arg.open()?;
    let mut protocol_error = None;

    let stats: PipelineStats = match (&source_arg, remote) {
        (SourceArg::Tcp(_), Some(_)) => bail!("--remote needs a dir: or gen: source"),
        (SourceArg::Tcp(addr), None) => {
            let listener = TcpListener::bind(addr.as_str()).with_context(|| format!("binding {addr}"))?;
            // status lines must not abort the run if stderr went away
            let _ = writeln!(std::io::stderr(), "listening on {}", listener.local_addr()?);
            let (stream, peer) = listener.accept()?;
            let _ = writeln!(std::io::stderr(), "serving {peer}");
            let report = serve_connection(stream, cfg, target.as_mut())?;
            protocol_error = report.protocol_error.map(|e| json!({ "code": e.code(), "message": e.to_string() }));
            report.stats
        }
        (src, remote) => {
            let frames: Box<dyn Iterator<Item = drivable_core::Result<MaskFrame>> + Send> = match src {
                SourceArg::Dir(p) => Box::new(dir_source(p).with_context(|| format!("listing {}", p.display()))?),
                SourceArg::Gen(g) => Box::new(gen_source(*g)),
                SourceArg::Tcp(_) => unreachable!(),
            };
            match remote {
                Some(addr) => run_remote(addr, frames, target.as_mut()).with_context(|| format!("remote run via {addr}"))?,
                None => drivable_core::run_pipeline(frames, target.as_mut(), cfg)?,
            }
        }
    };

    if let Some(p) = stats_path {
        emit(Some(p), &stats)?;
    }
    let result = json!({
        "source": source,
        "sink": sink,
        "remote": remote,
        "stats": stats,
        "protocol_error": protocol_error,
    });
    emit(cli.out.as_deref(), &report("run", cli, cfg, result))?;
    Ok(ExitCode::SUCCESS)
}

fn class_ious(c: &ConfusionCounts) -> Value {
    let per: serde_json::Map<String, Value> = ClassId::ALL.iter().map(|&k| (k.name().to_owned(), json!(iou(c, k)))).collect();
    Value::Object(per)
}

fn eval(cli: &Cli, cfg: &PipelineConfig, pred: &Path, gt: &Path, mode: EvalMode) -> Result<ExitCode> {
    let result = match mode {
        EvalMode::Masks => eval_masks(pred, gt)?,
        EvalMode::Regions => eval_regions(pred, gt)?,
    };
    emit(cli.out.as_deref(), &report("eval", cli, cfg, result))?;
    Ok(ExitCode::SUCCESS)
}

fn eval_masks(pred: &Path, gt: &Path) -> Result<Value> {
    let files = list_masks(pred)?;
    ensure!(!files.is_empty(), "no .pgm masks in {}", pred.display());
    let mut counts = ConfusionCounts::default();
    let (mut rc_pred, mut rc_gt) = (Vec::new(), Vec::new());
    for p in &files {
        let name = p.file_name().expect("listed file has a name");
        let g = gt.join(name);
        let (pm, prc) = read_mask(p).with_context(|| format!("reading {}", p.display()))?;
        let (gm, grc) = read_mask(&g).with_context(|| format!("reading {}", g.display()))?;
        counts += confusion(&pm, &gm).with_context(|| format!("comparing {}", name.to_string_lossy()))?;
        if let (Some(a), Some(b)) = (prc, grc) {
            rc_pred.push(a);
            rc_gt.push(b);
        }
    }
    let accuracy = if rc_gt.is_empty() { None } else { Some(drivable_core::metrics::accuracy(&rc_pred, &rc_gt)?) };
    Ok(json!({
        "mode": "masks",
        "frames": files.len(),
        "miou": miou(&counts)?,
        "iou": class_ious(&counts),
        "accuracy": accuracy,
        "road_class_frames": rc_gt.len(),
        "counts": counts,
    }))
}

fn doc_lane_raster(doc: &RegionDocument, lane: Lane, width: usize, height: usize) -> Vec<bool> {
    let Some(entry) = doc.region(lane) else { return vec![false; width * height] };
    let pieces: Vec<_> = entry
        .pieces
        .iter()
        .filter_map(|ring| convex_hull(&ring.iter().map(|v| drivable_core::Point::new(v[0], v[1])).collect::<Vec<_>>()))
        .collect();
    PolygonSet::from(pieces).rasterize(width, height)
}

fn eval_regions(pred: &Path, gt: &Path) -> Result<Value> {
    let mut oracles: Vec<PathBuf> = fs::read_dir(gt)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".oracle.json"))
        .collect();
    oracles.sort();
    ensure!(!oracles.is_empty(), "no .oracle.json files in {}", gt.display());

    let (mut ious, mut frames, mut labels_correct) = (Vec::new(), Vec::new(), 0usize);
    let (mut rc_pred, mut rc_gt) = (Vec::new(), Vec::new());
    for op in &oracles {
        let stem = op.file_name().unwrap().to_string_lossy().trim_end_matches(".oracle.json").to_owned();
        let oracle: SceneOracle = serde_json::from_slice(&fs::read(op)?).with_context(|| format!("parsing {}", op.display()))?;
        let dp = pred.join(format!("{stem}.json"));
        let doc = RegionDocument::from_bytes(&fs::read(&dp).with_context(|| format!("reading {}", dp.display()))?)
            .with_context(|| format!("parsing {}", dp.display()))?;
        rc_pred.push(doc.road_class);
        rc_gt.push(oracle.road_class);

        let mut lanes = serde_json::Map::new();
        let mut correct = doc.regions.iter().all(|r| r.lane.lane().is_some());
        for lane in Lane::ALL {
            let truth = oracle.lane_pixels(lane);
            correct &= truth.is_some() == doc.region(lane).is_some();
            if let Some(truth) = truth {
                let v = raster_iou(&doc_lane_raster(&doc, lane, oracle.width, oracle.height), &truth);
                ious.push(v);
                lanes.insert(format!("{lane:?}").to_lowercase(), json!(v));
            }
        }
        labels_correct += usize::from(correct);
        frames.push(json!({ "frame": stem, "iou": lanes, "labels_correct": correct }));
    }
    let min = ious.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = ious.iter().sum::<f64>() / ious.len().max(1) as f64;
    Ok(json!({
        "mode": "regions",
        "frames": oracles.len(),
        "lanes": ious.len(),
        "min_iou": if ious.is_empty() { None } else { Some(min) },
        "mean_iou": mean,
        "labels_correct": labels_correct,
        "accuracy": drivable_core::metrics::accuracy(&rc_pred, &rc_gt)?,
        "per_frame": frames,
    }))
}

fn gen(cli: &Cli, cfg: &PipelineConfig, count: u32, out_dir: &Path, size: &str, spec: Option<&Path>) -> Result<ExitCode> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let write = |i: u32, mask: &drivable_core::SegmentationMask, oracle: &SceneOracle| -> Result<()> {
        write_mask(&out_dir.join(format!("{i:06}.pgm")), mask, Some(oracle.road_class))?;
        fs::write(out_dir.join(format!("{i:06}.oracle.json")), serde_json::to_vec_pretty(oracle)?)?;
        Ok(())
    };
    let written = match spec {
        Some(p) => {
            let spec: SceneSpec = serde_json::from_slice(&fs::read(p)?).with_context(|| format!("parsing {}", p.display()))?;
            let (mask, oracle) = generate(&spec)?;
            write(0, &mask, &oracle)?;
            1
        }
        None => {
            let (width, height) = parse_size(size)?;
            let g = GenSpec { count, seed: cli.seed, width, height };
            for i in 0..count {
                let (mask, oracle, _) = g.scene(i)?;
                write(i, &mask, &oracle)?;
            }
            count
        }
    };
    let result = json!({ "frames": written, "out_dir": out_dir, "size": size, "spec": spec });
    emit(cli.out.as_deref(), &report("gen", cli, cfg, result))?;
    Ok(ExitCode::SUCCESS)
}

fn loss_check(cli: &Cli, cfg: &PipelineConfig, cases: usize, step: f64, tolerance: f64) -> Result<ExitCode> {
    let r = gradcheck::run(cases, cli.seed, step, tolerance);
    let spot: Vec<f64> = loss::enet_weights(&[0.0, 1.0], loss::DEFAULT_ENET_K)?;
    let result = json!({
        "gradients": r,
        "enet_weight_p0": spot[0],
        "enet_weight_p1": spot[1],
    });
    emit(cli.out.as_deref(), &report("loss-check", cli, cfg, result))?;
    if r.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed: max relative error above {tolerance}");
        Ok(ExitCode::FAILURE)
    }
}

fn bench(cli: &Cli, cfg: &PipelineConfig, frames: u32, warmup: u32, size: &str) -> Result<ExitCode> {
    let (width, height) = parse_size(size)?;
    let g = GenSpec { count: frames, seed: cli.seed, width, height };
    let masks: Vec<MaskFrame> = gen_source(g).collect::<drivable_core::Result<_>>()?;
    let warm = masks.iter().cycle().take(warmup as usize).cloned().map(Ok);
    drivable_core::run_pipeline(warm, &mut NullSink, cfg)?;
    let stats = drivable_core::run_pipeline(masks.into_iter().map(Ok), &mut NullSink, cfg)?;
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    let result = json!({ "frames": frames, "warmup": warmup, "size": size, "cores": cores, "stats": stats });
    emit(cli.out.as_deref(), &report("bench", cli, cfg, result))?;
    Ok(ExitCode::SUCCESS)
}
