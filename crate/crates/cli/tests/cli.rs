use std::fs;
use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread;

use drivable_core::pipeline::wire::{read_frame, FrameMessage, Payload, ReadOutcome};
use drivable_core::pnm::write_mask;
use drivable_core::{ClassId, SegmentationMask};
use serde_json::Value;

fn drivable() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drivable"))
}

fn ok(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn gen_sized(dir: &Path, count: u32, seed: u64, size: &str) {
    ok(drivable()
        .args(["gen", "--count", &count.to_string(), "--size", size, "--seed", &seed.to_string(), "--out-dir"])
        .arg(dir)
        .output()
        .unwrap());
}

fn gen(dir: &Path, count: u32, seed: u64) {
    gen_sized(dir, count, seed, "320x240");
}

#[test]
fn process_writes_document_and_overlay() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path(), 1, 5);
    let (out, ppm) = (tmp.path().join("r.json"), tmp.path().join("o.ppm"));
    let st = drivable()
        .args(["process", "--mask"])
        .arg(tmp.path().join("000000.pgm"))
        .arg("--overlay")
        .arg(&ppm)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let doc: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["frame_id"], 0);
    assert!(doc["regions"].as_array().unwrap().iter().any(|r| r["lane"] == "ego"));
    assert!(fs::read(&ppm).unwrap().starts_with(b"P6\n320 240\n255\n"));
}

#[test]
fn process_all_background_gives_empty_regions() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = tmp.path().join("bg.pgm");
    write_mask(&mask, &SegmentationMask::filled(32, 24, ClassId::Background).unwrap(), None).unwrap();
    let doc = ok(drivable().args(["process", "--road-class", "highway", "--mask"]).arg(&mask).output().unwrap());
    assert_eq!(doc["regions"], Value::Array(vec![]));
    assert_eq!(doc["road_class"], "highway");
    assert_eq!(doc["advice"]["usable_lanes"], Value::Array(vec![]));
}

#[test]
fn process_truncated_mask_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = tmp.path().join("m.pgm");
    write_mask(&mask, &SegmentationMask::filled(32, 24, ClassId::EgoLane).unwrap(), None).unwrap();
    let bytes = fs::read(&mask).unwrap();
    fs::write(&mask, &bytes[..bytes.len() - 10]).unwrap();
    let out = tmp.path().join("r.json");
    let res = drivable().args(["process", "--mask"]).arg(&mask).arg("--out").arg(&out).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
    assert!(!out.exists());
}

#[test]
fn gen_run_eval_recovers_lanes() {
    let tmp = tempfile::tempdir().unwrap();
    let (scenes, pred) = (tmp.path().join("scenes"), tmp.path().join("pred"));
    // full resolution: the 4× downsampling costs too much IoU on small frames
    gen_sized(&scenes, 8, 21, "640x480");
    let run = ok(drivable().arg("run").arg(format!("--source=dir:{}", scenes.display())).arg(format!("--sink=dir:{}", pred.display())).output().unwrap());
    assert_eq!(run["result"]["stats"]["frames_processed"], 8);
    let eval = ok(drivable().args(["eval", "--mode", "regions", "--pred"]).arg(&pred).arg("--gt").arg(&scenes).output().unwrap());
    let r = &eval["result"];
    assert!(r["min_iou"].as_f64().unwrap() >= 0.90, "{r}");
    assert_eq!(r["labels_correct"], 8);
    assert_eq!(r["accuracy"], 1.0);
}

#[test]
fn eval_identical_masks_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path(), 3, 2);
    let eval = ok(drivable().args(["eval", "--pred"]).arg(tmp.path()).arg("--gt").arg(tmp.path()).output().unwrap());
    assert_eq!(eval["result"]["miou"], 1.0);
    assert_eq!(eval["result"]["accuracy"], 1.0);
}

#[test]
fn reports_embed_config_seed_and_version() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"worker_pool_size": 2, "extraction": {"downsample_factor": 2}}"#).unwrap();
    let r = ok(drivable().args(["run", "--source", "gen:count=2,size=160x120", "--seed", "9", "--config"]).arg(&cfg).output().unwrap());
    assert_eq!(r["seed"], 9);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["worker_pool_size"], 2);
    assert_eq!(r["config"]["extraction"]["downsample_factor"], 2);
    assert_eq!(r["command"], "run");
}

#[test]
fn invalid_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"queue_capacity": 0}"#).unwrap();
    let res = drivable().args(["run", "--source", "gen:count=1", "--config"]).arg(&cfg).output().unwrap();
    assert!(!res.status.success());
}

#[test]
fn same_seed_same_files_and_pool_size_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, 3, 77);
    gen(&b, 3, 77);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    let (one, six) = (tmp.path().join("one"), tmp.path().join("six"));
    for (dir, workers) in [(&one, "1"), (&six, "6")] {
        ok(drivable()
            .args(["run", "--workers", workers, "--source"])
            .arg(format!("dir:{}", a.display()))
            .arg("--sink")
            .arg(format!("dir:{}", dir.display()))
            .output()
            .unwrap());
    }
    assert_eq!(dir_bytes(&one), dir_bytes(&six));
}

#[test]
fn cross_process_matches_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let (local, remote, served) = (tmp.path().join("local"), tmp.path().join("remote"), tmp.path().join("served"));
    let source = "--source=gen:count=6,seed=13,size=320x240";
    ok(drivable().args(["run", source]).arg(format!("--sink=dir:{}", local.display())).output().unwrap());

    let mut server = drivable()
        .args(["run", "--source", "tcp:127.0.0.1:0"])
        .arg(format!("--sink=dir:{}", served.display()))
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(server.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listening line").to_owned();
    let drain = thread::spawn(move || std::io::copy(&mut stderr, &mut std::io::sink()));

    ok(drivable().args(["run", source, "--remote", &addr]).arg(format!("--sink=dir:{}", remote.display())).output().unwrap());
    let srv = ok(server.wait_with_output().unwrap());
    drain.join().unwrap().unwrap();
    assert_eq!(srv["result"]["stats"]["frames_processed"], 6);
    assert_eq!(dir_bytes(&local), dir_bytes(&remote));
    assert_eq!(dir_bytes(&local), dir_bytes(&served));
}

#[test]
fn tcp_sink_streams_region_frames() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let reader = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut r = BufReader::new(stream);
        let mut ids = Vec::new();
        while let ReadOutcome::Frame(FrameMessage { frame_id, payload: Payload::Regions(doc) }) = read_frame(&mut r).unwrap() {
            let v: Value = serde_json::from_str(&doc).unwrap();
            assert_eq!(v["frame_id"], frame_id);
            ids.push(frame_id);
        }
        ids
    });
    ok(drivable().args(["run", "--source", "gen:count=4,size=160x120", "--sink", &format!("tcp:{addr}")]).output().unwrap());
    assert_eq!(reader.join().unwrap(), vec![0, 1, 2, 3]);
}

#[test]
fn loss_check_passes() {
    let r = ok(drivable().args(["loss-check", "--cases", "300", "--seed", "4"]).output().unwrap());
    let g = &r["result"]["gradients"];
    assert_eq!(g["passed"], true);
    assert!(g["weighted_ce_grad"].as_f64().unwrap() <= 1e-5);
    assert!(g["total_loss_grad"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn bench_reports_stats() {
    let r = ok(drivable().args(["bench", "--frames", "8", "--warmup", "2", "--size", "320x240"]).output().unwrap());
    assert_eq!(r["result"]["stats"]["frames_processed"], 8);
    assert!(r["result"]["stats"]["throughput_fps"].as_f64().unwrap() > 0.0);
}

#[test]
fn gen_from_scene_description() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("scene.json");
    fs::write(
        &spec,
        r#"{"width": 200, "height": 100, "road_class": "highway",
            "lanes": [{"lane": "ego", "bottom": [60, 140], "top": [90, 110], "horizon": 30}]}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    ok(drivable().args(["gen", "--out-dir"]).arg(&out).arg("--spec").arg(&spec).output().unwrap());
    let doc = ok(drivable().args(["process", "--mask"]).arg(out.join("000000.pgm")).output().unwrap());
    assert_eq!(doc["road_class"], "highway");
    assert_eq!(doc["advice"]["usable_lanes"], serde_json::json!(["ego"]));
}
