//! Two-stage frame pipeline.
//!
//! Stage 1 pulls masks from a source on its own thread and pushes them into
//! a bounded queue. Stage 2 dispatches each frame to a fixed-size worker
//! pool (where the per-class clusterings of the frame run in parallel) and a
//! collector hands region documents to the sink strictly in frame order.
//! A token budget of `queue_capacity` frames between dispatch and delivery
//! makes a slow sink stall the whole chain instead of dropping frames.

pub mod net;
pub mod sink;
pub mod source;
pub mod wire;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::regions::{extract_regions, ExtractionConfig};
use crate::report::RegionDocument;
use crate::types::{RoadClass, SegmentationMask};

pub use sink::{DirSink, NullSink, RegionSink, TcpSink, VecSink};
pub use source::{dir_source, gen_source, GenSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPipelineConfig", into = "RawPipelineConfig")]
pub struct PipelineConfig {
    queue_capacity: usize,
    worker_pool_size: usize,
    extraction: ExtractionConfig<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct RawPipelineConfig {
    queue_capacity: usize,
    worker_pool_size: usize,
    extraction: ExtractionConfig<f64>,
}

impl Default for RawPipelineConfig {
    fn default() -> Self {
        PipelineConfig::default().into()
    }
}

impl From<PipelineConfig> for RawPipelineConfig {
    fn from(c: PipelineConfig) -> Self {
        Self { queue_capacity: c.queue_capacity, worker_pool_size: c.worker_pool_size, extraction: c.extraction }
    }
}

impl TryFrom<RawPipelineConfig> for PipelineConfig {
    type Error = Error;

    fn try_from(r: RawPipelineConfig) -> Result<Self> {
        PipelineConfig::new(r.queue_capacity, r.worker_pool_size, r.extraction)
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            queue_capacity: Self::DEFAULT_QUEUE_CAPACITY,
            worker_pool_size: Self::DEFAULT_WORKER_POOL_SIZE,
            extraction: ExtractionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub const DEFAULT_QUEUE_CAPACITY: usize = 8;
    pub const DEFAULT_WORKER_POOL_SIZE: usize = 6;

    pub fn new(queue_capacity: usize, worker_pool_size: usize, extraction: ExtractionConfig<f64>) -> Result<Self> {
        if queue_capacity == 0 {
            return Err(invalid_arg("queue_capacity must be at least 1"));
        }
        if worker_pool_size == 0 {
            return Err(invalid_arg("worker_pool_size must be at least 1"));
        }
        Ok(Self { queue_capacity, worker_pool_size, extraction })
    }

    pub fn queue_capacity(&self) -> usize {
        self.queue_capacity
    }

    pub fn worker_pool_size(&self) -> usize {
        self.worker_pool_size
    }

    pub fn extraction(&self) -> &ExtractionConfig<f64> {
        &self.extraction
    }

    pub fn with_queue_capacity(self, n: usize) -> Result<Self> {
        Self::new(n, self.worker_pool_size, self.extraction)
    }

    pub fn with_worker_pool_size(self, n: usize) -> Result<Self> {
        Self::new(self.queue_capacity, n, self.extraction)
    }
}

/// One mask entering the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFrame {
    pub frame_id: u32,
    pub road_class: RoadClass,
    pub mask: SegmentationMask,
}

/// Runs extraction for a single frame and renders its region document.
pub fn process_frame(frame: &MaskFrame, cfg: &ExtractionConfig<f64>) -> Result<Vec<u8>> {
    let set = extract_regions(&frame.mask, cfg)?;
    Ok(RegionDocument::new(frame.frame_id, frame.road_class, &set).to_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub frames_processed: usize,
    /// Source failures plus frames whose extraction failed; none reach the sink.
    pub errors: usize,
    pub latency_min_ms: f64,
    pub latency_mean_ms: f64,
    pub latency_p99_ms: f64,
    pub throughput_fps: f64,
    pub elapsed_s: f64,
    /// Peak number of frames between leaving the source and reaching the sink.
    pub max_in_flight: usize,
}

impl PipelineStats {
    pub(crate) fn from_samples(mut latencies: Vec<Duration>, errors: usize, elapsed: Duration, max_in_flight: usize) -> Self {
        latencies.sort_unstable();
        let n = latencies.len();
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let (min, mean, p99) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            // nearest-rank percentile
            let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
            (ms(latencies[0]), latencies.iter().map(|&d| ms(d)).sum::<f64>() / n as f64, ms(latencies[rank - 1]))
        };
        let secs = elapsed.as_secs_f64();
        Self {
            frames_processed: n,
            errors,
            latency_min_ms: min,
            latency_mean_ms: mean,
            latency_p99_ms: p99,
            throughput_fps: if secs > 0.0 { n as f64 / secs } else { 0.0 },
            elapsed_s: secs,
            max_in_flight,
        }
    }
}

struct InFlight {
    now: AtomicUsize,
    peak: AtomicUsize,
}

impl InFlight {
    fn enter(&self) {
        let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(n, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.now.fetch_sub(1, Ordering::SeqCst);
    }
}

enum Done {
    Ok { seq: u64, frame_id: u32, doc: Vec<u8>, started: Instant },
    Failed { seq: u64 },
}

impl Done {
    fn seq(&self) -> u64 {
        match self {
            Done::Ok { seq, .. } | Done::Failed { seq } => *seq,
        }
    }
}

/// Drives `source` through extraction into `sink`.
///
/// Every frame the source yields successfully reaches the sink exactly once,
/// in source order. Source errors are counted and skipped. A sink error
/// stops the run and is returned.
pub fn run_pipeline<I>(source: I, sink: &mut dyn RegionSink, cfg: &PipelineConfig) -> Result<PipelineStats>
where
    I: IntoIterator<Item = Result<MaskFrame>>,
    I::IntoIter: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_pool_size)
        .thread_name(|i| format!("extract-{i}"))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let q = cfg.queue_capacity;
    // Stage 1 blocks holding one frame when the queue is full, so at most q
    // frames sit before dispatch and at most q (tokens) after it.
    let (frame_tx, frame_rx) = bounded::<(MaskFrame, Instant)>(q - 1);
    let (token_tx, token_rx) = bounded::<()>(q);
    for _ in 0..q {
        token_tx.send(()).expect("token channel sized to q");
    }
    let (done_tx, done_rx) = unbounded::<Done>();
    let abort = AtomicBool::new(false);
    let in_flight = Arc::new(InFlight { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
    let source_errors = AtomicUsize::new(0);
    let extraction = Arc::new(cfg.extraction.clone());
    let t0 = Instant::now();

    let outcome = thread::scope(|scope| {
        let source = source.into_iter();
        let (abort, in_flight_s, source_errors) = (&abort, Arc::clone(&in_flight), &source_errors);
        scope.spawn(move || {
            for item in source {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let started = Instant::now();
                match item {
                    Ok(frame) => {
                        in_flight_s.enter();
                        if frame_tx.send((frame, started)).is_err() {
                            in_flight_s.leave();
                            break;
                        }
                    }
                    Err(_) => {
                        source_errors.fetch_add(1, Ordering::SeqCst);
                    }
                }
            }
        });

        let pool = &pool;
        scope.spawn(move || {
            let mut seq = 0u64;
            // Take the token first so no frame waits here outside the budget.
            while token_rx.recv().is_ok() && !abort.load(Ordering::SeqCst) {
                let Ok((frame, started)) = frame_rx.recv() else { break };
                let done_tx = done_tx.clone();
                let extraction = Arc::clone(&extraction);
                let this = seq;
                pool.spawn(move || {
                    let msg = match process_frame(&frame, &extraction) {
                        Ok(doc) => Done::Ok { seq: this, frame_id: frame.frame_id, doc, started },
                        Err(_) => Done::Failed { seq: this },
                    };
                    let _ = done_tx.send(msg);
                });
                seq += 1;
            }
        });

        let mut pending: BTreeMap<u64, Done> = BTreeMap::new();
        let mut next = 0u64;
        let mut latencies = Vec::new();
        let mut failed = 0usize;
        let result = (|| -> Result<()> {
            for msg in done_rx.iter() {
                pending.insert(msg.seq(), msg);
                while let Some(msg) = pending.remove(&next) {
                    next += 1;
                    if let Done::Ok { frame_id, doc, started, .. } = msg {
                        sink.deliver(frame_id, &doc)?;
                        latencies.push(started.elapsed());
                    } else {
                        failed += 1;
                    }
                    in_flight.leave();
                    let _ = token_tx.send(());
                }
            }
            Ok(())
        })();
        if result.is_err() {
            abort.store(true, Ordering::SeqCst);
            drop(token_tx);
            drop(done_rx);
        }
        result.map(|()| (latencies, failed))
    });
    let (latencies, failed) = outcome?;
    sink.finish()?;
    let errors = failed + source_errors.load(Ordering::SeqCst);
    Ok(PipelineStats::from_samples(latencies, errors, t0.elapsed(), in_flight.peak.load(Ordering::SeqCst)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClassId;

    fn blank(frame_id: u32) -> MaskFrame {
        MaskFrame { frame_id, road_class: RoadClass::Highway, mask: SegmentationMask::filled(16, 16, ClassId::Background).unwrap() }
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = PipelineConfig::default();
        assert_eq!((c.queue_capacity(), c.worker_pool_size()), (8, 6));
        assert!(PipelineConfig::new(0, 1, ExtractionConfig::default()).is_err());
        assert!(PipelineConfig::new(1, 0, ExtractionConfig::default()).is_err());
        let parsed: PipelineConfig = serde_json::from_str(r#"{"worker_pool_size": 2}"#).unwrap();
        assert_eq!((parsed.queue_capacity(), parsed.worker_pool_size()), (8, 2));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"queue_capacity": 0}"#).is_err());
    }

    #[test]
    fn ordered_delivery_and_error_skipping() {
        let source: Vec<Result<MaskFrame>> =
            vec![Ok(blank(0)), Err(invalid_arg("corrupt")), Ok(blank(2)), Ok(blank(3))];
        let mut sink = VecSink::default();
        let cfg = PipelineConfig::new(1, 3, ExtractionConfig::default()).unwrap();
        let stats = run_pipeline(source, &mut sink, &cfg).unwrap();
        assert_eq!(stats.frames_processed, 3);
        assert_eq!(stats.errors, 1);
        assert_eq!(sink.frame_ids(), vec![0, 2, 3]);
        assert!(stats.max_in_flight <= 2);
    }

    #[test]
    fn sink_failure_stops_the_run() {
        struct Failing(usize);
        impl RegionSink for Failing {
            fn deliver(&mut self, _: u32, _: &[u8]) -> Result<()> {
                self.0 += 1;
                if self.0 == 3 {
                    Err(invalid_arg("disk full"))
                } else {
                    Ok(())
                }
            }
        }
        let source = (0..100).map(|i| Ok(blank(i)));
        let mut sink = Failing(0);
        assert!(run_pipeline(source, &mut sink, &PipelineConfig::default()).is_err());
        assert_eq!(sink.0, 3);
    }

    #[test]
    fn stats_percentiles() {
        let lat: Vec<Duration> = (1..=100).map(Duration::from_millis).collect();
        let s = PipelineStats::from_samples(lat, 0, Duration::from_secs(2), 4);
        assert_eq!(s.latency_min_ms, 1.0);
        assert_eq!(s.latency_p99_ms, 99.0);
        assert!((s.latency_mean_ms - 50.5).abs() < 1e-9);
        assert_eq!(s.throughput_fps, 50.0);
    }
}
