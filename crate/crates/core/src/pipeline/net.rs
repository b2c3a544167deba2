//! Stream-socket deployment: a processing server answering each mask frame
//! with one region frame on the same connection, and the matching client.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::pipeline::wire::{read_frame, write_frame, DecodeError, FrameMessage, MaskPayload, Payload, ReadOutcome};
use crate::pipeline::{run_pipeline, MaskFrame, PipelineConfig, PipelineStats, RegionSink};

/// Outcome of one served connection.
#[derive(Debug, Clone)]
pub struct ConnectionReport {
    pub stats: PipelineStats,
    /// Set when the peer sent a malformed frame; the connection was closed
    /// after an error frame carrying its code.
    pub protocol_error: Option<DecodeError>,
}

struct ReplySink {
    stream: BufWriter<TcpStream>,
}

impl RegionSink for ReplySink {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        let doc = String::from_utf8_lossy(document).into_owned();
        write_frame(&mut self.stream, &FrameMessage { frame_id, payload: Payload::Regions(doc) })?;
        self.stream.flush()?;
        Ok(())
    }
}

/// Mask frames read off a socket until EOF, I/O failure or the first
/// malformed frame.
struct SocketSource {
    reader: BufReader<TcpStream>,
    last_id: Option<u32>,
    fault: Arc<Mutex<Option<DecodeError>>>,
    done: bool,
}

impl SocketSource {
    fn fail(&mut self, e: DecodeError) -> Option<Result<MaskFrame>> {
        *self.fault.lock().unwrap() = Some(e);
        self.done = true;
        None
    }
}

impl Iterator for SocketSource {
    type Item = Result<MaskFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match read_frame(&mut self.reader) {
            Ok(ReadOutcome::Frame(FrameMessage { frame_id, payload: Payload::Mask(m) })) => {
                if self.last_id.is_some_and(|last| frame_id <= last) {
                    return self.fail(DecodeError::InvalidPayload(format!("frame id {frame_id} not increasing")));
                }
                self.last_id = Some(frame_id);
                Some(Ok(MaskFrame { frame_id, road_class: m.road_class(), mask: m.to_mask() }))
            }
            Ok(ReadOutcome::Frame(_)) => self.fail(DecodeError::InvalidPayload("server accepts mask frames only".into())),
            Ok(ReadOutcome::Malformed(e)) => self.fail(e),
            Ok(ReadOutcome::Eof) | Err(_) => {
                self.done = true;
                None
            }
        }
    }
}

/// Serves one connection; region documents also go to `extra`.
pub fn serve_connection(stream: TcpStream, cfg: &PipelineConfig, extra: &mut dyn RegionSink) -> Result<ConnectionReport> {
    let _ = stream.set_nodelay(true);
    let fault = Arc::new(Mutex::new(None));
    let source = SocketSource {
        reader: BufReader::new(stream.try_clone()?),
        last_id: None,
        fault: Arc::clone(&fault),
        done: false,
    };
    let mut reply = ReplySink { stream: BufWriter::new(stream.try_clone()?) };
    let mut sink = super::sink::Tee(&mut reply, extra);
    let stats = run_pipeline(source, &mut sink, cfg)?;
    let protocol_error = fault.lock().unwrap().take();
    if let Some(e) = &protocol_error {
        let msg = FrameMessage { frame_id: 0, payload: Payload::Error { code: e.code(), message: e.to_string() } };
        write_frame(&mut reply.stream, &msg)?;
        reply.stream.flush()?;
    }
    stream.shutdown(Shutdown::Write)?;
    // Drain whatever the peer still sends so closing does not reset the
    // connection before it has read our last frames.
    let _ = stream.set_read_timeout(Some(Duration::from_secs(2)));
    let mut sink_buf = [0u8; 4096];
    let mut drain = &stream;
    while matches!(drain.read(&mut sink_buf), Ok(n) if n > 0) {}
    Ok(ConnectionReport { stats, protocol_error })
}

/// Accepts connections one after another; stops after `max_connections`
/// when given.
pub fn serve(listener: &TcpListener, cfg: &PipelineConfig, max_connections: Option<usize>, extra: &mut dyn RegionSink) -> Result<Vec<ConnectionReport>> {
    let mut reports = Vec::new();
    for stream in listener.incoming() {
        reports.push(serve_connection(stream?, cfg, &mut *extra)?);
        if max_connections.is_some_and(|m| reports.len() >= m) {
            break;
        }
    }
    Ok(reports)
}

/// Client side: streams the source's masks to a server and hands the
/// answered region documents to `sink` in arrival order.
pub fn run_remote<A, I>(addr: A, source: I, sink: &mut dyn RegionSink) -> Result<PipelineStats>
where
    A: ToSocketAddrs,
    I: IntoIterator<Item = Result<MaskFrame>>,
    I::IntoIter: Send,
{
    let stream = TcpStream::connect(addr)?;
    let _ = stream.set_nodelay(true);
    let sent_at: Arc<Mutex<HashMap<u32, Instant>>> = Arc::default();
    let t0 = Instant::now();
    let mut writer = BufWriter::new(stream.try_clone()?);
    let pending = Arc::clone(&sent_at);
    let source = source.into_iter();

    thread::scope(|scope| {
        let sender = scope.spawn(move || -> Result<(usize, usize)> {
            let (mut sent, mut errors) = (0, 0);
            for item in source {
                let frame = match item {
                    Ok(f) => f,
                    Err(_) => {
                        errors += 1;
                        continue;
                    }
                };
                let payload = MaskPayload::from_mask(&frame.mask, frame.road_class)?;
                pending.lock().unwrap().insert(frame.frame_id, Instant::now());
                write_frame(&mut writer, &FrameMessage { frame_id: frame.frame_id, payload: Payload::Mask(payload) })?;
                writer.flush()?;
                sent += 1;
            }
            writer.flush()?;
            writer.get_ref().shutdown(Shutdown::Write)?;
            Ok((sent, errors))
        });

        let mut reader = BufReader::new(stream);
        let mut latencies = Vec::new();
        let mut peak = 0usize;
        let received = (|| -> Result<()> {
            loop {
                match read_frame(&mut reader)? {
                    ReadOutcome::Eof => return Ok(()),
                    ReadOutcome::Malformed(e) => return Err(e.into()),
                    ReadOutcome::Frame(FrameMessage { frame_id, payload }) => match payload {
                        Payload::Regions(doc) => {
                            let started = {
                                let mut map = sent_at.lock().unwrap();
                                peak = peak.max(map.len());
                                map.remove(&frame_id)
                            };
                            sink.deliver(frame_id, doc.as_bytes())?;
                            if let Some(t) = started {
                                latencies.push(t.elapsed());
                            }
                        }
                        Payload::Error { code, message } => return Err(Error::Remote { code, message }),
                        Payload::Mask(_) => {
                            return Err(DecodeError::InvalidPayload("unexpected mask frame from server".into()).into())
                        }
                    },
                }
            }
        })();
        let elapsed = t0.elapsed();
        if let Err(e) = received {
            // unblock the sender if it is stuck on a full socket
            let _ = reader.get_ref().shutdown(Shutdown::Both);
            let _ = sender.join();
            return Err(e);
        }
        let (sent, errors) = sender.join().map_err(|_| Error::InvalidInput("sender thread panicked".into()))??;
        if latencies.len() != sent {
            return Err(Error::InvalidInput(format!("server answered {} of {sent} frames", latencies.len())));
        }
        sink.finish()?;
        Ok(PipelineStats::from_samples(latencies, errors, elapsed, peak))
    })
}
