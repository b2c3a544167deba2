//! Region document consumers.

use std::fs;
use std::io::{BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::pipeline::wire::{write_frame, FrameMessage, Payload};

pub trait RegionSink {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()>;

    /// Called once after the last frame.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<S: RegionSink + ?Sized> RegionSink for &mut S {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        (**self).deliver(frame_id, document)
    }

    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

impl<S: RegionSink + ?Sized> RegionSink for Box<S> {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        (**self).deliver(frame_id, document)
    }

    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl RegionSink for NullSink {
    fn deliver(&mut self, _: u32, _: &[u8]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Default, Clone)]
pub struct VecSink {
    pub documents: Vec<(u32, Vec<u8>)>,
}

impl VecSink {
    pub fn frame_ids(&self) -> Vec<u32> {
        self.documents.iter().map(|(id, _)| *id).collect()
    }
}

impl RegionSink for VecSink {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        self.documents.push((frame_id, document.to_vec()));
        Ok(())
    }
}

/// Writes `<frame_id:06>.json` per frame into a directory.
#[derive(Debug, Clone)]
pub struct DirSink {
    dir: PathBuf,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn path_for(dir: &Path, frame_id: u32) -> PathBuf {
        dir.join(format!("{frame_id:06}.json"))
    }
}

impl RegionSink for DirSink {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        fs::write(Self::path_for(&self.dir, frame_id), document)?;
        Ok(())
    }
}

/// Sends region frames over a stream socket.
pub struct TcpSink {
    stream: BufWriter<TcpStream>,
}

impl TcpSink {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Self::from_stream(TcpStream::connect(addr)?))
    }

    pub fn from_stream(stream: TcpStream) -> Self {
        let _ = stream.set_nodelay(true);
        Self { stream: BufWriter::new(stream) }
    }
}

impl RegionSink for TcpSink {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        let doc = String::from_utf8_lossy(document).into_owned();
        write_frame(&mut self.stream, &FrameMessage { frame_id, payload: Payload::Regions(doc) })?;
        self.stream.flush()?;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.stream.flush()?;
        self.stream.get_ref().shutdown(Shutdown::Write)?;
        Ok(())
    }
}

/// Delivers to two sinks in turn.
pub struct Tee<A, B>(pub A, pub B);

impl<A: RegionSink, B: RegionSink> RegionSink for Tee<A, B> {
    fn deliver(&mut self, frame_id: u32, document: &[u8]) -> Result<()> {
        self.0.deliver(frame_id, document)?;
        self.1.deliver(frame_id, document)
    }

    fn finish(&mut self) -> Result<()> {
        self.0.finish()?;
        self.1.finish()
    }
}
