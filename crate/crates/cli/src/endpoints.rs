//! `--source` / `--sink` argument parsing.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use drivable_core::pipeline::{DirSink, GenSpec, NullSink, RegionSink, TcpSink};

#[derive(Debug, Clone, PartialEq)]
pub enum SourceArg {
    Dir(PathBuf),
    Gen(GenSpec),
    Tcp(String),
}

impl SourceArg {
    /// A generator spec without an explicit `seed=` takes `default_seed`.
    pub fn parse(s: &str, default_seed: u64) -> Result<Self> {
        let (kind, rest) = s.split_once(':').with_context(|| format!("source {s:?} must look like kind:value"))?;
        Ok(match kind {
            "dir" => SourceArg::Dir(rest.into()),
            "gen" => {
                let mut spec: GenSpec = rest.parse()?;
                if !rest.split(',').any(|kv| kv.trim().starts_with("seed=")) {
                    spec.seed = default_seed;
                }
                SourceArg::Gen(spec)
            }
            "tcp" => SourceArg::Tcp(rest.to_owned()),
            other => bail!("unknown source kind {other:?} (expected dir, gen or tcp)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SinkArg {
    Null,
    Dir(PathBuf),
    Tcp(String),
}

impl SinkArg {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "null" {
            return Ok(SinkArg::Null);
        }
        let (kind, rest) = s.split_once(':').with_context(|| format!("sink {s:?} must be null or kind:value"))?;
        Ok(match kind {
            "dir" => SinkArg::Dir(rest.into()),
            "tcp" => SinkArg::Tcp(rest.to_owned()),
            other => bail!("unknown sink kind {other:?} (expected dir, tcp or null)"),
        })
    }

    pub fn open(&self) -> Result<Box<dyn RegionSink>> {
        Ok(match self {
            SinkArg::Null => Box::new(NullSink),
            SinkArg::Dir(p) => Box::new(DirSink::new(p).with_context(|| format!("creating {}", p.display()))?),
            SinkArg::Tcp(addr) => Box::new(TcpSink::connect(addr.as_str()).with_context(|| format!("connecting to {addr}"))?),
        })
    }
}
