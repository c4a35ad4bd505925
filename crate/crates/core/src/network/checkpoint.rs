//! Binary checkpoints: the magic `KPNN`, a little-endian `u32` format
//! version, a length-prefixed JSON header describing the architecture, then
//! the parameters as little-endian `f64` in [`TanhNetwork::params`] order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, TanhNetwork};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KPNN";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    param_count: usize,
}

pub fn write_checkpoint<W: Write>(net: &TanhNetwork, mut out: W) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        architecture: net.architecture().clone(),
        param_count: net.param_count(),
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    for p in net.params() {
        out.write_all(&p.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<TanhNetwork> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    input.read_exact(&mut word)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    input.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let mut net = TanhNetwork::zeros(header.architecture)?;
    if net.param_count() != header.param_count {
        return Err(Error::Format(format!(
            "header declares {} parameters, architecture has {}",
            header.param_count,
            net.param_count()
        )));
    }
    let mut params = Vec::with_capacity(header.param_count);
    let mut buf = [0u8; 8];
    for _ in 0..header.param_count {
        input.read_exact(&mut buf)?;
        params.push(f64::from_le_bytes(buf));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after parameters", rest.len())));
    }
    net.set_params(&params)?;
    Ok(net)
}

pub fn save_checkpoint(net: &TanhNetwork, path: &Path) -> Result<()> {
    write_checkpoint(net, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<TanhNetwork> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
