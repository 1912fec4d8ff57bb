//! `DMAPv1` density-map files.
//!
//! Layout: the ASCII header line `DMAPv1 <H> <W>\n` followed by `H * W`
//! little-endian `f32` values in row-major order. Nothing may follow the
//! payload.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::density::DensityMap;
use crate::error::{Error, Result};

pub const MAGIC: &str = "DMAPv1";
const MAX_HEADER_LEN: usize = 64;

pub fn write_dmap<W: Write>(mut out: W, map: &DensityMap) -> Result<()> {
    let (h, w) = map.shape();
    write!(out, "{MAGIC} {h} {w}\n")?;
    let mut buf = Vec::with_capacity(h * w * 4);
    for v in map.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_dmap<R: Read>(input: R) -> Result<DensityMap> {
    let mut reader = BufReader::new(input);
    let mut header = Vec::new();
    reader
        .by_ref()
        .take(MAX_HEADER_LEN as u64)
        .read_until(b'\n', &mut header)?;
    if header.last() != Some(&b'\n') {
        return Err(Error::Format("missing or oversized header line".into()));
    }
    let header = std::str::from_utf8(&header[..header.len() - 1])
        .map_err(|_| Error::Format("header is not ASCII".into()))?;
    let (h, w) = parse_header(header)?;

    let len = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("dimensions {h}x{w} overflow")))?;
    let mut payload = Vec::with_capacity(len);
    reader.read_to_end(&mut payload)?;
    if payload.len() != len {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header declares {len}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    DensityMap::new(h, w, values).map_err(|e| Error::Format(e.to_string()))
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let mut parts = line.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format(format!("bad magic in header `{line}`")));
    }
    let mut dim = |name: &str| -> Result<usize> {
        let raw = parts
            .next()
            .ok_or_else(|| Error::Format(format!("header lacks {name}")))?;
        match raw.parse::<usize>() {
            Ok(n) if n > 0 && !raw.starts_with('+') => Ok(n),
            _ => Err(Error::Format(format!("invalid {name} `{raw}`"))),
        }
    };
    let h = dim("height")?;
    let w = dim("width")?;
    if parts.next().is_some() {
        return Err(Error::Format(format!("trailing fields in header `{line}`")));
    }
    Ok((h, w))
}

pub fn save_dmap(path: &Path, map: &DensityMap) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dmap(&mut out, map)?;
    out.flush()?;
    Ok(())
}

pub fn load_dmap(path: &Path) -> Result<DensityMap> {
    read_dmap(File::open(path)?)
}
