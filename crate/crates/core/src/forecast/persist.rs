//! Model artifact: `AQMR`, format version (u16 LE), header length (u64 LE), JSON header with
//! everything except the ridge matrix, the ridge matrix as little-endian f64, and an FNV-1a
//! checksum (u64 LE) of all preceding bytes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Models;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AQMR";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u16,
    coef_len: usize,
    models: Models,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn save(models: &Models) -> Result<Vec<u8>> {
    let mut shell = models.clone();
    let coef = std::mem::take(&mut shell.backbone.coef);
    let header = serde_json::to_vec(&Header {
        format_version: FORMAT_VERSION,
        coef_len: coef.len(),
        models: shell,
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(22 + header.len() + 8 * coef.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for x in &coef {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let sum = fnv1a(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

fn take<'a>(buf: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Format(format!("truncated artifact while reading {what}")));
    }
    let (head, rest) = buf.split_at(n);
    *buf = rest;
    Ok(head)
}

pub fn load(bytes: &[u8]) -> Result<Models> {
    if bytes.len() < 22 {
        return Err(Error::Format("artifact too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let mut buf = body;
    if take(&mut buf, 4, "magic")? != MAGIC {
        return Err(Error::Format("not a model artifact (bad magic)".into()));
    }
    let version = u16::from_le_bytes(take(&mut buf, 2, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported artifact version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    if stored != fnv1a(body) {
        return Err(Error::Format("checksum mismatch".into()));
    }
    let hlen = u64::from_le_bytes(take(&mut buf, 8, "header length")?.try_into().unwrap());
    let hlen = usize::try_from(hlen).map_err(|_| Error::Format("header too long".into()))?;
    let header: Header = serde_json::from_slice(take(&mut buf, hlen, "header")?)
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.format_version != version {
        return Err(Error::Format("header version disagrees with envelope".into()));
    }
    if buf.len() / 8 != header.coef_len || buf.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header declares {} coefficients",
            buf.len(),
            header.coef_len
        )));
    }
    let mut models = header.models;
    models.backbone.coef = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    models.check()?;
    Ok(models)
}

pub fn save_to(models: &Models, path: &Path) -> Result<()> {
    let bytes = save(models)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(())
}

pub fn load_from(path: &Path) -> Result<Models> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    load(&bytes)
}
