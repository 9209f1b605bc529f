//! Flat binary checkpoint container.
//!
//! Layout: magic `EQHG1`, a u32-length-prefixed JSON metadata block, then one
//! record per tensor until EOF. Record: u32 name length, UTF-8 name, u32
//! rank, u64 dims, then the raw values as little-endian f64 (exact bits, so
//! reload reproduces evaluations exactly). Optimizer state rides along as
//! records named `optim/<param>.m`, `optim/<param>.v`, `optim/t`, `optim/lr`.

use super::{AdamState, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 5] = b"EQHG1";
const OPTIM_PREFIX: &str = "optim/";

#[derive(Debug)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub params: ParamSet,
    pub adam: Option<AdamState>,
}

pub fn save_checkpoint(
    path: &Path,
    meta: &serde_json::Value,
    params: &ParamSet,
    adam: Option<&AdamState>,
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    let meta_bytes = serde_json::to_vec(meta).expect("metadata serializes");
    buf.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta_bytes);
    for (name, tensor) in params.iter() {
        write_record(&mut buf, name, tensor.shape(), tensor.data());
    }
    if let Some(adam) = adam {
        for (i, (name, _)) in params.iter().enumerate() {
            let (m, v) = adam.moments(i);
            let dims = [m.len()];
            write_record(&mut buf, &format!("{OPTIM_PREFIX}{name}.m"), &dims, m);
            write_record(&mut buf, &format!("{OPTIM_PREFIX}{name}.v"), &dims, v);
        }
        write_record(&mut buf, "optim/t", &[], &[adam.t() as f64]);
        write_record(&mut buf, "optim/lr", &[], &[adam.lr()]);
    }
    // Write to a sibling temp file first so a crash can't leave a torn
    // checkpoint behind the final name.
    let tmp = path.with_extension("ckpt.tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_record(buf: &mut Vec<u8>, name: &str, dims: &[usize], data: &[f64]) {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bad = |msg: &str| Error::Checkpoint {
        path: path.display().to_string(),
        msg: msg.to_string(),
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };

    if cur.take(5).ok_or_else(|| bad("truncated magic"))? != MAGIC {
        return Err(bad("bad magic (not an EQHG1 checkpoint)"));
    }
    let meta_len = cur.u32().ok_or_else(|| bad("truncated metadata length"))? as usize;
    let meta_bytes = cur.take(meta_len).ok_or_else(|| bad("truncated metadata"))?;
    let meta: serde_json::Value =
        serde_json::from_slice(meta_bytes).map_err(|e| bad(&format!("metadata is not JSON: {e}")))?;

    let mut params = ParamSet::new();
    let mut optim: Vec<(String, Vec<f64>)> = Vec::new();
    while !cur.done() {
        let name_len = cur.u32().ok_or_else(|| bad("truncated record name length"))? as usize;
        if name_len > 4096 {
            return Err(bad("implausible record name length"));
        }
        let name = std::str::from_utf8(cur.take(name_len).ok_or_else(|| bad("truncated record name"))?)
            .map_err(|_| bad("record name is not UTF-8"))?
            .to_string();
        let rank = cur.u32().ok_or_else(|| bad("truncated rank"))? as usize;
        if rank > 8 {
            return Err(bad(&format!("record {name:?}: implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u64().ok_or_else(|| bad("truncated dims"))? as usize);
        }
        let numel: usize = dims.iter().product();
        if numel > (1 << 30) {
            return Err(bad(&format!("record {name:?}: implausible size {numel}")));
        }
        let raw = cur
            .take(numel * 8)
            .ok_or_else(|| bad(&format!("record {name:?}: truncated data")))?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(rest) = name.strip_prefix(OPTIM_PREFIX) {
            optim.push((rest.to_string(), data));
        } else {
            params.add(name, Tensor::new(dims, data));
        }
    }

    let adam = if optim.is_empty() {
        None
    } else {
        Some(rebuild_adam(&params, optim).map_err(|msg| bad(&msg))?)
    };
    Ok(Checkpoint { meta, params, adam })
}

fn rebuild_adam(params: &ParamSet, optim: Vec<(String, Vec<f64>)>) -> std::result::Result<AdamState, String> {
    let find = |key: &str| -> Option<&Vec<f64>> {
        optim.iter().find(|(n, _)| n == key).map(|(_, d)| d)
    };
    let t = find("t").ok_or("optimizer state missing t")?;
    let lr = find("lr").ok_or("optimizer state missing lr")?;
    if t.len() != 1 || lr.len() != 1 {
        return Err("malformed optimizer scalars".into());
    }
    let mut m = Vec::new();
    let mut v = Vec::new();
    for (name, _) in params.iter() {
        m.push(
            find(&format!("{name}.m"))
                .ok_or_else(|| format!("optimizer state missing {name}.m"))?
                .clone(),
        );
        v.push(
            find(&format!("{name}.v"))
                .ok_or_else(|| format!("optimizer state missing {name}.v"))?
                .clone(),
        );
    }
    AdamState::from_parts(params, lr[0], t[0] as u64, m, v)
        .map_err(|e| format!("optimizer state mismatch: {e}"))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.bytes.len() {
            return None;
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
