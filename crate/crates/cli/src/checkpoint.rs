//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SQADCKPT"
//! version    u32
//! config     7 x u64 (layers, hidden, heads, ffn, vocab, max_len, tags), f64 dropout
//! stage      u8      (0 pretrained, 1 domain-tuned, 2 task-tuned)
//! metadata   u32 length + UTF-8 JSON {tag_inventory, fallback_tag, provenance}
//! tensors    u32 count, then per tensor:
//!            u32 name length, name, u32 rank, rank x u64 dims, f32 values
//! optimizer  u8 present; if 1: u64 step, first-moment tensors, second-moment tensors
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use seqadapt_core::encoder::{AdamState, EncoderConfig, ModelParams, Tensor};
use seqadapt_core::pipelines::{Checkpoint, Stage};
use seqadapt_core::tagmap::TagInventory;

use crate::error::{CliError, CliResult};
use crate::provenance::StageRecordJson;

pub const MAGIC: &[u8; 8] = b"SQADCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    tag_inventory: Option<Vec<String>>,
    fallback_tag: Option<String>,
    provenance: Vec<StageRecordJson>,
}

fn stage_code(s: Stage) -> u8 {
    match s {
        Stage::Pretrained => 0,
        Stage::DomainTuned => 1,
        Stage::TaskTuned => 2,
    }
}

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

fn put_params(out: &mut Vec<u8>, p: &ModelParams<f32>) {
    put_u32(out, p.tensor_names().len() as u32);
    p.for_each(|name, t| {
        put_bytes(out, name.as_bytes());
        put_u32(out, t.shape.len() as u32);
        for &d in &t.shape {
            put_u64(out, d as u64);
        }
        for &x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    });
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let c = &ck.params.config;
    let mut out = Vec::with_capacity(8 * ck.params.parameter_count() + 4096);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    for v in [c.num_layers, c.hidden_dim, c.num_heads, c.ffn_dim, c.vocab_size, c.max_len, c.num_tags] {
        put_u64(&mut out, v as u64);
    }
    out.extend_from_slice(&c.dropout_rate.to_le_bytes());
    out.push(stage_code(ck.stage));
    let meta = Metadata {
        tag_inventory: ck.tag_inventory.as_ref().map(|i| i.tags().to_vec()),
        fallback_tag: ck.fallback_tag.clone(),
        provenance: ck.provenance.iter().map(StageRecordJson::from).collect(),
    };
    put_bytes(&mut out, serde_json::to_string(&meta).expect("metadata serializes").as_bytes());
    put_params(&mut out, &ck.params);
    match &ck.optimizer {
        None => out.push(0),
        Some(a) => {
            out.push(1);
            put_u64(&mut out, a.step);
            put_params(&mut out, &a.m);
            put_params(&mut out, &a.v);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|e| e.to_string())
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8], String> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    /// Reads a tensor block into a zeroed parameter set, checking names and
    /// shapes against what the config implies.
    fn params(&mut self, config: &EncoderConfig) -> Result<ModelParams<f32>, String> {
        let mut p = ModelParams::<f32>::zeros(config);
        let expected = p.tensor_names().len();
        let count = self.u32()? as usize;
        if count != expected {
            return Err(format!("expected {expected} tensors, found {count}"));
        }
        let mut err = None;
        p.for_each_mut(|name, t| {
            if err.is_none() {
                if let Err(e) = self.tensor_into(name, t) {
                    err = Some(e);
                }
            }
        });
        err.map_or(Ok(p), Err)
    }

    fn tensor_into(&mut self, name: &str, t: &mut Tensor<f32>) -> Result<(), String> {
        let found = std::str::from_utf8(self.bytes()?).map_err(|e| e.to_string())?;
        if found != name {
            return Err(format!("expected tensor {name}, found {found}"));
        }
        let rank = self.u32()? as usize;
        let shape = (0..rank).map(|_| self.usize()).collect::<Result<Vec<_>, _>>()?;
        if shape != t.shape {
            return Err(format!("tensor {name}: shape {shape:?}, expected {:?}", t.shape));
        }
        let raw = self.take(4 * t.data.len())?;
        for (x, b) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *x = f32::from_le_bytes(b.try_into().unwrap());
        }
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let config = EncoderConfig {
        num_layers: r.usize()?,
        hidden_dim: r.usize()?,
        num_heads: r.usize()?,
        ffn_dim: r.usize()?,
        vocab_size: r.usize()?,
        max_len: r.usize()?,
        num_tags: r.usize()?,
        dropout_rate: r.f64()?,
    };
    config.validate().map_err(|e| e.to_string())?;
    let stage = match r.u8()? {
        0 => Stage::Pretrained,
        1 => Stage::DomainTuned,
        2 => Stage::TaskTuned,
        s => return Err(format!("unknown stage code {s}")),
    };
    let meta: Metadata = serde_json::from_slice(r.bytes()?).map_err(|e| e.to_string())?;
    let params = r.params(&config)?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let m = r.params(&config)?;
            let v = r.params(&config)?;
            Some(AdamState { m, v, step })
        }
        f => return Err(format!("bad optimizer flag {f}")),
    };
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    let tag_inventory = meta
        .tag_inventory
        .map(TagInventory::new)
        .transpose()
        .map_err(|e| e.to_string())?;
    let provenance = meta
        .provenance
        .iter()
        .map(StageRecordJson::to_record)
        .collect::<Result<_, _>>()?;
    Ok(Checkpoint {
        stage,
        params,
        optimizer,
        tag_inventory,
        fallback_tag: meta.fallback_tag,
        provenance,
    })
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, encode_checkpoint(ck)).map_err(|e| CliError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|message| CliError::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}
