//! `SQZN` network checkpoints.
//!
//! Little-endian layout: magic `SQZN`, version `u16`, layer count `u32`, then
//! per layer `kind u8, in_dim u32, out_dim u32, dropout_rate f32` followed by
//! the layer's parameters as `f32` in row-major order, and finally a CRC32 of
//! every preceding byte.
//!
//! Parameter blob length is fixed by the layer kind: linear layers store
//! `out·in` weights then `out` biases, layernorm stores `out` gains then `out`
//! shifts, a residual-add stores one value (its source activation index) and
//! the remaining kinds store nothing.

use std::io::Read;
use std::path::Path;

use super::{Layer, LayerKind, LayerSpec, Network, NnError, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SQZN";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * net.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let s = &layer.spec;
        out.push(s.kind.code());
        out.extend_from_slice(&(s.in_dim as u32).to_le_bytes());
        out.extend_from_slice(&(s.out_dim as u32).to_le_bytes());
        out.extend_from_slice(&(s.dropout_rate as f32).to_le_bytes());
        if s.kind == LayerKind::ResidualAdd {
            out.extend_from_slice(&(s.skip_from as f32).to_le_bytes());
        }
        for p in &layer.params {
            for v in p.data() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::Checkpoint(format!(
                "truncated at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32(&mut self) -> Result<f32, NnError> {
        Ok(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>, NnError> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| NnError::Checkpoint("blob too large".into()))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Network, NnError> {
    if bytes.len() < 14 {
        return Err(NnError::Checkpoint("file too short".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if &body[..4] != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    if crc32fast::hash(body) != stored {
        return Err(NnError::Checkpoint("CRC mismatch".into()));
    }
    let mut cur = Cursor { buf: body, pos: 4 };
    let version = u16::from_le_bytes(cur.take(2)?.try_into().expect("2 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let count = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        let code = cur.take(1)?[0];
        let kind = LayerKind::from_code(code)
            .ok_or_else(|| NnError::Checkpoint(format!("layer {i}: unknown kind {code}")))?;
        let in_dim = cur.u32()? as usize;
        let out_dim = cur.u32()? as usize;
        let dropout_rate = cur.f32()? as f64;
        let mut spec = LayerSpec {
            kind,
            in_dim,
            out_dim,
            dropout_rate,
            skip_from: 0,
        };
        if kind == LayerKind::ResidualAdd {
            spec.skip_from = cur.f32()? as usize;
        }
        let mut params = Vec::new();
        for shape in spec.param_shapes() {
            let n = shape.iter().product();
            params.push(Tensor::new(shape, cur.f32s(n)?)?);
        }
        layers.push(Layer { spec, params });
    }
    if cur.pos != body.len() {
        return Err(NnError::Checkpoint(format!(
            "{} trailing bytes",
            body.len() - cur.pos
        )));
    }
    Network::from_layers(layers)
}

pub fn write_checkpoint_file(net: &Network, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, write_checkpoint(net))?;
    Ok(())
}

pub fn read_checkpoint_file(path: &Path) -> Result<Network, NnError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_checkpoint(&bytes)
}
