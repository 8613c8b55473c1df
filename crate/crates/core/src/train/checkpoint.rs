//! `PDCK` checkpoints: magic, u16 version, u8 variant tag, u16 slot count,
//! u32 record count, records `(u16 name length, UTF-8 name, u8 rank,
//! u32 dims[rank], f64 data)`, then u32 metadata length and a JSON blob.
//! All integers and floats little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::mri::io::{write_bytes, Reader};
use crate::nets::{NetParams, ParamTensor, Variant, SLOTS};

pub const PDCK_MAGIC: &[u8; 4] = b"PDCK";
const VERSION: u16 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Epoch the parameters were taken from; 0 before training.
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub seed: u64,
    pub config: Option<TrainConfig>,
}

/// Parameters plus metadata. The metadata JSON text is kept verbatim so a
/// loaded checkpoint saves back byte for byte.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    params: NetParams,
    meta: CheckpointMeta,
    meta_json: String,
}

impl Checkpoint {
    pub fn new(params: NetParams, meta: CheckpointMeta) -> Self {
        let meta_json = serde_json::to_string(&meta).expect("metadata serializes");
        Checkpoint { params, meta, meta_json }
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    pub fn into_params(self) -> NetParams {
        self.params
    }

    pub fn meta(&self) -> &CheckpointMeta {
        &self.meta
    }

    pub fn variant(&self) -> Variant {
        self.params.variant()
    }

    /// Contract error naming both tags unless the checkpoint holds `expected`.
    pub fn expect_variant(&self, expected: Variant) -> Result<()> {
        if self.variant() != expected {
            return Err(Error::Contract(format!(
                "checkpoint holds {} (tag {}) but {} (tag {}) was requested",
                self.variant(),
                self.variant().tag(),
                expected,
                expected.tag()
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * self.params.count() + 4096);
        out.extend_from_slice(PDCK_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.variant().tag());
        out.extend_from_slice(&(SLOTS as u16).to_le_bytes());
        out.extend_from_slice(&(self.params.tensors().len() as u32).to_le_bytes());
        for t in self.params.tensors() {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.meta_json.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta_json.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.expect_magic(PDCK_MAGIC)?;
        let at = r.pos();
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Format { offset: at, msg: format!("unsupported checkpoint version {version}") });
        }
        let at = r.pos();
        let tag = r.u8()?;
        let variant = Variant::from_tag(tag).ok_or_else(|| Error::Format { offset: at, msg: format!("unknown variant tag {tag}") })?;
        let at = r.pos();
        let slots = r.u16()?;
        if slots as usize != SLOTS {
            return Err(Error::Format { offset: at, msg: format!("checkpoint has {slots} iteration slots, expected {SLOTS}") });
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let at = r.pos();
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format { offset: at + 2, msg: "record name is not UTF-8".into() })?
                .to_owned();
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let numel: usize = dims.iter().product();
            let raw = r.take(numel.checked_mul(8).ok_or_else(|| Error::Format { offset: at, msg: "record too large".into() })?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(ParamTensor { name, dims, data });
        }
        let at = r.pos();
        let len = r.u32()? as usize;
        let meta_json = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format { offset: at + 4, msg: "metadata is not UTF-8".into() })?
            .to_owned();
        r.finish()?;
        let meta = serde_json::from_str(&meta_json)
            .map_err(|e| Error::Format { offset: at + 4, msg: format!("bad metadata JSON: {e}") })?;
        let params = NetParams::from_tensors(variant, tensors)
            .map_err(|e| Error::Format { offset: 0, msg: format!("records do not match the {variant} layout: {e}") })?;
        Ok(Checkpoint { params, meta, meta_json })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    write_bytes(path.as_ref(), &ckpt.encode())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Checkpoint::decode(&bytes).map_err(|e| Error::File { path: path.to_path_buf(), msg: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut p = NetParams::init(Variant::Cp, 4);
        p.tensors_mut()[5].data[0] = -0.1 / 3.0;
        let meta = CheckpointMeta { epoch: 3, train_loss: Some(0.1 / 7.0), val_loss: Some(1.0 / 3.0), seed: 4, config: Some(TrainConfig::default()) };
        Checkpoint::new(p, meta)
    }

    #[test]
    fn header_layout() {
        let b = sample().encode();
        assert_eq!(&b[..4], b"PDCK");
        assert_eq!(&b[4..6], &1u16.to_le_bytes());
        assert_eq!(b[6], 1);
        assert_eq!(&b[7..9], &10u16.to_le_bytes());
        assert_eq!(&b[9..13], &(sample().params().tensors().len() as u32).to_le_bytes());
        let name = b"slot00.dual.conv1.weight";
        assert_eq!(&b[13..15], &(name.len() as u16).to_le_bytes());
        assert_eq!(&b[15..15 + name.len()], name);
        assert_eq!(b[15 + name.len()], 4);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let c = sample();
        let b = c.encode();
        let back = Checkpoint::decode(&b).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.encode(), b);
        assert_eq!(back.meta().val_loss, Some(1.0 / 3.0));
    }

    #[test]
    fn truncation_and_corruption_are_format_errors() {
        let b = sample().encode();
        for cut in [3, 10, 100, b.len() - 1] {
            assert!(matches!(Checkpoint::decode(&b[..cut]), Err(Error::Format { .. })), "cut {cut}");
        }
        let mut bad = b.clone();
        bad[6] = 9;
        assert!(matches!(Checkpoint::decode(&bad), Err(Error::Format { offset: 6, .. })));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Checkpoint::decode(&bad).unwrap_err().to_string().contains("PDCK"));
    }

    #[test]
    fn variant_mismatch_names_both_tags() {
        let err = sample().expect_variant(Variant::Pd).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Contract(_)));
        assert!(msg.contains("cp") && msg.contains("pd"), "{msg}");
        assert!(sample().expect_variant(Variant::Cp).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pdck");
        save_checkpoint(&p, &sample()).unwrap();
        let first = std::fs::read(&p).unwrap();
        save_checkpoint(&p, &load_checkpoint(&p).unwrap()).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
    }
}
