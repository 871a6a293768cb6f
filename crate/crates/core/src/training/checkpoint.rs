//! Binary checkpoint container.
//!
//! Layout: magic `CANMTCKP`, u32 format version, u64 header length, header
//! (`key=value` text: model config, step, fingerprints, element width, tensor
//! count), then per tensor: u64 name length, name bytes, u64 rank, u64
//! extents, little-endian f64 elements. A SHA-256 digest of everything before
//! it closes the file. All integers are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::model::{ModelConfig, ParameterStore};
use crate::numerics::Tensor;

const MAGIC: &[u8; 8] = b"CANMTCKP";
const VERSION: u32 = 1;
const ELEMENT_WIDTH: usize = 8;

/// Fingerprints of the data a checkpoint was trained on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub corpus: String,
    pub src_vocab: String,
    pub tgt_vocab: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParameterStore,
    pub step: u64,
    pub provenance: Provenance,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    /// Errors unless both vocabularies match the ones recorded at training time.
    pub fn check_vocabularies(&self, src: &Vocabulary, tgt: &Vocabulary) -> Result<()> {
        for (what, expected, found) in [
            ("source vocabulary", &self.provenance.src_vocab, src.fingerprint()),
            ("target vocabulary", &self.provenance.tgt_vocab, tgt.fingerprint()),
        ] {
            if !expected.is_empty() && *expected != found {
                return Err(Error::FingerprintMismatch { what, expected: expected.clone(), found });
            }
        }
        Ok(())
    }

    pub fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let (expected, found) = (config.fingerprint(), self.config().fingerprint());
        if expected != found {
            return Err(Error::FingerprintMismatch { what: "model config", expected, found });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.config();
        let mut header = cfg.to_kv();
        header
            .push("config_fingerprint", cfg.fingerprint())
            .push("step", self.step)
            .push("corpus_fingerprint", &self.provenance.corpus)
            .push("src_vocab_fingerprint", &self.provenance.src_vocab)
            .push("tgt_vocab_fingerprint", &self.provenance.tgt_vocab)
            .push("element_width", ELEMENT_WIDTH)
            .push("tensor_count", self.params.tensors().len());
        let header = header.render();

        let mut out = Vec::with_capacity(64 + header.len() + self.params.parameter_count() * ELEMENT_WIDTH);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for (name, t) in self.params.tensors() {
            out.extend_from_slice(&(name.len() as u64).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u64).to_le_bytes());
            for &e in t.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let corrupt = |reason: String| Error::CorruptCheckpoint { path: origin.into(), reason };
        if bytes.len() < MAGIC.len() + 4 + 8 + 32 {
            return Err(corrupt("file too short".into()));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch (truncated or modified)".into()));
        }
        let mut r = Reader { buf: body, pos: 8, origin };
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(corrupt(format!("unsupported format version {version}")));
        }
        let header_len = r.u64()? as usize;
        let header = std::str::from_utf8(r.take(header_len)?).map_err(|_| corrupt("header is not UTF-8".into()))?;
        let kv = KvText::parse(header)?;
        let config = ModelConfig::from_kv(&kv)?;
        let stored: String = kv.require("config_fingerprint")?;
        if stored != config.fingerprint() {
            return Err(Error::FingerprintMismatch { what: "model config", expected: stored, found: config.fingerprint() });
        }
        let width: usize = kv.require("element_width")?;
        if width != ELEMENT_WIDTH {
            return Err(corrupt(format!("unsupported element width {width}")));
        }
        let count: usize = kv.require("tensor_count")?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u64()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| corrupt("tensor name is not UTF-8".into()))?;
            let rank = r.u64()? as usize;
            if rank > 8 {
                return Err(corrupt(format!("implausible rank {rank} for `{name}`")));
            }
            let shape = (0..rank).map(|_| r.u64().map(|e| e as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(ELEMENT_WIDTH).ok_or_else(|| corrupt("tensor too large".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.insert(name, Tensor::new(shape, data)?);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes after last tensor".into()));
        }
        Ok(Self {
            params: ParameterStore::from_tensors(&config, tensors)?,
            step: kv.require("step")?,
            provenance: Provenance {
                corpus: kv.require("corpus_fingerprint")?,
                src_vocab: kv.require("src_vocab_fingerprint")?,
                tgt_vocab: kv.require("tgt_vocab_fingerprint")?,
            },
        })
    }
}

struct Reader<'b> {
    buf: &'b [u8],
    pos: usize,
    origin: &'b str,
}

impl<'b> Reader<'b> {
    fn take(&mut self, n: usize) -> Result<&'b [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::CorruptCheckpoint { path: self.origin.into(), reason: "unexpected end of data".into() }
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, &path.display().to_string())
}

/// Elementwise mean of parameter stores with identical configs and names.
///
/// Each element is averaged as `min + Σ(xᵢ − min)/k` over its sorted values,
/// so the result does not depend on list order and identical inputs average
/// to themselves exactly.
pub fn average_checkpoints(stores: &[&ParameterStore]) -> Result<ParameterStore> {
    let first = *stores.first().ok_or(Error::Empty("checkpoint list"))?;
    for s in &stores[1..] {
        if s.config() != first.config() {
            return Err(Error::FingerprintMismatch {
                what: "model config",
                expected: first.config().fingerprint(),
                found: s.config().fingerprint(),
            });
        }
    }
    let k = stores.len() as f64;
    let mut out = BTreeMap::new();
    let mut vals = vec![0.0; stores.len()];
    for (name, t) in first.tensors() {
        let others: Vec<&Tensor> = stores
            .iter()
            .map(|s| s.get(name).ok_or_else(|| Error::Config(format!("parameter `{name}` missing from a checkpoint"))))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(t.numel());
        for i in 0..t.numel() {
            for (slot, o) in vals.iter_mut().zip(&others) {
                *slot = o.data()[i];
            }
            vals.sort_by(f64::total_cmp);
            let lo = vals[0];
            data.push(lo + vals.iter().map(|v| v - lo).sum::<f64>() / k);
        }
        out.insert(name.clone(), Tensor::new(t.shape().to_vec(), data)?);
    }
    ParameterStore::from_tensors(first.config(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_parameters;

    fn cfg() -> ModelConfig {
        let mut c = ModelConfig::desk(9, 10);
        c.layers_enc = 1;
        c.layers_dec = 1;
        c.layers_est = 1;
        c.model_dim = 8;
        c.heads = 2;
        c.ffn_dim = 8;
        c
    }

    fn ckpt(seed: u64) -> Checkpoint {
        Checkpoint {
            params: init_parameters(&cfg(), seed).unwrap(),
            step: 17,
            provenance: Provenance { corpus: "c0".into(), src_vocab: "s0".into(), tgt_vocab: "t0".into() },
        }
    }

    #[test]
    fn roundtrip_is_lossless() {
        let c = ckpt(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        save_checkpoint(&c, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), c.to_bytes());
    }

    #[test]
    fn truncation_and_bitflips_are_detected() {
        let bytes = ckpt(2).to_bytes();
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut], "x"), Err(Error::CorruptCheckpoint { .. })));
        }
        let mut flipped = bytes.clone();
        flipped[bytes.len() / 2] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&flipped, "x"), Err(Error::CorruptCheckpoint { .. })));
    }

    #[test]
    fn fingerprint_checks() {
        let c = ckpt(3);
        let mut other = cfg();
        other.ffn_dim = 16;
        assert!(matches!(c.check_config(&other), Err(Error::FingerprintMismatch { .. })));
        assert!(c.check_config(&cfg()).is_ok());
        let v = Vocabulary::from_content_tokens(["a", "b"]).unwrap();
        assert!(matches!(c.check_vocabularies(&v, &v), Err(Error::FingerprintMismatch { .. })));
    }

    #[test]
    fn averaging_identities() {
        let a = init_parameters(&cfg(), 4).unwrap();
        let same = average_checkpoints(&[&a, &a, &a, &a, &a]).unwrap();
        assert_eq!(same, a);

        let mut zero = a.clone();
        let mut double = a.clone();
        for (_, t) in zero.iter_mut() {
            t.data_mut().fill(0.0);
        }
        for (_, t) in double.iter_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= 2.0);
        }
        assert_eq!(average_checkpoints(&[&zero, &double]).unwrap(), a);

        let b = init_parameters(&cfg(), 5).unwrap();
        let c = init_parameters(&cfg(), 6).unwrap();
        let ab = average_checkpoints(&[&a, &b]).unwrap();
        for (name, t) in ab.iter() {
            for (i, x) in t.data().iter().enumerate() {
                let expected = (a.get(name).unwrap().data()[i] + b.get(name).unwrap().data()[i]) / 2.0;
                assert!((x - expected).abs() < 1e-15);
            }
        }
        assert_eq!(average_checkpoints(&[&a, &b, &c]).unwrap(), average_checkpoints(&[&c, &a, &b]).unwrap());

        let mut bigger = cfg();
        bigger.ffn_dim = 16;
        let d = init_parameters(&bigger, 1).unwrap();
        assert!(average_checkpoints(&[&a, &d]).is_err());
    }
}
