//! Self-describing binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "DMNM"  u32 version  u8 precision(4|8)  6×u32 dims (V_C V_W m n n' K)
//! u32 tensor count
//!   per tensor: u16 name length, name, u32 rows, u32 cols, rows·cols values
//! u32 length, metadata (TOML text)
//! u32 length, character vocabulary (one char per line, may be empty)
//! u32 length, word vocabulary (one word per line, may be empty)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CharVocab, VocabPair, WordVocab};
use crate::error::{Error, Result};
use crate::model::{Dims, ModelParams};
use crate::numerics::{Precision, Scalar};

pub const MAGIC: &[u8; 4] = b"DMNM";
pub const FORMAT_VERSION: u32 = 1;

/// Training state recorded alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Epochs completed when the file was written.
    pub epoch: usize,
    /// Epoch whose parameters are stored.
    #[serde(default)]
    pub best_epoch: usize,
    pub validation_loss: Option<f64>,
    pub optimizer: String,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub dropout: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    pub meta: CheckpointMeta,
    pub vocab: Option<VocabPair>,
}

/// A checkpoint whose precision is only known after reading the header.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyCheckpoint {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

impl AnyCheckpoint {
    pub fn precision(&self) -> Precision {
        match self {
            AnyCheckpoint::F32(_) => Precision::F32,
            AnyCheckpoint::F64(_) => Precision::F64,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            AnyCheckpoint::F32(c) => c.params.dims(),
            AnyCheckpoint::F64(c) => c.params.dims(),
        }
    }

    pub fn meta(&self) -> &CheckpointMeta {
        match self {
            AnyCheckpoint::F32(c) => &c.meta,
            AnyCheckpoint::F64(c) => &c.meta,
        }
    }

    pub fn vocab(&self) -> Option<&VocabPair> {
        match self {
            AnyCheckpoint::F32(c) => c.vocab.as_ref(),
            AnyCheckpoint::F64(c) => c.vocab.as_ref(),
        }
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn push_block(out: &mut Vec<u8>, text: &str) {
    push_u32(out, text.len());
    out.extend_from_slice(text.as_bytes());
}

pub fn encode_checkpoint<T: Scalar>(ckpt: &Checkpoint<T>) -> Result<Vec<u8>> {
    let dims = ckpt.params.dims();
    let mut out = Vec::with_capacity(64 + ckpt.params.parameter_count() * std::mem::size_of::<T>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(T::PRECISION.tag());
    for d in dims.as_array() {
        push_u32(&mut out, d);
    }
    let tensors = ckpt.params.tensors();
    push_u32(&mut out, tensors.len());
    for (name, m) in tensors {
        out.extend_from_slice(&u16::try_from(name.len()).expect("short name").to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        push_u32(&mut out, m.rows());
        push_u32(&mut out, m.cols());
        for &v in m.as_slice() {
            v.write_le(&mut out);
        }
    }
    let meta = toml::to_string(&ckpt.meta).map_err(|e| Error::Config(e.to_string()))?;
    push_block(&mut out, &meta);
    let (chars, words) = match &ckpt.vocab {
        Some(v) => (
            v.chars.chars().iter().map(|c| format!("{c}\n")).collect::<String>(),
            v.words.words().iter().map(|w| format!("{w}\n")).collect::<String>(),
        ),
        None => (String::new(), String::new()),
    };
    push_block(&mut out, &chars);
    push_block(&mut out, &words);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn text(&mut self, what: &'static str) -> Result<&'a str> {
        let n = self.u32(what)?;
        std::str::from_utf8(self.take(n, what)?).map_err(|_| Error::Parse {
            what,
            line: 0,
            detail: "invalid UTF-8".into(),
        })
    }
}

struct Header {
    precision: Precision,
    dims: Dims,
}

fn read_header(r: &mut Reader) -> Result<Header> {
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32("version")? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let tag = r.take(1, "precision")?[0];
    let precision = Precision::from_tag(tag).ok_or(Error::PrecisionMismatch { found: tag, wanted: 0 })?;
    let mut d = [0usize; 6];
    for v in &mut d {
        *v = r.u32("dimensions")?;
    }
    let dims = Dims::from_array(d);
    dims.validate().map_err(|e| Error::DimMismatch(e.to_string()))?;
    Ok(Header { precision, dims })
}

fn read_body<T: Scalar>(r: &mut Reader, dims: Dims) -> Result<Checkpoint<T>> {
    let mut params = ModelParams::<T>::zeros(dims);
    let count = r.u32("tensor count")?;
    let expected: Vec<(String, (usize, usize))> = params
        .tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    if count != expected.len() {
        return Err(Error::DimMismatch(format!(
            "file has {count} tensors, model needs {}",
            expected.len()
        )));
    }
    let width = std::mem::size_of::<T>();
    for (slot, (want_name, want_shape)) in params.tensors_mut().into_iter().zip(&expected) {
        let len = {
            let b = r.take(2, "tensor name length")?;
            u16::from_le_bytes([b[0], b[1]]) as usize
        };
        let name = r.take(len, "tensor name")?;
        if name != want_name.as_bytes() {
            return Err(Error::DimMismatch(format!(
                "expected tensor {want_name}, found {}",
                String::from_utf8_lossy(name)
            )));
        }
        let shape = (r.u32("tensor rows")?, r.u32("tensor cols")?);
        if shape != *want_shape {
            return Err(Error::DimMismatch(format!(
                "{want_name} is {}×{}, header dims imply {}×{}",
                shape.0, shape.1, want_shape.0, want_shape.1
            )));
        }
        let bytes = r.take(shape.0 * shape.1 * width, "tensor data")?;
        for (v, chunk) in slot.as_mut_slice().iter_mut().zip(bytes.chunks_exact(width)) {
            *v = T::read_le(chunk);
        }
    }
    let meta: CheckpointMeta = toml::from_str(r.text("metadata")?).map_err(|e| Error::Parse {
        what: "checkpoint metadata",
        line: 0,
        detail: e.to_string(),
    })?;
    let chars = r.text("character vocabulary")?;
    let words = r.text("word vocabulary")?;
    let vocab = if words.is_empty() {
        None
    } else {
        let chars = CharVocab::new(chars.lines().filter_map(|l| l.chars().next()).collect())?;
        let words = WordVocab::new(words.lines().map(str::to_string).collect())?;
        if chars.len() != dims.chars || words.len() != dims.words {
            return Err(Error::DimMismatch(format!(
                "embedded vocabularies have {}/{} entries, dims say {}/{}",
                chars.len(),
                words.len(),
                dims.chars,
                dims.words
            )));
        }
        Some(VocabPair { chars, words })
    };
    if r.pos != r.buf.len() {
        return Err(Error::Parse {
            what: "checkpoint",
            line: 0,
            detail: format!("{} trailing bytes", r.buf.len() - r.pos),
        });
    }
    Ok(Checkpoint { params, meta, vocab })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<AnyCheckpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let h = read_header(&mut r)?;
    Ok(match h.precision {
        Precision::F32 => AnyCheckpoint::F32(read_body(&mut r, h.dims)?),
        Precision::F64 => AnyCheckpoint::F64(read_body(&mut r, h.dims)?),
    })
}

/// Decodes a checkpoint that must hold `T` values.
pub fn decode_checkpoint_as<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let h = read_header(&mut r)?;
    if h.precision != T::PRECISION {
        return Err(Error::PrecisionMismatch {
            found: h.precision.bits(),
            wanted: T::PRECISION.bits(),
        });
    }
    read_body(&mut r, h.dims)
}

pub fn save_checkpoint<T: Scalar>(path: &Path, ckpt: &Checkpoint<T>) -> Result<()> {
    let bytes = encode_checkpoint(ckpt)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<AnyCheckpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub fn load_checkpoint_as<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint_as(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabularies, MnemonicPair};
    use crate::corpus::tokenize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample<T: Scalar>() -> Checkpoint<T> {
        let pairs: Vec<MnemonicPair> = ["a b .", "a c ."]
            .iter()
            .map(|s| MnemonicPair::from_sentence(&tokenize(s).unwrap()))
            .collect();
        let vocab = build_vocabularies(&pairs).unwrap();
        let dims = Dims {
            chars: vocab.chars.len(),
            words: vocab.words.len(),
            embed: 3,
            hidden: 2,
            attn: 4,
            maxout: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        Checkpoint {
            params: ModelParams::random(dims, 0.3, &mut rng),
            meta: CheckpointMeta {
                epoch: 7,
                best_epoch: 5,
                validation_loss: Some(1.25),
                optimizer: "adam".into(),
                learning_rate: 1e-3,
                clip_norm: 5.0,
                dropout: 0.2,
                seed: 42,
            },
            vocab: Some(vocab),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample::<f32>();
        let bytes = encode_checkpoint(&c).unwrap();
        let back = decode_checkpoint_as::<f32>(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
        let c = sample::<f64>();
        assert!(matches!(decode_checkpoint(&encode_checkpoint(&c).unwrap()).unwrap(), AnyCheckpoint::F64(b) if b == c));
    }

    #[test]
    fn header_errors_are_distinct() {
        let bytes = encode_checkpoint(&sample::<f32>()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadMagic)));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadVersion { found: 9, .. })));
        assert!(matches!(
            decode_checkpoint_as::<f64>(&bytes),
            Err(Error::PrecisionMismatch { found: 32, wanted: 64 })
        ));
        // claim a larger hidden size than the tensors carry
        let mut bad = bytes.clone();
        bad[9 + 3 * 4] = 5;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn every_truncation_is_reported() {
        let bytes = encode_checkpoint(&sample::<f32>()).unwrap();
        for cut in (0..bytes.len()).step_by(7) {
            match decode_checkpoint(&bytes[..cut]) {
                Err(Error::Truncated(_)) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn checkpoint_without_vocabulary() {
        let mut c = sample::<f64>();
        c.vocab = None;
        let back = decode_checkpoint_as::<f64>(&encode_checkpoint(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
