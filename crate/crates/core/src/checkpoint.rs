//! Binary container for named tensor bundles (model weights, optimizer
//! state).
//!
//! Layout: an 8-byte little-endian length, that many bytes of JSON index,
//! then raw little-endian `f64` payloads back to back. The index carries a
//! `kind` tag, free-form `meta`, and per-tensor name/shape/dtype/offset.
//! Floats are written bit-for-bit, so save/load roundtrips exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Serialize, Deserialize)]
struct Index {
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    /// Byte offset into the payload region.
    offset: u64,
}

/// An ordered bundle of named tensors plus metadata.
pub struct Checkpoint {
    pub kind: String,
    pub meta: serde_json::Value,
    tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>) -> Self {
        Checkpoint { kind: kind.into(), meta: serde_json::Value::Null, tensors: Vec::new() }
    }

    pub fn with_meta(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Checkpoint { kind: kind.into(), meta, tensors: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.iter().any(|(n, _)| *n == name) {
            return Err(Error::Contract(format!("duplicate tensor name '{}'", name)));
        }
        self.tensors.push((name, tensor));
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Format(format!("checkpoint has no tensor '{}'", name)))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0u64;
        for (name, t) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                dtype: "f64".into(),
                offset,
            });
            offset += (t.numel() * 8) as u64;
        }
        let index = Index { kind: self.kind.clone(), meta: self.meta.clone(), tensors: entries };
        let index_bytes = serde_json::to_vec(&index)?;
        w.write_all(&(index_bytes.len() as u64).to_le_bytes())?;
        w.write_all(&index_bytes)?;
        for (_, t) in &self.tensors {
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)
            .map_err(|e| Error::Format(format!("checkpoint header unreadable: {}", e)))?;
        let index_len = u64::from_le_bytes(len_bytes) as usize;
        let mut index_bytes = vec![0u8; index_len];
        r.read_exact(&mut index_bytes)
            .map_err(|e| Error::Format(format!("checkpoint index truncated: {}", e)))?;
        let index: Index = serde_json::from_slice(&index_bytes)?;

        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;

        let mut tensors = Vec::with_capacity(index.tensors.len());
        for entry in &index.tensors {
            if entry.dtype != "f64" {
                return Err(Error::Format(format!(
                    "tensor '{}' has unsupported dtype '{}'",
                    entry.name, entry.dtype
                )));
            }
            let numel: usize = entry.shape.iter().product();
            let start = entry.offset as usize;
            let end = start + numel * 8;
            if end > payload.len() {
                return Err(Error::Format(format!(
                    "tensor '{}' extends past end of payload",
                    entry.name
                )));
            }
            let data: Vec<f64> = payload[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
                .collect();
            tensors.push((entry.name.clone(), Tensor::new(entry.shape.clone(), data)?));
        }
        Ok(Checkpoint { kind: index.kind, meta: index.meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    /// Fail unless the checkpoint's kind tag matches.
    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "checkpoint kind '{}' where '{}' was expected",
                self.kind, kind
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut ck = Checkpoint::with_meta("test", serde_json::json!({"seed": 7}));
        // Awkward values: negative zero, denormal, huge, tiny.
        let t = Tensor::new(vec![2, 3], vec![-0.0, 5e-324, 1.7e308, 1.0 / 3.0, -2.5, 1e-300])
            .unwrap();
        ck.add("weights", t.clone()).unwrap();
        ck.add("bias", Tensor::scalar(0.125)).unwrap();

        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&mut buf.as_slice()).unwrap();

        assert_eq!(back.kind, "test");
        assert_eq!(back.meta["seed"], 7);
        let rt = back.tensor("weights").unwrap();
        assert_eq!(rt.shape(), t.shape());
        for (a, b) in rt.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.tensor("bias").unwrap().scalar_value().unwrap(), 0.125);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut ck = Checkpoint::new("test");
        ck.add("w", Tensor::scalar(1.0)).unwrap();
        assert!(ck.add("w", Tensor::scalar(2.0)).is_err());
    }

    #[test]
    fn truncated_payload_rejected() {
        let mut ck = Checkpoint::new("test");
        ck.add("w", Tensor::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(Checkpoint::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn missing_tensor_and_wrong_kind_are_errors() {
        let ck = Checkpoint::new("alpha");
        assert!(ck.tensor("nope").is_err());
        assert!(ck.expect_kind("beta").is_err());
        assert!(ck.expect_kind("alpha").is_ok());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ck = Checkpoint::new("disk");
        ck.add("t", Tensor::new(vec![3], vec![9.0, -1.0, 0.5]).unwrap()).unwrap();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.tensor("t").unwrap().data(), &[9.0, -1.0, 0.5]);
    }
}
