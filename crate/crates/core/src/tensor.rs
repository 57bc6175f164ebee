//! Dense feature tensors and the FPT1 container used for every on-disk
//! numeric artifact (conv features, descriptors, checkpoints, models).
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "FPT1" | entry count | entries...
//! entry: name length | name (UTF-8) | axis count | axis sizes... | f32 LE payload (row-major)
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!("dims {dims:?} need {expected} values, got {}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!("non-finite value at flat index {i}")));
        }
        Ok(FeatureTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        FeatureTensor { dims, data: vec![0.0; n] }
    }

    pub fn from_vec(data: Vec<f32>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn expect_dims(&self, dims: &[usize]) -> Result<()> {
        if self.dims != dims {
            return Err(Error::ShapeMismatch(format!("expected {dims:?}, got {:?}", self.dims)));
        }
        Ok(())
    }
}

/// Ordered, named collection of tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorFile {
    entries: Vec<(String, FeatureTensor)>,
}

impl TensorFile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry, replacing any previous entry with the same name.
    pub fn insert(&mut self, name: impl Into<String>, tensor: FeatureTensor) {
        let name = name.into();
        if let Some(slot) = self.entries.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = tensor;
        } else {
            self.entries.push((name, tensor));
        }
    }

    pub fn get(&self, name: &str) -> Option<&FeatureTensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&FeatureTensor> {
        self.get(name)
            .ok_or_else(|| Error::ShapeMismatch(format!("tensor file has no entry {name:?}")))
    }

    pub fn entries(&self) -> &[(String, FeatureTensor)] {
        &self.entries
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.entries.iter().map(|(n, t)| 12 + n.len() + 4 * (t.dims.len() + t.data.len())).sum();
        let mut out = Vec::with_capacity(8 + payload);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, self.entries.len());
        for (name, t) in &self.entries {
            put_u32(&mut out, name.len());
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.dims.len());
            for &d in &t.dims {
                put_u32(&mut out, d);
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Parse {
                what: "tensor file",
                location: "byte 0".into(),
                message: "bad magic, expected FPT1".into(),
            });
        }
        let count = r.u32("entry count")?;
        let mut entries = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32("name length")?;
            let at = r.pos;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| Error::Parse {
                    what: "tensor file",
                    location: format!("byte {at}"),
                    message: "entry name is not UTF-8".into(),
                })?
                .to_owned();
            let axes = r.u32("axis count")?;
            let dims = (0..axes).map(|_| r.u32("axis size")).collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(4).is_some())
                .ok_or_else(|| Error::Parse {
                    what: "tensor file",
                    location: format!("entry {name:?}"),
                    message: format!("dims {dims:?} overflow"),
                })?;
            let at = r.pos;
            let raw = r.take(n * 4, "payload")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let tensor = FeatureTensor::new(dims, data).map_err(|e| Error::Parse {
                what: "tensor file",
                location: format!("entry {name:?} at byte {at}"),
                message: e.to_string(),
            })?;
            entries.push((name, tensor));
        }
        if r.pos != bytes.len() {
            return Err(Error::Parse {
                what: "tensor file",
                location: format!("byte {}", r.pos),
                message: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(TensorFile { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingStageOutput(path.to_path_buf()));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Truncated { offset, message } => Error::Truncated {
                offset,
                message: format!("{message} in {}", path.display()),
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_bytes())
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("tensor file fields must fit in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Truncated {
            offset: self.pos,
            message: format!("needed {n} bytes for {what}, {} left", self.bytes.len() - self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}
