//! Binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CMBK"  u16 version  u32 header_len  header (UTF-8 JSON)
//! repeated until end of file:
//!     u32 name_len  name (UTF-8)  u8 rank  u32 extent × rank  f32 × Π extents
//! ```
//!
//! The header holds the model description (configuration, lexicon, feature
//! schema, embedding vocabulary, active tasks, seed); the network is rebuilt
//! from it and the blobs overwrite its parameters by name. Fixed external
//! word vectors are stored as the blobs `embeddings.rows` and
//! `embeddings.unknown`.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use udparse_core::model::{JointModel, ModelSpec};
use udparse_core::Tensor;

pub const MAGIC: &[u8; 4] = b"CMBK";
pub const VERSION: u16 = 1;

const ROWS: &str = "embeddings.rows";
const UNKNOWN: &str = "embeddings.unknown";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported format version {0} (this build reads version {VERSION})")]
    UnsupportedVersion(u16),
    #[error("file is truncated")]
    Truncated,
    #[error("header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("parameter name is not UTF-8")]
    Name,
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("parameter {name} has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("parameter {0} appears twice")]
    Duplicate(String),
    #[error("parameter {0} is missing")]
    Missing(String),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn put_blob(out: &mut Vec<u8>, name: &str, shape: &[usize], data: impl Iterator<Item = f32>) {
    put_u32(out, name.len());
    out.extend_from_slice(name.as_bytes());
    out.push(u8::try_from(shape.len()).expect("rank fits in u8"));
    for &e in shape {
        put_u32(out, e);
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serializes a model.
pub fn to_bytes(model: &JointModel<f32>) -> Result<Vec<u8>, ModelFileError> {
    let header = serde_json::to_vec(&model.spec)?;
    let mut out = Vec::with_capacity(16 + header.len() + 4 * model.params.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, header.len());
    out.extend_from_slice(&header);
    for (name, t) in model.params.iter() {
        put_blob(&mut out, name, t.shape(), t.data().iter().copied());
    }
    let emb = &model.spec.embeddings;
    if !emb.trainable {
        put_blob(&mut out, ROWS, &[emb.len(), emb.dim], emb.rows.iter().copied());
        put_blob(&mut out, UNKNOWN, &[emb.dim], emb.unknown.iter().copied());
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        if self.buf.len() < n {
            return Err(ModelFileError::Truncated);
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn u32(&mut self) -> Result<usize, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

/// Parses a model file image.
pub fn from_bytes(bytes: &[u8]) -> Result<JointModel<f32>, ModelFileError> {
    let mut r = Reader { buf: bytes };
    if r.take(4).map_err(|_| ModelFileError::BadMagic)? != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let hlen = r.u32()?;
    let spec: ModelSpec = serde_json::from_slice(r.take(hlen)?)?;
    let mut model = JointModel::<f32>::new(spec);
    let mut seen = HashSet::new();
    while !r.buf.is_empty() {
        let nlen = r.u32()?;
        let name = std::str::from_utf8(r.take(nlen)?).map_err(|_| ModelFileError::Name)?.to_string();
        let rank = r.take(1)?[0] as usize;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let count: usize = shape.iter().product();
        let raw = r.take(count.checked_mul(4).ok_or(ModelFileError::Truncated)?)?;
        let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        if !seen.insert(name.clone()) {
            return Err(ModelFileError::Duplicate(name));
        }
        let emb = &mut model.spec.embeddings;
        match name.as_str() {
            ROWS | UNKNOWN if !emb.trainable => {
                let expected = if name == ROWS { vec![emb.len(), emb.dim] } else { vec![emb.dim] };
                if shape != expected {
                    return Err(ModelFileError::Shape {
                        name,
                        found: shape,
                        expected,
                    });
                }
                if name == ROWS {
                    emb.rows = data;
                } else {
                    emb.unknown = data;
                }
            }
            _ => {
                let id = model.params.id(&name).ok_or_else(|| ModelFileError::UnknownParameter(name.clone()))?;
                let expected = model.params.get(id).shape().to_vec();
                let t = Tensor::from_vec(&shape, data).filter(|_| shape == expected).ok_or_else(|| ModelFileError::Shape {
                    name: name.clone(),
                    found: shape.clone(),
                    expected,
                })?;
                model.params.set(id, t);
            }
        }
    }
    let mut required: Vec<String> = model.params.iter().map(|(n, _)| n.to_string()).collect();
    if !model.spec.embeddings.trainable {
        required.push(ROWS.into());
        required.push(UNKNOWN.into());
    }
    if let Some(missing) = required.into_iter().find(|n| !seen.contains(n)) {
        return Err(ModelFileError::Missing(missing));
    }
    Ok(model)
}

pub fn save(path: &Path, model: &JointModel<f32>) -> Result<(), ModelFileError> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<JointModel<f32>, ModelFileError> {
    from_bytes(&std::fs::read(path)?)
}
