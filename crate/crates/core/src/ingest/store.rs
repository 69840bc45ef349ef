//! JSONL embedding store.
//!
//! The first line is a header object, every following line one vector:
//!
//! ```text
//! {"format":"idiolens-embeddings","version":1,"dim":3,"model_id":"toy"}
//! {"text":"gray matter","vector":[0.1,-0.25,1]}
//! ```
//!
//! Vectors are kept at 32-bit precision and written with the shortest
//! decimal that parses back to the same `f32`, so a save/load cycle is
//! lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::vectors::EmbeddingVector;

pub const STORE_FORMAT: &str = "idiolens-embeddings";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dim: usize,
    model_id: String,
}

#[derive(Debug, Deserialize)]
struct Record {
    text: String,
    vector: Vec<f32>,
}

/// Text → vector map with a shared dimension. Keys are exact strings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    model_id: String,
    dim: Option<usize>,
    entries: IndexMap<String, Vec<f32>>,
}

impl EmbeddingStore {
    /// An empty store; the dimension is fixed by the first insert.
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            dim: None,
            entries: IndexMap::new(),
        }
    }

    pub fn with_dim(model_id: impl Into<String>, dim: usize) -> Self {
        Self {
            dim: Some(dim),
            ..Self::new(model_id)
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    /// The stored vector widened to `f64`.
    pub fn get(&self, key: &str) -> Option<EmbeddingVector> {
        self.entries
            .get(key)
            .map(|v| EmbeddingVector::from_f32(v).expect("validated on insert"))
    }

    /// Checks a vector against the store's dimension and the vector
    /// invariants without inserting it.
    pub fn validate(&self, values: &[f32]) -> Result<(), IngestError> {
        if let Some(dim) = self.dim {
            if values.len() != dim {
                return Err(IngestError::DimMismatch {
                    expected: dim,
                    found: values.len(),
                });
            }
        }
        EmbeddingVector::from_f32(values)?;
        Ok(())
    }

    /// Inserts or replaces a vector.
    pub fn insert(&mut self, key: impl Into<String>, values: &[f32]) -> Result<(), IngestError> {
        self.validate(values)?;
        self.dim.get_or_insert(values.len());
        self.entries.insert(key.into(), values.to_vec());
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
        Self::read(BufReader::new(file))
    }

    pub fn read<R: BufRead>(source: R) -> Result<Self, IngestError> {
        let mut lines = source.lines().enumerate();
        let header: Header = loop {
            match lines.next() {
                None => return Err(IngestError::MalformedRecord(1)),
                Some((i, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line)
                        .map_err(|_| IngestError::MalformedRecord(i + 1))?;
                }
            }
        };
        if header.format != STORE_FORMAT || header.version != STORE_VERSION || header.dim == 0 {
            return Err(IngestError::UnsupportedHeader(format!(
                "{} v{} dim {}",
                header.format, header.version, header.dim
            )));
        }

        let mut store = Self::with_dim(header.model_id, header.dim);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let record: Record =
                serde_json::from_str(&line).map_err(|_| IngestError::MalformedRecord(line_no))?;
            if record.vector.len() != header.dim {
                return Err(IngestError::DimInconsistent(line_no));
            }
            if store.contains(&record.text) {
                return Err(IngestError::DuplicateKey(record.text));
            }
            store
                .insert(record.text, &record.vector)
                .map_err(|_| IngestError::MalformedRecord(line_no))?;
        }
        Ok(store)
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let file = File::create(&tmp).map_err(|e| IngestError::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            self.write(&mut w)?;
            w.flush().map_err(|e| IngestError::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| IngestError::io(path, e))
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<(), IngestError> {
        let dim = self.dim.ok_or(IngestError::UnknownDim)?;
        let header = Header {
            format: STORE_FORMAT.to_string(),
            version: STORE_VERSION,
            dim,
            model_id: self.model_id.clone(),
        };
        serde_json::to_writer(&mut *out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        for (key, values) in &self.entries {
            out.write_all(b"{\"text\":")?;
            serde_json::to_writer(&mut *out, key).map_err(std::io::Error::from)?;
            out.write_all(b",\"vector\":[")?;
            for (i, x) in values.iter().enumerate() {
                if i > 0 {
                    out.write_all(b",")?;
                }
                // `Display` for f32 is the shortest round-tripping decimal.
                write!(out, "{x}")?;
            }
            out.write_all(b"]}\n")?;
        }
        Ok(())
    }
}
