//! Portable weight archives for pretrained-base import, checkpoints and final
//! models.
//!
//! Layout: magic `DWT1`, manifest length as little-endian `u64`, UTF-8 JSON
//! manifest `{version, tensors, metadata}`, then the blob of little-endian
//! IEEE-754 binary32 values. Each manifest entry carries the tensor name,
//! shape, byte offset and length within the blob, and a CRC32 of those
//! bytes. Conv kernels are `[out, in, kh, kw]` row-major, dense weights
//! `[out, in]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::Normalization;
use crate::error::WeightsError;
use crate::net::{ArchConfig, NetworkGraph};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"DWT1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

/// Everything needed to rebuild the graph and preprocess inputs for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub normalization: Normalization,
    pub class_names: Vec<String>,
    pub input_size: usize,
    pub block_widths: [usize; 5],
    pub head_units: [usize; 2],
    pub dropout_rate: f64,
}

impl ArchiveMetadata {
    pub fn new(arch: &ArchConfig, class_names: Vec<String>, normalization: Normalization) -> Self {
        Self {
            normalization,
            class_names,
            input_size: arch.input_size,
            block_widths: arch.block_widths,
            head_units: arch.head_units,
            dropout_rate: arch.dropout_rate,
        }
    }

    pub fn arch(&self) -> ArchConfig {
        ArchConfig {
            input_size: self.input_size,
            num_classes: self.class_names.len(),
            block_widths: self.block_widths,
            head_units: self.head_units,
            dropout_rate: self.dropout_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    tensors: Vec<TensorEntry>,
    metadata: ArchiveMetadata,
}

/// Which graph tensors a load assigns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadScope {
    /// Only `block*_conv*` tensors; the head keeps its current values.
    BaseOnly,
    All,
}

/// In-memory archive: named `f32` tensors in file order plus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightArchive {
    pub metadata: ArchiveMetadata,
    pub tensors: IndexMap<String, Tensor<f32>>,
}

fn le_bytes(t: &Tensor<f32>) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

impl WeightArchive {
    pub fn from_graph<T: Scalar>(graph: &NetworkGraph<T>, metadata: ArchiveMetadata) -> Self {
        let tensors = graph.named_tensors().into_iter().map(|(n, t)| (n, t.cast::<f32>())).collect();
        Self { metadata, tensors }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut blob = Vec::new();
        let mut entries = Vec::with_capacity(self.tensors.len());
        for (name, t) in &self.tensors {
            let bytes = le_bytes(t);
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset: blob.len() as u64,
                length: bytes.len() as u64,
                crc32: crc32fast::hash(&bytes),
            });
            blob.extend_from_slice(&bytes);
        }
        let manifest = Manifest { version: FORMAT_VERSION, tensors: entries, metadata: self.metadata.clone() };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::with_capacity(HEADER_LEN + json.len() + blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(WeightsError::BadMagic);
        }
        let manifest_len = u64::from_le_bytes(bytes[4..HEADER_LEN].try_into().expect("8 bytes")) as usize;
        let blob_start = HEADER_LEN
            .checked_add(manifest_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| WeightsError::Manifest("manifest length exceeds file".into()))?;
        let manifest: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..blob_start])
            .map_err(|e| WeightsError::Manifest(e.to_string()))?;
        if manifest.version != FORMAT_VERSION {
            return Err(WeightsError::UnsupportedVersion(manifest.version));
        }
        let blob = &bytes[blob_start..];

        let mut spans: Vec<(u64, u64, &str)> = Vec::new();
        let mut tensors = IndexMap::with_capacity(manifest.tensors.len());
        for e in &manifest.tensors {
            let elems: usize = e.shape.iter().product();
            if e.shape.contains(&0) || e.length != 4 * elems as u64 {
                return Err(WeightsError::Manifest(format!("tensor {} length does not match its shape", e.name)));
            }
            let end = e.offset.checked_add(e.length).filter(|&end| end <= blob.len() as u64);
            let Some(end) = end else {
                return Err(WeightsError::Manifest(format!("tensor {} lies outside the blob", e.name)));
            };
            spans.push((e.offset, end, &e.name));
            let raw = &blob[e.offset as usize..end as usize];
            if crc32fast::hash(raw) != e.crc32 {
                return Err(WeightsError::Checksum(e.name.clone()));
            }
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            let t = Tensor::new(e.shape.clone(), data).map_err(|err| WeightsError::Manifest(err.to_string()))?;
            if tensors.insert(e.name.clone(), t).is_some() {
                return Err(WeightsError::Manifest(format!("duplicate tensor {}", e.name)));
            }
        }
        spans.sort();
        if let Some(w) = spans.windows(2).find(|w| w[1].0 < w[0].1) {
            return Err(WeightsError::Manifest(format!("tensors {} and {} overlap", w[0].2, w[1].2)));
        }
        Ok(Self { metadata: manifest.metadata, tensors })
    }

    /// Writes via a temporary file in the target directory, then renames.
    pub fn write(&self, path: &Path) -> Result<(), WeightsError> {
        let io = |source| WeightsError::Io { path: path.to_path_buf(), source };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&self.to_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, WeightsError> {
        let bytes = fs::read(path).map_err(|source| WeightsError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }

    /// Assigns the tensors selected by `scope` to `graph`. Everything is
    /// validated first; on error the graph is unchanged.
    pub fn apply<T: Scalar>(&self, graph: &mut NetworkGraph<T>, scope: LoadScope) -> Result<(), WeightsError> {
        let wanted: Vec<String> =
            graph.tensor_names().into_iter().filter(|n| scope == LoadScope::All || graph.is_base_tensor(n)).collect();
        for name in &wanted {
            let src = self.tensors.get(name).ok_or_else(|| WeightsError::MissingTensor(name.clone()))?;
            let dst = graph.tensor(name).expect("graph tensor");
            if src.shape() != dst.shape() {
                return Err(WeightsError::ShapeMismatch {
                    name: name.clone(),
                    archive: src.shape().to_vec(),
                    graph: dst.shape().to_vec(),
                });
            }
        }
        for name in &wanted {
            *graph.tensor_mut(name).expect("graph tensor") = self.tensors[name].cast();
        }
        Ok(())
    }
}

/// Writes every parameter of `graph` to `path`.
pub fn save<T: Scalar>(graph: &NetworkGraph<T>, path: &Path, metadata: ArchiveMetadata) -> Result<(), WeightsError> {
    WeightArchive::from_graph(graph, metadata).write(path)
}

/// Loads `path` into `graph` for the given scope and returns the archive metadata.
pub fn load<T: Scalar>(
    path: &Path,
    graph: &mut NetworkGraph<T>,
    scope: LoadScope,
) -> Result<ArchiveMetadata, WeightsError> {
    let archive = WeightArchive::read(path)?;
    archive.apply(graph, scope)?;
    Ok(archive.metadata)
}

/// Rebuilds the graph described by the archive metadata and loads all tensors.
pub fn load_model<T: Scalar>(path: &Path) -> Result<(NetworkGraph<T>, ArchiveMetadata), WeightsError> {
    let archive = WeightArchive::read(path)?;
    let mut graph = NetworkGraph::build(archive.metadata.arch())?;
    archive.apply(&mut graph, LoadScope::All)?;
    Ok((graph, archive.metadata))
}
