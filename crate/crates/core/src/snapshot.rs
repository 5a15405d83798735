//! Single-file, self-contained engine snapshots.
//!
//! Layout (little-endian):
//!
//! ```text
//! "NCUBESNP" | version: u32 | sections: u32
//! per section: name_len: u16 | name | offset: u64 | len: u64 | sha256: [u8; 32]
//! section payloads (JSON)
//! ```

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::allocator::Allocation;
use crate::cube::{CubeLattice, TaxonRecord, Taxonomy};
use crate::engine::{CubeEngine, EngineParams};
use crate::graph::{HeterogeneousNetwork, TypedEdge, TypedNode};
use crate::olap::NetworkSummary;
use crate::proximity::CellEmbedding;

pub const MAGIC: &[u8; 8] = b"NCUBESNP";
pub const SNAPSHOT_VERSION: u32 = 1;

const SECTIONS: [&str; 6] = ["meta", "network", "taxonomies", "allocation", "summaries", "embeddings"];

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot file (bad magic)")]
    BadMagic,
    #[error("snapshot version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("snapshot is truncated")]
    Truncated,
    #[error("section `{0}` is missing")]
    MissingSection(String),
    #[error("section `{0}` fails its checksum")]
    Checksum(String),
    #[error("section `{section}` is malformed: {message}")]
    Malformed { section: String, message: String },
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub version: u32,
    pub params: EngineParams,
    pub node_count: usize,
    pub edge_count: usize,
    pub dimensions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NetworkSection {
    nodes: Vec<TypedNode>,
    edges: Vec<TypedEdge>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomySection {
    dimension: String,
    root: TaxonRecord,
}

#[derive(Serialize, Deserialize)]
struct SummaryEntry {
    coordinate: String,
    summary: NetworkSummary,
}

fn to_json<T: Serialize>(section: &str, value: &T) -> Result<Vec<u8>, SnapshotError> {
    serde_json::to_vec(value).map_err(|e| SnapshotError::Malformed {
        section: section.into(),
        message: e.to_string(),
    })
}

fn from_json<T: DeserializeOwned>(section: &str, bytes: &[u8]) -> Result<T, SnapshotError> {
    serde_json::from_slice(bytes).map_err(|e| SnapshotError::Malformed {
        section: section.into(),
        message: e.to_string(),
    })
}

fn malformed(section: &str) -> impl FnOnce(String) -> SnapshotError + '_ {
    move |message| SnapshotError::Malformed {
        section: section.into(),
        message,
    }
}

pub fn encode(engine: &CubeEngine) -> Result<Vec<u8>, SnapshotError> {
    let net = engine.network();
    let lattice = engine.lattice();
    let meta = SnapshotMeta {
        version: SNAPSHOT_VERSION,
        params: engine.params().clone(),
        node_count: net.node_count(),
        edge_count: net.edge_count(),
        dimensions: lattice.dimensions().iter().map(|t| t.dimension().to_string()).collect(),
    };
    let network = NetworkSection {
        nodes: net.nodes().to_vec(),
        edges: net.edges().iter().map(|e| net.typed_edge(e)).collect(),
    };
    let taxonomies: Vec<TaxonomySection> = lattice
        .dimensions()
        .iter()
        .map(|t| TaxonomySection {
            dimension: t.dimension().to_string(),
            root: t.to_record(),
        })
        .collect();
    let summaries: Vec<SummaryEntry> = engine
        .cached_summaries()
        .into_iter()
        .map(|(c, s)| SummaryEntry {
            coordinate: lattice.canonical_string(&c),
            summary: (*s).clone(),
        })
        .collect();
    let embeddings: Vec<CellEmbedding> = engine.cached_embeddings().iter().map(|e| (**e).clone()).collect();

    let payloads = [
        to_json("meta", &meta)?,
        to_json("network", &network)?,
        to_json("taxonomies", &taxonomies)?,
        to_json("allocation", engine.allocation())?,
        to_json("summaries", &summaries)?,
        to_json("embeddings", &embeddings)?,
    ];
    let header_len: usize = 16 + SECTIONS.iter().map(|n| 2 + n.len() + 8 + 8 + 32).sum::<usize>();
    let mut out = Vec::with_capacity(header_len + payloads.iter().map(Vec::len).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(SECTIONS.len() as u32).to_le_bytes());
    let mut offset = header_len as u64;
    for (name, body) in SECTIONS.iter().zip(&payloads) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(body.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(body));
        offset += body.len() as u64;
    }
    for body in &payloads {
        out.extend_from_slice(body);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(n).ok_or(SnapshotError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(SnapshotError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, SnapshotError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Validates the header and checksums and returns `(name, payload)` pairs.
pub fn read_sections(bytes: &[u8]) -> Result<Vec<(String, &[u8])>, SnapshotError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(|_| SnapshotError::BadMagic)? != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let version = r.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: version,
            expected: SNAPSHOT_VERSION,
        });
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| SnapshotError::Truncated)?;
        let offset = usize::try_from(r.u64()?).map_err(|_| SnapshotError::Truncated)?;
        let size = usize::try_from(r.u64()?).map_err(|_| SnapshotError::Truncated)?;
        let digest = r.take(32)?;
        let body = offset
            .checked_add(size)
            .and_then(|end| bytes.get(offset..end))
            .ok_or(SnapshotError::Truncated)?;
        if Sha256::digest(body).as_slice() != digest {
            return Err(SnapshotError::Checksum(name));
        }
        out.push((name, body));
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<CubeEngine, SnapshotError> {
    let sections = read_sections(bytes)?;
    let get = |name: &str| -> Result<&[u8], SnapshotError> {
        sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| *b)
            .ok_or_else(|| SnapshotError::MissingSection(name.into()))
    };
    let meta: SnapshotMeta = from_json("meta", get("meta")?)?;
    if meta.version != SNAPSHOT_VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: meta.version,
            expected: SNAPSHOT_VERSION,
        });
    }
    let network: NetworkSection = from_json("network", get("network")?)?;
    let net = HeterogeneousNetwork::from_parts(network.nodes, network.edges)
        .map_err(|e| malformed("network")(e.to_string()))?;
    let taxonomies: Vec<TaxonomySection> = from_json("taxonomies", get("taxonomies")?)?;
    let taxonomies = taxonomies
        .iter()
        .map(|t| Taxonomy::from_record(&t.dimension, &t.root))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| malformed("taxonomies")(e.to_string()))?;
    let lattice = CubeLattice::new(taxonomies).map_err(|e| malformed("taxonomies")(e.to_string()))?;
    let allocation: Allocation = from_json("allocation", get("allocation")?)?;
    if allocation.dims.len() != lattice.dimensions().len()
        || allocation.dims.iter().any(|d| d.len() != net.node_count())
    {
        return Err(malformed("allocation")("shape does not match network and lattice".into()));
    }
    let summaries: Vec<SummaryEntry> = from_json("summaries", get("summaries")?)?;
    let summaries = summaries
        .into_iter()
        .map(|s| {
            lattice
                .parse_coordinate(&s.coordinate)
                .map(|c| (c, s.summary))
                .map_err(|e| malformed("summaries")(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let embeddings: Vec<CellEmbedding> = from_json("embeddings", get("embeddings")?)?;
    let engine = CubeEngine::from_parts(net, lattice, allocation, meta.params);
    engine.insert_summaries(summaries);
    engine
        .insert_embeddings(embeddings)
        .map_err(|e| malformed("embeddings")(e.to_string()))?;
    Ok(engine)
}

pub fn save(engine: &CubeEngine, path: &Path) -> Result<(), SnapshotError> {
    let bytes = encode(engine)?;
    fs::write(path, bytes).map_err(|source| SnapshotError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<CubeEngine, SnapshotError> {
    let bytes = fs::read(path).map_err(|source| SnapshotError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// Lowercase hex sha256 of a byte string.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
