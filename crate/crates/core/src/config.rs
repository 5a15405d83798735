//! Key-value build configuration and the ingest → allocate → precompute
//! pipeline.
//!
//! ```text
//! # comments start with '#'
//! nodes = nodes.jsonl
//! edges = edges.jsonl
//! dimension.topic = taxonomy_topic.json   # dimension order = file order
//! dimension.year = taxonomy_year.json
//! alpha = 0.85
//! weights = 1,1,1
//! cache.embeddings = true
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cube::Taxonomy;
use crate::engine::{CubeEngine, EngineError, EngineParams};
use crate::graph::{ingest_network, HeterogeneousNetwork};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    InvalidValue { line: usize, key: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A failure in one pipeline stage.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct BuildError {
    pub stage: &'static str,
    pub message: String,
}

impl BuildError {
    fn at(stage: &'static str) -> impl FnOnce(String) -> Self {
        move |message| Self { stage, message }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub dimensions: Vec<(String, PathBuf)>,
    pub params: EngineParams,
    pub snapshot: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        message: e.to_string(),
    })
}

impl BuildConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut nodes = None;
        let mut edges = None;
        let mut snapshot = None;
        let mut dimensions: Vec<(String, PathBuf)> = Vec::new();
        let mut params = EngineParams::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            let path = || base_dir.join(value);
            match key {
                "nodes" => nodes = Some(path()),
                "edges" => edges = Some(path()),
                "snapshot" => snapshot = Some(path()),
                "alpha" => params.propagation.alpha = parse_value(line, key, value)?,
                "tau" => params.propagation.tau = parse_value(line, key, value)?,
                "iters" => params.propagation.iters = parse_value(line, key, value)?,
                "gamma" => params.gamma = parse_value(line, key, value)?,
                "lambda" => params.lambda = parse_value(line, key, value)?,
                "rho" => params.rho = parse_value(line, key, value)?,
                "level" => params.localize_level = parse_value(line, key, value)?,
                "d" => params.embed_dim = parse_value(line, key, value)?,
                "weights" => params.weights = parse_value(line, key, value)?,
                "min_support" => params.min_support = parse_value(line, key, value)?,
                "max_edges" => params.max_edges = parse_value(line, key, value)?,
                "max_embeddings" => params.max_embeddings = parse_value(line, key, value)?,
                "path_seed" => params.path_seed = parse_value(line, key, value)?,
                "eigen_seed" => params.eigen_seed = parse_value(line, key, value)?,
                "eigen_tol" => params.eigen_tol = parse_value(line, key, value)?,
                "cache.summaries" => params.summarize_leaf_cells = parse_value(line, key, value)?,
                "cache.embeddings" => params.embed_leaf_cells = parse_value(line, key, value)?,
                _ => match key.strip_prefix("dimension.") {
                    Some(name) if !name.is_empty() => dimensions.push((name.to_string(), path())),
                    _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                },
            }
        }
        if dimensions.is_empty() {
            return Err(ConfigError::Missing("dimension.<name>"));
        }
        Ok(Self {
            nodes: nodes.ok_or(ConfigError::Missing("nodes"))?,
            edges: edges.ok_or(ConfigError::Missing("edges"))?,
            dimensions,
            params,
            snapshot,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, dir)
    }

    pub fn read_inputs(&self) -> Result<(HeterogeneousNetwork, Vec<Taxonomy>), BuildError> {
        let open = |p: &Path| {
            fs::File::open(p)
                .map(BufReader::new)
                .map_err(|e| format!("{}: {e}", p.display()))
        };
        let net = ingest_network(
            open(&self.nodes).map_err(BuildError::at("ingest"))?,
            open(&self.edges).map_err(BuildError::at("ingest"))?,
        )
        .map_err(|e| BuildError::at("ingest")(e.to_string()))?;
        let mut taxonomies = Vec::new();
        for (name, p) in &self.dimensions {
            let text = fs::read_to_string(p).map_err(|e| BuildError::at("taxonomy")(format!("{}: {e}", p.display())))?;
            taxonomies.push(
                Taxonomy::from_json(name, &text).map_err(|e| BuildError::at("taxonomy")(format!("{}: {e}", p.display())))?,
            );
        }
        Ok((net, taxonomies))
    }

    pub fn build(&self) -> Result<CubeEngine, BuildError> {
        let (net, taxonomies) = self.read_inputs()?;
        CubeEngine::build(net, taxonomies, self.params.clone()).map_err(|e| {
            let stage = match e {
                EngineError::Cube(_) => "lattice",
                EngineError::Alloc(_) => "allocate",
                _ => "precompute",
            };
            BuildError::at(stage)(e.to_string())
        })
    }
}
