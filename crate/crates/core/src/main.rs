use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use netcube::api;
use netcube::config::BuildConfig;
use netcube::engine::CubeEngine;
use netcube::generator::{generate, write_dataset, GeneratorConfig};
use netcube::snapshot;

#[derive(Parser)]
#[command(name = "netcube", version, about = "Multi-facet cube analytics over typed networks")]
struct Cli {
    /// Snapshot file to query (or to write, for `build`).
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    /// Build configuration; queried commands build in memory when no snapshot is given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Compact single-line JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest, allocate, precompute and write a snapshot.
    Build,
    /// Write a synthetic dataset.
    Generate {
        /// Generator config (JSON); the built-in default when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Use the two-block preset.
        #[arg(long, conflicts_with = "spec")]
        two_block: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Taxonomy trees of every dimension.
    Dimensions,
    /// Summary statistics of one cell.
    Summarize {
        #[arg(long, default_value = "*")]
        cell: String,
    },
    /// Sibling-cell contrast table.
    Contrast {
        #[arg(long, default_value = "*")]
        fixed: String,
        #[arg(long)]
        dim: String,
        #[arg(long)]
        level: usize,
    },
    /// Aggregate a cell along one dimension.
    Rollup {
        #[arg(long, default_value = "*")]
        cell: String,
        #[arg(long)]
        dim: String,
        #[arg(long)]
        level: usize,
    },
    /// Members of one super-node of a roll-up.
    Drilldown {
        #[arg(long, default_value = "*")]
        cell: String,
        #[arg(long)]
        dim: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        super_node: String,
    },
    /// Top-k cells covering a node set or subnetwork.
    Backtrack {
        /// Comma-separated node ids.
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
        /// Comma-separated `u:v` pairs.
        #[arg(long, value_delimiter = ',')]
        edges: Vec<String>,
        /// JSON file `{"nodes": [...], "edges": [[u, v], ...]}` instead of the flags.
        #[arg(long, conflicts_with_all = ["nodes", "edges"])]
        query: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Closed patterns of a cell, ranked.
    Mine {
        #[arg(long, default_value = "*")]
        cell: String,
        #[arg(long)]
        min_support: Option<usize>,
        #[arg(long)]
        max_edges: Option<usize>,
        /// `p,i,d`.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        sibling_dim: Option<String>,
    },
    /// Greedy union of cells covering a node set.
    Localize {
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        level: Option<usize>,
        /// Also write the merged network as nodes.jsonl/edges.jsonl here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral embedding of a cell.
    Embed {
        #[arg(long, default_value = "*")]
        cell: String,
        #[arg(long)]
        vectors: bool,
    },
    /// Proximity search conditioned on a cell.
    Prox {
        #[arg(long, default_value = "*")]
        cell: String,
        #[arg(long)]
        node: String,
        #[arg(long)]
        topk: Option<usize>,
        /// Pairwise proximity with this node instead of a neighbor list.
        #[arg(long, conflicts_with = "topk")]
        other: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn load_engine(cli: &Cli) -> Result<CubeEngine> {
    if let Some(p) = &cli.snapshot {
        return snapshot::load(p).with_context(|| format!("loading snapshot {}", p.display()));
    }
    if let Some(c) = &cli.config {
        let cfg = BuildConfig::load(c).with_context(|| format!("reading config {}", c.display()))?;
        return Ok(cfg.build()?);
    }
    bail!("either --snapshot or --config is required")
}

fn print(cli: &Cli, v: &Value) -> Result<()> {
    let text = if cli.json {
        serde_json::to_string(v)?
    } else {
        serde_json::to_string_pretty(v)?
    };
    // a closed pipe (`netcube ... | head`) is not an error
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn build(cli: &Cli) -> Result<Value> {
    let Some(cpath) = &cli.config else { bail!("build requires --config") };
    let cfg = BuildConfig::load(cpath).with_context(|| format!("reading config {}", cpath.display()))?;
    let out = cli
        .snapshot
        .clone()
        .or_else(|| cfg.snapshot.clone())
        .unwrap_or_else(|| PathBuf::from("cube.snap"));
    let engine = cfg.build()?;
    let bytes = snapshot::encode(&engine)?;
    std::fs::write(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    Ok(json!({
        "snapshot": out.display().to_string(),
        "bytes": bytes.len(),
        "sha256": snapshot::digest_hex(&bytes),
        "nodes": engine.network().node_count(),
        "edges": engine.network().edge_count(),
        "summaries": engine.cached_summaries().len(),
        "embeddings": engine.cached_embeddings().len(),
    }))
}

fn generate_cmd(spec: Option<&Path>, two_block: bool, seed: Option<u64>, out: &Path) -> Result<Value> {
    let mut cfg = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<GeneratorConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None if two_block => GeneratorConfig::two_block(42, 5),
        None => GeneratorConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ds = generate(&cfg)?;
    write_dataset(&ds, out)?;
    Ok(json!({
        "out": out.display().to_string(),
        "seed": cfg.seed,
        "nodes": ds.network.node_count(),
        "edges": ds.network.edge_count(),
        "leaf_cells": ds.truth.cells.len(),
    }))
}

fn parse_edges(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|e| match e.split_once(':') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
            _ => bail!("edge `{e}` is not of the form u:v"),
        })
        .collect()
}

fn query(cli: &Cli, engine: &CubeEngine) -> Result<api::ApiResult> {
    Ok(match &cli.command {
        Command::Dimensions => api::dimensions(engine),
        Command::Summarize { cell } => api::summary(engine, cell),
        Command::Contrast { fixed, dim, level } => api::contrast(
            engine,
            &api::ContrastRequest {
                fixed: Some(fixed.clone()),
                dim: dim.clone(),
                level: *level,
            },
        ),
        Command::Rollup { cell, dim, level } => api::rollup(
            engine,
            &api::RollupRequest {
                cell: Some(cell.clone()),
                dim: dim.clone(),
                level: *level,
            },
        ),
        Command::Drilldown { cell, dim, level, super_node } => api::drilldown(
            engine,
            &api::DrilldownRequest {
                cell: Some(cell.clone()),
                dim: dim.clone(),
                level: *level,
                super_node: super_node.clone(),
            },
        ),
        Command::Backtrack { nodes, edges, query, k, gamma } => {
            let mut req = match query {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<api::BacktrackRequest>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => api::BacktrackRequest {
                    nodes: nodes.clone(),
                    edges: parse_edges(edges)?,
                    ..Default::default()
                },
            };
            req.k = k.or(req.k);
            req.gamma = gamma.or(req.gamma);
            api::backtrack(engine, &req)
        }
        Command::Mine { cell, min_support, max_edges, weights, sibling_dim } => api::patterns(
            engine,
            cell,
            &api::PatternsRequest {
                min_support: *min_support,
                max_edges: *max_edges,
                weights: weights.clone(),
                sibling_dim: sibling_dim.clone(),
            },
        ),
        Command::Localize { nodes, lambda, rho, level, out } => {
            let req = api::LocalizeRequest {
                nodes: nodes.clone(),
                lambda: *lambda,
                rho: *rho,
                level: *level,
            };
            let r = api::localize(engine, &req);
            if let (Ok(v), Some(dir)) = (&r, out) {
                write_network(&v["network"], dir)?;
            }
            r
        }
        Command::Embed { cell, vectors } => api::embed(engine, cell, &api::EmbedRequest { vectors: *vectors }),
        Command::Prox { cell, node, topk, other } => api::prox(
            engine,
            cell,
            &api::ProxRequest {
                node: node.clone(),
                other: other.clone(),
                k: *topk,
            },
        ),
        Command::Build | Command::Generate { .. } | Command::Serve { .. } => unreachable!(),
    })
}

fn write_network(net: &Value, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for key in ["nodes", "edges"] {
        let mut text = String::new();
        for item in net[key].as_array().into_iter().flatten() {
            text.push_str(&serde_json::to_string(item)?);
            text.push('\n');
        }
        std::fs::write(dir.join(format!("{key}.jsonl")), text)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Build => print(cli, &build(cli)?)?,
        Command::Generate { spec, two_block, seed, out } => {
            print(cli, &generate_cmd(spec.as_deref(), *two_block, *seed, out)?)?
        }
        Command::Serve { host, port } => {
            let engine = Arc::new(load_engine(cli)?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(netcube::server::serve(engine, addr))
                .with_context(|| format!("serving on {addr}"))?;
        }
        _ => {
            let engine = load_engine(cli)?;
            match query(cli, &engine)? {
                Ok(v) => print(cli, &v)?,
                Err(e) => {
                    eprintln!("{}", e.body());
                    return Ok(ExitCode::from(2));
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
