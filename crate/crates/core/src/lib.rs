//! Multi-facet hierarchical cube engine for typed heterogeneous networks.
//!
//! A base network is organized into a virtual cube whose dimensions are
//! taxonomies. Nodes are allocated to taxonomy values from weak surface-name
//! seeds, and every cell of the cube (one value per dimension) induces a
//! subnetwork that can be summarized, contrasted, aggregated, searched and
//! mined.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`graph`] | typed heterogeneous network store, ingestion, projections |
//! | [`cube`] | taxonomies, cell coordinates, lattice navigation |
//! | [`allocator`] | surface-name seeding and clamped label propagation |
//! | [`olap`] | cell materialization, roll-up/drill-down, summaries, contrast |
//! | [`backtrack`] | top-k cells covering a network query |
//! | [`pattern`] | closed subgraph mining with contextual scores |
//! | [`localize`] | greedy query-specific network construction |
//! | [`proximity`] | per-cell spectral embeddings and cross-cell alignment |
//! | [`engine`] | the assembled, immutable cube with shared caches |
//! | [`snapshot`], [`config`], [`generator`], [`api`], [`server`] | service plumbing |

pub mod allocator;
pub mod api;
pub mod backtrack;
pub mod config;
pub mod cube;
pub mod engine;
pub mod generator;
pub mod graph;
pub mod localize;
pub mod olap;
pub mod pattern;
pub mod proximity;
pub mod server;
pub mod snapshot;
pub mod spectral;

pub use cube::{CellCoordinate, CubeLattice, LatticeRelation, Taxonomy};
pub use engine::{CubeEngine, EngineParams};
pub use graph::{HeterogeneousNetwork, TypedEdge, TypedNode, UndirectedGraph};
