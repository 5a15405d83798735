//! Taxonomies, cell coordinates and the cube lattice.
//!
//! The cube is virtual: a cell is named by one taxonomy value per dimension and
//! only materialized when asked for. Value `0` of every taxonomy is the root
//! `"*"`, meaning full aggregation along that dimension.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const ROOT_ID: &str = "*";

#[derive(Debug, Error, PartialEq)]
pub enum CubeError {
    #[error("taxonomy `{dimension}`: {message}")]
    Malformed { dimension: String, message: String },
    #[error("taxonomy `{dimension}`: cycle through value `{id}`")]
    Cycle { dimension: String, id: String },
    #[error("taxonomy `{dimension}`: duplicate value id `{id}`")]
    DuplicateId { dimension: String, id: String },
    #[error("taxonomy `{dimension}`: missing root `*`")]
    MissingRoot { dimension: String },
    #[error("taxonomy `{dimension}`: invalid value id `{id}`")]
    InvalidId { dimension: String, id: String },
    #[error("coordinate syntax error near `{0}`")]
    Syntax(String),
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("unknown value `{value}` in dimension `{dimension}`")]
    UnknownValue { dimension: String, value: String },
    #[error("dimension `{0}` bound twice")]
    DuplicateDimension(String),
    #[error("duplicate dimension name `{0}` in lattice")]
    DuplicateLatticeDimension(String),
    #[error("level {level} exceeds depth {depth} of dimension `{dimension}`")]
    LevelTooDeep {
        dimension: String,
        level: usize,
        depth: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonValue {
    pub id: String,
    pub name: String,
    pub aliases: Vec<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    dimension: String,
    ordered: bool,
    values: Vec<TaxonValue>,
    enter: Vec<usize>,
    exit: Vec<usize>,
    depth: usize,
}

/// JSON form of a taxonomy value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonRecord {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub children: Vec<TaxonRecord>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ordered: bool,
}

impl Taxonomy {
    /// Loads a taxonomy from its JSON tree. A top-level array is wrapped in an
    /// implicit `"*"` root; a top-level object must be the `"*"` root itself.
    pub fn from_json(dimension: &str, source: &str) -> Result<Self, CubeError> {
        let value: Value = serde_json::from_str(source).map_err(|e| CubeError::Malformed {
            dimension: dimension.into(),
            message: e.to_string(),
        })?;
        let malformed = |e: serde_json::Error| CubeError::Malformed {
            dimension: dimension.into(),
            message: e.to_string(),
        };
        let root = match value {
            Value::Array(_) => TaxonRecord {
                id: ROOT_ID.into(),
                name: "all".into(),
                aliases: Vec::new(),
                children: serde_json::from_value(value).map_err(malformed)?,
                ordered: false,
            },
            other => serde_json::from_value(other).map_err(malformed)?,
        };
        Self::from_record(dimension, &root)
    }

    pub fn from_record(dimension: &str, root: &TaxonRecord) -> Result<Self, CubeError> {
        if root.id != ROOT_ID {
            return Err(CubeError::MissingRoot {
                dimension: dimension.into(),
            });
        }
        let mut tax = Taxonomy {
            dimension: dimension.into(),
            ordered: root.ordered,
            values: Vec::new(),
            enter: Vec::new(),
            exit: Vec::new(),
            depth: 0,
        };
        let mut seen = HashSet::new();
        let mut path = Vec::new();
        tax.insert(root, None, 0, &mut seen, &mut path)?;
        tax.index_intervals();
        Ok(tax)
    }

    fn insert(
        &mut self,
        rec: &TaxonRecord,
        parent: Option<usize>,
        depth: usize,
        seen: &mut HashSet<String>,
        path: &mut Vec<String>,
    ) -> Result<usize, CubeError> {
        let dim = || self.dimension.clone();
        if rec.id.is_empty() || rec.id.contains([',', '=']) || rec.id.trim() != rec.id {
            return Err(CubeError::InvalidId {
                dimension: dim(),
                id: rec.id.clone(),
            });
        }
        if (parent.is_some() && rec.id == ROOT_ID) || path.contains(&rec.id) {
            return Err(CubeError::Cycle {
                dimension: dim(),
                id: rec.id.clone(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(CubeError::DuplicateId {
                dimension: dim(),
                id: rec.id.clone(),
            });
        }
        let mut aliases: Vec<String> = Vec::new();
        for a in &rec.aliases {
            let a = a.to_lowercase();
            if !aliases.contains(&a) {
                aliases.push(a);
            }
        }
        let idx = self.values.len();
        self.values.push(TaxonValue {
            id: rec.id.clone(),
            name: if rec.name.is_empty() { rec.id.clone() } else { rec.name.clone() },
            aliases,
            parent,
            children: Vec::new(),
            depth,
        });
        self.depth = self.depth.max(depth);
        path.push(rec.id.clone());
        for child in &rec.children {
            let c = self.insert(child, Some(idx), depth + 1, seen, path)?;
            self.values[idx].children.push(c);
        }
        path.pop();
        Ok(idx)
    }

    fn index_intervals(&mut self) {
        let n = self.values.len();
        self.enter = vec![0; n];
        self.exit = vec![0; n];
        let mut clock = 0;
        let mut stack = vec![(0usize, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                self.exit[v] = clock;
                continue;
            }
            self.enter[v] = clock;
            clock += 1;
            stack.push((v, true));
            for &c in self.values[v].children.iter().rev() {
                stack.push((c, false));
            }
        }
    }

    pub fn dimension(&self) -> &str {
        &self.dimension
    }

    pub fn is_ordered(&self) -> bool {
        self.ordered
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Maximum depth; the root alone has depth 0.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[TaxonValue] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> &TaxonValue {
        &self.values[idx]
    }

    pub fn find(&self, id: &str) -> Option<usize> {
        self.values.iter().position(|v| v.id == id)
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.values[idx].children.is_empty()
    }

    /// True when `a` equals `b` or lies below it.
    pub fn is_descendant_or_equal(&self, a: usize, b: usize) -> bool {
        self.enter[b] <= self.enter[a] && self.exit[a] <= self.exit[b]
    }

    /// Ancestor-or-self of `v` at depth `level`; `v` itself when it is shallower.
    pub fn ancestor_at(&self, mut v: usize, level: usize) -> usize {
        while self.values[v].depth > level {
            v = self.values[v].parent.expect("non-root has parent");
        }
        v
    }

    pub fn lca(&self, mut a: usize, b: usize) -> usize {
        while !self.is_descendant_or_equal(b, a) {
            a = self.values[a].parent.expect("root is ancestor of all");
        }
        a
    }

    /// Leaves below (or equal to) `v`, in preorder.
    pub fn leaves_under(&self, v: usize) -> Vec<usize> {
        self.preorder_from(v)
            .into_iter()
            .filter(|&x| self.is_leaf(x))
            .collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.leaves_under(0)
    }

    pub fn preorder_from(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            for &c in self.values[x].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Values at depth exactly `level` below `v`, in taxonomy (preorder) order.
    pub fn descendants_at_depth(&self, v: usize, level: usize) -> Vec<usize> {
        self.preorder_from(v)
            .into_iter()
            .filter(|&x| self.values[x].depth == level)
            .collect()
    }

    /// Values forming the cut at `level`: nodes at that depth plus shallower leaves.
    pub fn level_cut(&self, level: usize) -> Vec<usize> {
        self.preorder_from(0)
            .into_iter()
            .filter(|&x| {
                let d = self.values[x].depth;
                d == level || (d < level && self.is_leaf(x))
            })
            .collect()
    }

    /// JSON tree as accepted by [`Taxonomy::from_json`].
    pub fn to_record(&self) -> TaxonRecord {
        fn build(t: &Taxonomy, v: usize) -> TaxonRecord {
            let val = &t.values[v];
            TaxonRecord {
                id: val.id.clone(),
                name: val.name.clone(),
                aliases: val.aliases.clone(),
                children: val.children.iter().map(|&c| build(t, c)).collect(),
                ordered: v == 0 && t.ordered,
            }
        }
        build(self, 0)
    }
}

/// One taxonomy value index per dimension of a lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellCoordinate(pub Vec<usize>);

impl CellCoordinate {
    pub fn values(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeRelation {
    Equal,
    /// The first coordinate is strictly coarser than the second.
    Ancestor,
    /// The first coordinate is strictly finer than the second.
    Descendant,
    Incomparable,
}

impl fmt::Display for LatticeRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LatticeRelation::Equal => "equal",
            LatticeRelation::Ancestor => "ancestor",
            LatticeRelation::Descendant => "descendant",
            LatticeRelation::Incomparable => "incomparable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeLattice {
    dimensions: Vec<Taxonomy>,
}

impl CubeLattice {
    pub fn new(dimensions: Vec<Taxonomy>) -> Result<Self, CubeError> {
        let mut names = HashSet::new();
        for t in &dimensions {
            if !names.insert(t.dimension.clone()) {
                return Err(CubeError::DuplicateLatticeDimension(t.dimension.clone()));
            }
        }
        Ok(Self { dimensions })
    }

    pub fn dimensions(&self) -> &[Taxonomy] {
        &self.dimensions
    }

    pub fn dimension(&self, i: usize) -> &Taxonomy {
        &self.dimensions[i]
    }

    pub fn dimension_index(&self, name: &str) -> Result<usize, CubeError> {
        self.dimensions
            .iter()
            .position(|t| t.dimension == name)
            .ok_or_else(|| CubeError::UnknownDimension(name.into()))
    }

    pub fn top(&self) -> CellCoordinate {
        CellCoordinate(vec![0; self.dimensions.len()])
    }

    /// Parses `dim=valueId(,dim=valueId)*`; omitted dimensions are `"*"`.
    /// The empty string and `"*"` both denote the top coordinate.
    pub fn parse_coordinate(&self, text: &str) -> Result<CellCoordinate, CubeError> {
        let mut coord = self.top();
        let text = text.trim();
        if text.is_empty() || text == ROOT_ID {
            return Ok(coord);
        }
        let mut bound = vec![false; self.dimensions.len()];
        for part in text.split(',') {
            let (dim, value) = part
                .split_once('=')
                .ok_or_else(|| CubeError::Syntax(part.to_string()))?;
            let (dim, value) = (dim.trim(), value.trim());
            if dim.is_empty() || value.is_empty() {
                return Err(CubeError::Syntax(part.to_string()));
            }
            let d = self.dimension_index(dim)?;
            if bound[d] {
                return Err(CubeError::DuplicateDimension(dim.into()));
            }
            bound[d] = true;
            coord.0[d] =
                self.dimensions[d]
                    .find(value)
                    .ok_or_else(|| CubeError::UnknownValue {
                        dimension: dim.into(),
                        value: value.into(),
                    })?;
        }
        Ok(coord)
    }

    /// Canonical text: bound dimensions in lattice order; the top is `"*"`.
    pub fn canonical_string(&self, c: &CellCoordinate) -> String {
        let parts: Vec<String> = c
            .0
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0)
            .map(|(d, &v)| format!("{}={}", self.dimensions[d].dimension, self.dimensions[d].values[v].id))
            .collect();
        if parts.is_empty() {
            ROOT_ID.to_string()
        } else {
            parts.join(",")
        }
    }

    /// `a ⪯ b` in the product-of-trees order.
    pub fn is_refinement_of(&self, a: &CellCoordinate, b: &CellCoordinate) -> bool {
        self.dimensions
            .iter()
            .zip(a.0.iter().zip(&b.0))
            .all(|(t, (&x, &y))| t.is_descendant_or_equal(x, y))
    }

    pub fn relation(&self, a: &CellCoordinate, b: &CellCoordinate) -> LatticeRelation {
        if a == b {
            return LatticeRelation::Equal;
        }
        match (self.is_refinement_of(b, a), self.is_refinement_of(a, b)) {
            (true, _) => LatticeRelation::Ancestor,
            (_, true) => LatticeRelation::Descendant,
            _ => LatticeRelation::Incomparable,
        }
    }

    /// Refines exactly one dimension to one of its taxonomy children.
    pub fn children(&self, c: &CellCoordinate) -> Vec<CellCoordinate> {
        let mut out = Vec::new();
        for (d, t) in self.dimensions.iter().enumerate() {
            for &child in &t.values[c.0[d]].children {
                let mut next = c.clone();
                next.0[d] = child;
                out.push(next);
            }
        }
        out
    }

    /// Coarsens exactly one bound dimension to its parent.
    pub fn parents(&self, c: &CellCoordinate) -> Vec<CellCoordinate> {
        let mut out = Vec::new();
        for (d, t) in self.dimensions.iter().enumerate() {
            if let Some(p) = t.values[c.0[d]].parent {
                let mut next = c.clone();
                next.0[d] = p;
                out.push(next);
            }
        }
        out
    }

    pub fn lca(&self, a: &CellCoordinate, b: &CellCoordinate) -> CellCoordinate {
        CellCoordinate(
            self.dimensions
                .iter()
                .zip(a.0.iter().zip(&b.0))
                .map(|(t, (&x, &y))| t.lca(x, y))
                .collect(),
        )
    }

    /// Number of coordinates in the full lattice.
    pub fn cell_count(&self) -> u128 {
        self.dimensions.iter().map(|t| t.len() as u128).product()
    }

    /// Every coordinate, in lexicographic order of value indices. Intended for
    /// small cubes only.
    pub fn all_coordinates(&self) -> Vec<CellCoordinate> {
        let mut out = vec![Vec::new()];
        for t in &self.dimensions {
            let mut next = Vec::with_capacity(out.len() * t.len());
            for prefix in &out {
                for v in 0..t.len() {
                    let mut p = prefix.clone();
                    p.push(v);
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(CellCoordinate).collect()
    }
}
