//! The one-circuit graph G_{η,κ}: a circuit x_0 → x_κ → … → x_0 of length κ+1
//! with η infinite branches x_{i,j} → … → x_{i,1} → x_κ.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("vertex {0} is not in the shape")]
    InvalidVertex(VertexId),
    #[error("cannot parse vertex `{0}`")]
    BadVertex(String),
    #[error("invalid shape: {0}")]
    BadShape(String),
}

/// `Circuit(r)` is x_r; `Branch(i, j)` is x_{i,j} (i, j ≥ 1).
///
/// Ordering puts circuit vertices first, then branches lexicographically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexId {
    Circuit(u32),
    Branch(u32, u32),
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Circuit(r) => write!(f, "x{r}"),
            VertexId::Branch(i, j) => write!(f, "x{i},{j}"),
        }
    }
}

impl FromStr for VertexId {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, GraphError> {
        let bad = || GraphError::BadVertex(s.to_string());
        let body = s.trim().strip_prefix('x').ok_or_else(bad)?;
        match body.split_once(',') {
            Some((i, j)) => {
                let i: u32 = i.trim().parse().map_err(|_| bad())?;
                let j: u32 = j.trim().parse().map_err(|_| bad())?;
                if i == 0 || j == 0 {
                    return Err(bad());
                }
                Ok(VertexId::Branch(i, j))
            }
            None => Ok(VertexId::Circuit(body.parse().map_err(|_| bad())?)),
        }
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eta {
    Finite(u32),
    Infinite,
}

impl Serialize for Eta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Eta::Finite(n) => s.serialize_u32(*n),
            Eta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Eta::Finite(n)),
            Raw::S(s) if s == "inf" || s == "infinity" => Ok(Eta::Infinite),
            Raw::S(s) => s.parse().map(Eta::Finite).map_err(serde::de::Error::custom),
        }
    }
}

impl FromStr for Eta {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inf" | "infinity" => Ok(Eta::Infinite),
            n => n.parse().map(Eta::Finite).map_err(|_| format!("bad eta `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphShape {
    pub eta: Eta,
    pub kappa: u32,
    /// Branch truncation J.
    pub branch_depth: u32,
    /// Number of branches kept; equals η when η is finite.
    pub eta_cap: u32,
}

impl GraphShape {
    pub fn finite(eta: u32, kappa: u32, branch_depth: u32) -> Result<Self, GraphError> {
        Self::new(Eta::Finite(eta), kappa, branch_depth, eta)
    }

    pub fn new(eta: Eta, kappa: u32, branch_depth: u32, eta_cap: u32) -> Result<Self, GraphError> {
        let s = GraphShape { eta, kappa, branch_depth, eta_cap };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.branch_depth < 1 {
            return Err(GraphError::BadShape("branch_depth must be ≥ 1".into()));
        }
        match self.eta {
            Eta::Finite(0) => Err(GraphError::BadShape("η must be ≥ 1".into())),
            Eta::Finite(n) if n != self.eta_cap => Err(GraphError::BadShape("eta_cap must equal η".into())),
            Eta::Infinite if self.eta_cap < 1 => Err(GraphError::BadShape("eta_cap must be ≥ 1".into())),
            _ => Ok(()),
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.eta == Eta::Infinite
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match v {
            VertexId::Circuit(r) => r <= self.kappa,
            VertexId::Branch(i, j) => i >= 1 && i <= self.eta_cap && j >= 1 && j <= self.branch_depth,
        }
    }

    /// All vertices of the truncated shape in canonical order.
    pub fn vertices(&self) -> Vec<VertexId> {
        let mut v: Vec<VertexId> = (0..=self.kappa).map(VertexId::Circuit).collect();
        for i in 1..=self.eta_cap {
            for j in 1..=self.branch_depth {
                v.push(VertexId::Branch(i, j));
            }
        }
        v
    }

    pub fn branches(&self) -> std::ops::RangeInclusive<u32> {
        1..=self.eta_cap
    }
}

/// A vertex set plus whether some of it fell outside the truncation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet {
    pub vertices: BTreeSet<VertexId>,
    pub truncated: bool,
}

pub fn phi(shape: &GraphShape, v: VertexId) -> Result<VertexId, GraphError> {
    if !shape.contains(v) {
        return Err(GraphError::InvalidVertex(v));
    }
    Ok(match v {
        VertexId::Branch(i, j) if j >= 2 => VertexId::Branch(i, j - 1),
        VertexId::Branch(_, _) => VertexId::Circuit(shape.kappa),
        VertexId::Circuit(0) => VertexId::Circuit(shape.kappa),
        VertexId::Circuit(r) => VertexId::Circuit(r - 1),
    })
}

/// φ⁻¹({v}) restricted to the truncated shape.
pub fn preimage(shape: &GraphShape, v: VertexId) -> Result<VertexSet, GraphError> {
    if !shape.contains(v) {
        return Err(GraphError::InvalidVertex(v));
    }
    let k = shape.kappa;
    let mut out = BTreeSet::new();
    let mut truncated = false;
    match v {
        VertexId::Circuit(r) if r == k => {
            out.insert(VertexId::Circuit(0));
            for i in shape.branches() {
                out.insert(VertexId::Branch(i, 1));
            }
            truncated = shape.is_infinite();
        }
        VertexId::Circuit(r) => {
            out.insert(VertexId::Circuit(r + 1));
        }
        VertexId::Branch(i, j) => {
            if j < shape.branch_depth {
                out.insert(VertexId::Branch(i, j + 1));
            } else {
                truncated = true;
            }
        }
    }
    Ok(VertexSet { vertices: out, truncated })
}

/// φ⁻ⁿ({x_κ}) from the closed formula: with n = j(κ+1) + r,
/// {x_{r−1}} ∪ {x_{i, l(κ+1)+r} : i, 0 ≤ l ≤ j}, where x_{−1} = x_{i,0} = x_κ.
pub fn iterated_preimage_xkappa_closed(shape: &GraphShape, n: u32) -> VertexSet {
    let k = shape.kappa;
    let (j, r) = (n / (k + 1), n % (k + 1));
    let mut out = BTreeSet::new();
    let mut truncated = false;
    out.insert(if r == 0 { VertexId::Circuit(k) } else { VertexId::Circuit(r - 1) });
    for l in 0..=j {
        let depth = l * (k + 1) + r;
        if depth == 0 {
            out.insert(VertexId::Circuit(k));
            continue;
        }
        if depth > shape.branch_depth {
            truncated = true;
            continue;
        }
        for i in shape.branches() {
            out.insert(VertexId::Branch(i, depth));
        }
        if shape.is_infinite() {
            truncated = true;
        }
    }
    VertexSet { vertices: out, truncated }
}

/// n-fold preimage of {v} by repeated one-step preimages.
pub fn iterated_preimage_bfs(shape: &GraphShape, v: VertexId, n: u32) -> Result<VertexSet, GraphError> {
    let mut cur: BTreeSet<VertexId> = BTreeSet::from([v]);
    if !shape.contains(v) {
        return Err(GraphError::InvalidVertex(v));
    }
    let mut truncated = false;
    for _ in 0..n {
        let mut next = BTreeSet::new();
        for u in &cur {
            let p = preimage(shape, *u)?;
            truncated |= p.truncated;
            next.extend(p.vertices);
        }
        cur = next;
    }
    Ok(VertexSet { vertices: cur, truncated })
}
