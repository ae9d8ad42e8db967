//! Weighted composition-operator models on G_{η,κ}.
//!
//! A model is a graph shape plus vertex weights μ. Radon–Nikodym derivatives
//! h_n(x) = μ(φ⁻ⁿ{x})/μ(x) are computed by one recurrence (through x_0) and
//! cross-checked by a direct sum over the iterated preimage of x_κ.

mod cc;
mod evidence;
mod htable;

pub use cc::*;
pub use evidence::*;
pub use htable::*;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit_graph::{preimage, GraphError, GraphShape, VertexId};
use crate::measures::{AtomicMeasure, MeasureError};
use crate::moments::MomentError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompOpError {
    #[error("weight of {0} is beyond the truncation and no seed closed form exists")]
    TruncationExhausted(VertexId),
    #[error("sum over branches diverges (order {0})")]
    Divergent(u32),
    #[error("omitted branches are only controlled up to order {0}")]
    BeyondTailDegree(u32),
    #[error("η = ∞ model without omitted-branch metadata")]
    UnknownTail,
    #[error("missing weight for {0}")]
    MissingWeight(VertexId),
    #[error("weight of {0} is not positive")]
    NonPositiveWeight(VertexId),
    #[error("stored weight of {vertex} disagrees with its seed moment (relative {rel})")]
    SeedMismatch { vertex: VertexId, rel: f64 },
    #[error("preimage of {0} is empty in the truncated shape")]
    EmptyPreimage(VertexId),
    #[error("family has no measure for {0}")]
    MissingMember(VertexId),
    #[error("Θ = {0} exceeds 1")]
    ThetaOutOfRange(f64),
    #[error("seed {index} has inf support {inf} ≤ 1")]
    SeedViolatesI10 { index: usize, inf: f64 },
    #[error("condition (i-b) violated at branch {branch}, order {order}: defect {defect}")]
    ConditionIB { branch: u32, order: u32, defect: f64 },
    #[error("condition (i-c) violated at r = {r}: defect {defect}")]
    ConditionIC { r: u32, defect: f64 },
    #[error("condition (i-d) violated: sum exceeds 1 by {defect}")]
    ConditionID { defect: f64 },
    #[error("target sequence not increasing at n = {0}")]
    MonotonicityViolated(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

/// Aggregate of the branches beyond `eta_cap` when η = ∞: bounds on the measure
/// ω = Σ_{i > cap} μ(x_{i,1}) P(x_{i,1}, ·), so that Σ_{i > cap} μ(x_{i,m}) = ∫ t^{m−1} dω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmittedBranches {
    pub mass_bound: f64,
    /// Highest order k with ∫ t^k dω controlled by `moment_bound`.
    pub degree: u32,
    pub moment_bound: f64,
    /// ∫ t^k dω = ∞ for every k ≥ this order.
    #[serde(default)]
    pub divergent_from: Option<u32>,
    /// Lower bound of supp ω; must exceed 1.
    pub support_floor: f64,
}

impl OmittedBranches {
    /// Upper bound on ∫ t^k dω.
    pub fn moment_bound_at(&self, k: u32) -> Result<f64, CompOpError> {
        if let Some(d) = self.divergent_from {
            if k >= d {
                return Err(CompOpError::Divergent(k));
            }
        }
        if k == 0 {
            Ok(self.mass_bound)
        } else if k <= self.degree {
            // t^k ≤ t^D on [floor, ∞) with floor ≥ 1
            Ok(self.moment_bound)
        } else {
            Err(CompOpError::BeyondTailDegree(k))
        }
    }

    /// Seeds δ_{i+1} with μ(x_{i,1}) = (i+1)^{−p} for i > cap.
    ///
    /// ∫ t^k dω = Σ_{i>cap} (i+1)^{k−p} ≤ (cap+1)^{k−p+1}/(p−k−1) for k < p − 1.
    pub fn power_law(cap: u32, p: u32) -> Self {
        let c = (cap + 1) as f64;
        let bound = |k: u32| c.powi(k as i32 - p as i32 + 1) / (p as f64 - k as f64 - 1.0);
        let degree = p.saturating_sub(2);
        OmittedBranches {
            mass_bound: if p >= 2 { bound(0) } else { f64::INFINITY },
            degree,
            moment_bound: if p >= 2 { bound(degree) } else { f64::INFINITY },
            divergent_from: Some(p.saturating_sub(1)),
            support_floor: c + 1.0,
        }
    }
}

/// Seed measures P(x_{i,1}, ·) for the stored branches plus the omitted aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchTail {
    pub seeds: Vec<AtomicMeasure>,
    #[serde(default)]
    pub omitted: Option<OmittedBranches>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraphModel {
    pub shape: GraphShape,
    pub mu: BTreeMap<VertexId, f64>,
    pub branch_tail: Option<BranchTail>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    shape: GraphShape,
    mu: Vec<(VertexId, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branch_tail: Option<BranchTail>,
}

impl Serialize for WeightedGraphModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelJson {
            shape: self.shape,
            mu: self.mu.iter().map(|(k, v)| (*k, *v)).collect(),
            branch_tail: self.branch_tail.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedGraphModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = ModelJson::deserialize(d)?;
        let model = WeightedGraphModel { shape: j.shape, mu: j.mu.into_iter().collect(), branch_tail: j.branch_tail };
        model.validate().map_err(serde::de::Error::custom)?;
        Ok(model)
    }
}

/// Relative rounding allowance for quantities derived from double-precision weights.
pub(crate) fn rounding(value: f64, steps: u32) -> f64 {
    value.abs() * f64::EPSILON * 8.0 * (steps as f64 + 1.0)
}

impl WeightedGraphModel {
    pub fn new(
        shape: GraphShape,
        mu: BTreeMap<VertexId, f64>,
        branch_tail: Option<BranchTail>,
    ) -> Result<Self, CompOpError> {
        let m = WeightedGraphModel { shape, mu, branch_tail };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CompOpError> {
        self.shape.validate()?;
        for v in self.shape.vertices() {
            match self.mu.get(&v) {
                None => return Err(CompOpError::MissingWeight(v)),
                Some(w) if !(*w > 0.0) || !w.is_finite() => return Err(CompOpError::NonPositiveWeight(v)),
                _ => {}
            }
        }
        if let Some(bt) = &self.branch_tail {
            if bt.seeds.len() != self.shape.eta_cap as usize {
                return Err(CompOpError::Invalid("one seed per stored branch required".into()));
            }
            for i in self.shape.branches() {
                let seed = &bt.seeds[i as usize - 1];
                let w1 = self.mu[&VertexId::Branch(i, 1)];
                for j in 2..=self.shape.branch_depth {
                    let Ok((m, e)) = seed.moment(j - 1) else { break };
                    let stored = self.mu[&VertexId::Branch(i, j)];
                    let rel = (stored - w1 * m).abs() / stored;
                    if rel > 1e-12 + w1 * e / stored {
                        return Err(CompOpError::SeedMismatch { vertex: VertexId::Branch(i, j), rel });
                    }
                }
            }
            if self.shape.is_infinite() {
                if let Some(o) = &bt.omitted {
                    if !(o.support_floor > 1.0) {
                        return Err(CompOpError::Invalid("omitted branches must live above 1".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kappa(&self) -> u32 {
        self.shape.kappa
    }

    pub fn seeds(&self) -> Option<&[AtomicMeasure]> {
        self.branch_tail.as_ref().map(|b| b.seeds.as_slice())
    }

    pub fn omitted(&self) -> Option<&OmittedBranches> {
        self.branch_tail.as_ref().and_then(|b| b.omitted.as_ref())
    }

    /// μ(v) with an error bound; branch weights beyond the stored depth come from
    /// μ(x_{i,1}) ∫ t^{j−1} dP(x_{i,1}).
    pub fn weight(&self, v: VertexId) -> Result<(f64, f64), CompOpError> {
        if let Some(w) = self.mu.get(&v) {
            return Ok((*w, 0.0));
        }
        match v {
            VertexId::Branch(i, j) if i >= 1 && i <= self.shape.eta_cap && j > self.shape.branch_depth => {
                let seed = self
                    .seeds()
                    .map(|s| &s[i as usize - 1])
                    .ok_or(CompOpError::TruncationExhausted(v))?;
                let w1 = self.mu[&VertexId::Branch(i, 1)];
                let (m, e) = seed.moment(j - 1).map_err(|_| CompOpError::TruncationExhausted(v))?;
                Ok((w1 * m, w1 * e + rounding(w1 * m, j)))
            }
            _ => Err(CompOpError::InvalidVertex(v)),
        }
    }

    /// Bound on Σ_{i > cap} μ(x_{i,m}); zero for finite η.
    pub fn omitted_weight(&self, m: u32) -> Result<f64, CompOpError> {
        if !self.shape.is_infinite() {
            return Ok(0.0);
        }
        let o = self.omitted().ok_or(CompOpError::UnknownTail)?;
        o.moment_bound_at(m - 1)
    }

    /// Σ_i μ(x_{i,m}) over stored branches and a bound for the rest.
    pub fn branch_level_sum(&self, m: u32) -> Result<(f64, f64), CompOpError> {
        let mut s = 0.0;
        let mut e = 0.0;
        for i in self.shape.branches() {
            let (w, we) = self.weight(VertexId::Branch(i, m))?;
            s += w;
            e += we;
        }
        Ok((s, e + self.omitted_weight(m)? + rounding(s, self.shape.eta_cap)))
    }

    /// μ(φ⁻¹{v}) with an error bound.
    pub fn preimage_weight(&self, v: VertexId) -> Result<(f64, f64), CompOpError> {
        let k = self.kappa();
        match v {
            VertexId::Circuit(r) if r == k => {
                let (s, e) = self.branch_level_sum(1)?;
                Ok((self.mu[&VertexId::Circuit(0)] + s, e))
            }
            VertexId::Circuit(r) => self.weight(VertexId::Circuit(r + 1)),
            VertexId::Branch(i, j) => self.weight(VertexId::Branch(i, j + 1)),
        }
    }

    /// h_φ(x) = μ(φ⁻¹{x})/μ(x) on every vertex of the truncated shape.
    pub fn h_phi(&self) -> BTreeMap<VertexId, Result<(f64, f64), CompOpError>> {
        self.shape
            .vertices()
            .into_iter()
            .map(|v| {
                let mu = self.mu[&v];
                let r = self.preimage_weight(v).map(|(p, e)| (p / mu, e / mu + rounding(p / mu, 1)));
                (v, r)
            })
            .collect()
    }

    /// E(f)(x) = Σ_{y∈φ⁻¹x} μ(y) f(y) / μ(φ⁻¹{x}); missing f values count as 0.
    pub fn conditional_expectation(&self, f: &BTreeMap<VertexId, f64>, x: VertexId) -> Result<f64, CompOpError> {
        let pre = preimage(&self.shape, x)?;
        if pre.vertices.is_empty() {
            return Err(CompOpError::EmptyPreimage(x));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for y in &pre.vertices {
            let w = self.mu[y];
            num += w * f.get(y).copied().unwrap_or(0.0);
            den += w;
        }
        Ok(num / den)
    }
}

impl CompOpError {
    #[allow(non_snake_case)]
    pub(crate) fn InvalidVertex(v: VertexId) -> Self {
        CompOpError::Graph(GraphError::InvalidVertex(v))
    }
}
