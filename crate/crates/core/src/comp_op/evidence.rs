use serde::{Deserialize, Serialize};

use super::{h_n, h_x0_series, CompOpError, WeightedGraphModel};
use crate::circuit_graph::VertexId;
use crate::moments::{
    carleman_diagnostic, hankel_report, shift_dominance, CarlemanReport, GrowthClass, HankelReport, HankelVerdict,
    MomentSequence, ShiftDominance, TRUNCATION_NOTE,
};
use crate::scalar::Precision;

/// Hypotheses of the sufficiency criterion that no finite prefix can decide.
pub const UNPROVEN_HYPOTHESES: [&str; 4] = [
    "(i) {h_{n+κ+1}(x_0) − h_n(x_0)} is S-determinate and some S-representing measure P(x_0,·) of {h_n(x_0)} satisfies P(x_0,[0,1)) = 0",
    "(ii) {h_{n+κ+1}(x_0) − h_n(x_0)} and {h_{j(κ+1)}(x_0)} are S-determinate",
    "(iii) {h_{j(κ+1)}(x_0)} satisfies the Carleman condition",
    "(iv) {h_{(j+1)(κ+1)}(x_0) − h_{j(κ+1)}(x_0)} satisfies the Carleman condition",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexHankel {
    pub vertex: VertexId,
    /// Largest n with h_n(vertex) available.
    pub depth: u32,
    pub report: Option<HankelReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceFlags {
    pub hankel: bool,
    pub shift_dominance: bool,
    pub carleman: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubnormalityEvidence {
    pub hankel: Vec<VertexHankel>,
    pub shift_dominance: Option<ShiftDominance>,
    pub carleman: Option<CarlemanReport>,
    pub flags: EvidenceFlags,
    pub unproven_hypotheses: Vec<String>,
    pub note: String,
}

/// Longest prefix of h_0..h_max_n(v) that can be evaluated.
fn h_prefix(model: &WeightedGraphModel, v: VertexId, max_n: u32) -> MomentSequence {
    let mut vals = Vec::new();
    let mut errs = Vec::new();
    let mut push = |r: Result<(f64, f64), CompOpError>| match r {
        Ok((h, e)) => {
            vals.push(h);
            errs.push(e);
            true
        }
        Err(_) => false,
    };
    if v == VertexId::Circuit(0) {
        for r in h_x0_series(model, max_n) {
            if !push(r) {
                break;
            }
        }
    } else {
        for n in 0..=max_n {
            if !push(h_n(model, v, n)) {
                break;
            }
        }
    }
    MomentSequence { values: vals, error_bounds: Some(errs) }
}

/// Evidence flags for subnormality at the truncation level; never a proof.
pub fn subnormality_evidence(
    model: &WeightedGraphModel,
    max_n: u32,
    tol: f64,
    precision: Precision,
) -> SubnormalityEvidence {
    let k = model.kappa();
    let mut targets = vec![VertexId::Circuit(0)];
    if k > 0 {
        targets.push(VertexId::Circuit(k));
    }
    targets.extend(model.shape.branches().map(|i| VertexId::Branch(i, 1)));

    let mut hankel = Vec::with_capacity(targets.len());
    for v in targets {
        let g = h_prefix(model, v, max_n);
        let depth = g.values.len().saturating_sub(1) as u32;
        let report = (g.values.len() >= 2).then(|| hankel_report(&g, tol, precision));
        hankel.push(VertexHankel { vertex: v, depth, report });
    }
    let hankel_ok = hankel
        .iter()
        .all(|h| h.report.as_ref().is_none_or(|r| r.verdict == HankelVerdict::StieltjesConsistent));

    let g0 = h_prefix(model, VertexId::Circuit(0), max_n);
    let sd = (g0.values.len() >= 2).then(|| shift_dominance(&g0, tol, precision));
    let stride = (k + 1) as usize;
    let strided = MomentSequence::exact(g0.values.iter().step_by(stride).copied().collect());
    let carleman = carleman_diagnostic(&strided).ok();

    let flags = EvidenceFlags {
        hankel: hankel_ok,
        shift_dominance: sd.as_ref().is_some_and(|s| s.passes),
        carleman: carleman.as_ref().is_some_and(|c| c.growth_class == GrowthClass::Diverging),
    };
    SubnormalityEvidence {
        hankel,
        shift_dominance: sd,
        carleman,
        flags,
        unproven_hypotheses: UNPROVEN_HYPOTHESES.iter().map(|s| s.to_string()).collect(),
        note: TRUNCATION_NOTE.to_string(),
    }
}
