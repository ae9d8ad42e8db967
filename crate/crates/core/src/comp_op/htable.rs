use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{rounding, CompOpError, WeightedGraphModel};
use crate::circuit_graph::{preimage, VertexId};

/// h_n(x_0) for n = 0..=max_n via the base values μ(x_r)/μ(x_0), r ≤ κ, and
/// h_{n+κ+1}(x_0) = h_n(x_0) + Σ_i (μ(x_{i,1})/μ(x_0)) h_n(x_{i,1}).
pub fn h_x0_series(model: &WeightedGraphModel, max_n: u32) -> Vec<Result<(f64, f64), CompOpError>> {
    let k = model.kappa();
    let mu0 = model.mu[&VertexId::Circuit(0)];
    let mut out: Vec<Result<(f64, f64), CompOpError>> = Vec::with_capacity(max_n as usize + 1);
    for n in 0..=max_n {
        let v = if n <= k {
            let h = model.mu[&VertexId::Circuit(n)] / mu0;
            Ok((h, rounding(h, 0)))
        } else {
            let m = n - k - 1;
            match &out[m as usize] {
                Err(e) => Err(e.clone()),
                Ok((prev, prev_err)) => branch_sum(model, m).map(|(s, se)| {
                    let h = prev + s / mu0;
                    (h, prev_err + se / mu0 + rounding(h, 0))
                }),
            }
        };
        out.push(v);
    }
    out
}

/// Σ_i μ(x_{i,1}) h_m(x_{i,1}) = Σ_i μ(x_{i,m+1}), with the omitted-branch bound.
fn branch_sum(model: &WeightedGraphModel, m: u32) -> Result<(f64, f64), CompOpError> {
    model.branch_level_sum(m + 1)
}

/// h_n(v) through the canonical recurrence path.
pub fn h_n(model: &WeightedGraphModel, v: VertexId, n: u32) -> Result<(f64, f64), CompOpError> {
    if !model.shape.contains(v) {
        return Err(CompOpError::InvalidVertex(v));
    }
    if n == 0 {
        return Ok((1.0, 0.0));
    }
    match v {
        VertexId::Branch(i, j) => {
            let (num, ne) = model.weight(VertexId::Branch(i, j + n))?;
            let den = model.mu[&v];
            let h = num / den;
            Ok((h, ne / den + rounding(h, 1)))
        }
        VertexId::Circuit(r) => {
            let series = h_x0_series(model, n + r);
            let (h0, e0) = series[(n + r) as usize].clone()?;
            let c = model.mu[&VertexId::Circuit(0)] / model.mu[&v];
            Ok((c * h0, c * e0 + rounding(c * h0, 1)))
        }
    }
}

/// h_n(x_κ) as a direct sum over φ⁻ⁿ{x_κ}: with n = j(κ+1) + r,
/// n = 0 → 1; r = 0 → 1 + Σ_i Σ_{l=1..j} μ(x_{i,l(κ+1)})/μ(x_κ);
/// r ≥ 1 → μ(x_{r−1})/μ(x_κ) + Σ_i Σ_{l=0..j} μ(x_{i,l(κ+1)+r})/μ(x_κ).
pub fn h_n_xkappa_direct(model: &WeightedGraphModel, n: u32) -> Result<(f64, f64), CompOpError> {
    if n == 0 {
        return Ok((1.0, 0.0));
    }
    let k = model.kappa();
    let muk = model.mu[&VertexId::Circuit(k)];
    let (j, r) = (n / (k + 1), n % (k + 1));
    let (mut s, mut e) = if r == 0 { (muk, 0.0) } else { (model.mu[&VertexId::Circuit(r - 1)], 0.0) };
    let l0 = if r == 0 { 1 } else { 0 };
    for l in l0..=j {
        let (ls, le) = model.branch_level_sum(l * (k + 1) + r)?;
        s += ls;
        e += le;
    }
    let h = s / muk;
    Ok((h, e / muk + rounding(h, j + 1)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HEntry {
    pub value: Option<f64>,
    pub error_bound: Option<f64>,
    /// Set when the value could not be produced (truncation, divergence).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl HEntry {
    fn from(r: Result<(f64, f64), CompOpError>) -> Self {
        match r {
            Ok((v, e)) => HEntry { value: Some(v), error_bound: Some(e), flag: None },
            Err(err) => HEntry { value: None, error_bound: None, flag: Some(err.to_string()) },
        }
    }
}

/// h_n(x) for every vertex of the truncated shape and n = 0..=max_n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeTable {
    pub vertices: Vec<VertexId>,
    pub max_n: u32,
    /// rows[n][k] = h_n(vertices[k]).
    pub rows: Vec<Vec<HEntry>>,
}

impl DerivativeTable {
    pub fn compute(model: &WeightedGraphModel, max_n: u32) -> Self {
        let vertices = model.shape.vertices();
        let k = model.kappa();
        let x0 = h_x0_series(model, max_n + k);
        let mu0 = model.mu[&VertexId::Circuit(0)];
        let mut rows = Vec::with_capacity(max_n as usize + 1);
        for n in 0..=max_n {
            let row = vertices
                .iter()
                .map(|&v| {
                    if n == 0 {
                        return HEntry::from(Ok((1.0, 0.0)));
                    }
                    HEntry::from(match v {
                        VertexId::Circuit(r) => x0[(n + r) as usize].clone().map(|(h, e)| {
                            let c = mu0 / model.mu[&v];
                            (c * h, c * e + rounding(c * h, 1))
                        }),
                        VertexId::Branch(..) => h_n(model, v, n),
                    })
                })
                .collect();
            rows.push(row);
        }
        DerivativeTable { vertices, max_n, rows }
    }

    pub fn get(&self, v: VertexId, n: u32) -> Option<&HEntry> {
        let k = self.vertices.iter().position(|u| *u == v)?;
        self.rows.get(n as usize).map(|r| &r[k])
    }

    /// Values and errors of one column up to the first missing entry.
    pub fn column(&self, v: VertexId) -> (Vec<f64>, Vec<f64>) {
        let mut vals = Vec::new();
        let mut errs = Vec::new();
        if let Some(k) = self.vertices.iter().position(|u| *u == v) {
            for row in &self.rows {
                match (row[k].value, row[k].error_bound) {
                    (Some(x), Some(e)) => {
                        vals.push(x);
                        errs.push(e);
                    }
                    _ => break,
                }
            }
        }
        (vals, errs)
    }

    /// CSV with a value and an error column per vertex, one row per n.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n");
        for v in &self.vertices {
            s.push_str(&format!(",h({v}),err({v})"));
        }
        s.push('\n');
        for (n, row) in self.rows.iter().enumerate() {
            s.push_str(&n.to_string());
            for e in row {
                match (e.value, e.error_bound) {
                    (Some(v), Some(er)) => s.push_str(&format!(",{v:e},{er:e}")),
                    _ => s.push_str(",NA,NA"),
                }
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub n: u32,
    /// sup_x h_n(x) = ‖C_φⁿ‖² over the evaluated vertices.
    pub sup_value: f64,
    pub attained_at: VertexId,
    pub truncation_caveat: bool,
    pub unevaluated: Vec<VertexId>,
}

pub fn norm_bound(model: &WeightedGraphModel, n: u32) -> NormBound {
    let table = DerivativeTable::compute(model, n);
    let mut best = (f64::NEG_INFINITY, VertexId::Circuit(0));
    let mut unevaluated = Vec::new();
    for (k, v) in table.vertices.iter().enumerate() {
        match table.rows[n as usize][k].value {
            Some(h) if h > best.0 => best = (h, *v),
            Some(_) => {}
            None => unevaluated.push(*v),
        }
    }
    let caveat = !unevaluated.is_empty() || model.branch_tail.is_none() || model.shape.is_infinite();
    NormBound { n, sup_value: best.0, attained_at: best.1, truncation_caveat: caveat, unevaluated }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityVerdict {
    Dense,
    NotDense,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub n: u32,
    pub verdict: DensityVerdict,
    /// Σ_i μ(x_{i,1}) ∫ t^{n+κ}/(t^{κ+1}−1) dP(x_{i,1}) over stored atoms, when finite.
    pub stored_sum: Option<f64>,
    pub reason: String,
}

/// Finiteness of Σ_i μ(x_{i,1}) ∫ t^{n+κ}/(t^{κ+1}−1) dP(x_{i,1}), which decides
/// whether C_φⁿ is densely defined. Tails are judged from tail degrees only:
/// on [s, ∞) with s > 1 the integrand is at most s^{κ+1}/(s^{κ+1}−1)·t^{n−1}.
pub fn power_density(model: &WeightedGraphModel, n: u32) -> DensityReport {
    let Some(bt) = &model.branch_tail else {
        return DensityReport { n, verdict: DensityVerdict::Unknown, stored_sum: None, reason: "no seed measures".into() };
    };
    let k = model.kappa() as i32;
    let mut sum = 0.0;
    for (idx, seed) in bt.seeds.iter().enumerate() {
        let w = model.mu[&VertexId::Branch(idx as u32 + 1, 1)];
        sum += w * seed.integrate(|t| t.powi(n as i32 + k) / (t.powi(k + 1) - 1.0));
        if !seed.is_exact() && n >= 1 && n - 1 > seed.tail_degree() {
            return DensityReport {
                n,
                verdict: DensityVerdict::Unknown,
                stored_sum: None,
                reason: format!("seed {} tail controlled only to degree {}", idx + 1, seed.tail_degree()),
            };
        }
    }
    if model.shape.is_infinite() {
        let Some(o) = &bt.omitted else {
            return DensityReport { n, verdict: DensityVerdict::Unknown, stored_sum: None, reason: "η = ∞ without omitted-branch metadata".into() };
        };
        let order = n.saturating_sub(1);
        if let Some(d) = o.divergent_from {
            if n >= 1 && order >= d {
                return DensityReport {
                    n,
                    verdict: DensityVerdict::NotDense,
                    stored_sum: None,
                    reason: format!("omitted branches have infinite moment of order {order}"),
                };
            }
        }
        if n >= 1 && order > o.degree {
            return DensityReport {
                n,
                verdict: DensityVerdict::Unknown,
                stored_sum: None,
                reason: format!("omitted branches controlled only to order {}", o.degree),
            };
        }
    }
    DensityReport { n, verdict: DensityVerdict::Dense, stored_sum: Some(sum), reason: "all integrals finite".into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HyponormalVerdict {
    Hyponormal,
    NotHyponormal,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSlack {
    pub vertex: VertexId,
    pub slack: f64,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudSki {
    pub left: f64,
    pub right: f64,
    /// left − right; positive means the κ = 0 criterion fails.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyponormalityReport {
    pub per_vertex: Vec<VertexSlack>,
    pub unevaluated: Vec<VertexId>,
    pub verdict: HyponormalVerdict,
    pub min_slack: f64,
    pub min_slack_at: Option<VertexId>,
    pub budski: Option<BudSki>,
    pub tol: f64,
}

/// 1 − (1/μ(x)) Σ_{y∈φ⁻¹x} μ(y)²/μ(φ⁻¹{y}).
fn slack(model: &WeightedGraphModel, x: VertexId) -> Result<(f64, f64), CompOpError> {
    let pre = preimage(&model.shape, x)?;
    let mut s = 0.0;
    let mut e = 0.0;
    for y in &pre.vertices {
        let wy = model.mu[y];
        let (p, pe) = model.preimage_weight(*y)?;
        s += wy * wy / p;
        // p may be underestimated by up to pe
        e += wy * wy * pe / (p * p);
    }
    if x == VertexId::Circuit(model.kappa()) && model.shape.is_infinite() {
        // omitted y = x_{i,1}: μ(y)²/μ(x_{i,2}) = μ(y)/∫t dP ≤ μ(y)/floor
        let o = model.omitted().ok_or(CompOpError::UnknownTail)?;
        e += o.mass_bound / o.support_floor;
    }
    let mux = model.mu[&x];
    let val = 1.0 - s / mux;
    Ok((val, e / mux + rounding(s / mux, pre.vertices.len() as u32)))
}

pub fn hyponormality(model: &WeightedGraphModel, tol: f64) -> HyponormalityReport {
    let mut per_vertex = Vec::new();
    let mut unevaluated = Vec::new();
    for v in model.shape.vertices() {
        match slack(model, v) {
            Ok((s, e)) => per_vertex.push(VertexSlack { vertex: v, slack: s, error_bound: e }),
            Err(_) => unevaluated.push(v),
        }
    }
    let positive_h = model.h_phi().values().all(|r| r.as_ref().map(|(h, _)| *h > 0.0).unwrap_or(true));
    let fails = per_vertex.iter().any(|s| s.slack + s.error_bound < -tol);
    let passes = per_vertex.iter().all(|s| s.slack - s.error_bound >= -tol);
    let verdict = if fails || !positive_h {
        HyponormalVerdict::NotHyponormal
    } else if passes {
        HyponormalVerdict::Hyponormal
    } else {
        HyponormalVerdict::Inconclusive
    };
    let min = per_vertex.iter().min_by(|a, b| a.slack.total_cmp(&b.slack));
    let budski = (model.kappa() == 0).then(|| budski(model)).and_then(|r| r.ok());
    HyponormalityReport {
        min_slack: min.map(|m| m.slack).unwrap_or(f64::NAN),
        min_slack_at: min.map(|m| m.vertex),
        per_vertex,
        unevaluated,
        verdict,
        budski,
        tol,
    }
}

/// κ = 0 form of the slack at x_0: Σ_i μ(x_{i,1})²/(μ(x_0)μ(x_{i,2})) ≤ S/(μ(x_0)+S),
/// S = Σ_i μ(x_{i,1}).
pub fn budski(model: &WeightedGraphModel) -> Result<BudSki, CompOpError> {
    let mu0 = model.mu[&VertexId::Circuit(0)];
    let mut left = 0.0;
    for i in model.shape.branches() {
        let w1 = model.mu[&VertexId::Branch(i, 1)];
        let (w2, _) = model.weight(VertexId::Branch(i, 2))?;
        left += w1 * w1 / (mu0 * w2);
    }
    let (s, _) = model.branch_level_sum(1)?;
    let right = s / (mu0 + s);
    Ok(BudSki { left, right, margin: left - right })
}

/// Σ over a map of per-vertex results, for reports.
pub fn h_phi_table(model: &WeightedGraphModel) -> BTreeMap<VertexId, HEntry> {
    model.h_phi().into_iter().map(|(k, v)| (k, HEntry::from(v))).collect()
}
