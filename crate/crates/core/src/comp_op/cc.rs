use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{h_x0_series, BranchTail, CompOpError, OmittedBranches, WeightedGraphModel};
use crate::circuit_graph::{preimage, Eta, GraphShape, VertexId};
use crate::measures::{Atom, AtomicMeasure};
use crate::moments::MomentSequence;

/// Candidate family P(x, ·) for the consistency condition
/// (1/μ(x)) Σ_{y∈φ⁻¹x} μ(y) P(y, σ) = ∫_σ t P(x, dt).
#[derive(Clone, Debug, PartialEq)]
pub struct CCFamily {
    pub p: BTreeMap<VertexId, AtomicMeasure>,
    pub tol: f64,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    #[serde(rename = "P")]
    p: Vec<(VertexId, AtomicMeasure)>,
    tol: f64,
}

impl Serialize for CCFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FamilyJson { p: self.p.iter().map(|(k, v)| (*k, v.clone())).collect(), tol: self.tol }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CCFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = FamilyJson::deserialize(d)?;
        for (_, m) in &j.p {
            m.validate().map_err(serde::de::Error::custom)?;
        }
        Ok(CCFamily { p: j.p.into_iter().collect(), tol: j.tol })
    }
}

impl CCFamily {
    /// Largest |total mass − 1| over members, net of declared tail mass.
    pub fn max_mass_defect(&self) -> f64 {
        self.p
            .values()
            .map(|m| {
                let d = (m.total_mass() - 1.0).abs();
                (d - m.tail_mass_bound()).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcCheck {
    pub max_residual: f64,
    /// Vertex of the largest residual.
    pub worst_vertex: Option<VertexId>,
    /// `worst_vertex` when the residual exceeds the family tolerance.
    pub failing_vertex: Option<VertexId>,
    pub checked: usize,
    /// Vertices whose preimage leaves the truncated shape.
    pub skipped: Vec<VertexId>,
}

/// Checks (CC) atom by atom; residuals are normalized by t·P(x,{t}) + 1.
pub fn verify_cc(model: &WeightedGraphModel, family: &CCFamily) -> Result<CcCheck, CompOpError> {
    let mut worst = (0.0f64, None);
    let mut checked = 0;
    let mut skipped = Vec::new();
    for x in model.shape.vertices() {
        let pre = preimage(&model.shape, x)?;
        if pre.truncated || pre.vertices.is_empty() {
            skipped.push(x);
            continue;
        }
        let px = family.p.get(&x).ok_or(CompOpError::MissingMember(x))?;
        let mut locs: BTreeSet<u64> = px.atoms().iter().map(|a| a.location.to_bits()).collect();
        let mut members = Vec::with_capacity(pre.vertices.len());
        for y in &pre.vertices {
            let py = family.p.get(y).ok_or(CompOpError::MissingMember(*y))?;
            locs.extend(py.atoms().iter().map(|a| a.location.to_bits()));
            members.push((model.mu[y], py));
        }
        let mux = model.mu[&x];
        for bits in locs {
            let t = f64::from_bits(bits);
            let lhs: f64 = members.iter().map(|(w, p)| w * p.mass_at(t)).sum::<f64>() / mux;
            let rhs = t * px.mass_at(t);
            let r = (lhs - rhs).abs() / (rhs + 1.0);
            if r > worst.0 {
                worst = (r, Some(x));
            }
        }
        checked += 1;
    }
    let failing_vertex = if worst.0 > family.tol { worst.1 } else { None };
    Ok(CcCheck { max_residual: worst.0, worst_vertex: worst.1, failing_vertex, checked, skipped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubnormalBuildReport {
    /// Θ = Σ_i (μ(x_{i,1})/μ(x_0)) ∫ (t^{κ+1}−1)⁻¹ dP(x_{i,1}).
    #[serde(rename = "Theta")]
    pub theta: f64,
    pub theta_error: f64,
    /// Coefficient of the δ₁ atom in P(x_0, ·).
    pub vartheta: f64,
    pub cc_residual: f64,
    pub notes: Vec<String>,
}

/// Input of [`build_subnormal`]; also the CLI config schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubnormalSpec {
    /// P(x_{i,1}, ·), each carried by (1, ∞).
    pub seeds: Vec<AtomicMeasure>,
    /// μ(x_{i,1}).
    pub weights: Vec<f64>,
    pub kappa: u32,
    #[serde(default)]
    pub mu_x0: Option<f64>,
    pub branch_depth: u32,
    /// Present for η = ∞: the branches after the listed seeds.
    #[serde(default)]
    pub omitted: Option<OmittedBranches>,
}

/// ∫ f dP over atoms, with the tail bounded by `sup_f_on_tail`·(tail mass).
fn integral<F: Fn(f64) -> f64>(m: &AtomicMeasure, f: F, sup_f_on_tail: f64) -> (f64, f64) {
    (m.integrate(f), sup_f_on_tail * m.tail_mass_bound())
}

/// 1/(t^{κ+1} − 1) on [s, ∞).
fn inv_gap_sup(s: f64, k: u32) -> f64 {
    1.0 / (s.powi(k as i32 + 1) - 1.0)
}

fn seed_floor(m: &AtomicMeasure) -> f64 {
    m.tail_floor().max(m.inf_support().unwrap_or(f64::INFINITY))
}

fn delta_one(mass: f64) -> AtomicMeasure {
    AtomicMeasure::exact(vec![Atom { location: 1.0, mass }]).expect("positive mass")
}

/// P(x_{i,j}) = (μ(x_{i,1})/μ(x_{i,j})) t^{j−1} P(x_{i,1}).
fn branch_member(seed: &AtomicMeasure, w1: f64, wj: f64, j: u32) -> Result<AtomicMeasure, CompOpError> {
    let c = w1 / wj;
    Ok(seed.reweight(|t| c * t.powi(j as i32 - 1), c, if seed.is_exact() { 0 } else { j - 1 })?)
}

/// Constructs a subnormal model and its (CC) family from branch seeds.
///
/// With the default μ(x_0) = 2 Σ_i μ(x_{i,1}) ∫ (t^{κ+1}−1)⁻¹ dP(x_{i,1}) one gets Θ = 1/2.
pub fn build_subnormal(
    spec: &SubnormalSpec,
) -> Result<(WeightedGraphModel, CCFamily, SubnormalBuildReport), CompOpError> {
    let k = spec.kappa;
    let n_br = spec.seeds.len();
    if n_br == 0 || spec.weights.len() != n_br {
        return Err(CompOpError::Invalid("need one positive weight per seed".into()));
    }
    for (i, s) in spec.seeds.iter().enumerate() {
        s.validate()?;
        let inf = s.inf_support()?;
        if !(inf > 1.0) {
            return Err(CompOpError::SeedViolatesI10 { index: i + 1, inf });
        }
        if !(spec.weights[i] > 0.0) {
            return Err(CompOpError::Invalid(format!("weight {} not positive", i + 1)));
        }
    }
    let mut notes = Vec::new();
    let mut theta_sum = 0.0;
    let mut theta_err = 0.0;
    for (s, w) in spec.seeds.iter().zip(&spec.weights) {
        let (v, e) = integral(s, |t| 1.0 / (t.powi(k as i32 + 1) - 1.0), inv_gap_sup(seed_floor(s), k));
        theta_sum += w * v;
        theta_err += w * e;
    }
    if let Some(o) = &spec.omitted {
        theta_err += o.mass_bound * inv_gap_sup(o.support_floor, k);
        notes.push("branches beyond eta_cap enter Θ only through its error bound".into());
    }
    let mu0 = match spec.mu_x0 {
        Some(m) if m > 0.0 => m,
        Some(m) => return Err(CompOpError::Invalid(format!("μ(x_0) = {m} not positive"))),
        None => 2.0 * theta_sum,
    };
    let theta = theta_sum / mu0;
    let theta_error = theta_err / mu0;
    if theta > 1.0 + 1e-12 {
        return Err(CompOpError::ThetaOutOfRange(theta));
    }
    let vartheta = (1.0 - theta).max(0.0);

    // P(x_0) = Σ_i (μ(x_{i,1})/μ(x_0)) (t^{κ+1}−1)⁻¹ P(x_{i,1}) + (1 − Θ) δ₁
    let mut p0 = AtomicMeasure::exact(vec![])?;
    for (s, w) in spec.seeds.iter().zip(&spec.weights) {
        let c = w / mu0;
        let part = s.reweight(|t| c / (t.powi(k as i32 + 1) - 1.0), c * inv_gap_sup(seed_floor(s), k), 0)?;
        p0 = p0.add(&part);
    }
    if let Some(o) = &spec.omitted {
        let c = inv_gap_sup(o.support_floor, k) / mu0;
        let rest = AtomicMeasure::new(vec![], c * o.mass_bound, o.degree, c * o.moment_bound)?
            .with_tail_floor(o.support_floor);
        p0 = p0.add(&rest);
    }
    if vartheta > 0.0 {
        p0 = p0.add(&delta_one(vartheta));
    }

    let shape = match &spec.omitted {
        None => GraphShape::new(Eta::Finite(n_br as u32), k, spec.branch_depth, n_br as u32)?,
        Some(_) => GraphShape::new(Eta::Infinite, k, spec.branch_depth, n_br as u32)?,
    };
    let mut mu = BTreeMap::new();
    let mut p = BTreeMap::new();
    mu.insert(VertexId::Circuit(0), mu0);
    for r in 1..=k {
        let (m, _) = p0.moment(r)?;
        let mur = mu0 * m;
        mu.insert(VertexId::Circuit(r), mur);
        let c = mu0 / mur;
        let pr = p0.reweight(|t| c * t.powi(r as i32), c, if p0.is_exact() { 0 } else { r })?;
        p.insert(VertexId::Circuit(r), pr);
    }
    p.insert(VertexId::Circuit(0), p0);
    for (idx, (s, w)) in spec.seeds.iter().zip(&spec.weights).enumerate() {
        let i = idx as u32 + 1;
        for j in 1..=spec.branch_depth {
            let wj = if j == 1 { *w } else { w * s.moment(j - 1)?.0 };
            mu.insert(VertexId::Branch(i, j), wj);
            p.insert(VertexId::Branch(i, j), branch_member(s, *w, wj, j)?);
        }
    }
    let model = WeightedGraphModel::new(
        shape,
        mu,
        Some(BranchTail { seeds: spec.seeds.clone(), omitted: spec.omitted.clone() }),
    )?;
    let family = CCFamily { p, tol: 1e-10 };
    let check = verify_cc(&model, &family)?;
    if !check.skipped.is_empty() {
        notes.push(format!("{} vertices outside the (CC) check (preimage leaves truncation)", check.skipped.len()));
    }
    Ok((model, family, SubnormalBuildReport { theta, theta_error, vartheta, cc_residual: check.max_residual, notes }))
}

/// Extends a model to a (CC) family from seeds for P(x_{i,1}, ·), after
/// checking (i-b) seed moments = h_n(x_{i,1}), (i-c) the κ circuit identities
/// and (i-d) Σ_i (μ(x_{i,1})/μ(x_0)) ∫ (t^{κ+1}−1)⁻¹ dP ≤ 1.
pub fn extend_cc(
    model: &WeightedGraphModel,
    seeds: &[AtomicMeasure],
    tol: f64,
) -> Result<(CCFamily, SubnormalBuildReport), CompOpError> {
    let k = model.kappa();
    if seeds.len() != model.shape.eta_cap as usize {
        return Err(CompOpError::Invalid("one seed per stored branch required".into()));
    }
    if model.shape.is_infinite() {
        return Err(CompOpError::Invalid("extend_cc needs finite η".into()));
    }
    let mu = |v: VertexId| model.mu[&v];
    let mu0 = mu(VertexId::Circuit(0));
    // (i-b)
    for (idx, s) in seeds.iter().enumerate() {
        let i = idx as u32 + 1;
        if !(s.inf_support()? > 1.0) {
            return Err(CompOpError::SeedViolatesI10 { index: idx + 1, inf: s.inf_support()? });
        }
        let w1 = mu(VertexId::Branch(i, 1));
        for n in 1..model.shape.branch_depth {
            let Ok((m, e)) = s.moment(n) else { break };
            let h = mu(VertexId::Branch(i, n + 1)) / w1;
            let defect = (m - h).abs() / h;
            if defect > tol.max(1e-12) + e / h {
                return Err(CompOpError::ConditionIB { branch: i, order: n, defect });
            }
        }
    }
    let gap = |t: f64| t.powi(k as i32 + 1) - 1.0;
    // (i-c)
    for r in 1..=k {
        let mur = mu(VertexId::Circuit(r));
        let mut s = mu0 / mur;
        for (idx, p) in seeds.iter().enumerate() {
            let w1 = mu(VertexId::Branch(idx as u32 + 1, 1));
            s += w1 / mur * p.integrate(|t| (t.powi(r as i32) - 1.0) / gap(t));
        }
        if (s - 1.0).abs() > tol.max(1e-12) {
            return Err(CompOpError::ConditionIC { r, defect: s - 1.0 });
        }
    }
    // (i-d)
    let mut d = 0.0;
    for (idx, p) in seeds.iter().enumerate() {
        let w1 = mu(VertexId::Branch(idx as u32 + 1, 1));
        d += w1 / mu0 * p.integrate(|t| 1.0 / gap(t));
    }
    if d > 1.0 + tol {
        return Err(CompOpError::ConditionID { defect: d - 1.0 });
    }
    let vartheta = (1.0 - d).max(0.0);

    let mut p = BTreeMap::new();
    for r in 0..=k {
        let mur = mu(VertexId::Circuit(r));
        let mut m = AtomicMeasure::exact(vec![])?;
        for (idx, s) in seeds.iter().enumerate() {
            let c = mu(VertexId::Branch(idx as u32 + 1, 1)) / mur;
            let fl = seed_floor(s);
            let part = s.reweight(
                |t| c * t.powi(r as i32) / gap(t),
                c * fl.powi(r as i32).max(1.0) * inv_gap_sup(fl, k).max(1.0),
                if s.is_exact() { 0 } else { r },
            )?;
            m = m.add(&part);
        }
        if vartheta > 0.0 {
            m = m.add(&delta_one(vartheta * mu0 / mur));
        }
        p.insert(VertexId::Circuit(r), m);
    }
    for (idx, s) in seeds.iter().enumerate() {
        let i = idx as u32 + 1;
        let w1 = mu(VertexId::Branch(i, 1));
        for j in 1..=model.shape.branch_depth {
            p.insert(VertexId::Branch(i, j), branch_member(s, w1, mu(VertexId::Branch(i, j)), j)?);
        }
    }
    let family = CCFamily { p, tol };
    let check = verify_cc(model, &family)?;
    Ok((
        family,
        SubnormalBuildReport { theta: d, theta_error: 0.0, vartheta, cc_residual: check.max_residual, notes: vec![] },
    ))
}

/// η = 1 model with h_n(x_0) = γ_n: μ(x_r) = μ(x_0)γ_r for r ≤ κ and
/// μ(x_{1,n+1}) = μ(x_0)(γ_{n+κ+1} − γ_n).
pub fn build_from_target_h0(gamma: &MomentSequence, kappa: u32, mu_x0: f64) -> Result<WeightedGraphModel, CompOpError> {
    let g = &gamma.values;
    let big_n = g.len() - 1;
    let k = kappa as usize;
    if (g[0] - 1.0).abs() > 1e-14 {
        return Err(CompOpError::Invalid("γ_0 must be 1".into()));
    }
    if let Some(i) = g.iter().position(|v| !(*v > 0.0)) {
        return Err(CompOpError::Invalid(format!("γ_{i} is not positive")));
    }
    if big_n <= k {
        return Err(CompOpError::Invalid("sequence too short for κ".into()));
    }
    let depth = big_n - k;
    let mut mu = BTreeMap::new();
    for r in 0..=k {
        mu.insert(VertexId::Circuit(r as u32), mu_x0 * g[r]);
    }
    for n in 0..depth {
        let d = g[n + k + 1] - g[n];
        if !(d > 0.0) {
            return Err(CompOpError::MonotonicityViolated(n));
        }
        mu.insert(VertexId::Branch(1, n as u32 + 1), mu_x0 * d);
    }
    let model = WeightedGraphModel::new(GraphShape::finite(1, kappa, depth as u32)?, mu, None)?;
    for (n, h) in h_x0_series(&model, big_n as u32).into_iter().enumerate() {
        let (v, _) = h?;
        if (v - g[n]).abs() > 1e-10 * g[n].abs().max(1.0) {
            return Err(CompOpError::Invalid(format!("h_{n}(x_0) = {v} differs from γ_{n} = {}", g[n])));
        }
    }
    Ok(model)
}
