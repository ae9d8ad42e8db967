//! Non-hyponormal composition operators built from pairs of N-extremal
//! measures, the homothety searches that produce such pairs, and the
//! partition functional Λ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit_graph::{Eta, GraphShape, VertexId};
use crate::comp_op::{
    h_n, hyponormality, subnormality_evidence, BranchTail, CompOpError, HyponormalityReport, OmittedBranches,
    VertexHankel, WeightedGraphModel,
};
use crate::measures::{Atom, AtomicMeasure, Homothety, MeasureError};
use crate::qspecial::{asc_beta_measure, asc_gamma_measure, euler_sum, quartic_pair, QError};
use crate::scalar::Precision;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExoticError {
    #[error("(gs) conditions violated: {0}")]
    GsViolated(String),
    #[error("block {0} of the partition is empty")]
    EmptyBlock(usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("no grid point satisfies the inequality")]
    NotFound,
    #[error("(q/a;q)_∞ + (aq;q)_∞ = {sum} ≤ 1 for a = {a}, q = {q}")]
    EulerPredicateFailed { a: f64, q: f64, sum: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    CompOp(#[from] CompOpError),
    #[error(transparent)]
    Q(#[from] QError),
}

/// Blocks of atom indices into τ. `tail_block` owns τ's truncation tail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
    #[serde(default)]
    pub tail_block: Option<usize>,
}

impl Partition {
    pub fn validate(&self, atom_count: usize) -> Result<(), ExoticError> {
        let mut seen = vec![false; atom_count];
        for (b, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(ExoticError::EmptyBlock(b));
            }
            for &i in block {
                if i >= atom_count {
                    return Err(ExoticError::InvalidPartition(format!("index {i} out of range")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(ExoticError::InvalidPartition(format!("index {i} in two blocks")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(ExoticError::InvalidPartition(format!("index {i} not covered")));
        }
        if let Some(t) = self.tail_block {
            if t >= self.blocks.len() {
                return Err(ExoticError::InvalidPartition(format!("tail block {t} out of range")));
            }
        }
        Ok(())
    }
}

/// Δ_{k,i}: first k atoms, then singletons, then a tail block when η is finite.
/// k = 1 gives the partition {θ_1}, …, {θ_{η−1}}, {θ_η, θ_{η+1}, …}.
pub fn canonical_partitions(tau: &AtomicMeasure, eta: Eta, k: usize) -> Result<Partition, ExoticError> {
    let n = tau.len();
    if k == 0 || k > n {
        return Err(ExoticError::InvalidPartition(format!("k = {k} with {n} atoms")));
    }
    let mut blocks = vec![(0..k).collect::<Vec<_>>()];
    match eta {
        Eta::Finite(e) => {
            let e = e as usize;
            if e < 2 {
                return Err(ExoticError::InvalidPartition("η ≥ 2 required".into()));
            }
            let tail_start = e + k - 2;
            if tail_start >= n {
                return Err(ExoticError::InvalidPartition(format!("need more than {tail_start} atoms")));
            }
            blocks.extend((k..tail_start).map(|i| vec![i]));
            blocks.push((tail_start..n).collect());
            Ok(Partition { tail_block: Some(blocks.len() - 1), blocks })
        }
        Eta::Infinite => {
            blocks.extend((k..n).map(|i| vec![i]));
            Ok(Partition { blocks, tail_block: None })
        }
    }
}

/// ∫_Δ t^p(t−1)^q-type integrals over a block, with the tail part as an error.
struct BlockIntegral {
    value: f64,
    error: f64,
}

fn block_integral<F: Fn(f64) -> f64>(
    tau: &AtomicMeasure,
    block: &[usize],
    owns_tail: bool,
    f: F,
    tail_order: u32,
) -> Result<BlockIntegral, ExoticError> {
    let atoms = tau.atoms();
    let value = block.iter().map(|&i| f(atoms[i].location) * atoms[i].mass).sum();
    let error = if owns_tail { tau.tail_moment_error(tail_order)? } else { 0.0 };
    Ok(BlockIntegral { value, error })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    /// Σ_i (∫_{Δ_i}(t−1)dτ)² / ∫_{Δ_i} t(t−1)dτ.
    pub value: f64,
    /// (∫(t−1)dτ)² / ∫t(t−1)dτ.
    pub inf_bound: f64,
    /// ∫(t−1)/t dτ.
    pub sup_bound: f64,
    pub error_bound: f64,
    pub within_bounds: bool,
}

/// x²/y with |Δx| ≤ ex, |Δy| ≤ ey, both perturbations nonnegative.
fn ratio_sq_err(x: f64, ex: f64, y: f64, ey: f64) -> f64 {
    let hi = (x + ex).powi(2) / y;
    let lo = x * x / (y + ey);
    (hi - x * x / y).max(x * x / y - lo)
}

pub fn lambda_functional(tau: &AtomicMeasure, partition: &Partition) -> Result<LambdaReport, ExoticError> {
    partition.validate(tau.len())?;
    if !(tau.inf_support()? > 1.0) {
        return Err(ExoticError::Invalid("Λ needs inf supp τ > 1".into()));
    }
    let mut value = 0.0;
    let mut err = 0.0;
    for (b, block) in partition.blocks.iter().enumerate() {
        let own = partition.tail_block == Some(b);
        let x = block_integral(tau, block, own, |t| t - 1.0, 1)?;
        let y = block_integral(tau, block, own, |t| t * (t - 1.0), 2)?;
        value += x.value * x.value / y.value;
        err += ratio_sq_err(x.value, x.error, y.value, y.error);
    }
    let (m1, e1) = (tau.integrate(|t| t - 1.0), tau.tail_moment_error(1)?);
    let (m2, e2) = (tau.integrate(|t| t * (t - 1.0)), tau.tail_moment_error(2)?);
    let inf_bound = m1 * m1 / m2;
    let inf_err = ratio_sq_err(m1, e1, m2, e2);
    let sup_bound = tau.integrate(|t| (t - 1.0) / t);
    let sup_err = tau.tail_mass_bound();
    if partition.tail_block.is_none() {
        // tail outside every block: Λ misses at most ∫_tail (t−1)/t dτ
        err += sup_err;
    }
    let slack = 1e-12 * sup_bound.abs().max(1.0);
    let within_bounds =
        inf_bound - inf_err - err <= value + slack && value - err <= sup_bound + sup_err + slack;
    Ok(LambdaReport { value, inf_bound, sup_bound, error_bound: err, within_bounds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsReport {
    /// Largest n ≤ requested depth with matching moments of ν and τ.
    pub gs1_depth: usize,
    pub gs1_requested: usize,
    pub gs2: bool,
    /// ν(R₊) − 1 − ν({1}).
    pub gs3_defect: f64,
    pub gs3: bool,
    /// 1 + ∫ t^{−κ} dτ − τ(R₊).
    pub gs4_margin: f64,
    pub gs4: bool,
    pub nu_at_one: f64,
    /// N-extremality itself is never checked.
    pub note: String,
}

impl GsReport {
    pub fn passes(&self) -> bool {
        self.gs1_depth >= self.gs1_requested && self.gs2 && self.gs3 && self.gs4
    }
}

const GS_TOL: f64 = 1e-10;

pub fn validate_gs(nu: &AtomicMeasure, tau: &AtomicMeasure, kappa: u32, moment_depth: usize) -> Result<GsReport, ExoticError> {
    let inf_nu = nu.inf_support()?;
    let inf_tau = tau.inf_support()?;
    let gs2 = (inf_nu - 1.0).abs() <= 4.0 * f64::EPSILON && inf_tau > 1.0;
    let nu1 = nu.mass_at(1.0);
    let gs3_defect = nu.total_mass() - 1.0 - nu1;
    let gs3 = gs3_defect.abs() <= GS_TOL * nu.total_mass() + nu.tail_mass_bound();
    let gs4_margin = 1.0 + tau.integrate(|t| t.powi(-(kappa as i32))) - tau.total_mass() - tau.tail_mass_bound();
    let gs4 = kappa == 0 || gs4_margin > 0.0;
    let mut depth = 0;
    for n in 0..=moment_depth {
        let (Ok((a, ea)), Ok((b, eb))) = (nu.moment(n as u32), tau.moment(n as u32)) else { break };
        if (a - b).abs() > ea + eb + 1e-8 * a.abs().max(b.abs()) {
            break;
        }
        depth = n;
    }
    Ok(GsReport {
        gs1_depth: depth,
        gs1_requested: moment_depth,
        gs2,
        gs3_defect,
        gs3,
        gs4_margin,
        gs4,
        nu_at_one: nu1,
        note: "moment agreement only; N-extremality is trusted metadata".into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExoticDiagnostics {
    pub c: Vec<f64>,
    pub xi: f64,
    pub gs_checks: GsReport,
    /// Present for κ = 0.
    pub budski_left: Option<f64>,
    pub budski_right: Option<f64>,
    pub lambda: Option<f64>,
    /// Σ_i (μ(x_{i,1})/μ(x_0)) ∫ (t^{κ+1}−1)⁻¹ dP(x_{i,1}); exceeds 1 on these builds.
    pub id_sum: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExoticSpec {
    pub eta: Eta,
    pub kappa: u32,
    pub mu_xkappa: f64,
    pub branch_depth: u32,
    /// Order to which moments of ν and τ must agree.
    pub moment_depth: usize,
}

/// Builds μ on G_{η,κ} from ν, τ and a partition of τ's atoms.
pub fn build_exotic(
    nu: &AtomicMeasure,
    tau: &AtomicMeasure,
    partition: &Partition,
    spec: &ExoticSpec,
) -> Result<(WeightedGraphModel, Vec<AtomicMeasure>, ExoticDiagnostics), ExoticError> {
    let k = spec.kappa;
    let gs = validate_gs(nu, tau, k, spec.moment_depth)?;
    if !gs.passes() {
        return Err(ExoticError::GsViolated(format!(
            "gs1 depth {}/{}, gs2 {}, gs3 defect {:e}, gs4 margin {:e}",
            gs.gs1_depth, gs.gs1_requested, gs.gs2, gs.gs3_defect, gs.gs4_margin
        )));
    }
    partition.validate(tau.len())?;
    let cap = partition.blocks.len() as u32;
    match spec.eta {
        Eta::Finite(e) if e != cap => {
            return Err(ExoticError::InvalidPartition(format!("{cap} blocks for η = {e}")));
        }
        Eta::Finite(_) if !tau.is_exact() && partition.tail_block.is_none() => {
            return Err(ExoticError::InvalidPartition("finite η needs a tail block".into()));
        }
        Eta::Infinite if partition.tail_block.is_some() => {
            return Err(ExoticError::InvalidPartition("η = ∞ keeps τ's tail outside the blocks".into()));
        }
        _ => {}
    }
    if !(spec.mu_xkappa > 0.0) {
        return Err(ExoticError::Invalid("μ(x_κ) must be positive".into()));
    }
    let muk = spec.mu_xkappa;
    let g = |t: f64| (t.powi(k as i32 + 1) - 1.0) / t.powi(k as i32);

    let mut c = Vec::with_capacity(cap as usize);
    let mut seeds = Vec::with_capacity(cap as usize);
    for (b, block) in partition.blocks.iter().enumerate() {
        let own = partition.tail_block == Some(b);
        let part = tau.restrict(block, own);
        let ci = 1.0 / part.integrate(g);
        // (t^{κ+1}−1)/t^κ ≤ t on [1, ∞)
        let seed = part.reweight(|t| ci * g(t), ci, if part.is_exact() { 0 } else { 1 })?;
        c.push(ci);
        seeds.push(seed);
    }

    let shape = GraphShape::new(spec.eta, k, spec.branch_depth, cap).map_err(CompOpError::from)?;
    let nu1 = gs.nu_at_one;
    let mut mu = BTreeMap::new();
    mu.insert(VertexId::Circuit(k), muk);
    for r in 0..k {
        let v = muk * (tau.integrate(|t| t.powi(r as i32 - k as i32)) - nu1);
        mu.insert(VertexId::Circuit(r), v);
    }
    for (idx, (seed, ci)) in seeds.iter().zip(&c).enumerate() {
        let i = idx as u32 + 1;
        let w1 = muk / ci;
        mu.insert(VertexId::Branch(i, 1), w1);
        for j in 2..=spec.branch_depth {
            mu.insert(VertexId::Branch(i, j), w1 * seed.moment(j - 1)?.0);
        }
    }
    let omitted = match spec.eta {
        Eta::Infinite => Some(omitted_from_tail(tau, muk)?),
        Eta::Finite(_) => None,
    };
    let model = WeightedGraphModel::new(shape, mu, Some(BranchTail { seeds: seeds.clone(), omitted }))?;

    let mu0 = model.mu[&VertexId::Circuit(0)];
    let id_sum: f64 = seeds
        .iter()
        .zip(&c)
        .map(|(s, ci)| muk / ci / mu0 * s.integrate(|t| 1.0 / (t.powi(k as i32 + 1) - 1.0)))
        .sum();
    let xi = xi_value(&model);
    let (budski_left, budski_right, lambda) = if k == 0 {
        let l = lambda_functional(tau, partition)?;
        let m1 = tau.integrate(|t| t - 1.0);
        (Some(l.value), Some(m1 / (1.0 + m1)), Some(l.value))
    } else {
        (None, None, None)
    };
    let diag = ExoticDiagnostics { c, xi, gs_checks: gs, budski_left, budski_right, lambda, id_sum };
    Ok((model, seeds, diag))
}

/// ω = μ(x_κ)·(t^{κ+1}−1)/t^κ·(tail of τ), so ∫ t^m dω ≤ μ(x_κ) ∫_tail t^{m+1} dτ.
fn omitted_from_tail(tau: &AtomicMeasure, muk: f64) -> Result<OmittedBranches, ExoticError> {
    let floor = tau.tail_floor();
    if !(floor > 1.0) {
        return Err(ExoticError::Invalid("τ's tail must lie above 1".into()));
    }
    let degree = tau.tail_degree().saturating_sub(1);
    Ok(OmittedBranches {
        mass_bound: muk * tau.tail_moment_error(1).unwrap_or(f64::INFINITY),
        degree,
        moment_bound: muk * tau.tail_moment_error(degree + 1).unwrap_or(f64::INFINITY),
        divergent_from: None,
        support_floor: floor,
    })
}

/// ξ = μ(x_0)/μ(x_κ) − Σ_i (μ(x_{i,1})/μ(x_κ)) ∫ (t^{κ+1}−1)⁻¹ dP(x_{i,1}).
fn xi_value(model: &WeightedGraphModel) -> f64 {
    let k = model.kappa();
    let muk = model.mu[&VertexId::Circuit(k)];
    let mut xi = model.mu[&VertexId::Circuit(0)] / muk;
    if let Some(seeds) = model.seeds() {
        for (idx, s) in seeds.iter().enumerate() {
            let w = model.mu[&VertexId::Branch(idx as u32 + 1, 1)];
            xi -= w / muk * s.integrate(|t| 1.0 / (t.powi(k as i32 + 1) - 1.0));
        }
    }
    xi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiReport {
    pub xi: f64,
    pub nu_at_one: f64,
    /// |ξ + ν({1})| / ν({1}).
    pub relative_defect: f64,
    /// Bound on the part of ξ carried by omitted branches.
    pub omitted_bound: f64,
    /// (n, h_n(x_κ) − ξ − Σ_i (μ(x_{i,1})/μ(x_κ)) ∫ tⁿ t^κ/(t^{κ+1}−1) dP(x_{i,1})), relative.
    pub identity_residuals: Vec<(u32, f64)>,
}

pub fn xi_check(model: &WeightedGraphModel, nu: &AtomicMeasure, max_n: u32) -> Result<XiReport, ExoticError> {
    let k = model.kappa();
    let muk = model.mu[&VertexId::Circuit(k)];
    let seeds = model.seeds().ok_or(ExoticError::Invalid("model has no seed measures".into()))?;
    let xi = xi_value(model);
    let nu1 = nu.mass_at(1.0);
    let omitted_bound = model
        .omitted()
        .map(|o| o.mass_bound / (o.support_floor.powi(k as i32 + 1) - 1.0) / muk)
        .unwrap_or(0.0);
    let mut identity_residuals = Vec::new();
    for n in 0..=max_n {
        let Ok((h, _)) = h_n(model, VertexId::Circuit(k), n) else { break };
        let mut rhs = xi;
        for (idx, s) in seeds.iter().enumerate() {
            let w = model.mu[&VertexId::Branch(idx as u32 + 1, 1)];
            rhs += w / muk * s.integrate(|t| t.powi((n + k) as i32) / (t.powi(k as i32 + 1) - 1.0));
        }
        identity_residuals.push((n, (h - rhs).abs() / h.abs().max(1.0)));
    }
    let relative_defect = if nu1 > 0.0 { (xi + nu1).abs() / nu1 } else { f64::INFINITY };
    Ok(XiReport { xi, nu_at_one: nu1, relative_defect, omitted_bound, identity_residuals })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpslemMode {
    /// Σ over the m smallest atoms.
    FiniteM(usize),
    FullSum,
    /// 1 + ∫ t^{−k} dβ^{(a)} > β^{(a)}(R₊).
    Kappa(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub bisect_steps: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid { lo: 1e-4, hi: 1e4, points: 400, bisect_steps: 60 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpslemResult {
    pub a: f64,
    /// Edge of the region where the inequality holds, located by bisection.
    pub boundary: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Left side recomputed on β^{(a)} itself.
    pub lhs_direct: f64,
}

/// ψ_{a⁻¹,a}(t) = (t + a)/a.
pub fn epslem_homothety(a: f64) -> Result<Homothety, MeasureError> {
    Homothety::new(1.0 / a, a)
}

fn epslem_sides(beta: &AtomicMeasure, mode: EpslemMode, a: f64) -> Result<(f64, f64), ExoticError> {
    let atoms = beta.atoms();
    match mode {
        EpslemMode::FiniteM(_) | EpslemMode::FullSum => {
            let m = match mode {
                EpslemMode::FiniteM(m) => m,
                _ => atoms.len(),
            };
            let lhs: f64 = atoms[..m].iter().map(|x| x.location / (a + x.location) * x.mass).sum();
            // the ratio grows with ∫t dβ: take its upper bound
            let m1 = beta.integrate(|t| t) + beta.tail_moment_error(1)?;
            Ok((lhs, m1 / (a + m1)))
        }
        EpslemMode::Kappa(k) => {
            let lhs = 1.0 + atoms.iter().map(|x| (a / (x.location + a)).powi(k as i32) * x.mass).sum::<f64>();
            Ok((lhs, beta.total_mass() + beta.tail_mass_bound()))
        }
    }
}

fn epslem_direct(beta: &AtomicMeasure, mode: EpslemMode, a: f64) -> Result<f64, ExoticError> {
    let b = beta.pushforward(&epslem_homothety(a)?)?;
    Ok(match mode {
        EpslemMode::FiniteM(m) => b.atoms()[..m].iter().map(|x| (x.location - 1.0) / x.location * x.mass).sum(),
        EpslemMode::FullSum => b.integrate(|t| (t - 1.0) / t),
        EpslemMode::Kappa(k) => 1.0 + b.integrate(|t| t.powi(-(k as i32))),
    })
}

/// Finds a homothety parameter a for which β^{(a)} satisfies the chosen inequality.
///
/// The sum modes hold on an interval (0, a₁) and the κ mode on (a₃, ∞). The
/// grid brackets the edge, bisection refines it, and the returned a sits a
/// factor 2 inside it before being re-verified.
pub fn epslem_search(beta: &AtomicMeasure, mode: EpslemMode, grid: &SearchGrid) -> Result<EpslemResult, ExoticError> {
    if !(beta.total_mass() > 1.0) || !(beta.inf_support()? > 0.0) {
        return Err(ExoticError::Invalid("β needs mass > 1 and inf supp > 0".into()));
    }
    if let EpslemMode::FiniteM(m) = mode {
        if m == 0 || m > beta.len() {
            return Err(ExoticError::Invalid(format!("m = {m} with {} atoms", beta.len())));
        }
    }
    let holds = |a: f64| epslem_sides(beta, mode, a).map(|(l, r)| l > r);
    let ratio = (grid.hi / grid.lo).powf(1.0 / (grid.points.max(2) - 1) as f64);
    let mut pts: Vec<f64> = (0..grid.points).map(|i| grid.lo * ratio.powi(i as i32)).collect();
    let upward = !matches!(mode, EpslemMode::Kappa(_));
    if !upward {
        pts.reverse();
    }
    if !holds(pts[0])? {
        return Err(ExoticError::NotFound);
    }
    let mut last_ok = pts[0];
    let mut first_bad = None;
    for &a in &pts[1..] {
        if holds(a)? {
            last_ok = a;
        } else {
            first_bad = Some(a);
            break;
        }
    }
    let boundary = match first_bad {
        None => last_ok,
        Some(bad) => {
            let (mut ok, mut bad) = (last_ok, bad);
            for _ in 0..grid.bisect_steps {
                let mid = (ok * bad).sqrt();
                if holds(mid)? {
                    ok = mid;
                } else {
                    bad = mid;
                }
            }
            ok
        }
    };
    let mut a = if upward { boundary / 2.0 } else { boundary * 2.0 };
    if !holds(a)? {
        a = last_ok;
    }
    let (lhs, rhs) = epslem_sides(beta, mode, a)?;
    let lhs_direct = epslem_direct(beta, mode, a)?;
    Ok(EpslemResult { a, boundary, lhs, rhs, lhs_direct })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PairSource {
    Asc { a: f64, q: f64 },
    Quartic,
}

impl std::str::FromStr for PairSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "quartic" {
            return Ok(PairSource::Quartic);
        }
        let rest = s.strip_prefix("asc:").ok_or_else(|| format!("unknown source {s}"))?;
        let (a, q) = rest.split_once(',').ok_or("expected asc:a,q")?;
        let a = a.trim().parse().map_err(|e| format!("a: {e}"))?;
        let q = q.trim().parse().map_err(|e| format!("q: {e}"))?;
        Ok(PairSource::Asc { a, q })
    }
}

/// (ζ, ρ) with inf supp ζ = 0 < inf supp ρ, both probability measures.
pub fn source_pair(source: PairSource, atoms: usize) -> Result<(AtomicMeasure, AtomicMeasure, String), ExoticError> {
    match source {
        PairSource::Quartic => {
            let (z, r) = quartic_pair(atoms)?;
            Ok((z, r, "quartic birth-and-death pair (Krein ζ, Friedrichs ρ)".into()))
        }
        PairSource::Asc { a, q } => {
            if !(a > 1.0) {
                return Err(ExoticError::Invalid(format!("a = {a} must exceed 1")));
            }
            let sum = euler_sum(a, q);
            if !(sum > 1.0) {
                return Err(ExoticError::EulerPredicateFailed { a, q, sum });
            }
            let down = Homothety::new(1.0, -1.0)?;
            let z = asc_beta_measure(a, q, atoms)?.pushforward(&down)?;
            let r = asc_gamma_measure(a, q, atoms)?.pushforward(&down)?;
            Ok((z, r, format!("Al-Salam–Carlitz pair a = {a}, q = {q} (Krein ζ, Friedrichs ρ)")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub eta: Eta,
    pub kappa: u32,
    pub source: PairSource,
    pub provenance: String,
    pub zeta_at_zero: f64,
    /// r = (1 − ζ({0}))⁻¹.
    pub r: f64,
    pub theta1: f64,
    pub beta_theta1: f64,
    pub epslem: Option<EpslemResult>,
    pub diagnostics: ExoticDiagnostics,
    pub xi: XiReport,
    pub hyponormality: HyponormalityReport,
    pub hankel_evidence: Vec<VertexHankel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub atoms: usize,
    /// κ > 0 takes a from the (gs4) search instead of the Bud-ski one.
    pub kappa: u32,
    pub branch_depth: u32,
    /// Largest n of h_n used for Hankel evidence.
    pub max_n: u32,
    pub moment_depth: usize,
    pub grid: SearchGrid,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            atoms: crate::qspecial::DEFAULT_QUARTIC_ATOMS,
            kappa: 0,
            branch_depth: 12,
            max_n: 10,
            moment_depth: 8,
            grid: SearchGrid::default(),
        }
    }
}

/// Builds a non-hyponormal operator on G_{η,0} whose h_n(x) are Stieltjes moment sequences.
/// With `opts.kappa > 0` the same construction runs on G_{η,κ}.
pub fn exotic_pipeline(
    eta: Eta,
    source: PairSource,
    opts: &PipelineOptions,
) -> Result<(WeightedGraphModel, PipelineReport), ExoticError> {
    let (zeta, rho, provenance) = source_pair(source, opts.atoms)?;
    let z0 = zeta.mass_at(0.0);
    if !(z0 > 0.0 && z0 < 1.0) {
        return Err(ExoticError::Invalid(format!("ζ({{0}}) = {z0} outside (0, 1)")));
    }
    let r = 1.0 / (1.0 - z0);
    let alpha = zeta.scale_mass(r);
    let beta = rho.scale_mass(r);
    let theta1 = beta.inf_support()?;
    let beta_theta1 = beta.atoms()[0].mass;

    let epslem = match eta {
        _ if opts.kappa > 0 => Some(epslem_search(&beta, EpslemMode::Kappa(opts.kappa), &opts.grid)?),
        Eta::Finite(1) => None,
        Eta::Finite(e) => {
            let m = e as usize - 1;
            if beta.atoms()[..m.min(beta.len())].iter().map(|x| x.mass).sum::<f64>() <= 1.0 {
                return Err(ExoticError::Invalid(format!("β of the {m} smallest atoms is ≤ 1")));
            }
            Some(epslem_search(&beta, EpslemMode::FiniteM(m), &opts.grid)?)
        }
        Eta::Infinite => Some(epslem_search(&beta, EpslemMode::FullSum, &opts.grid)?),
    };
    let a = epslem.as_ref().map(|e| e.a).unwrap_or(1.0);
    let h = epslem_homothety(a)?;
    let nu = snap_to_one(alpha.pushforward(&h)?)?;
    let tau = beta.pushforward(&h)?;

    let partition = match eta {
        Eta::Finite(1) => Partition { blocks: vec![(0..tau.len()).collect()], tail_block: Some(0) },
        _ => canonical_partitions(&tau, eta, 1)?,
    };
    let spec = ExoticSpec { eta, kappa: opts.kappa, mu_xkappa: 1.0, branch_depth: opts.branch_depth, moment_depth: opts.moment_depth };
    let (model, _seeds, diagnostics) = build_exotic(&nu, &tau, &partition, &spec)?;
    let xi = xi_check(&model, &nu, opts.max_n)?;
    let hyp = hyponormality(&model, 1e-10);
    let ev = subnormality_evidence(&model, opts.max_n, 1e-9, Precision::High);
    let report = PipelineReport {
        eta,
        kappa: opts.kappa,
        source,
        provenance,
        zeta_at_zero: z0,
        r,
        theta1,
        beta_theta1,
        epslem,
        diagnostics,
        xi,
        hyponormality: hyp,
        hankel_evidence: ev.hankel,
    };
    Ok((model, report))
}

/// Moves a bottom atom within 4ε of 1 onto 1 exactly; ψ_{1/a,a}(0) may round away from 1.
pub fn snap_to_one(nu: AtomicMeasure) -> Result<AtomicMeasure, ExoticError> {
    let first = nu.atoms()[0].location;
    if (first - 1.0).abs() > 4.0 * f64::EPSILON {
        return Err(ExoticError::Invalid(format!("bottom atom of ν at {first}, expected 1")));
    }
    let mut atoms: Vec<Atom> = nu.atoms().to_vec();
    atoms[0].location = 1.0;
    let floor = nu.tail_floor();
    Ok(AtomicMeasure::new(atoms, nu.tail_mass_bound(), nu.tail_degree(), nu.tail_moment_bound())?.with_tail_floor(floor))
}
