//! Moment sequences: Hankel positivity, shift dominance, Carleman diagnostics
//! and the affine transform group acting on sequences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::symmetric_eigenvalues;
use crate::measures::{AtomicMeasure, Homothety, MeasureError};
use crate::scalar::{Hp, Precision, Real};

/// Attached to every report that reasons about infinite objects from a prefix.
pub const TRUNCATION_NOTE: &str = "truncation-level evidence only";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("entry {index} is not positive ({value})")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("error_bounds length {got} does not match values length {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("sequence is empty")]
    Empty,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence<S = f64> {
    pub values: Vec<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_bounds: Option<Vec<f64>>,
}

impl<S: Real> MomentSequence<S> {
    pub fn new(values: Vec<S>, error_bounds: Option<Vec<f64>>) -> Result<Self, MomentError> {
        if values.is_empty() {
            return Err(MomentError::Empty);
        }
        if let Some(e) = &error_bounds {
            if e.len() != values.len() {
                return Err(MomentError::LengthMismatch { got: e.len(), want: values.len() });
            }
        }
        Ok(MomentSequence { values, error_bounds })
    }

    pub fn exact(values: Vec<S>) -> Self {
        MomentSequence { values, error_bounds: None }
    }

    /// γ_0..γ_N of a measure, computed in `S`.
    pub fn from_measure(m: &AtomicMeasure, max_n: usize) -> Result<Self, MomentError> {
        let mut values = Vec::with_capacity(max_n + 1);
        let mut errs = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let (v, e) = m.moment_in::<S>(n as u32)?;
            values.push(v);
            errs.push(e);
        }
        let any = errs.iter().any(|e| *e > 0.0);
        Ok(MomentSequence { values, error_bounds: any.then_some(errs) })
    }

    /// Largest index N.
    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn error(&self, n: usize) -> f64 {
        self.error_bounds.as_ref().map(|e| e[n]).unwrap_or(0.0)
    }

    pub fn to_f64(&self) -> MomentSequence<f64> {
        MomentSequence {
            values: self.values.iter().map(|v| v.to_f64()).collect(),
            error_bounds: self.error_bounds.clone(),
        }
    }

    /// γ_{n+1} − γ_n.
    pub fn difference(&self) -> Self {
        let n = self.values.len();
        let values = (0..n.saturating_sub(1))
            .map(|i| self.values[i + 1].clone() - self.values[i].clone())
            .collect();
        let error_bounds = self
            .error_bounds
            .as_ref()
            .map(|e| (0..n.saturating_sub(1)).map(|i| e[i] + e[i + 1]).collect());
        MomentSequence { values, error_bounds }
    }

    /// γ_{n+k}.
    pub fn shifted(&self, k: usize) -> Self {
        MomentSequence {
            values: self.values[k.min(self.values.len())..].to_vec(),
            error_bounds: self.error_bounds.as_ref().map(|e| e[k.min(e.len())..].to_vec()),
        }
    }
}

impl MomentSequence<f64> {
    pub fn to_hp(&self) -> MomentSequence<Hp> {
        MomentSequence {
            values: self.values.iter().map(|v| Hp::from_f64(*v)).collect(),
            error_bounds: self.error_bounds.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HankelVerdict {
    StieltjesConsistent,
    HamburgerOnly,
    NotHamburger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelOrder {
    pub order: usize,
    pub min_eig_base: f64,
    pub threshold_base: f64,
    pub det_base: f64,
    pub base_ok: bool,
    /// Absent when γ_{2k+1} is beyond the prefix.
    pub min_eig_shift: Option<f64>,
    pub threshold_shift: Option<f64>,
    pub shift_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HankelReport {
    pub orders: Vec<HankelOrder>,
    pub verdict: HankelVerdict,
    pub failing_order: Option<usize>,
    pub tol: f64,
    pub precision: Precision,
    pub note: String,
}

impl HankelReport {
    /// Largest k with both Hankel forms passing at every order ≤ k.
    pub fn stieltjes_depth(&self) -> Option<usize> {
        let mut depth = None;
        for o in &self.orders {
            if o.base_ok && o.shift_ok == Some(true) {
                depth = Some(o.order);
            } else {
                break;
            }
        }
        depth
    }
}

struct PsdTest {
    min_eig: f64,
    threshold: f64,
    det: f64,
    ok: bool,
}

/// PSD test of [γ_{i+j+offset}]_{i,j≤k}: min eigenvalue ≥ −(tol·max diag + ‖E‖_F).
fn psd_test<S: Real>(g: &MomentSequence<S>, k: usize, offset: usize, tol: f64) -> PsdTest {
    let n = k + 1;
    let mut a = Vec::with_capacity(n * n);
    let mut frob = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            a.push(g.values[i + j + offset].clone());
            let e = g.error(i + j + offset);
            frob += e * e;
        }
    }
    let max_diag = (0..n)
        .map(|i| g.values[2 * i + offset].to_f64().abs())
        .fold(0.0, f64::max);
    let ev = symmetric_eigenvalues(&a, n);
    let mut det = S::one();
    for e in &ev {
        det = det * e.clone();
    }
    let min_eig = ev[0].to_f64();
    let threshold = -(tol * max_diag + frob.sqrt());
    PsdTest { min_eig, threshold, det: det.to_f64(), ok: min_eig >= threshold }
}

/// Hankel PSD tests of γ and of the shifted sequence at every available order.
pub fn hankel_report_in<S: Real>(g: &MomentSequence<S>, tol: f64, precision: Precision) -> HankelReport {
    let big_n = g.max_n();
    let mut orders = Vec::new();
    for k in 0..=big_n / 2 {
        let base = psd_test(g, k, 0, tol);
        let shift = (2 * k < big_n).then(|| psd_test(g, k, 1, tol));
        orders.push(HankelOrder {
            order: k,
            min_eig_base: base.min_eig,
            threshold_base: base.threshold,
            det_base: base.det,
            base_ok: base.ok,
            min_eig_shift: shift.as_ref().map(|s| s.min_eig),
            threshold_shift: shift.as_ref().map(|s| s.threshold),
            shift_ok: shift.as_ref().map(|s| s.ok),
        });
    }
    let (verdict, failing_order) = if let Some(o) = orders.iter().find(|o| !o.base_ok) {
        (HankelVerdict::NotHamburger, Some(o.order))
    } else if let Some(o) = orders.iter().find(|o| o.shift_ok == Some(false)) {
        (HankelVerdict::HamburgerOnly, Some(o.order))
    } else {
        (HankelVerdict::StieltjesConsistent, None)
    };
    HankelReport { orders, verdict, failing_order, tol, precision, note: TRUNCATION_NOTE.to_string() }
}

/// Hankel report for a double-precision sequence, evaluated in the requested precision.
pub fn hankel_report(g: &MomentSequence, tol: f64, precision: Precision) -> HankelReport {
    match precision {
        Precision::Double => hankel_report_in(g, tol, precision),
        Precision::High => hankel_report_in(&g.to_hp(), tol, precision),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftDominance {
    pub passes: bool,
    /// "base" or "difference" together with the first failing order.
    pub failure: Option<(String, usize)>,
    /// Determinant of the first failing Hankel matrix.
    pub failing_determinant: Option<f64>,
    pub base: HankelReport,
    pub difference: HankelReport,
    pub note: String,
}

fn first_base_failure(r: &HankelReport) -> Option<&HankelOrder> {
    r.orders.iter().find(|o| !o.base_ok)
}

pub fn shift_dominance_in<S: Real>(g: &MomentSequence<S>, tol: f64, precision: Precision) -> ShiftDominance {
    let base = hankel_report_in(g, tol, precision);
    let difference = hankel_report_in(&g.difference(), tol, precision);
    let (failure, det) = match (first_base_failure(&base), first_base_failure(&difference)) {
        (Some(o), _) => (Some(("base".to_string(), o.order)), Some(o.det_base)),
        (None, Some(o)) => (Some(("difference".to_string(), o.order)), Some(o.det_base)),
        (None, None) => (None, None),
    };
    ShiftDominance {
        passes: failure.is_none(),
        failure,
        failing_determinant: det,
        base,
        difference,
        note: TRUNCATION_NOTE.to_string(),
    }
}

/// Tests for a representing measure carried by [1, ∞): Hankel forms of γ and of
/// γ_{n+1} − γ_n must both be PSD. Needs at least γ_0, γ_1.
pub fn shift_dominance(g: &MomentSequence, tol: f64, precision: Precision) -> ShiftDominance {
    match precision {
        Precision::Double => shift_dominance_in(g, tol, precision),
        Precision::High => shift_dominance_in(&g.to_hp(), tol, precision),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Inverse,
}

/// Rows of Pascal's triangle up to `n`, exact in `u128` (n ≤ 130) and
/// accumulated in f64 beyond that.
fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<u128>> = vec![vec![1]];
    let mut out = vec![vec![1.0]];
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = vec![1u128; i + 1];
        let mut exact = true;
        for j in 1..i {
            match prev[j - 1].checked_add(prev[j]) {
                Some(v) => row[j] = v,
                None => {
                    exact = false;
                    break;
                }
            }
        }
        if exact {
            out.push(row.iter().map(|&v| v as f64).collect());
            rows.push(row);
        } else {
            let p = &out[i - 1];
            let r: Vec<f64> = (0..=i)
                .map(|j| if j == 0 || j == i { 1.0 } else { p[j - 1] + p[j] })
                .collect();
            out.push(r);
            rows.push(vec![0; i + 1]);
        }
    }
    out
}

/// T_{ϑ,a} and its inverse acting on sequences.
///
/// Forward: (Tγ)_n = Σ_j C(n,j) a^{n−j} ϑⁿ γ_j.
/// Inverse: (T⁻¹γ)_n = Σ_j C(n,j) (−a)^{n−j} ϑ^{−j} γ_j.
pub fn transform_t<S: Real>(g: &MomentSequence<S>, h: &Homothety, direction: Direction) -> MomentSequence<S> {
    let big_n = g.max_n();
    let c = binomials(big_n);
    let th = S::from_f64(h.scale);
    let a = S::from_f64(h.shift);
    let mut values = Vec::with_capacity(big_n + 1);
    let mut errs = g.error_bounds.as_ref().map(|_| Vec::with_capacity(big_n + 1));
    for n in 0..=big_n {
        let mut acc = S::zero();
        let mut err = 0.0;
        for j in 0..=n {
            let cnj = S::from_f64(c[n][j]);
            let w = match direction {
                Direction::Forward => cnj * a.powi((n - j) as u32) * th.powi(n as u32),
                Direction::Inverse => {
                    cnj * (-a.clone()).powi((n - j) as u32) / th.powi(j as u32)
                }
            };
            err += w.to_f64().abs() * g.error(j);
            acc = acc + w * g.values[j].clone();
        }
        values.push(acc);
        if let Some(e) = errs.as_mut() {
            e.push(err);
        }
    }
    MomentSequence { values, error_bounds: errs }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthClass {
    Diverging,
    Converging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    /// partial_sums[k-1] = Σ_{n=1..k} γ_n^{−1/(2n)}.
    pub partial_sums: Vec<f64>,
    pub growth_class: GrowthClass,
    /// Fitted coefficients of n·ln n and n² in ln γ_n (with 1 and n as nuisance terms).
    pub coef_nlogn: f64,
    pub coef_n2: f64,
    pub advisory: String,
}

/// Carleman partial sums and a growth-class guess from ln γ_1..ln γ_N.
///
/// `log_values[n]` is ln γ_n; index 0 is ignored.
pub fn carleman_diagnostic_log(log_values: &[f64]) -> CarlemanReport {
    let big_n = log_values.len().saturating_sub(1);
    let mut partial_sums = Vec::with_capacity(big_n);
    let mut s = 0.0;
    for (n, lv) in log_values.iter().enumerate().skip(1) {
        s += (-lv / (2.0 * n as f64)).exp();
        partial_sums.push(s);
    }
    let lo = (big_n / 2).max(1);
    let pts: Vec<(f64, f64)> = (lo..=big_n).map(|n| (n as f64, log_values[n])).collect();
    let (growth_class, a, b) = if pts.len() < 6 {
        (GrowthClass::Inconclusive, f64::NAN, f64::NAN)
    } else {
        let coef = least_squares(&pts);
        let (a, b) = (coef[2], coef[3]);
        let n_last = big_n as f64;
        let quad = b * n_last;
        let nlog = a.abs() * n_last.ln();
        let class = if b > 0.0 && quad > nlog.max(1.0) {
            GrowthClass::Converging
        } else if a <= 2.1 {
            GrowthClass::Diverging
        } else if a > 2.5 {
            GrowthClass::Converging
        } else {
            GrowthClass::Inconclusive
        };
        (class, a, b)
    };
    CarlemanReport {
        partial_sums,
        growth_class,
        coef_nlogn: a,
        coef_n2: b,
        advisory: format!("heuristic growth class; {TRUNCATION_NOTE}"),
    }
}

pub fn carleman_diagnostic(g: &MomentSequence) -> Result<CarlemanReport, MomentError> {
    for (i, v) in g.values.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(MomentError::NonPositiveEntry { index: i, value: *v });
        }
    }
    let logs: Vec<f64> = g.values.iter().map(|v| v.ln()).collect();
    Ok(carleman_diagnostic_log(&logs))
}

/// Least squares of y on {1, n, n ln n, n²}, columns scaled to unit max.
fn least_squares(pts: &[(f64, f64)]) -> [f64; 4] {
    let basis = |n: f64| [1.0, n, n * n.ln(), n * n];
    let mut scale = [0.0f64; 4];
    for &(n, _) in pts {
        for (k, v) in basis(n).iter().enumerate() {
            scale[k] = scale[k].max(v.abs());
        }
    }
    for s in scale.iter_mut() {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let mut ata = [[0.0f64; 5]; 4];
    for &(n, y) in pts {
        let b = basis(n);
        let x: Vec<f64> = (0..4).map(|k| b[k] / scale[k]).collect();
        for i in 0..4 {
            for j in 0..4 {
                ata[i][j] += x[i] * x[j];
            }
            ata[i][4] += x[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| ata[i][col].abs().total_cmp(&ata[j][col].abs())).unwrap();
        ata.swap(col, piv);
        let p = ata[col][col];
        if p.abs() < 1e-300 {
            continue;
        }
        for r in 0..4 {
            if r != col {
                let f = ata[r][col] / p;
                for c in col..5 {
                    ata[r][c] -= f * ata[col][c];
                }
            }
        }
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = if ata[k][k].abs() < 1e-300 { 0.0 } else { ata[k][4] / ata[k][k] / scale[k] };
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TasoVerdict {
    #[serde(rename = "S-Indeterminate")]
    SIndeterminate,
    #[serde(rename = "S-Determinate")]
    SDeterminate,
    NotStieltjes,
}

/// Classifies T_{ϑ,a}γ for S-indeterminate γ by the sign of c = ψ_{ϑ,a}(inf supp of
/// the Friedrichs measure). The infimum is trusted input.
pub fn taso_classify(inf_supp_friedrichs: f64, h: &Homothety) -> TasoVerdict {
    let c = h.apply(inf_supp_friedrichs);
    let noise = 4.0 * f64::EPSILON * h.scale * (inf_supp_friedrichs.abs() + h.shift.abs());
    if c.abs() <= noise {
        TasoVerdict::SDeterminate
    } else if c > 0.0 {
        TasoVerdict::SIndeterminate
    } else {
        TasoVerdict::NotStieltjes
    }
}
