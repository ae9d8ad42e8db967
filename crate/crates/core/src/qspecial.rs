//! q-products, Al-Salam–Carlitz polynomials and measures, and the quartic
//! birth-and-death pair of N-extremal measures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{Atom, AtomicMeasure, MeasureError};
use crate::scalar::{Hp, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("infinite product diverges for |q| = {0} ≥ 1")]
    DivergentProduct(f64),
    #[error("parameters out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("no grid point satisfies the predicate")]
    NotFound,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Length of a q-product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QLen {
    Finite(usize),
    Infinite,
}

/// (z; q)_n = Π_{j=1..n} (1 − z q^{j−1}), with an absolute error bound.
///
/// For `n = ∞` the product stops once |z q^{j−1}| < eps·(1−|q|); the omitted
/// factors change the logarithm by at most s/(1−r), where s bounds Σ|z q^{j−1}|
/// over the rest and r is the first omitted term.
pub fn q_pochhammer<S: Real>(z: f64, q: f64, n: QLen, eps: f64) -> Result<(S, f64), QError> {
    let z_s = S::from_f64(z);
    let q_s = S::from_f64(q);
    let one = S::one();
    match n {
        QLen::Finite(n) => {
            let mut acc = one.clone();
            let mut zq = z_s;
            for _ in 0..n {
                acc = acc * (one.clone() - zq.clone());
                zq = zq * q_s.clone();
            }
            Ok((acc, 0.0))
        }
        QLen::Infinite => {
            if !(q.abs() < 1.0) {
                return Err(QError::DivergentProduct(q.abs()));
            }
            let stop = eps * (1.0 - q.abs());
            let mut acc = one.clone();
            let mut zq = z_s;
            let mut guard = 0usize;
            while zq.to_f64().abs() >= stop || guard == 0 {
                if zq.to_f64().abs() < stop {
                    break;
                }
                acc = acc * (one.clone() - zq.clone());
                zq = zq * q_s.clone();
                guard += 1;
                if guard > 1_000_000 {
                    break;
                }
            }
            let r = zq.to_f64().abs();
            let s = r / (1.0 - q.abs());
            let log_bound = s / (1.0 - r);
            let err = acc.to_f64().abs() * log_bound.exp_m1();
            Ok((acc, err))
        }
    }
}

/// Infinite product in high precision, returned as f64.
fn qinf(z: f64, q: f64) -> f64 {
    q_pochhammer::<Hp>(z, q, QLen::Infinite, 1e-40).expect("|q| < 1").0.to_f64()
}

/// V_n^{(a)}(x; q) from the three-term recurrence.
pub fn asc_eval(a: f64, q: f64, n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let qk = q.powi(k as i32);
        let next = (x - (1.0 + a) / qk) * cur - a * (1.0 - qk) / q.powi(2 * k as i32 - 1) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Monomial coefficients (constant term first) of V_0..V_n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscPolynomialTable {
    pub a: f64,
    pub q: f64,
    pub coefficients: Vec<Vec<f64>>,
}

pub fn asc_polynomial_table(a: f64, q: f64, n: usize) -> AscPolynomialTable {
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
    let mut prev: Vec<f64> = vec![];
    for k in 0..n {
        let cur = rows[k].clone();
        let qk = q.powi(k as i32);
        let b = (1.0 + a) / qk;
        let c = a * (1.0 - qk) / q.powi(2 * k as i32 - 1);
        let mut next = vec![0.0; k + 2];
        for (i, v) in cur.iter().enumerate() {
            next[i + 1] += v;
            next[i] -= b * v;
        }
        for (i, v) in prev.iter().enumerate() {
            next[i] -= c * v;
        }
        prev = cur;
        rows.push(next);
    }
    AscPolynomialTable { a, q, coefficients: rows }
}

impl AscPolynomialTable {
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        self.coefficients[n].iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Whether V^{(a)}(·; q) admits an orthogonalizing measure.
pub fn asc_orthogonalizable(a: f64, q: f64) -> bool {
    (a < 0.0 && ((q > -1.0 && q < 0.0) || q > 1.0)) || (a > 0.0 && q > 0.0 && q < 1.0)
}

/// Sum of a positive series from `start` on, given ln of its terms.
///
/// Terms are added explicitly until the ratio of consecutive terms drops below
/// 0.9; the remainder is bounded geometrically. Valid when the ratios are
/// nonincreasing from that point, which holds for every series used here.
pub fn series_tail_bound<F: Fn(usize) -> f64>(log_term: F, start: usize) -> f64 {
    let mut acc = 0.0;
    let mut n = start;
    loop {
        let lt = log_term(n);
        let ratio = (log_term(n + 1) - lt).exp();
        if ratio < 0.9 || n > start + 200_000 {
            acc += lt.exp() / (1.0 - ratio.min(0.9));
            break;
        }
        acc += lt.exp();
        n += 1;
    }
    // slack for rounding in the log-domain evaluation
    acc * (1.0 + 1e-9)
}

/// ln (z; q)_n for 0 < z q^{j} < 1.
fn ln_qpoch(z: f64, q: f64, n: usize) -> f64 {
    let mut s = 0.0;
    let mut zq = z;
    for _ in 0..n {
        s += (-zq).ln_1p();
        zq *= q;
    }
    s
}

pub const DEFAULT_ASC_ATOMS: usize = 40;
pub const DEFAULT_TAIL_DEGREE: u32 = 24;

/// β^{(a;q)}: atoms at q^{−n} with masses (aq;q)_∞ aⁿ q^{n²}/((aq;q)_n (q;q)_n).
pub fn asc_beta_measure(a: f64, q: f64, atoms: usize) -> Result<AtomicMeasure, QError> {
    asc_beta_measure_with_degree(a, q, atoms, DEFAULT_TAIL_DEGREE)
}

pub fn asc_beta_measure_with_degree(a: f64, q: f64, atoms: usize, degree: u32) -> Result<AtomicMeasure, QError> {
    if !(a > 0.0 && q > 0.0 && q < 1.0 && a * q < 1.0) {
        return Err(QError::ParameterOutOfRange(format!(
            "β measure needs a > 0, 0 < q < 1, aq < 1 (got a = {a}, q = {q})"
        )));
    }
    let c = qinf(a * q, q);
    asc_family(c, a, a * q, q, 1.0, atoms, degree)
}

/// γ^{(a;q)}: atoms at a q^{−n} with masses (q/a;q)_∞ a^{−n} q^{n²}/((q/a;q)_n (q;q)_n).
pub fn asc_gamma_measure(a: f64, q: f64, atoms: usize) -> Result<AtomicMeasure, QError> {
    asc_gamma_measure_with_degree(a, q, atoms, DEFAULT_TAIL_DEGREE)
}

pub fn asc_gamma_measure_with_degree(a: f64, q: f64, atoms: usize, degree: u32) -> Result<AtomicMeasure, QError> {
    if !(q > 0.0 && q < 1.0 && a > 1.0 && a * q < 1.0) {
        return Err(QError::ParameterOutOfRange(format!(
            "γ measure needs 0 < q < 1 and 1 < a < 1/q (got a = {a}, q = {q})"
        )));
    }
    let c = qinf(q / a, q);
    asc_family(c, 1.0 / a, q / a, q, a, atoms, degree)
}

/// Atoms at loc·q^{−n} with masses c·wⁿ q^{n²}/((b;q)_n (q;q)_n).
fn asc_family(c: f64, w: f64, b: f64, q: f64, loc: f64, atoms: usize, degree: u32) -> Result<AtomicMeasure, QError> {
    let (cs, ws, bs, qs) = (Hp::from_f64(c), Hp::from_f64(w), Hp::from_f64(b), Hp::from_f64(q));
    let one = Hp::one();
    let mut out = Vec::with_capacity(atoms);
    let mut mass = cs;
    let mut qn = one.clone(); // qⁿ
    for n in 0..atoms {
        let location = loc / q.powi(n as i32);
        let m = mass.to_f64();
        if !(m >= f64::MIN_POSITIVE) {
            // below the double range; left to the tail bound
            break;
        }
        out.push(Atom { location, mass: m });
        // ratio m_{n+1}/m_n = w q^{2n+1} / ((1 − b qⁿ)(1 − q^{n+1}))
        let q2n1 = qn.clone() * qn.clone() * qs.clone();
        let ratio = ws.clone() * q2n1 / ((one.clone() - bs.clone() * qn.clone()) * (one.clone() - qn.clone() * qs.clone()));
        mass = mass * ratio;
        qn = qn * qs.clone();
    }
    let lnc = c.ln();
    let log_mass = |n: usize| -> f64 {
        lnc + n as f64 * w.ln() + (n * n) as f64 * q.ln() - ln_qpoch(b, q, n) - ln_qpoch(q, q, n)
    };
    let d = degree as f64;
    let start = out.len();
    let tail_mass = series_tail_bound(log_mass, start);
    let tail_moment = series_tail_bound(|n| log_mass(n) + d * (loc.ln() - n as f64 * q.ln()), start);
    Ok(AtomicMeasure::new(out, tail_mass, degree, tail_moment)?)
}

/// m_n[β^{(a;q)}] = Σ_k (q;q)_n q^{k(k−n)} / ((q;q)_k (q;q)_{n−k}) a^k, in high precision.
pub fn asc_moment(a: f64, q: f64, n: usize) -> f64 {
    let qq = |k: usize| q_pochhammer::<Hp>(q, q, QLen::Finite(k), 0.0).unwrap().0;
    let qs = Hp::from_f64(q);
    let a_s = Hp::from_f64(a);
    let qn = qq(n);
    let mut acc = Hp::zero();
    for k in 0..=n {
        let binom = qn.clone() / (qq(k) * qq(n - k));
        // q^{k(k−n)} = 1 / q^{k(n−k)}
        let p = Hp::one() / qs.powi((k * (n - k)) as u32);
        acc = acc + binom * p * a_s.powi(k as u32);
    }
    acc.to_f64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerReport {
    pub a: f64,
    pub q0: f64,
    pub grid_step: f64,
    pub tested: usize,
    /// Grid points ≤ 0.5 where (q;q)_∞ > 1 − q/(1−q) failed (expected empty).
    pub pentagonal_violations: Vec<f64>,
    /// Grid points above q0 where the predicate held again.
    pub later_passes: Vec<f64>,
}

/// (q/a;q)_∞ + (aq;q)_∞.
pub fn euler_sum(a: f64, q: f64) -> f64 {
    qinf(q / a, q) + qinf(a * q, q)
}

/// Largest grid point q0 < 1/a with (q/a;q)_∞ + (aq;q)_∞ > 1 on the whole
/// tested prefix; grid points are k·step.
pub fn euler_threshold(a: f64, step: f64) -> Result<EulerReport, QError> {
    if !(a > 1.0) || !(step > 0.0) {
        return Err(QError::ParameterOutOfRange(format!("need a > 1 and step > 0 (a = {a})")));
    }
    let mut q0 = None;
    let mut broken = false;
    let mut pent = Vec::new();
    let mut later = Vec::new();
    let mut tested = 0;
    let mut k = 1usize;
    loop {
        let q = k as f64 * step;
        if q >= 1.0 / a {
            break;
        }
        tested += 1;
        if q <= 0.5 && !(qinf(q, q) > 1.0 - q / (1.0 - q)) {
            pent.push(q);
        }
        let ok = euler_sum(a, q) > 1.0;
        if ok && !broken {
            q0 = Some(q);
        } else if !ok {
            broken = true;
        } else {
            later.push(q);
        }
        k += 1;
    }
    let q0 = q0.ok_or(QError::NotFound)?;
    Ok(EulerReport { a, q0, grid_step: step, tested, pentagonal_violations: pent, later_passes: later })
}

/// Γ(1/4), cached.
pub fn gamma_quarter() -> f64 {
    static G: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *G.get_or_init(|| statrs::function::gamma::gamma(0.25))
}

/// K₀ = Γ(1/4)² / (4√π).
pub fn quartic_k0() -> f64 {
    gamma_quarter().powi(2) / (4.0 * std::f64::consts::PI.sqrt())
}

pub const DEFAULT_QUARTIC_ATOMS: usize = 40;

fn ln_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2
}

/// The quartic pair (ζ, ρ), `atoms` atoms each, tail degree [`DEFAULT_TAIL_DEGREE`].
pub fn quartic_pair(atoms: usize) -> Result<(AtomicMeasure, AtomicMeasure), QError> {
    quartic_pair_with_degree(atoms, DEFAULT_TAIL_DEGREE)
}

pub fn quartic_pair_with_degree(atoms: usize, degree: u32) -> Result<(AtomicMeasure, AtomicMeasure), QError> {
    if atoms < 2 {
        return Err(QError::ParameterOutOfRange("quartic pair needs at least 2 atoms".into()));
    }
    let pi = std::f64::consts::PI;
    let k0 = quartic_k0();
    let c = 4.0 * pi / (k0 * k0);
    let x = |k: usize| (k as f64 * pi / k0).powi(4);
    let w = |k: usize| {
        let t = k as f64 * pi;
        c * t / t.sinh()
    };
    let log_w = |k: usize| c.ln() + (k as f64 * pi).ln() - ln_sinh(k as f64 * pi);
    let ln_x = |k: usize| 4.0 * (k as f64 * pi / k0).ln();
    let d = degree as f64;

    let mut z = vec![Atom { location: 0.0, mass: pi / (k0 * k0) }];
    z.extend((1..atoms).map(|n| Atom { location: x(2 * n), mass: w(2 * n) }));
    let z_mass = series_tail_bound(|n| log_w(2 * n), atoms);
    let z_mom = series_tail_bound(|n| log_w(2 * n) + d * ln_x(2 * n), atoms);

    let r: Vec<Atom> = (0..atoms).map(|n| Atom { location: x(2 * n + 1), mass: w(2 * n + 1) }).collect();
    let r_mass = series_tail_bound(|n| log_w(2 * n + 1), atoms);
    let r_mom = series_tail_bound(|n| log_w(2 * n + 1) + d * ln_x(2 * n + 1), atoms);

    Ok((
        AtomicMeasure::new(z, z_mass, degree, z_mom)?,
        AtomicMeasure::new(r, r_mass, degree, r_mom)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pochhammer_basics() {
        assert_eq!(q_pochhammer::<f64>(0.3, 0.7, QLen::Finite(0), 0.0).unwrap().0, 1.0);
        assert_eq!(q_pochhammer::<f64>(0.5, 0.5, QLen::Finite(1), 0.0).unwrap().0, 0.5);
        assert!(matches!(q_pochhammer::<f64>(0.5, 1.0, QLen::Infinite, 1e-16), Err(QError::DivergentProduct(_))));
    }

    #[test]
    fn infinite_product_is_stable() {
        let (a, ea) = q_pochhammer::<Hp>(0.5, 0.5, QLen::Infinite, 1e-14).unwrap();
        let (b, eb) = q_pochhammer::<Hp>(0.5, 0.5, QLen::Infinite, 1e-16).unwrap();
        assert!((a.to_f64() - b.to_f64()).abs() < 1e-12);
        assert!(ea < 1e-13 && eb < 1e-15);
        // (0.5;0.5)_∞ = 0.288788095086602421278899721929...
        assert!((b.to_f64() - 0.288_788_095_086_602_4).abs() < 1e-15);
    }

    #[test]
    fn asc_recurrence_start() {
        assert_eq!(asc_eval(0.3, 0.4, 0, 5.0), 1.0);
        assert!((asc_eval(0.3, 0.4, 1, 5.0) - (5.0 - 1.3)).abs() < 1e-15);
        let t = asc_polynomial_table(0.3, 0.4, 6);
        for n in 0..=6 {
            assert_eq!(t.coefficients[n].len(), n + 1);
            assert_eq!(*t.coefficients[n].last().unwrap(), 1.0);
            assert!((t.eval(n, 2.2) - asc_eval(0.3, 0.4, n, 2.2)).abs() < 1e-9 * asc_eval(0.3, 0.4, n, 2.2).abs().max(1.0));
        }
    }

    #[test]
    fn orthogonalizable_examples() {
        assert!(asc_orthogonalizable(0.5, 0.25));
        assert!(!asc_orthogonalizable(0.5, 2.0));
        assert!(asc_orthogonalizable(-1.0, -0.5));
        assert!(asc_orthogonalizable(-1.0, 3.0));
        assert!(!asc_orthogonalizable(-1.0, 0.5));
    }

    #[test]
    fn beta_measure_shape() {
        let m = asc_beta_measure(0.5, 0.25, 40).unwrap();
        let locs: Vec<f64> = m.atoms().iter().take(3).map(|a| a.location).collect();
        assert_eq!(locs, vec![1.0, 4.0, 16.0]);
        assert!((m.total_mass() - 1.0).abs() <= m.tail_mass_bound() + 1e-14);
        let (m1, e1) = m.moment(1).unwrap();
        assert!((m1 - 1.5).abs() < 1e-10 + e1);
        assert!(asc_beta_measure(2.0, 0.5, 10).is_err());
    }

    #[test]
    fn gamma_measure_shape() {
        let m = asc_gamma_measure(2.0, 0.3, 40).unwrap();
        assert_eq!(m.atoms()[0].location, 2.0);
        assert!((m.atoms()[1].location - 2.0 / 0.3).abs() < 1e-12);
        assert!((m.total_mass() - 1.0).abs() <= m.tail_mass_bound() + 1e-14);
        assert!(asc_gamma_measure(0.5, 0.3, 10).is_err());
    }

    #[test]
    fn asc_moment_small_orders() {
        assert_eq!(asc_moment(0.7, 0.3, 0), 1.0);
        assert!((asc_moment(0.7, 0.3, 1) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn pentagonal_at_tenth() {
        assert!(qinf(0.1, 0.1) > 1.0 - 0.1 / 0.9);
    }

    #[test]
    fn gamma_quarter_identities() {
        // reflection Γ(z)Γ(1−z) = π/sin(πz); duplication Γ(z)Γ(z+½) = 2^{1−2z}√π Γ(2z)
        let pi = std::f64::consts::PI;
        let g14 = gamma_quarter();
        let g34 = statrs::function::gamma::gamma(0.75);
        assert!((g14 * g34 / (pi / (pi / 4.0).sin()) - 1.0).abs() < 1e-12);
        assert!((g14 * g34 / (2f64.sqrt() * pi.sqrt() * pi.sqrt()) - 1.0).abs() < 1e-12);
    }
}
