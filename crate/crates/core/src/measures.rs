//! Truncated positive atomic measures on `[0, ∞)` and affine pushforwards.
//!
//! A measure is a finite sorted list of atoms plus three numbers bounding what
//! was cut off: the omitted mass, a degree `D` and a bound on the omitted
//! `D`-th moment. The omitted part is assumed to live in `[tail_floor, ∞)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("moment of order {n} requested but tail is only controlled up to degree {degree}")]
    TailDegreeExceeded { n: u32, degree: u32 },
    #[error("pushforward moves location {0} below zero")]
    NegativeSupport(f64),
    #[error("no atom stored at location {0}")]
    AtomNotFound(f64),
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("invalid atom ({location}, {mass})")]
    InvalidAtom { location: f64, mass: f64 },
    #[error("atom locations must be strictly increasing")]
    Unsorted,
    #[error("invalid tail bounds")]
    InvalidTail,
    #[error("invalid homothety scale {0}")]
    InvalidScale(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl From<(f64, f64)> for Atom {
    fn from((location, mass): (f64, f64)) -> Self {
        Atom { location, mass }
    }
}

impl From<Atom> for (f64, f64) {
    fn from(a: Atom) -> Self {
        (a.location, a.mass)
    }
}

/// ψ_{ϑ,a}(t) = ϑ(t + a).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Homothety {
    pub scale: f64,
    pub shift: f64,
}

impl Homothety {
    pub fn new(scale: f64, shift: f64) -> Result<Self, MeasureError> {
        if !(scale > 0.0) || !scale.is_finite() || !shift.is_finite() {
            return Err(MeasureError::InvalidScale(scale));
        }
        Ok(Homothety { scale, shift })
    }

    pub fn identity() -> Self {
        Homothety { scale: 1.0, shift: 0.0 }
    }

    pub fn apply(&self, t: f64) -> f64 {
        self.scale * (t + self.shift)
    }

    /// ψ_{ϑ,a}⁻¹ = ψ_{1/ϑ, −aϑ}.
    pub fn inverse(&self) -> Self {
        Homothety { scale: 1.0 / self.scale, shift: -self.shift * self.scale }
    }

    /// `self ∘ inner`, i.e. ψ_{ϑ̃,ã} ∘ ψ_{ϑ,a} = ψ_{ϑ̃ϑ, ã/ϑ + a}.
    pub fn compose(&self, inner: &Homothety) -> Self {
        Homothety {
            scale: self.scale * inner.scale,
            shift: self.shift / inner.scale + inner.shift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    #[serde(default)]
    tail_mass_bound: f64,
    #[serde(default)]
    tail_degree: u32,
    #[serde(default)]
    tail_moment_bound: f64,
    /// Lower end of the omitted support; not part of the JSON schema.
    #[serde(skip, default = "nan")]
    tail_floor: f64,
}

fn nan() -> f64 {
    f64::NAN
}

impl AtomicMeasure {
    pub fn new(
        atoms: Vec<Atom>,
        tail_mass_bound: f64,
        tail_degree: u32,
        tail_moment_bound: f64,
    ) -> Result<Self, MeasureError> {
        let floor = atoms.last().map(|a| a.location).unwrap_or(0.0);
        let m = AtomicMeasure { atoms, tail_mass_bound, tail_degree, tail_moment_bound, tail_floor: floor };
        m.validate()?;
        Ok(m)
    }

    /// A measure that is exactly its atom list.
    pub fn exact(atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        Self::new(atoms, 0.0, 0, 0.0)
    }

    /// Builds from unsorted `(location, mass)` pairs, merging equal locations.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, MeasureError> {
        let mut v: Vec<Atom> = pairs.iter().map(|&p| Atom::from(p)).collect();
        v.sort_by(|a, b| a.location.total_cmp(&b.location));
        let mut out: Vec<Atom> = Vec::with_capacity(v.len());
        for a in v {
            match out.last_mut() {
                Some(l) if l.location == a.location => l.mass += a.mass,
                _ => out.push(a),
            }
        }
        Self::exact(out)
    }

    pub fn dirac(t: f64) -> Self {
        Self::exact(vec![Atom { location: t, mass: 1.0 }]).expect("valid point mass")
    }

    /// Re-establishes derived state after deserialization and checks invariants.
    pub fn validate(&self) -> Result<(), MeasureError> {
        for a in &self.atoms {
            if !(a.mass > 0.0) || !(a.location >= 0.0) || !a.mass.is_finite() || !a.location.is_finite() {
                return Err(MeasureError::InvalidAtom { location: a.location, mass: a.mass });
            }
        }
        if self.atoms.windows(2).any(|w| !(w[0].location < w[1].location)) {
            return Err(MeasureError::Unsorted);
        }
        if !(self.tail_mass_bound >= 0.0) || !(self.tail_moment_bound >= 0.0) {
            return Err(MeasureError::InvalidTail);
        }
        Ok(())
    }

    /// Parses the JSON measure schema.
    pub fn from_json(s: &str) -> Result<Self, String> {
        let mut m: AtomicMeasure = serde_json::from_str(s).map_err(|e| e.to_string())?;
        m.tail_floor = m.atoms.last().map(|a| a.location).unwrap_or(0.0);
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }

    pub fn with_tail_floor(mut self, floor: f64) -> Self {
        self.tail_floor = floor;
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }
    pub fn tail_degree(&self) -> u32 {
        self.tail_degree
    }
    pub fn tail_moment_bound(&self) -> f64 {
        self.tail_moment_bound
    }
    pub fn tail_floor(&self) -> f64 {
        if self.tail_floor.is_nan() {
            self.atoms.last().map(|a| a.location).unwrap_or(0.0)
        } else {
            self.tail_floor
        }
    }
    pub fn is_exact(&self) -> bool {
        self.tail_mass_bound == 0.0
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// Mass of the stored atom at exactly `t` (0 if none).
    pub fn mass_at(&self, t: f64) -> f64 {
        self.atoms
            .binary_search_by(|a| a.location.total_cmp(&t))
            .map(|i| self.atoms[i].mass)
            .unwrap_or(0.0)
    }

    pub fn inf_support(&self) -> Result<f64, MeasureError> {
        self.atoms.first().map(|a| a.location).ok_or(MeasureError::EmptyMeasure)
    }

    /// Σ f(t)·mass over stored atoms (no tail).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| f(a.location) * a.mass).sum()
    }

    /// Bound on ∫ tⁿ over the omitted tail.
    pub fn tail_moment_error(&self, n: u32) -> Result<f64, MeasureError> {
        if self.tail_mass_bound == 0.0 && self.tail_moment_bound == 0.0 {
            return Ok(0.0);
        }
        if n == 0 {
            return Ok(self.tail_mass_bound);
        }
        if n > self.tail_degree {
            return Err(MeasureError::TailDegreeExceeded { n, degree: self.tail_degree });
        }
        let floor = self.tail_floor();
        if floor >= 1.0 {
            // tⁿ ≤ t^D / floor^{D−n} on [floor, ∞)
            Ok(self.tail_moment_bound / floor.powi((self.tail_degree - n) as i32))
        } else {
            // tⁿ ≤ 1 + t^D on [0, ∞)
            Ok(self.tail_mass_bound + self.tail_moment_bound)
        }
    }

    /// n-th moment of the stored atoms, with a bound on the omitted tail's contribution.
    pub fn moment(&self, n: u32) -> Result<(f64, f64), MeasureError> {
        self.moment_in::<f64>(n)
    }

    pub fn moment_in<S: Real>(&self, n: u32) -> Result<(S, f64), MeasureError> {
        let tail = self.tail_moment_error(n)?;
        let mut acc = S::zero();
        for a in &self.atoms {
            acc = acc + S::from_f64(a.mass) * S::from_f64(a.location).powi(n);
        }
        Ok((acc, tail))
    }

    /// Pushforward ν∘ψ⁻¹: each atom (t, w) goes to (ψ(t), w).
    pub fn pushforward(&self, h: &Homothety) -> Result<Self, MeasureError> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let t = h.apply(a.location);
            if t < 0.0 {
                return Err(MeasureError::NegativeSupport(t));
            }
            atoms.push(Atom { location: t, mass: a.mass });
        }
        let floor = self.tail_floor();
        let d = self.tail_degree as i32;
        let moment = if self.tail_moment_bound == 0.0 && self.tail_mass_bound == 0.0 {
            0.0
        } else if floor > 0.0 {
            // sup over t ≥ floor of (ϑ(t+a)/t)^D
            h.scale.powi(d) * (1.0 + h.shift.max(0.0) / floor).powi(d) * self.tail_moment_bound
        } else {
            let c = if d == 0 { 1.0 } else { 2f64.powi(d - 1) };
            h.scale.powi(d) * c * (self.tail_moment_bound + h.shift.abs().powi(d) * self.tail_mass_bound)
        };
        let new_floor = h.apply(floor).max(0.0);
        let m = AtomicMeasure {
            atoms,
            tail_mass_bound: self.tail_mass_bound,
            tail_degree: self.tail_degree,
            tail_moment_bound: moment,
            tail_floor: new_floor,
        };
        m.validate()?;
        Ok(m)
    }

    /// Multiplies every mass and tail bound by `r`.
    pub fn scale_mass(&self, r: f64) -> Self {
        assert!(r > 0.0, "mass scale must be positive");
        AtomicMeasure {
            atoms: self.atoms.iter().map(|a| Atom { location: a.location, mass: a.mass * r }).collect(),
            tail_mass_bound: self.tail_mass_bound * r,
            tail_degree: self.tail_degree,
            tail_moment_bound: self.tail_moment_bound * r,
            tail_floor: self.tail_floor(),
        }
    }

    /// Deletes atoms at the given locations (exact match).
    pub fn remove_atoms(&self, locations: &[f64]) -> Result<Self, MeasureError> {
        let mut atoms = self.atoms.clone();
        for &t in locations {
            let i = atoms
                .binary_search_by(|a| a.location.total_cmp(&t))
                .map_err(|_| MeasureError::AtomNotFound(t))?;
            atoms.remove(i);
        }
        Ok(AtomicMeasure { atoms, tail_floor: self.tail_floor(), ..self.clone() })
    }

    /// Keeps the atoms with the given indices; the tail is kept only if `keep_tail`.
    pub fn restrict(&self, indices: &[usize], keep_tail: bool) -> Self {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        let atoms = idx.iter().map(|&i| self.atoms[i]).collect();
        if keep_tail {
            AtomicMeasure { atoms, tail_floor: self.tail_floor(), ..self.clone() }
        } else {
            AtomicMeasure::exact(atoms).expect("subset of a valid measure")
        }
    }

    /// New measure with masses `f(t)·w`. Atoms where the product vanishes are dropped.
    ///
    /// The tail is controlled through `0 ≤ f(t) ≤ c·max(1, t)^p` on the omitted
    /// support; the new tail degree drops by `p`.
    pub fn reweight<F: Fn(f64) -> f64>(&self, f: F, c: f64, p: u32) -> Result<Self, MeasureError> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let w = f(a.location) * a.mass;
            if w < 0.0 || !w.is_finite() {
                return Err(MeasureError::InvalidAtom { location: a.location, mass: w });
            }
            if w > 0.0 {
                atoms.push(Atom { location: a.location, mass: w });
            }
        }
        let (mass, degree, moment) = if self.is_exact() && self.tail_moment_bound == 0.0 {
            (0.0, 0, 0.0)
        } else {
            if p > self.tail_degree {
                return Err(MeasureError::TailDegreeExceeded { n: p, degree: self.tail_degree });
            }
            let whole = self.tail_mass_bound + self.tail_moment_bound;
            let mass = if p == 0 { c * self.tail_mass_bound } else { c * whole };
            (mass, self.tail_degree - p, c * whole)
        };
        let m = AtomicMeasure {
            atoms,
            tail_mass_bound: mass,
            tail_degree: degree,
            tail_moment_bound: moment,
            tail_floor: self.tail_floor(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Sum of measures; equal locations merge. The tail degree is the minimum.
    pub fn add(&self, other: &AtomicMeasure) -> Self {
        let mut pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.location, a.mass)).collect();
        pairs.extend(other.atoms.iter().map(|a| (a.location, a.mass)));
        let mut m = AtomicMeasure::from_pairs(&pairs).expect("sum of valid measures");
        let a_exact = self.is_exact() && self.tail_moment_bound == 0.0;
        let b_exact = other.is_exact() && other.tail_moment_bound == 0.0;
        m.tail_mass_bound = self.tail_mass_bound + other.tail_mass_bound;
        m.tail_moment_bound = self.tail_moment_bound + other.tail_moment_bound;
        m.tail_degree = match (a_exact, b_exact) {
            (true, true) => 0,
            (true, false) => other.tail_degree,
            (false, true) => self.tail_degree,
            (false, false) => self.tail_degree.min(other.tail_degree),
        };
        m.tail_floor = match (a_exact, b_exact) {
            (true, true) => m.atoms.last().map(|a| a.location).unwrap_or(0.0),
            (true, false) => other.tail_floor(),
            (false, true) => self.tail_floor(),
            (false, false) => self.tail_floor().min(other.tail_floor()),
        };
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> AtomicMeasure {
        AtomicMeasure::exact(vec![Atom { location: 1.0, mass: 0.3 }, Atom { location: 2.0, mass: 0.7 }]).unwrap()
    }

    #[test]
    fn dirac_moments() {
        assert_eq!(AtomicMeasure::dirac(1.0).moment(17).unwrap(), (1.0, 0.0));
        assert_eq!(AtomicMeasure::dirac(4.0).moment(5).unwrap(), (1024.0, 0.0));
    }

    #[test]
    fn pushforward_dirac() {
        let m = AtomicMeasure::dirac(3.0).pushforward(&Homothety::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(m.atoms(), &[Atom { location: 8.0, mass: 1.0 }]);
        let id = two_atoms().pushforward(&Homothety::identity()).unwrap();
        assert_eq!(id.atoms(), two_atoms().atoms());
    }

    #[test]
    fn pushforward_below_zero_fails() {
        let r = AtomicMeasure::dirac(1.0).pushforward(&Homothety::new(1.0, -2.0).unwrap());
        assert!(matches!(r, Err(MeasureError::NegativeSupport(_))));
    }

    #[test]
    fn remove_and_scale() {
        let m = two_atoms().remove_atoms(&[1.0]).unwrap();
        assert_eq!(m.atoms(), &[Atom { location: 2.0, mass: 0.7 }]);
        assert_eq!(two_atoms().remove_atoms(&[]).unwrap(), two_atoms());
        assert!(matches!(two_atoms().remove_atoms(&[1.5]), Err(MeasureError::AtomNotFound(_))));
        let s = AtomicMeasure::dirac(1.0).scale_mass(2.0);
        assert_eq!(s.atoms(), &[Atom { location: 1.0, mass: 2.0 }]);
    }

    #[test]
    fn inf_support_after_unit_anchor() {
        let theta1 = 3.5;
        let a = 0.25;
        let m = AtomicMeasure::from_pairs(&[(theta1, 1.0), (9.0, 2.0)]).unwrap();
        let p = m.pushforward(&Homothety::new(1.0 / a, a).unwrap()).unwrap();
        assert!((p.inf_support().unwrap() - (1.0 + theta1 / a)).abs() < 1e-12);
        assert!(AtomicMeasure::exact(vec![]).unwrap().inf_support().is_err());
    }

    #[test]
    fn tail_degree_is_enforced() {
        let m = AtomicMeasure::new(vec![Atom { location: 2.0, mass: 1.0 }], 1e-6, 4, 1e-3).unwrap();
        assert!(m.moment(4).is_ok());
        assert_eq!(m.moment(5), Err(MeasureError::TailDegreeExceeded { n: 5, degree: 4 }));
        assert!(m.moment(0).unwrap().1 >= 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let m = AtomicMeasure::new(vec![Atom { location: 1.0, mass: 0.5 }, Atom { location: 4.0, mass: 0.25 }], 0.25, 3, 7.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("[[1.0,0.5],[4.0,0.25]]"));
        let back = AtomicMeasure::from_json(&s).unwrap();
        assert_eq!(back.atoms(), m.atoms());
        assert_eq!(back.tail_moment_bound(), 7.0);
    }

    #[test]
    fn homothety_inverse_and_compose() {
        let h = Homothety::new(2.5, -0.3).unwrap();
        let g = Homothety::new(0.4, 1.7).unwrap();
        for t in [0.0, 1.0, 3.3] {
            assert!((h.inverse().apply(h.apply(t)) - t).abs() < 1e-14);
            assert!((g.compose(&h).apply(t) - g.apply(h.apply(t))).abs() < 1e-13);
        }
    }
}
