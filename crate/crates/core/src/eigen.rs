//! Cyclic Jacobi eigenvalues for small dense symmetric matrices, generic over [`Real`].

use crate::scalar::Real;

/// Eigenvalues of the symmetric matrix `a` (row-major, `n × n`), ascending.
pub fn symmetric_eigenvalues<S: Real>(a: &[S], n: usize) -> Vec<S> {
    assert_eq!(a.len(), n * n, "matrix must be n×n");
    let mut m = a.to_vec();
    let idx = |i: usize, j: usize| i * n + j;
    let eps = S::from_f64(S::epsilon());

    for _sweep in 0..100 {
        let mut off = S::zero();
        let mut diag = S::zero();
        for i in 0..n {
            diag = diag + m[idx(i, i)].clone() * m[idx(i, i)].clone();
            for j in (i + 1)..n {
                off = off + m[idx(i, j)].clone() * m[idx(i, j)].clone();
            }
        }
        if off.to_f64() == 0.0 || off <= eps.clone() * eps.clone() * diag {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)].clone();
                if apq.to_f64() == 0.0 && apq == S::zero() {
                    continue;
                }
                let app = m[idx(p, p)].clone();
                let aqq = m[idx(q, q)].clone();
                // tan of the rotation angle, smaller root
                let theta = (aqq.clone() - app.clone()) / (S::from_f64(2.0) * apq.clone());
                let denom = theta.abs() + (theta.clone() * theta.clone() + S::one()).sqrt();
                let mut t = S::one() / denom;
                if theta.is_negative() {
                    t = -t;
                }
                let c = S::one() / (t.clone() * t.clone() + S::one()).sqrt();
                let s = t.clone() * c.clone();
                m[idx(p, p)] = app - t.clone() * apq.clone();
                m[idx(q, q)] = aqq + t * apq;
                m[idx(p, q)] = S::zero();
                m[idx(q, p)] = S::zero();
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[idx(k, p)].clone();
                    let akq = m[idx(k, q)].clone();
                    let nkp = c.clone() * akp.clone() - s.clone() * akq.clone();
                    let nkq = s.clone() * akp + c.clone() * akq;
                    m[idx(k, p)] = nkp.clone();
                    m[idx(p, k)] = nkp;
                    m[idx(k, q)] = nkq.clone();
                    m[idx(q, k)] = nkq;
                }
            }
        }
    }
    let mut ev: Vec<S> = (0..n).map(|i| m[idx(i, i)].clone()).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn min_eigenvalue<S: Real>(a: &[S], n: usize) -> S {
    symmetric_eigenvalues(a, n)
        .into_iter()
        .next()
        .unwrap_or_else(S::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Hp;

    #[test]
    fn two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let ev = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn hilbert_min_eig_hp() {
        // smallest eigenvalue of the 6×6 Hilbert matrix is about 1.0827994845e-7
        let n = 6;
        let a: Vec<Hp> = (0..n * n)
            .map(|k| Hp::one() / Hp::from_f64((k / n + k % n + 1) as f64))
            .collect();
        let l = min_eigenvalue(&a, n).to_f64();
        assert!((l - 1.082_799_484_5e-7).abs() < 1e-16, "{l}");
    }

    #[test]
    fn trace_is_preserved() {
        let a = [4.0, -1.0, 0.5, -1.0, 3.0, 2.0, 0.5, 2.0, -1.0];
        let ev = symmetric_eigenvalues(&a, 3);
        let s: f64 = ev.iter().sum();
        assert!((s - 6.0).abs() < 1e-12);
    }
}
