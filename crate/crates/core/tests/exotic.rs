use onecircuit::circuit_graph::{Eta, VertexId};
use onecircuit::comp_op::*;
use onecircuit::exotic::*;
use onecircuit::measures::{AtomicMeasure, Homothety};
use onecircuit::qspecial::quartic_pair;

fn scaled_pair() -> (AtomicMeasure, AtomicMeasure) {
    let (z, r) = quartic_pair(40).unwrap();
    let s = 1.0 / (1.0 - z.mass_at(0.0));
    (z.scale_mass(s), r.scale_mass(s))
}

fn nu_tau(a: f64) -> (AtomicMeasure, AtomicMeasure) {
    let (alpha, beta) = scaled_pair();
    let h = epslem_homothety(a).unwrap();
    let nu = snap_to_one(alpha.pushforward(&h).unwrap()).unwrap();
    assert_eq!(nu.inf_support().unwrap(), 1.0);
    (nu, beta.pushforward(&h).unwrap())
}

#[test]
fn gs_checks_on_quartic_pair() {
    let (nu, tau) = nu_tau(2.0);
    let r = validate_gs(&nu, &tau, 0, 8).unwrap();
    assert!(r.passes(), "{r:?}");
    assert!(r.gs4_margin > 0.0);
    // ν without its unit atom has mass 1, so (gs3) holds but (gs2) does not
    let bare = nu.remove_atoms(&[1.0]).unwrap();
    let r = validate_gs(&bare, &tau, 0, 8).unwrap();
    assert!(r.gs3 && !r.gs2);
    let r = validate_gs(&bare.scale_mass(2.0), &tau, 0, 8).unwrap();
    assert!(!r.gs3);
}

#[test]
fn kappa_search_enables_gs4() {
    let (alpha, beta) = scaled_pair();
    for k in 1..=3 {
        let res = epslem_search(&beta, EpslemMode::Kappa(k), &SearchGrid::default()).unwrap();
        assert!(res.lhs > res.rhs);
        assert!((res.lhs - res.lhs_direct).abs() <= 1e-10 * res.lhs);
        let h = epslem_homothety(res.a).unwrap();
        let nu = snap_to_one(alpha.pushforward(&h).unwrap()).unwrap();
        let tau = beta.pushforward(&h).unwrap();
        let gs = validate_gs(&nu, &tau, k, 6).unwrap();
        assert!(gs.gs4, "κ={k} margin {}", gs.gs4_margin);
    }
}

#[test]
fn finite_m_search_identity() {
    let (_, beta) = scaled_pair();
    let res = epslem_search(&beta, EpslemMode::FiniteM(1), &SearchGrid::default()).unwrap();
    assert!(res.a < res.boundary);
    assert!((res.lhs - res.lhs_direct).abs() <= 1e-12 * res.lhs);
    assert!(res.lhs > res.rhs);
    let full = epslem_search(&beta, EpslemMode::FullSum, &SearchGrid::default()).unwrap();
    assert!(full.boundary >= res.boundary);
}

#[test]
fn search_fails_without_heavy_atoms() {
    let beta = AtomicMeasure::from_pairs(&[(1.0, 0.5), (2.0, 0.6)]).unwrap();
    assert!(matches!(
        epslem_search(&beta, EpslemMode::FiniteM(1), &SearchGrid::default()),
        Err(ExoticError::NotFound)
    ));
}

#[test]
fn build_exotic_kappa_one() {
    let (alpha, beta) = scaled_pair();
    let res = epslem_search(&beta, EpslemMode::Kappa(1), &SearchGrid::default()).unwrap();
    let h = epslem_homothety(res.a).unwrap();
    let nu = snap_to_one(alpha.pushforward(&h).unwrap()).unwrap();
    let tau = beta.pushforward(&h).unwrap();
    let part = canonical_partitions(&tau, Eta::Finite(2), 1).unwrap();
    let spec = ExoticSpec { eta: Eta::Finite(2), kappa: 1, mu_xkappa: 1.0, branch_depth: 10, moment_depth: 6 };
    let (model, seeds, d) = build_exotic(&nu, &tau, &part, &spec).unwrap();
    for s in &seeds {
        assert!((s.total_mass() - 1.0).abs() <= s.tail_mass_bound() + 1e-12);
        assert!(s.inf_support().unwrap() > 1.0);
    }
    assert!((d.xi + nu.mass_at(1.0)).abs() <= 1e-10 * nu.mass_at(1.0));
    assert!(d.c.iter().all(|c| *c > 0.0));
    // h_n(x_κ) are the moments of P(x_κ) = ν − ν({1})δ₁
    let pk = nu.remove_atoms(&[1.0]).unwrap();
    for n in 0..=10 {
        let (h, e) = h_n(&model, VertexId::Circuit(1), n).unwrap();
        let (m, me) = pk.moment(n).unwrap();
        assert!((h - m).abs() <= 1e-9 * m + e + me, "n={n}: {h} vs {m}");
    }
    let x = xi_check(&model, &nu, 10).unwrap();
    assert!(x.identity_residuals.iter().all(|(_, r)| *r <= 1e-10));
}

#[test]
fn xi_of_subnormal_build_is_nonnegative() {
    let spec = SubnormalSpec {
        seeds: vec![AtomicMeasure::dirac(2.0), AtomicMeasure::from_pairs(&[(1.5, 0.5), (4.0, 0.5)]).unwrap()],
        weights: vec![1.0, 0.5],
        kappa: 0,
        mu_x0: None,
        branch_depth: 12,
        omitted: None,
    };
    let (m, _, _) = build_subnormal(&spec).unwrap();
    let nu = AtomicMeasure::dirac(1.0);
    let x = xi_check(&m, &nu, 8).unwrap();
    assert!(x.xi >= 0.0);
    assert!((x.identity_residuals[0].1) <= 1e-10);
}

#[test]
fn pipeline_eta_two() {
    let (model, rep) = exotic_pipeline(Eta::Finite(2), PairSource::Quartic, &PipelineOptions::default()).unwrap();
    assert!(rep.beta_theta1 > 11.5);
    assert_eq!(rep.hyponormality.verdict, HyponormalVerdict::NotHyponormal);
    assert_eq!(rep.hyponormality.min_slack_at, Some(VertexId::Circuit(0)));
    assert!(rep.hyponormality.min_slack < 0.0);
    let d = &rep.diagnostics;
    assert!(d.budski_left.unwrap() > d.budski_right.unwrap());
    // model-side sides agree with τ-side sides
    let b = budski(&model).unwrap();
    assert!((b.left - d.budski_left.unwrap()).abs() <= 1e-12 * b.left);
    assert!((b.right - d.budski_right.unwrap()).abs() <= 1e-12);
    assert!(((d.id_sum - 1.0) - rep.xi.nu_at_one).abs() <= 1e-9 * rep.xi.nu_at_one);
    for h in &rep.hankel_evidence {
        let r = h.report.as_ref().unwrap();
        assert_eq!(r.verdict, onecircuit::moments::HankelVerdict::StieltjesConsistent, "{}", h.vertex);
        assert!(r.stieltjes_depth().unwrap() >= 4);
    }
    // the tail branch makes the norm bound grow with depth
    assert!(norm_bound(&model, 1).truncation_caveat || norm_bound(&model, 1).sup_value > 1.0);
}

#[test]
fn pipeline_eta_one_is_hyponormal() {
    let (_, rep) = exotic_pipeline(Eta::Finite(1), PairSource::Quartic, &PipelineOptions::default()).unwrap();
    assert_eq!(rep.hyponormality.verdict, HyponormalVerdict::Hyponormal);
    assert!(rep.xi.xi < 0.0);
}

#[test]
fn pipeline_eta_infinite() {
    let (model, rep) = exotic_pipeline(Eta::Infinite, PairSource::Quartic, &PipelineOptions::default()).unwrap();
    assert!(model.shape.is_infinite());
    assert!(model.omitted().is_some());
    assert_eq!(rep.hyponormality.verdict, HyponormalVerdict::NotHyponormal);
    assert!(rep.xi.relative_defect <= 1e-10 + rep.xi.omitted_bound / rep.xi.nu_at_one);
}

#[test]
fn pipeline_asc_source() {
    // a > 1 with q under the Euler threshold
    let r = exotic_pipeline(Eta::Finite(2), PairSource::Asc { a: 2.0, q: 0.05 }, &PipelineOptions::default());
    match r {
        Ok((_, rep)) => {
            assert!((rep.xi.xi + rep.xi.nu_at_one).abs() <= 1e-10 * rep.xi.nu_at_one);
            assert!(rep.provenance.contains("Krein"));
        }
        Err(ExoticError::Invalid(msg)) => assert!(msg.contains("≤ 1"), "{msg}"),
        Err(e) => panic!("{e}"),
    }
    assert!(matches!(
        exotic_pipeline(Eta::Finite(2), PairSource::Asc { a: 2.0, q: 0.45 }, &PipelineOptions::default()),
        Err(ExoticError::EulerPredicateFailed { .. })
    ));
}

#[test]
fn lambda_bounds() {
    let (_, tau) = nu_tau(137.0);
    let n = tau.len();
    let trivial = Partition { blocks: vec![(0..n).collect()], tail_block: Some(0) };
    let l = lambda_functional(&tau, &trivial).unwrap();
    assert_eq!(l.value, l.inf_bound);
    let singles = Partition { blocks: (0..n).map(|i| vec![i]).collect(), tail_block: None };
    let l = lambda_functional(&tau, &singles).unwrap();
    assert!((l.value - l.sup_bound).abs() <= 1e-10 * l.sup_bound);
    let mut prev = f64::INFINITY;
    for k in 1..=8 {
        let p = canonical_partitions(&tau, Eta::Finite(3), k).unwrap();
        let l = lambda_functional(&tau, &p).unwrap();
        assert!(l.within_bounds);
        assert!(l.value < l.sup_bound);
        assert!(l.value <= prev * (1.0 + 1e-14), "k={k}");
        prev = l.value;
    }
    let p = canonical_partitions(&tau, Eta::Finite(2), 1).unwrap();
    assert_eq!(p.blocks[0], vec![0]);
    assert_eq!(p.blocks.len(), 2);
    let p = canonical_partitions(&tau, Eta::Finite(3), 1).unwrap();
    assert_eq!(p.blocks[..2], [vec![0], vec![1]]);
    // Λ(tildeΔ_η) ≥ ∫_0^{θ_{η−1}} (t−1)/t dτ
    for eta in 2..6u32 {
        let p = canonical_partitions(&tau, Eta::Finite(eta), 1).unwrap();
        let l = lambda_functional(&tau, &p).unwrap();
        let head: f64 = tau.atoms()[..eta as usize - 1].iter().map(|x| (x.location - 1.0) / x.location * x.mass).sum();
        assert!(l.value >= head);
    }
}

#[test]
fn partition_validation() {
    let (_, tau) = nu_tau(2.0);
    let n = tau.len();
    let bad = Partition { blocks: vec![vec![0], vec![]], tail_block: None };
    assert!(matches!(lambda_functional(&tau, &bad), Err(ExoticError::EmptyBlock(1))));
    let overlap = Partition { blocks: vec![(0..n).collect(), vec![0]], tail_block: None };
    assert!(lambda_functional(&tau, &overlap).is_err());
    let _ = Homothety::identity();
}
