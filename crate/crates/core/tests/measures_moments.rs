use approx::assert_relative_eq;
use onecircuit::measures::{Atom, AtomicMeasure, Homothety};
use onecircuit::moments::*;
use onecircuit::qspecial::asc_beta_measure;
use onecircuit::scalar::Precision;
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..20.0, 0.01f64..2.0), 1..6)
}

fn measure(p: &[(f64, f64)]) -> AtomicMeasure {
    AtomicMeasure::from_pairs(p).unwrap()
}

#[test]
fn point_mass_moments() {
    for n in 0..20 {
        assert_eq!(AtomicMeasure::dirac(1.0).moment(n).unwrap(), (1.0, 0.0));
        assert_eq!(AtomicMeasure::dirac(4.0).moment(n).unwrap(), (4f64.powi(n as i32), 0.0));
    }
}

#[test]
fn asc_first_moment_is_one_plus_a() {
    let m = asc_beta_measure(0.5, 0.25, 40).unwrap();
    let (v, e) = m.moment(1).unwrap();
    assert!((v - 1.5).abs() <= 1e-10 + e);
}

#[test]
fn pushforward_examples() {
    let h = Homothety::new(2.0, 1.0).unwrap();
    let m = AtomicMeasure::dirac(3.0).pushforward(&h).unwrap();
    assert_eq!(m.atoms(), &[Atom { location: 8.0, mass: 1.0 }]);
    let m = measure(&[(1.0, 0.3), (2.0, 0.7)]);
    assert_eq!(m.pushforward(&Homothety::identity()).unwrap(), m);
    // ψ_{1/a,a}(θ) = 1 + θ/a
    let th = 2.5;
    let a = 0.4;
    let p = AtomicMeasure::dirac(th).pushforward(&Homothety::new(1.0 / a, a).unwrap()).unwrap();
    assert_relative_eq!(p.inf_support().unwrap(), 1.0 + th / a, max_relative = 1e-15);
}

#[test]
fn remove_and_scale_examples() {
    let m = measure(&[(1.0, 0.3), (2.0, 0.7)]);
    assert_eq!(m.remove_atoms(&[1.0]).unwrap().atoms(), &[Atom { location: 2.0, mass: 0.7 }]);
    assert_eq!(m.remove_atoms(&[]).unwrap(), m);
    assert!(m.remove_atoms(&[1.0000001]).is_err());
    let s = AtomicMeasure::dirac(1.0).scale_mass(2.0);
    assert_eq!(s.atoms(), &[Atom { location: 1.0, mass: 2.0 }]);
}

#[test]
fn hankel_examples() {
    let g = MomentSequence::exact((0..=8).map(|n| 4f64.powi(n)).collect());
    assert_eq!(hankel_report(&g, 1e-9, Precision::High).verdict, HankelVerdict::StieltjesConsistent);

    let r = hankel_report(&MomentSequence::exact(vec![1.0, 2.0, 3.0]), 1e-9, Precision::Double);
    assert_eq!(r.verdict, HankelVerdict::NotHamburger);
    assert_eq!(r.failing_order, Some(1));
    assert_relative_eq!(r.orders[1].det_base, -1.0, max_relative = 1e-12);

    let half = MomentSequence::exact((0..=8).map(|n| 0.5f64.powi(n)).collect());
    assert_eq!(hankel_report(&half, 1e-9, Precision::High).verdict, HankelVerdict::StieltjesConsistent);
    assert!(!shift_dominance(&half, 1e-9, Precision::High).passes);
}

#[test]
fn shift_dominance_examples() {
    let two = MomentSequence::exact((0..=10).map(|n| 2f64.powi(n)).collect());
    assert!(shift_dominance(&two, 1e-9, Precision::High).passes);
    let half = MomentSequence::exact((0..=10).map(|n| 0.5f64.powi(n)).collect());
    let sd = shift_dominance(&half, 1e-9, Precision::High);
    assert_eq!(sd.failure, Some(("difference".into(), 0)));
    let mix = MomentSequence::exact((0..=10).map(|n| 0.5 * (0.5f64.powi(n) + 2f64.powi(n))).collect());
    let sd = shift_dominance(&mix, 1e-9, Precision::High);
    assert_eq!(sd.failure, Some(("difference".into(), 1)));
    // Δγ = (0.25, 0.875, 1.9375, …)
    assert!((sd.failing_determinant.unwrap() - (0.25 * 1.9375 - 0.875 * 0.875)).abs() < 1e-14);
}

#[test]
fn transform_examples() {
    let ones = MomentSequence::exact(vec![1.0; 8]);
    let id = transform_t(&ones, &Homothety::identity(), Direction::Forward);
    assert_eq!(id.values, ones.values);
    let t = transform_t(&ones, &Homothety::new(2.0, 1.0).unwrap(), Direction::Forward);
    for (n, v) in t.values.iter().enumerate() {
        assert_eq!(*v, 4f64.powi(n as i32));
    }
}

#[test]
fn carleman_examples() {
    let ones = carleman_diagnostic(&MomentSequence::exact(vec![1.0; 40])).unwrap();
    assert_eq!(ones.growth_class, GrowthClass::Diverging);
    for (k, s) in ones.partial_sums.iter().enumerate() {
        assert_relative_eq!(*s, (k + 1) as f64, max_relative = 1e-14);
    }
    // ln (2n)! for n ≤ 200
    let mut logs = vec![0.0];
    let mut acc = 0.0f64;
    for n in 1..=200usize {
        acc += ((2 * n - 1) as f64).ln() + ((2 * n) as f64).ln();
        logs.push(acc);
    }
    assert_eq!(carleman_diagnostic_log(&logs).growth_class, GrowthClass::Diverging);
    let sq: Vec<f64> = (0..=60).map(|n| (n * n) as f64).collect();
    let c = carleman_diagnostic_log(&sq);
    assert_eq!(c.growth_class, GrowthClass::Converging);
    // tail terms e^{−n/2}
    let last = c.partial_sums[59] - c.partial_sums[58];
    assert_relative_eq!(last, (-30.0f64).exp(), max_relative = 1e-9);
}

#[test]
fn taso_examples() {
    let s = 3.0;
    assert_eq!(taso_classify(s, &Homothety::new(1.0, -s).unwrap()), TasoVerdict::SDeterminate);
    assert_eq!(taso_classify(s, &Homothety::new(1.0, -2.0 * s).unwrap()), TasoVerdict::NotStieltjes);
    assert_eq!(taso_classify(s, &Homothety::new(2.0, 0.0).unwrap()), TasoVerdict::SIndeterminate);
    assert_eq!(serde_json::to_string(&TasoVerdict::SIndeterminate).unwrap(), "\"S-Indeterminate\"");
}

#[test]
fn atoms_below_one_fail_shift_dominance() {
    let m = measure(&[(0.6, 0.05), (1.5, 0.5), (3.0, 0.45)]);
    let g = MomentSequence::from_measure(&m, 16).unwrap();
    let sd = shift_dominance(&g, 1e-9, Precision::High);
    assert!(!sd.passes);
    assert!(sd.failure.unwrap().1 <= 8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pushforward_round_trip(p in pairs(), th in 0.1f64..5.0, a in 0.0f64..3.0) {
        let m = measure(&p);
        let h = Homothety::new(th, a).unwrap();
        let back = m.pushforward(&h).unwrap().pushforward(&h.inverse()).unwrap();
        for (x, y) in m.atoms().iter().zip(back.atoms()) {
            prop_assert!((x.location - y.location).abs() <= 1e-12 * (1.0 + x.location));
            prop_assert_eq!(x.mass, y.mass);
        }
    }

    #[test]
    fn pushforward_group_law(p in pairs(), t1 in 0.1f64..4.0, a1 in 0.0f64..3.0, t2 in 0.1f64..4.0, a2 in 0.0f64..3.0) {
        let m = measure(&p);
        let inner = Homothety::new(t1, a1).unwrap();
        let outer = Homothety::new(t2, a2).unwrap();
        let two = m.pushforward(&inner).unwrap().pushforward(&outer).unwrap();
        let one = m.pushforward(&outer.compose(&inner)).unwrap();
        for (x, y) in two.atoms().iter().zip(one.atoms()) {
            prop_assert!((x.location - y.location).abs() <= 1e-12 * (1.0 + x.location));
        }
    }

    #[test]
    fn inf_support_follows_pushforward(p in pairs(), th in 0.1f64..5.0, a in 0.0f64..3.0) {
        let m = measure(&p);
        let h = Homothety::new(th, a).unwrap();
        prop_assert_eq!(m.pushforward(&h).unwrap().inf_support().unwrap(), h.apply(m.inf_support().unwrap()));
    }

    #[test]
    fn scale_mass_is_linear(p in pairs(), r in 0.01f64..100.0) {
        let m = measure(&p);
        let s = m.scale_mass(r);
        prop_assert!((s.total_mass() - r * m.total_mass()).abs() <= 1e-12 * r * m.total_mass());
    }

    #[test]
    fn moments_nondecreasing_above_one(p in prop::collection::vec((1.0f64..10.0, 0.01f64..2.0), 1..6)) {
        let m = measure(&p);
        let mut prev = 0.0;
        for n in 0..15 {
            let (v, _) = m.moment(n).unwrap();
            prop_assert!(v >= prev * (1.0 - 1e-15));
            prev = v;
        }
    }

    #[test]
    fn transform_commutes_with_pushforward(p in pairs(), th in 0.2f64..3.0, a in 0.0f64..2.0) {
        let m = measure(&p);
        let h = Homothety::new(th, a).unwrap();
        let g = MomentSequence::from_measure(&m, 10).unwrap();
        let t = transform_t(&g.to_hp(), &h, Direction::Forward).to_f64();
        let direct = MomentSequence::<f64>::from_measure(&m.pushforward(&h).unwrap(), 10).unwrap();
        for n in 0..=10 {
            prop_assert!((t.values[n] - direct.values[n]).abs() <= 1e-10 * direct.values[n].abs().max(1e-300));
        }
    }

    #[test]
    fn transform_inverse_and_group(vals in prop::collection::vec(0.1f64..10.0, 12),
                                   t1 in 0.2f64..3.0, a1 in -2.0f64..2.0, t2 in 0.2f64..3.0, a2 in -2.0f64..2.0) {
        let g = MomentSequence::exact(vals).to_hp();
        let h1 = Homothety::new(t1, a1).unwrap();
        let h2 = Homothety::new(t2, a2).unwrap();
        let back = transform_t(&transform_t(&g, &h1, Direction::Forward), &h1, Direction::Inverse).to_f64();
        let g64 = g.to_f64();
        for n in 0..12 {
            prop_assert!((back.values[n] - g64.values[n]).abs() <= 1e-12 * g64.values[n].abs());
        }
        let two = transform_t(&transform_t(&g, &h1, Direction::Forward), &h2, Direction::Forward).to_f64();
        let one = transform_t(&g, &h2.compose(&h1), Direction::Forward).to_f64();
        for n in 0..12 {
            let scale = one.values[n].abs().max(1.0);
            prop_assert!((two.values[n] - one.values[n]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn measures_on_one_plus_pass_shift_dominance(p in prop::collection::vec((1.0f64..6.0, 0.05f64..2.0), 1..5)) {
        let m = measure(&p);
        let g = MomentSequence::from_measure(&m, 12).unwrap();
        prop_assert!(shift_dominance(&g, 1e-9, Precision::High).passes);
    }

    #[test]
    fn k_atom_hankel_is_singular_beyond_k(p in prop::collection::vec((0.5f64..4.0, 0.1f64..1.0), 1..4)) {
        let m = measure(&p);
        let k = m.len();
        let g = MomentSequence::from_measure(&m, 2 * k + 4).unwrap();
        let r = hankel_report(&g, 1e-9, Precision::High);
        prop_assert_eq!(r.verdict, HankelVerdict::StieltjesConsistent);
        for o in r.orders.iter().filter(|o| o.order >= k) {
            prop_assert!(o.min_eig_base.abs() <= 1e-9 * g.values[2 * o.order].abs().max(1.0));
        }
    }
}
