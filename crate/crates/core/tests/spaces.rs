use adaptci::seqmodel::Grid;
use adaptci::spaces::*;
use adaptci::Error;
use proptest::prelude::*;

const D: usize = 24;

fn catalog() -> Vec<Class> {
    vec![
        make_lipschitz(1.0, 1.0, -0.5, 0.5, D).unwrap(),
        make_lipschitz(0.5, 2.0, -0.5, 0.5, D).unwrap(),
        make_lipschitz(1.0, 3.0, -0.25, 0.25, D).unwrap(),
        make_monotone_lipschitz(1.0, 1.0, D).unwrap(),
        make_monotone_lipschitz(0.6, 2.0, D).unwrap(),
        make_piecewise_lipschitz(1.0, 1.0, 0.5, 2.0, D, false).unwrap(),
        make_piecewise_lipschitz(0.8, 1.0, 0.4, 1.0, D, true).unwrap(),
        Class::new(ClassDescriptor::Monotone, D).unwrap(),
        make_sparse_subspace(&[1, 4, 9], D).unwrap(),
        Class::new(ClassDescriptor::Box { tau: 0.3 }, D).unwrap(),
        Class::new(ClassDescriptor::FullSpace, D).unwrap(),
    ]
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, D)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_is_feasible_and_idempotent(x in vector()) {
        for c in catalog() {
            let p = c.project(&x);
            prop_assert!(c.contains(&p, 1e-6), "{} infeasible", c.desc().label());
            let pp = c.project(&p);
            prop_assert!(dist(&p, &pp) < 1e-6, "{} not idempotent", c.desc().label());
        }
    }

    #[test]
    fn projection_is_nonexpansive(x in vector(), y in vector()) {
        for c in catalog() {
            let (px, py) = (c.project(&x), c.project(&y));
            prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-6, "{}", c.desc().label());
        }
    }

    #[test]
    fn projection_is_optimal_against_feasible_points(x in vector(), z in vector()) {
        // variational inequality <x - p, q - p> <= 0 for feasible q
        for c in catalog() {
            let p = c.project(&x);
            let q = c.project(&z);
            let ip: f64 = x.iter().zip(&p).zip(&q).map(|((x, p), q)| (x - p) * (q - p)).sum();
            prop_assert!(ip <= 1e-5 * (1.0 + dist(&x, &p) * dist(&q, &p)), "{} ip {ip}", c.desc().label());
        }
    }

    #[test]
    fn feasible_points_are_fixed(x in vector()) {
        for c in catalog() {
            let p = c.project(&x);
            if c.contains(&p, 0.0) {
                prop_assert!(dist(&c.project(&p), &p) < 1e-9);
            }
        }
    }

    #[test]
    fn adjacent_constraints_suffice_for_beta_one(x in prop::collection::vec(-0.2f64..0.2, D)) {
        let c = make_lipschitz(1.0, 1.0, -0.5, 0.5, D).unwrap();
        prop_assert_eq!(c.contains(&x, 1e-12), c.all_pairs_violation(&x) <= 1e-12);
        let p = c.project(&x);
        prop_assert!(c.all_pairs_violation(&p) <= 1e-6);
    }

    #[test]
    fn sparse_projection_satisfies_pythagoras(x in vector()) {
        let support = [0usize, 5, 6, 20];
        let c = make_sparse_subspace(&support, D).unwrap();
        let p = c.project(&x);
        let off: f64 = (0..D).filter(|i| !support.contains(i)).map(|i| x[i] * x[i]).sum();
        let r2: f64 = x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
        prop_assert_eq!(r2, off);
        for &i in &support {
            prop_assert_eq!(p[i], x[i]);
        }
    }
}

#[test]
fn constants_belong_to_every_lipschitz_class() {
    for c in catalog().into_iter().take(7) {
        for v in [-2.0, 0.0, 1.5] {
            let g = Grid::new(D).unwrap();
            let x = g.embed(|_| v);
            assert!(c.contains(&x, 1e-12), "{}", c.desc().label());
        }
    }
}

#[test]
fn linear_ramp_boundary() {
    let g = Grid::new(D).unwrap();
    let c = make_lipschitz(1.0, 2.0, -0.5, 0.5, D).unwrap();
    assert!(c.contains(&g.embed(|t| 2.0 * t), 1e-12));
    let steep = g.embed(|t| 2.1 * t);
    assert!(!c.contains(&steep, 1e-9));
    let p = c.project(&steep);
    assert!(c.contains(&p, 1e-9));
    assert!(c.all_pairs_violation(&p) < c.all_pairs_violation(&steep));
}

#[test]
fn restricted_interval_only_constrains_inside() {
    let g = Grid::new(D).unwrap();
    let c = make_lipschitz(1.0, 1.0, -0.25, 0.25, D).unwrap();
    // steep outside [-1/4, 1/4], flat inside
    let x = g.embed(|t| if t.abs() > 0.25 { 50.0 * t } else { 0.0 });
    assert!(c.contains(&x, 1e-12));
}

#[test]
fn monotone_classes() {
    let g = Grid::new(D).unwrap();
    let c = make_monotone_lipschitz(1.0, 1.0, D).unwrap();
    assert!(c.contains(&g.embed(|t| -t), 1e-12));
    assert!(!c.contains(&g.embed(|t| 0.5 * t), 1e-9));
    let p = c.project(&g.embed(|t| 0.5 * t));
    assert!(p.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn piecewise_constraint_locality() {
    let g = Grid::new(D).unwrap();
    let c = make_piecewise_lipschitz(1.0, 1.0, 1.0, 1.0, D, false).unwrap();
    assert!(c.contains(&[0.0; D], 0.0));
    // satisfies the left condition, violates the right one
    let x = g.embed(|t| if t <= 0.0 { 0.5 * t } else { 10.0 * t });
    assert!(!c.contains(&x, 1e-9));
    let y = g.embed(|t| if t <= 0.0 { -10.0 * t } else { 0.0 });
    assert!(!c.contains(&y, 1e-9));
}

#[test]
fn sparse_subspace_examples() {
    let c = make_sparse_subspace(&[0, 1], 10).unwrap();
    let p = c.project(&[1.0; 10]);
    assert_eq!(p, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(c.project(&p), p);
    assert!(make_sparse_subspace(&[], 10).is_err());
    assert!(make_sparse_subspace(&[10], 10).is_err());
}

#[test]
fn descriptor_validation() {
    assert!(make_lipschitz(0.0, 1.0, -0.5, 0.5, D).is_err());
    assert!(make_lipschitz(1.2, 1.0, -0.5, 0.5, D).is_err());
    assert!(make_lipschitz(1.0, -1.0, -0.5, 0.5, D).is_err());
    assert!(make_lipschitz(1.0, 1.0, 0.3, 0.1, D).is_err());
    assert!(make_lipschitz(1.0, 1.0, -0.6, 0.5, D).is_err());
    assert!(make_lipschitz(1.0, 1.0, -0.5, 0.5, 1).is_err());
    assert!(Class::new(ClassDescriptor::Box { tau: 0.0 }, D).is_err());
}

#[test]
fn descriptor_serde_round_trip() {
    for c in catalog() {
        let s = serde_json::to_string(c.desc()).unwrap();
        let back: ClassDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(&back, c.desc());
    }
    assert!(serde_json::from_str::<ClassDescriptor>(r#"{"kind":"box","tau":1.0,"extra":1}"#).is_err());
}

#[test]
fn hull_table() {
    let a = make_monotone_lipschitz(1.0, 1.0, D).unwrap();
    let b = make_monotone_lipschitz(1.0, 8.0, D).unwrap();
    let h = hull(&Family::Nested(vec![a.clone(), b.clone()])).unwrap();
    assert_eq!(h.desc(), b.desc());
    // wrong declared order is rejected
    assert!(hull(&Family::Nested(vec![b.clone(), a.clone()])).is_err());

    let h = hull(&Family::SparseUnion { d: 12, m: 2 }).unwrap();
    assert_eq!(h.desc(), &ClassDescriptor::FullSpace);

    let s1 = make_sparse_subspace(&[0, 1], D).unwrap();
    let s2 = make_sparse_subspace(&[1, 2], D).unwrap();
    let h = hull(&Family::Union(vec![s1, s2])).unwrap();
    assert_eq!(h.desc(), &ClassDescriptor::SparseSubspace { support: vec![0, 1, 2] });

    let h = hull(&Family::Union(vec![a.clone(), b.clone()])).unwrap();
    assert_eq!(h.desc(), b.desc());

    let lip = make_lipschitz(1.0, 1.0, -0.5, 0.5, D).unwrap();
    let odd = make_monotone_lipschitz(0.5, 1.0, D).unwrap();
    match hull(&Family::Union(vec![lip, odd])) {
        Err(Error::Unsupported(_)) => {}
        other => panic!("expected unsupported, got {other:?}"),
    }
}

#[test]
fn spot_check_agrees_with_parameters() {
    let a = make_lipschitz(1.0, 1.0, -0.5, 0.5, D).unwrap();
    let b = make_lipschitz(1.0, 2.0, -0.5, 0.5, D).unwrap();
    assert!(spot_check_subset(&a, &b, 20, 1));
    assert!(!spot_check_subset(&b, &a, 20, 1));
}
