use adaptci::estimators::EstimatorOptions;
use adaptci::intervals::*;
use adaptci::par::Execution;
use adaptci::seqmodel::*;
use adaptci::spaces::*;
use proptest::prelude::*;

fn prov() -> Provenance {
    Provenance { construction: "test".into(), classes: vec![], xi: vec![], alpha: 0.05 }
}

#[test]
fn two_point_examples() {
    let lvl = ConfidenceLevel::new(0.05).unwrap();
    let ci = two_point_interval(0.0, 1.0, 1.0, &lvl, 0.0).unwrap();
    assert_eq!((ci.lo, ci.hi), (0.0, 1.0));
    let ci = two_point_interval(0.0, 1.0, 1.0, &lvl, -1.0).unwrap();
    assert_eq!((ci.lo, ci.hi), (0.0, 0.0));
    let ci = two_point_interval(0.0, 1.0, 1.0, &lvl, 2.0).unwrap();
    assert_eq!((ci.lo, ci.hi), (1.0, 1.0));
    let ci = two_point_interval(0.0, 10.0, 1.0, &lvl, 4.0).unwrap();
    assert_eq!((ci.lo, ci.hi, ci.length()), (0.0, 0.0, 0.0));
    assert!(two_point_interval(1.0, 1.0, 1.0, &lvl, 0.0).is_err());
    assert!(two_point_interval(0.0, 1.0, 0.0, &lvl, 0.0).is_err());
}

#[test]
fn two_point_bound_examples() {
    let lvl = ConfidenceLevel::new(0.05).unwrap();
    let b = two_point_lower_bound(0.0, 1.0, 1.0, &lvl).unwrap();
    assert!((b - (0.95 - phi_cdf(1.0 - lvl.z_alpha))).abs() < 1e-12);
    assert!((b - 0.690489).abs() < 1e-6 && (b - 0.69054).abs() < 1e-4);
    assert!(two_point_lower_bound(0.0, 1e3, 1.0, &lvl).unwrap() < 1e-9);
    let near_half = ConfidenceLevel::new(0.4999).unwrap();
    for gap in [0.1, 1.0, 5.0] {
        assert!(two_point_lower_bound(0.0, gap, 1.0, &near_half).unwrap() >= 0.0);
    }
}

proptest! {
    #[test]
    fn two_point_endpoints_are_the_hypotheses(gap in 0.01f64..10.0, x in -5.0f64..15.0, alpha in 0.01f64..0.4) {
        let lvl = ConfidenceLevel::new(alpha).unwrap();
        let ci = two_point_interval(0.0, gap, 1.0, &lvl, x).unwrap();
        prop_assert!(ci.lo == 0.0 || ci.lo == gap);
        prop_assert!(ci.hi == 0.0 || ci.hi == gap);
        prop_assert!(ci.lo <= ci.hi);
    }

    #[test]
    fn subsequence_passes_the_exhaustive_check(steps in prop::collection::vec(0.0f64..3.0, 1..12)) {
        let mut xi = Vec::new();
        let mut v = 0.1;
        for s in steps {
            v += s;
            xi.push(v);
        }
        let idx = select_subsequence(&xi).unwrap();
        prop_assert!(subsequence_condition_holds(&xi, &idx));
        prop_assert_eq!(*idx.last().unwrap(), xi.len() - 1);
        // it is the only subsequence that does
        let k = xi.len();
        for mask in 1u32..(1 << k) {
            let cand: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            if subsequence_condition_holds(&xi, &cand) {
                prop_assert_eq!(&cand, &idx);
            }
        }
    }
}

#[test]
fn subsequence_examples() {
    assert_eq!(select_subsequence(&[1.0]).unwrap(), vec![0]);
    assert_eq!(select_subsequence(&[1.0, 2.0, 4.0]).unwrap(), vec![0, 1, 2]);
    assert_eq!(select_subsequence(&[1.0, 1.5, 3.0, 4.0, 8.0]).unwrap(), vec![1, 3, 4]);
    assert!(select_subsequence(&[]).is_err());
    assert!(select_subsequence(&[1.0, 0.5]).is_err());
    assert!(select_subsequence(&[0.0, 1.0]).is_err());
}

#[test]
fn nested_cij_examples() {
    let ci = nested_cij(1.0, 1.0, 0.5, 0.1);
    assert_eq!((ci.lo, ci.hi), (0.0, 2.0));
    let ci = nested_cij(1.0, 1.0, 0.5, 0.3);
    assert_eq!((ci.lo, ci.hi), (-0.5, 2.5));
    // positive part enters once the estimators disagree
    let ci = nested_cij(2.0, 1.0, 0.5, 0.1);
    assert_eq!((ci.lo, ci.hi), (-0.5, 3.5));
    let ci = nested_cij(1.0, 2.0, 0.5, 0.1);
    assert_eq!((ci.lo, ci.hi), (0.5, 2.5));
    assert_eq!(nested_multiplier(0.2), 2.0);
    assert_eq!(nested_multiplier(0.21), 3.0);
}

#[test]
fn interval_algebra() {
    let a = Interval::new(0.0, 2.0, prov());
    let b = Interval::new(1.0, 3.0, prov());
    let c = a.intersect(&b);
    assert_eq!((c.lo, c.hi, c.empty), (1.0, 2.0, false));
    let far = Interval::new(5.0, 6.0, prov());
    let e = a.intersect(&far);
    assert!(e.empty && e.lo <= e.hi && e.length() == 0.0);
    assert!(!e.contains(e.lo));
    assert!(e.intersect(&a).empty);
    let flipped = Interval::new(2.0, 1.0, prov());
    assert!(flipped.empty && flipped.lo == flipped.hi);
}

fn lip(m: f64, d: usize) -> Class {
    make_lipschitz(1.0, m, -0.5, 0.5, d).unwrap()
}

#[test]
fn single_class_constrained_interval_has_width_three_omega() {
    let d = 41;
    let f = lip(1.0, d);
    let w = LinearFunctional::point_evaluation(f.grid());
    let model = SequenceModel::new(d, 100.0).unwrap();
    let opts = EstimatorOptions::default();
    let mat = build_estimator_matrix(&[&f], &w, 0.1, &model, &opts, Execution::Sequential).unwrap();
    let y = sample(&model, &vec![0.0; d], 3).unwrap().y;
    let ci = build_constrained_interval(&mat, 0, &y).unwrap();
    let t = mat.get(0, 0).apply(&y);
    assert!((ci.lo - (t - 1.5 * mat.omega(0, 0))).abs() < 1e-12);
    assert!((ci.length() - 3.0 * mat.omega(0, 0)).abs() < 1e-12);
    // the general construction with k = 1 is the same interval
    let g = adaptive_general_interval(&mat, &y).unwrap();
    assert_eq!((g.lo, g.hi), (ci.lo, ci.hi));
    assert!(build_constrained_interval(&mat, 1, &y).is_err());

    // two copies of one class
    let mat2 = build_estimator_matrix(&[&f, &f], &w, 0.1, &model, &opts, Execution::Sequential).unwrap();
    let ci2 = build_constrained_interval(&mat2, 1, &y).unwrap();
    assert!((ci2.length() - 3.0 * mat2.omega(0, 0)).abs() < 1e-9);
}

#[test]
fn general_interval_lies_in_every_constrained_interval() {
    let d = 8;
    let w = LinearFunctional::sum(d).unwrap();
    let model = SequenceModel::new(d, 8.0).unwrap();
    let classes: Vec<Class> = (0..d).map(|i| make_sparse_subspace(&[i], d).unwrap()).collect();
    let refs: Vec<&dyn ConvexSetOracle> = classes.iter().map(|c| c as &dyn ConvexSetOracle).collect();
    let mat =
        build_estimator_matrix(&refs, &w, 0.1 / d as f64, &model, &EstimatorOptions::default(), Execution::Parallel)
            .unwrap();
    for seed in 0..20 {
        let mut f = vec![0.0; d];
        f[(seed % d as u64) as usize] = 1.5;
        let y = sample(&model, &f, seed).unwrap().y;
        let ci = adaptive_general_interval(&mat, &y).unwrap();
        for j in 0..d {
            let cj = build_constrained_interval(&mat, j, &y).unwrap();
            assert!(ci.empty || (cj.lo <= ci.lo + 1e-12 && ci.hi <= cj.hi + 1e-12));
        }
    }
}

#[test]
fn sparse_plan_agrees_with_the_general_construction() {
    let model_d = 6;
    let level = ConfidenceLevel::new(0.1).unwrap();
    let model = SequenceModel::new(model_d, 6.0).unwrap();
    let w = LinearFunctional::sum(model_d).unwrap();
    for m in [1, 2] {
        let supports = all_supports(model_d, m);
        let classes: Vec<Class> = supports.iter().map(|s| make_sparse_subspace(s, model_d).unwrap()).collect();
        let refs: Vec<&dyn ConvexSetOracle> = classes.iter().map(|c| c as &dyn ConvexSetOracle).collect();
        let plan = SparseUnionPlan::new(model_d, m, &level, &model).unwrap();
        assert_eq!(plan.k, supports.len());
        let mat = build_estimator_matrix(&refs, &w, plan.alpha, &model, &EstimatorOptions::default(), Execution::Parallel)
            .unwrap();
        for seed in 0..25 {
            let mut f = vec![0.0; model_d];
            f[(seed % 6) as usize] = 2.0;
            let y = sample(&model, &f, seed).unwrap().y;
            let a = plan.interval(&y).unwrap();
            let b = adaptive_general_interval(&mat, &y).unwrap();
            assert_eq!(a.empty, b.empty);
            if !a.empty {
                assert!((a.lo - b.lo).abs() < 1e-6 && (a.hi - b.hi).abs() < 1e-6, "m {m} seed {seed}: {a:?} vs {b:?}");
            }
        }
    }
}

#[test]
fn combinatorics() {
    assert_eq!(binomial(16, 1), Some(16));
    assert_eq!(binomial(100, 2), Some(4950));
    assert_eq!(binomial(3, 5), Some(0));
    let s = all_supports(5, 3);
    assert_eq!(s.len(), 10);
    assert_eq!(s[0], vec![0, 1, 2]);
    assert_eq!(s[9], vec![2, 3, 4]);
    let mut c = vec![3, 4];
    assert!(!next_combination(&mut c, 5));
}

#[test]
fn nested_family_equals_hull_family_for_nested_classes() {
    let d = 41;
    let classes = vec![lip(1.0, d), lip(2.0, d), lip(4.0, d)];
    let w = LinearFunctional::point_evaluation(classes[0].grid());
    let level = ConfidenceLevel::new(0.1).unwrap();
    let model = SequenceModel::new(d, 100.0).unwrap();
    let opts = EstimatorOptions::default();
    let fam = build_nested_family(&classes, &w, &level, &model, &opts, Execution::Parallel).unwrap();
    let hfam = build_hull_family(&classes, &w, &level, &model, &opts, Execution::Sequential).unwrap();
    assert_eq!(fam.xi, hfam.xi);
    assert!(fam.xi.windows(2).all(|p| p[0] <= p[1]));
    assert!(subsequence_condition_holds(&fam.xi, &fam.subsequence));
    let y = sample(&model, &classes[0].grid().embed(|t| 0.3 * t), 9).unwrap().y;
    let a = adaptive_nested_interval(&fam, &y).unwrap();
    let b = hull_nested_interval(&hfam, &y).unwrap();
    assert_eq!((a.lo, a.hi), (b.lo, b.hi));
    for &j in &fam.subsequence {
        assert!(a.length() <= build_nested_cij(&fam, j, &y).unwrap().length());
    }
    // the outermost interval pairs one estimator with itself: width 4 xi
    let last = build_nested_cij(&fam, 2, &y).unwrap();
    assert!((last.length() - 4.0 * fam.xi[2]).abs() < 1e-12);
    // wrong order is rejected
    let rev: Vec<Class> = classes.iter().rev().cloned().collect();
    assert!(build_nested_family(&rev, &w, &level, &model, &opts, Execution::Sequential).is_err());
}

#[test]
fn single_class_nested_interval() {
    let d = 21;
    let classes = vec![lip(1.0, d)];
    let w = LinearFunctional::point_evaluation(classes[0].grid());
    let level = ConfidenceLevel::new(0.05).unwrap();
    let model = SequenceModel::new(d, 50.0).unwrap();
    let fam = build_nested_family(&classes, &w, &level, &model, &EstimatorOptions::default(), Execution::Sequential)
        .unwrap();
    let y = sample(&model, &vec![0.0; d], 1).unwrap().y;
    let a = adaptive_nested_interval(&fam, &y).unwrap();
    let b = build_nested_cij(&fam, 0, &y).unwrap();
    assert_eq!((a.lo, a.hi), (b.lo, b.hi));
}

#[test]
fn sparse_two_class_constrained_interval_covers() {
    let d = 4;
    let w = LinearFunctional::sum(d).unwrap();
    let model = SequenceModel::new(d, 25.0).unwrap();
    let a = make_sparse_subspace(&[0, 1], d).unwrap();
    let b = make_sparse_subspace(&[1, 2], d).unwrap();
    let alpha = 0.1;
    let mat =
        build_estimator_matrix(&[&a, &b], &w, alpha, &model, &EstimatorOptions::default(), Execution::Sequential).unwrap();
    let reps = 4000u64;
    for (j, truth) in [(0usize, vec![0.7, -0.2, 0.0, 0.0]), (1, vec![0.0, 0.4, 0.9, 0.0])] {
        let tf = w.evaluate(&truth).unwrap();
        let hits = (0..reps)
            .filter(|&r| {
                let y = sample(&model, &truth, derive_replicate_seed(j as u64, r)).unwrap().y;
                build_constrained_interval(&mat, j, &y).unwrap().contains(tf)
            })
            .count();
        let cov = hits as f64 / reps as f64;
        let se = (alpha * (1.0 - alpha) / reps as f64).sqrt();
        assert!(cov >= 1.0 - alpha - 3.0 * se, "class {j}: {cov}");
    }
}
