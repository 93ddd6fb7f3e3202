use adaptci::seqmodel::*;
use approx::assert_relative_eq;
use std::collections::HashSet;

#[test]
fn sigma_matches_sample_size() {
    for n in [1.0, 16.0, 100.0, 12345.6] {
        let m = SequenceModel::new(5, n).unwrap();
        assert!((m.sigma * n.sqrt() - 1.0).abs() < 1e-12);
    }
    assert!(SequenceModel::new(0, 10.0).is_err());
    assert!(SequenceModel::new(3, 0.0).is_err());
    assert!(SequenceModel::new(3, -1.0).is_err());
}

#[test]
fn grid_embedding_layout() {
    let g = Grid::new(4).unwrap();
    assert_relative_eq!(g.delta, 0.25);
    assert_eq!(g.t, vec![-0.375, -0.125, 0.125, 0.375]);
    // equidistant points: lower index wins
    assert_eq!(g.i0, 1);
    let g = Grid::new(5).unwrap();
    assert_eq!(g.i0, 2);
    assert_relative_eq!(g.t[2], 0.0, epsilon = 1e-15);
    let x = g.embed(|t| 1.0 + t);
    let back = g.function_values(&x);
    for (v, t) in back.iter().zip(&g.t) {
        assert_relative_eq!(*v, 1.0 + t, epsilon = 1e-12);
    }
}

#[test]
fn point_evaluation_recovers_function_value() {
    let g = Grid::new(201).unwrap();
    let w = LinearFunctional::point_evaluation(&g);
    let x = g.embed(|t| (3.0 * t).cos());
    assert_relative_eq!(w.evaluate(&x).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn evaluate_examples() {
    let w = LinearFunctional::new(vec![1.0, 1.0]).unwrap();
    assert_eq!(evaluate(&w, &[2.0, 3.0]).unwrap(), 5.0);
    let e1 = LinearFunctional::coordinate(4, 0).unwrap();
    assert_eq!(e1.evaluate(&[7.5, -1.0, 2.0, 9.0]).unwrap(), 7.5);
    let s = LinearFunctional::sum(100).unwrap();
    let mut f = vec![0.0; 100];
    f[0] = 0.5;
    f[1] = 0.5;
    assert_eq!(s.evaluate(&f).unwrap(), 1.0);
    assert!(s.evaluate(&[1.0]).is_err());
    assert!(LinearFunctional::new(vec![0.0, 0.0]).is_err());
    assert!(LinearFunctional::new(vec![]).is_err());
    assert!(LinearFunctional::new(vec![1.0, f64::NAN]).is_err());
}

#[test]
fn quantiles_match_reference_values() {
    // tabulated standard normal quantiles
    let table = [(0.05, 1.6448536269514722), (0.025, 1.959963984540054), (0.005, 2.5758293035489004), (0.1, 1.2815515655446004)];
    for (p, z) in table {
        assert!((upper_quantile(p) - z).abs() < 1e-10, "p = {p}");
    }
    let lvl = ConfidenceLevel::new(0.05).unwrap();
    assert!(lvl.z_alpha_half > lvl.z_alpha && lvl.z_alpha > 0.0);
    assert!((phi_cdf(lvl.z_alpha) - 0.95).abs() < 1e-10);
    assert!(ConfidenceLevel::new(0.5).is_err());
    assert!(ConfidenceLevel::new(0.0).is_err());
    let split = lvl.split(10);
    assert_relative_eq!(split.alpha, 0.005);
    assert!((split.z_alpha_half - upper_quantile(0.0025)).abs() < 1e-12);
}

#[test]
fn phi_sf_is_accurate_in_the_tail() {
    // P(Z > 10) = 7.6198530241605e-24
    assert_relative_eq!(phi_sf(10.0), 7.619853024160527e-24, max_relative = 1e-8);
    assert_relative_eq!(phi_sf(0.0), 0.5, epsilon = 1e-15);
}

#[test]
fn zero_noise_sampling_is_identity() {
    let m = SequenceModel::noiseless(3).unwrap();
    let y = sample(&m, &[1.0, 2.0, 3.0], 7).unwrap();
    assert_eq!(y.y, vec![1.0, 2.0, 3.0]);
    assert_eq!(y.seed, 7);
    assert!(sample(&m, &[1.0], 7).is_err());
}

#[test]
fn sampling_is_deterministic() {
    let m = SequenceModel::new(6, 4.0).unwrap();
    let f = [0.0, 1.0, -1.0, 2.0, 0.5, 0.0];
    assert_eq!(sample(&m, &f, 99).unwrap(), sample(&m, &f, 99).unwrap());
    assert_ne!(sample(&m, &f, 99).unwrap().y, sample(&m, &f, 100).unwrap().y);
}

#[test]
fn noise_moments_over_many_seeds() {
    let m = SequenceModel::new(1, 1.0).unwrap();
    let r = 100_000;
    let draws: Vec<f64> = (0..r).map(|i| sample(&m, &[0.0], derive_replicate_seed(2024, i)).unwrap().y[0]).collect();
    let mean = draws.iter().sum::<f64>() / r as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r as f64 - 1.0);
    assert!(mean.abs() < 3.0 / (r as f64).sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "var {var}");
    // standard error of the sample variance is about sqrt(2 / R)
    assert!((var - 1.0).abs() < 3.0 * (2.0 / r as f64).sqrt(), "var {var}");
}

#[test]
fn replicate_seeds_do_not_collide() {
    let seeds: HashSet<u64> = (0..10_000).map(|i| derive_replicate_seed(42, i)).collect();
    assert_eq!(seeds.len(), 10_000);
    let mut state = 0x1234_5678_u64;
    for _ in 0..10_000 {
        state = derive_replicate_seed(state, 17);
        assert_ne!(derive_replicate_seed(state, 0), derive_replicate_seed(state, 1));
    }
    assert_eq!(derive_replicate_seed(5, 3), derive_replicate_seed(5, 3));
}
