use adaptci::modulus::*;
use adaptci::par::Execution;
use adaptci::seqmodel::{Grid, LinearFunctional};
use adaptci::spaces::*;
use adaptci::Error;

/// Growth allowance of a class away from the center on one side, and
/// whether the class is monotone (nonincreasing).
fn growth(desc: &ClassDescriptor, t: f64) -> (f64, bool) {
    let dist = t.abs();
    match *desc {
        ClassDescriptor::Lipschitz { beta, m, a, b } => {
            assert!(a <= -0.5 && b >= 0.5);
            (m * dist.powf(beta), false)
        }
        ClassDescriptor::MonotoneLipschitz { beta, m } => (m * dist.powf(beta), true),
        ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, monotone } => {
            if t <= 0.0 {
                (m1 * dist.powf(beta1), monotone)
            } else {
                (m2 * dist.powf(beta2), monotone)
            }
        }
        _ => panic!("no profile for {desc:?}"),
    }
}

/// Minimal-norm difference `g - f` reaching height `h0` at the center,
/// for `f in F`, `g in G`, on an odd grid.
fn profile(f: &ClassDescriptor, g: &ClassDescriptor, grid: &Grid, h0: f64) -> Vec<f64> {
    grid.t
        .iter()
        .map(|&t| {
            let (gf, mf) = growth(f, t);
            let (gg, mg) = growth(g, t);
            let drop = if t < 0.0 {
                gf + if mg { 0.0 } else { gg }
            } else if t > 0.0 {
                gg + if mf { 0.0 } else { gf }
            } else {
                0.0
            };
            (h0 - drop).max(0.0)
        })
        .collect()
}

/// Modulus from the profile: bisection on the height until the embedded
/// norm equals `eps`.
fn profile_modulus(f: &ClassDescriptor, g: &ClassDescriptor, d: usize, eps: f64) -> f64 {
    let grid = Grid::new(d).unwrap();
    assert_eq!(d % 2, 1);
    let norm = |h0: f64| (grid.delta * profile(f, g, &grid, h0).iter().map(|v| v * v).sum::<f64>()).sqrt();
    let (mut lo, mut hi) = (0.0, 1.0);
    while norm(hi) < eps {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(mid) < eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn lip(beta: f64, m: f64) -> ClassDescriptor {
    ClassDescriptor::Lipschitz { beta, m, a: -0.5, b: 0.5 }
}

fn mono(beta: f64, m: f64) -> ClassDescriptor {
    ClassDescriptor::MonotoneLipschitz { beta, m }
}

fn pw(beta1: f64, m1: f64, beta2: f64, m2: f64, monotone: bool) -> ClassDescriptor {
    ClassDescriptor::PiecewiseLipschitz { beta1, m1, beta2, m2, monotone }
}

fn omega(f: &Class, g: &Class, eps: f64) -> ModulusResult {
    let w = LinearFunctional::point_evaluation(f.grid());
    ordered_modulus(f, g, &w, eps, &ModulusOptions::default()).unwrap()
}

#[test]
fn ordered_modulus_matches_profile_oracle() {
    let d = 101;
    let pairs = [
        (lip(1.0, 1.0), lip(1.0, 1.0)),
        (lip(0.5, 1.0), lip(1.0, 2.0)),
        (mono(1.0, 1.0), mono(0.5, 1.0)),
        (mono(1.0, 1.0), lip(1.0, 1.0)),
        (lip(1.0, 1.0), mono(1.0, 2.0)),
        (pw(1.0, 1.0, 0.5, 2.0, false), lip(1.0, 1.0)),
        (pw(0.8, 1.0, 0.4, 1.0, true), pw(0.6, 1.0, 0.4, 1.0, true)),
    ];
    for (fd, gd) in pairs {
        let f = Class::new(fd.clone(), d).unwrap();
        let g = Class::new(gd.clone(), d).unwrap();
        for eps in [0.03, 0.1] {
            let r = omega(&f, &g, eps);
            let want = profile_modulus(&fd, &gd, d, eps);
            assert!(r.converged);
            assert!((r.value - want).abs() <= 1e-4 * want, "{fd:?} vs {gd:?} at {eps}: {} vs {want}", r.value);
        }
    }
}

#[test]
fn optimizers_are_feasible() {
    let d = 101;
    let f = Class::new(mono(0.6, 2.0), d).unwrap();
    let g = Class::new(lip(1.0, 1.0), d).unwrap();
    let eps = 0.05;
    let r = omega(&f, &g, eps);
    assert!(f.contains(&r.f_star, 1e-7));
    assert!(g.contains(&r.g_star, 1e-7));
    assert!(r.separation() <= eps * (1.0 + 1e-7));
    let w = LinearFunctional::point_evaluation(f.grid());
    let gap = w.evaluate(&r.g_star).unwrap() - w.evaluate(&r.f_star).unwrap();
    assert!((gap - r.value).abs() <= 1e-7 * r.value);
}

#[test]
fn lipschitz_closed_form_on_fine_grids() {
    for d in [201, 401] {
        for m in [1.0, 4.0] {
            let c = make_lipschitz(1.0, m, -0.5, 0.5, d).unwrap();
            for eps in [0.02, 0.05] {
                let num = omega(&c, &c, eps).value;
                let cf = lipschitz_modulus_closed_form(1.0, m, eps).unwrap();
                assert!((num - cf).abs() <= 0.01 * cf, "d {d} M {m} eps {eps}: {num} vs {cf}");
            }
        }
    }
}

/// Continuum modulus between a decreasing Lipschitz class and the
/// decreasing functions: the profile `(H - M t^beta)_+` on one side only.
fn continuum_decreasing_modulus(beta: f64, m: f64, eps: f64) -> f64 {
    let c = (beta + 1.0) * (2.0 * beta + 1.0) / (2.0 * beta * beta);
    (c * m.powf(1.0 / beta) * eps * eps).powf(beta / (2.0 * beta + 1.0))
}

#[test]
fn decreasing_class_against_monotone_follows_the_continuum_profile() {
    let d = 401;
    let mono_all = Class::new(ClassDescriptor::Monotone, d).unwrap();
    for (beta, m, eps) in [(1.0, 1.0, 0.05), (0.5, 1.0, 0.1), (0.75, 2.0, 0.1)] {
        let c = make_monotone_lipschitz(beta, m, d).unwrap();
        let w = LinearFunctional::point_evaluation(c.grid());
        let num = between_modulus(&c, &mono_all, &w, eps, &ModulusOptions::default()).unwrap().value;
        let want = continuum_decreasing_modulus(beta, m, eps);
        assert!((num - want).abs() <= 0.01 * want, "beta {beta}: {num} vs {want}");
    }
    // the closed form agrees at beta = 1
    let a = continuum_decreasing_modulus(1.0, 2.0, 0.1);
    assert!((a - lipschitz_modulus_closed_form(1.0, 2.0, 0.1).unwrap()).abs() < 1e-12);
    // and falls short below it: 6^{1/4} against sqrt(2) at beta = 1/2
    let b = continuum_decreasing_modulus(0.5, 1.0, 0.1) / lipschitz_modulus_closed_form(0.5, 1.0, 0.1).unwrap();
    assert!((b - 6f64.powf(0.25) / 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn closed_form_domain() {
    assert!(matches!(lipschitz_modulus_closed_form(1.0, 0.1, 1.0), Err(Error::Domain(_))));
    assert!(lipschitz_modulus_closed_form(0.0, 1.0, 0.1).is_err());
    assert!(lipschitz_modulus_closed_form(1.0, 1.0, -0.1).is_err());
    let v = lipschitz_modulus_closed_form(1.0, 1.0, 0.1).unwrap();
    assert!((v - (3.0f64 * 0.01).cbrt()).abs() < 1e-14);
}

#[test]
fn sparse_moduli_are_exact() {
    let d = 16;
    let w = LinearFunctional::sum(d).unwrap();
    let cases: [(&[usize], &[usize]); 4] = [(&[0], &[0]), (&[0, 1], &[1, 2, 3]), (&[4, 5], &[10, 11]), (&[2], &[0, 1, 2])];
    for (i, j) in cases {
        let a = make_sparse_subspace(i, d).unwrap();
        let b = make_sparse_subspace(j, d).unwrap();
        for eps in [0.1, 0.7] {
            let num = ordered_modulus(&a, &b, &w, eps, &ModulusOptions::default()).unwrap().value;
            let want = sparse_modulus(i, j, eps).unwrap();
            assert!((num - want).abs() <= 1e-7 * want, "{i:?} {j:?}: {num} vs {want}");
        }
    }
    let p = LinearFunctional::coordinate(d, 0).unwrap();
    assert!(matches!(sparse_modulus_for(&p, &[0], &[1], 0.1), Err(Error::Unsupported(_))));
    assert_eq!(sparse_modulus_for(&w, &[0], &[1], 0.5).unwrap(), 2f64.sqrt() * 0.5);
}

#[test]
fn modulus_is_increasing_concave_and_subhomogeneous() {
    let d = 101;
    let f = Class::new(lip(1.0, 1.0), d).unwrap();
    let g = Class::new(mono(0.5, 1.0), d).unwrap();
    let w = LinearFunctional::point_evaluation(f.grid());
    let opts = ModulusOptions::default();
    let at = |e: f64| between_modulus(&f, &g, &w, e, &opts).unwrap().value;
    let grid = [0.01, 0.02, 0.04, 0.08, 0.16];
    let vals: Vec<f64> = grid.iter().map(|&e| at(e)).collect();
    for k in 0..vals.len() - 1 {
        assert!(vals[k + 1] >= vals[k] - 1e-9);
    }
    for (a, b) in [(0.01, 0.05), (0.02, 0.16)] {
        let (va, vb, vm) = (at(a), at(b), at(0.5 * (a + b)));
        assert!(vm >= 0.5 * (va + vb) - 1e-7, "concavity at {a}, {b}");
    }
    for e in [0.01, 0.04] {
        let base = at(e);
        for b in [1.5, 2.0, 4.0] {
            assert!(at(b * e) <= scaled_modulus_bound(base, b).unwrap() + 1e-7);
        }
    }
    assert!(scaled_modulus_bound(1.0, 0.5).is_err());
}

#[test]
fn between_modulus_is_symmetric() {
    let d = 101;
    let f = Class::new(mono(1.0, 1.0), d).unwrap();
    let g = Class::new(lip(0.5, 2.0), d).unwrap();
    let w = LinearFunctional::point_evaluation(f.grid());
    let opts = ModulusOptions::default();
    let fg = between_modulus(&f, &g, &w, 0.05, &opts).unwrap();
    let gf = between_modulus(&g, &f, &w, 0.05, &opts).unwrap();
    assert!((fg.value - gf.value).abs() <= 1e-7 * fg.value);
    let o1 = ordered_modulus(&f, &g, &w, 0.05, &opts).unwrap().value;
    let o2 = ordered_modulus(&g, &f, &w, 0.05, &opts).unwrap().value;
    assert!((fg.value - o1.max(o2)).abs() <= 1e-9 * fg.value);
}

#[test]
fn larger_sets_have_larger_moduli() {
    let d = 101;
    let small = Class::new(lip(1.0, 1.0), d).unwrap();
    let big = Class::new(lip(1.0, 3.0), d).unwrap();
    let other = Class::new(mono(0.5, 1.0), d).unwrap();
    for eps in [0.02, 0.08] {
        assert!(omega(&small, &other, eps).value <= omega(&big, &other, eps).value + 1e-9);
        assert!(omega(&other, &small, eps).value <= omega(&other, &big, eps).value + 1e-9);
    }
    let w = LinearFunctional::point_evaluation(small.grid());
    let opts = ModulusOptions::default();
    let u = between_modulus_union(&small, &[&other, &big], &w, 0.05, &opts).unwrap();
    let b = between_modulus(&small, &big, &w, 0.05, &opts).unwrap();
    let o = between_modulus(&small, &other, &w, 0.05, &opts).unwrap();
    assert!((u.value - b.value.max(o.value)).abs() < 1e-12);
}

#[test]
fn epsilon_and_dimension_are_validated() {
    let f = Class::new(lip(1.0, 1.0), 11).unwrap();
    let w = LinearFunctional::point_evaluation(f.grid());
    let opts = ModulusOptions::default();
    assert!(ordered_modulus(&f, &f, &w, 0.0, &opts).is_err());
    assert!(ordered_modulus(&f, &f, &w, f64::NAN, &opts).is_err());
    let g = Class::new(lip(1.0, 1.0), 13).unwrap();
    assert!(ordered_modulus(&f, &g, &w, 0.1, &opts).is_err());
}

#[test]
fn exponent_fit_recovers_power_laws() {
    let eps = [0.01, 0.02, 0.05, 0.1, 0.2];
    for q in [0.5, 2.0 / 3.0, 1.0] {
        let v: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(q)).collect();
        assert!((fit_exponent(&eps, &v).unwrap() - q).abs() < 1e-12);
    }
    assert!(fit_exponent(&[0.1], &[1.0]).is_none());
}

#[test]
fn curves_are_schedule_independent_and_fit_the_rate() {
    let d = 201;
    let f = Class::new(lip(1.0, 1.0), d).unwrap();
    let w = LinearFunctional::point_evaluation(f.grid());
    let eps: Vec<f64> = (0..5).map(|k| 0.01 * 1.5f64.powi(k)).collect();
    let opts = ModulusOptions::default();
    let par = modulus_curve(&f, &f, &w, &eps, &opts, Execution::Parallel).unwrap();
    let seq = modulus_curve(&f, &f, &w, &eps, &opts, Execution::Sequential).unwrap();
    assert_eq!(par.values, seq.values);
    assert!((par.fitted_exponent.unwrap() - 2.0 / 3.0).abs() < 0.02);
    assert!(modulus_curve(&f, &f, &w, &eps[..3], &opts, Execution::Sequential).is_err());
    let bad = [0.1, 0.05, 0.2, 0.3];
    assert!(modulus_curve(&f, &f, &w, &bad, &opts, Execution::Sequential).is_err());
}

#[test]
fn adaptation_cases_on_synthetic_exponents() {
    use AdaptationCase::*;
    let c = |q1, q2, q12| classify_adaptation_case(q1, q2, q12, 0.0).unwrap();
    assert_eq!(c(0.5, 0.5, 0.5), Classification { case: Case1, strongly_adaptive: true });
    assert_eq!(c(2.0 / 3.0, 0.5, 0.7).case, Case1);
    assert_eq!(c(2.0 / 3.0, 0.5, 0.5), Classification { case: Case2, strongly_adaptive: false });
    assert_eq!(c(2.0 / 3.0, 0.5, 0.6).case, Case3);
    assert_eq!(c(2.0 / 3.0, 0.5, 0.4).case, Case4);
    // slack absorbs fitting noise
    assert_eq!(classify_adaptation_case(0.667, 0.513, 0.539, 0.04).unwrap().case, Case2);
    assert!(classify_adaptation_case(0.4, 0.5, 0.5, 0.0).is_err());
    assert!(classify_adaptation_case(1.5, 0.5, 0.5, 0.0).is_err());
    assert!(classify_adaptation_case(0.5, 0.0, 0.5, 0.0).is_err());
}

#[test]
fn projection_route_agrees_with_interior_point_route() {
    let d = 41;
    let opts = ModulusOptions::default();
    let pairs = [(lip(1.0, 1.0), lip(1.0, 4.0)), (mono(1.0, 1.0), lip(0.5, 1.0)), (pw(1.0, 1.0, 0.5, 2.0, true), mono(1.0, 2.0))];
    for (a, b) in pairs {
        let f = Class::new(a.clone(), d).unwrap();
        let g = Class::new(b.clone(), d).unwrap();
        let w = LinearFunctional::point_evaluation(f.grid());
        for eps in [0.05, 0.2] {
            let ipm = ordered_modulus(&f, &g, &w, eps, &opts).unwrap();
            let proj = ordered_modulus_projection(&f, &g, &w, eps, &opts).unwrap();
            assert_eq!(ipm.method, Method::Numeric);
            assert_eq!(proj.method, Method::Projection);
            assert!((ipm.value - proj.value).abs() <= 1e-4 * ipm.value, "{a:?} {b:?} {eps}: {} vs {}", ipm.value, proj.value);
        }
    }
    let a = make_sparse_subspace(&[0, 1], 8).unwrap();
    let b = make_sparse_subspace(&[1, 5], 8).unwrap();
    let w = LinearFunctional::sum(8).unwrap();
    let proj = ordered_modulus_projection(&a, &b, &w, 0.3, &opts).unwrap();
    assert!((proj.value - 3f64.sqrt() * 0.3).abs() <= 1e-6);
}
