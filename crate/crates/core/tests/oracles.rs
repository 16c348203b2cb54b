use std::f64::consts::PI;

use cbf_core::bernstein::{
    classify_triplet, conjugate, BernsteinSpec, ClassifyOptions, LevyDensity, Moment, PowerExpTerm,
};
use cbf_core::grid::{Grid, GridFunction};
use cbf_core::kernels::{make_pair, KernelPair, PairOptions};
use cbf_core::ops::{apply_k, censored_derivative, kernel_j_density, rl_derivative, rl_integral, verify_sonine};
use cbf_core::quadrature::{integrate, integrate_to_infinity};
use cbf_core::sim::{
    estimate_censored_functional, estimate_first_cycle, estimate_lifetime_mean, estimate_potential,
    ks_critical_1pct, ks_two_sample, rng_stream, sample_chains, sample_stable_subordinator_value,
    simulate_paths, SimConfig,
};
use cbf_core::solver::Solver;
use statrs::function::gamma::gamma;

fn stable_triplet(alpha: f64) -> BernsteinSpec {
    BernsteinSpec::ExplicitTriplet {
        a: 0.0,
        b: 0.0,
        levy_density: LevyDensity::PowerExp {
            terms: vec![PowerExpTerm {
                weight: alpha / gamma(1.0 - alpha),
                index: alpha,
                rate: 0.0,
            }],
        },
    }
}

fn custom_triplet(a: f64, b: f64, m: fn(f64) -> f64) -> BernsteinSpec {
    BernsteinSpec::ExplicitTriplet {
        a,
        b,
        levy_density: LevyDensity::Custom(std::sync::Arc::new(m)),
    }
}

fn stable_half() -> KernelPair {
    KernelPair::stable(0.5).unwrap()
}

fn at_end(g: &GridFunction) -> f64 {
    *g.values().last().unwrap()
}

#[test]
fn stable_exponent_values() {
    let f = BernsteinSpec::stable(0.5);
    assert_eq!(f.eval_f(4.0).unwrap(), 2.0);
    assert!(f.eval_f(1e-300).unwrap() < 1e-140);
    assert!(f.eval_f(0.0).is_err());
    assert!(f.eval_f(-1.0).is_err());
}

#[test]
fn explicit_triplet_reproduces_closed_form() {
    let v = stable_triplet(0.5).eval_f(4.0).unwrap();
    assert!((v - 2.0).abs() < 1e-9, "{v}");
    let v = custom_triplet(0.0, 0.0, |t| 0.5 / PI.sqrt() * t.powf(-1.5)).eval_f(4.0).unwrap();
    assert!((v - 2.0).abs() < 1e-8, "{v}");
}

#[test]
fn conjugate_values() {
    assert!((conjugate(&BernsteinSpec::stable(0.5)).eval(4.0).unwrap() - 2.0).abs() < 1e-15);
    assert!((conjugate(&BernsteinSpec::stable(0.25)).eval(16.0).unwrap() - 8.0).abs() < 1e-13);
    assert!(conjugate(&BernsteinSpec::stable(0.5)).eval(0.0).is_err());
}

#[test]
fn classification_examples() {
    let opts = ClassifyOptions::default();
    let c = classify_triplet(&BernsteinSpec::stable(0.3), &opts).unwrap();
    assert_eq!((c.row, c.a_star, c.b_star), (1, 0.0, 0.0));
    assert_eq!(c.m0, Moment::Infinite);

    let c = classify_triplet(&custom_triplet(2.0, 0.0, |t| (-t).exp()), &opts).unwrap();
    assert_eq!(c.row, 5);
    assert!((c.b_star - 1.0 / 3.0).abs() < 1e-10, "{}", c.b_star);

    let c = classify_triplet(&custom_triplet(0.0, 1.0, |t| (-2.0 * t).exp()), &opts).unwrap();
    assert_eq!(c.row, 7);
    // m1 = 1/4
    assert!((c.a_star - 0.8).abs() < 1e-10, "{}", c.a_star);
}

#[test]
fn borderline_density_is_indeterminate_or_overridden() {
    // t^{-1}·(1 + 1/ln t)-type corrections near the critical power
    let spec = custom_triplet(0.0, 0.0, |t| t.powf(-1.985) * (-t).exp());
    let err = classify_triplet(&spec, &ClassifyOptions::default()).unwrap_err();
    assert!(err.to_string().contains("indeterminate") || err.to_string().contains("too close"), "{err}");
    let opts = ClassifyOptions {
        m1_override: Some(Moment::Infinite),
        ..ClassifyOptions::default()
    };
    let c = classify_triplet(&spec, &opts).unwrap();
    assert_eq!(c.row, 1);
}

#[test]
fn contraction_constants() {
    assert!((stable_half().q() - 0.6366197724).abs() < 1e-10);
    assert!((KernelPair::stable(0.25).unwrap().q() - 0.9003163162).abs() < 1e-10);
    let tempered = make_pair(&BernsteinSpec::tempered_stable(0.4, 2.0), &PairOptions::default()).unwrap();
    assert!(tempered.q() <= 1.0);
}

#[test]
fn stable_half_pair_is_symmetric() {
    let p = stable_half();
    for x in [1e-4, 0.1, 1.0, 7.0] {
        assert!((p.tail(x) - p.density(x)).abs() <= 1e-15 * p.tail(x));
        assert!((p.tail(x) - 1.0 / (PI * x).sqrt()).abs() <= 1e-14 * p.tail(x));
    }
    let quad = integrate(|s| p.density(s), 0.0, 1.0, 1e-13, 1e-13, 100_000).unwrap();
    assert!((p.potential(1.0) - 1.1283791671).abs() < 1e-10);
    assert!((quad.value - p.potential(1.0)).abs() < 1e-9);
}

#[test]
fn tempered_density_has_the_right_transform() {
    let spec = BernsteinSpec::tempered_stable(0.5, 1.0);
    let p = make_pair(&spec, &PairOptions::default()).unwrap();
    // L(k; 3) = 1/f(3) = 1
    let v = integrate_to_infinity(|x| (-3.0 * x).exp() * p.density(x), 0.0, 1e-11, 1e-11, 400_000).unwrap();
    assert!((v.value - 1.0).abs() < 1e-7, "{}", v.value);
    // L(μ̄; 3) = f(3)/3
    let v = integrate_to_infinity(|x| (-3.0 * x).exp() * p.tail(x), 0.0, 1e-11, 1e-11, 400_000).unwrap();
    assert!((v.value - 1.0 / 3.0).abs() < 1e-7, "{}", v.value);
}

#[test]
fn sonine_examples() {
    assert!(verify_sonine(&stable_half(), 1.0, 2048).unwrap() <= 1e-6);
    assert!(verify_sonine(&KernelPair::stable(0.75).unwrap(), 2.0, 2048).unwrap() <= 1e-6);
    let bad = KernelPair::mismatched(&stable_half(), &KernelPair::stable(0.75).unwrap()).unwrap();
    assert!(verify_sonine(&bad, 1.0, 512).unwrap() > 0.1);
}

#[test]
fn mismatched_deviation_matches_direct_quadrature() {
    let (a, b) = (stable_half(), KernelPair::stable(0.75).unwrap());
    let bad = KernelPair::mismatched(&a, &b).unwrap();
    let direct = integrate(|r| a.tail(r) * b.density(1.0 - r), 0.0, 1.0, 1e-12, 1e-12, 400_000).unwrap();
    let grid = Grid::new(1.0, 256).unwrap();
    let one = GridFunction::constant(grid, 1.0);
    // (μ̄ ∗ k)(1) is the unnormalized first row of K applied to 1
    let conv = at_end(&apply_k(&bad, &one));
    assert!((conv - direct.value).abs() < 1e-6, "{conv} vs {}", direct.value);
}

#[test]
fn riemann_liouville_integral_examples() {
    let p = stable_half();
    let grid = Grid::new(1.0, 256).unwrap();
    let one = rl_integral(&p, &GridFunction::constant(grid, 1.0));
    assert!((at_end(&one) - 1.1283791671).abs() < 1e-9);
    assert_eq!(rl_integral(&p, &GridFunction::zeros(grid)).sup_norm(), 0.0);
    let s = rl_integral(&p, &GridFunction::from_fn(grid, |s| s).unwrap());
    assert!((at_end(&s) - 0.7522527781).abs() < 1e-7, "{}", at_end(&s));
}

#[test]
fn derivative_examples() {
    let p = stable_half();
    let grid = Grid::new(1.0, 512).unwrap();
    let c = 2.5;
    let d = rl_derivative(&p, &GridFunction::constant(grid, c)).unwrap();
    for i in 4..=grid.n {
        let want = c * p.tail(grid.node(i));
        assert!((d.values()[i] - want).abs() < 1e-8 * want, "{i}");
    }
    let pot = GridFunction::from_fn(grid, |x| p.potential(x)).unwrap();
    let d = rl_derivative(&p, &pot).unwrap();
    assert!(d.values()[4..].iter().all(|v| (v - 1.0).abs() < 1e-8));
}

#[test]
fn censored_derivative_examples() {
    let p = stable_half();
    let grid = Grid::new(1.0, 512).unwrap();
    let pot = GridFunction::from_fn(grid, |x| p.potential(x)).unwrap();
    let d = censored_derivative(&p, &pot).unwrap();
    assert!((at_end(&d) - (1.0 - 2.0 / PI)).abs() < 1e-8, "{}", at_end(&d));
    let d = censored_derivative(&p, &GridFunction::constant(grid, -3.0)).unwrap();
    assert!(d.interior_sup_norm() <= 1e-8);
}

#[test]
fn k_operator_examples() {
    let p = stable_half();
    let grid = Grid::new(1.0, 256).unwrap();
    let one = apply_k(&p, &GridFunction::constant(grid, 1.0));
    assert!(one.values()[1..].iter().all(|v| (v - 1.0).abs() < 1e-10));
    let pot = GridFunction::from_fn(grid, |x| p.potential(x)).unwrap();
    let kp = apply_k(&p, &pot);
    for i in 1..=grid.n {
        assert!(kp.values()[i] <= p.q() * pot.values()[i] * (1.0 + 1e-10), "{i}");
    }
}

#[test]
fn first_kernel_is_arcsine() {
    let p = stable_half();
    let k = kernel_j_density(&p, 1, 1.0, 1023).unwrap();
    // compare away from the endpoint singularities
    for (r, v) in k.r.iter().zip(&k.density) {
        if (0.1..=0.9).contains(r) {
            let want = 1.0 / (PI * (r * (1.0 - r)).sqrt());
            assert!((v - want).abs() < 2e-3 * want, "{r}: {v} vs {want}");
        }
    }
}

#[test]
fn second_kernel_matches_double_quadrature() {
    let p = stable_half();
    let k = kernel_j_density(&p, 2, 1.0, 2047).unwrap();
    for r in [0.25, 0.5, 0.75] {
        // ∫_r^1 k_1(1,s) k_1(s,r) ds with s = r + (1-r) sin²θ
        let brute = integrate(
            |t| {
                let s = r + (1.0 - r) * t.sin().powi(2);
                2.0 / (PI * PI * (s * r).sqrt())
            },
            0.0,
            PI / 2.0,
            1e-13,
            1e-12,
            100_000,
        )
        .unwrap();
        let i = k.r.iter().position(|&x| (x - r).abs() < 1e-12).unwrap();
        assert!((k.density[i] - brute.value).abs() < 5e-3 * brute.value, "{r}: {} vs {}", k.density[i], brute.value);
    }
}

#[test]
fn series_solver_examples() {
    let p = stable_half();
    let grid = Grid::new(1.0, 256).unwrap();
    let solver = Solver::new(&p, grid).unwrap();
    let zero = GridFunction::zeros(grid);
    assert_eq!(solver.censored_integral(&zero, 1e-10).unwrap().value.sup_norm(), 0.0);
    let s = solver.solve_censored_ivp(&zero, 3.0, 1e-10).unwrap();
    assert!(s.phi.values().iter().all(|&v| v == 3.0));
    let s = solver.solve_resolvent(0.0, 2.0, 1e-10).unwrap();
    assert!(s.phi.values().iter().all(|&v| v == 2.0));

    let one = GridFunction::constant(grid, 1.0);
    let hom = solver.solve_resolvent(-1.0, 1.0, 1e-10).unwrap();
    let inhom = solver.solve_resolvent_inhom(-1.0, 1.0, &zero, 1e-10).unwrap();
    assert!((&hom.phi - &inhom.phi).sup_norm() < 1e-10);
    let ivp = solver.solve_censored_ivp(&one, 1.0, 1e-10).unwrap();
    let inhom = solver.solve_resolvent_inhom(0.0, 1.0, &one, 1e-10).unwrap();
    assert!((&ivp.phi - &inhom.phi).sup_norm() < 1e-10);
    assert!(hom.phi.values().iter().all(|&v| v > 0.0 && v <= 1.0));
}

#[test]
fn censored_integral_of_one_has_closed_form() {
    let p = stable_half();
    let grid = Grid::new(1.0, 128).unwrap();
    let v = Solver::new(&p, grid)
        .unwrap()
        .censored_integral(&GridFunction::constant(grid, 1.0), 1e-12)
        .unwrap()
        .value;
    for (i, x) in grid.nodes().enumerate() {
        let want = p.potential(x) / (1.0 - p.q());
        assert!((v.values()[i] - want).abs() < 1e-9, "{i}");
    }
    assert!((at_end(&v) - 3.1052299528).abs() < 1e-9);
}

#[test]
fn lifetime_laplace_examples() {
    let p = stable_half();
    let solver = Solver::new(&p, Grid::new(1.0, 512).unwrap()).unwrap();
    assert_eq!(solver.lifetime_laplace(0.0, 0.7, 1e-10).unwrap(), 1.0);
    let near = solver.lifetime_laplace(-1.0, 1e-6, 1e-10).unwrap();
    assert!((near - 1.0).abs() < 1e-2, "{near}");
    let v = solver.lifetime_laplace(-1.0, 1.0, 1e-10).unwrap();
    assert!((v - 0.08136).abs() < 1e-4, "{v}");
}

#[test]
fn sampler_scales_by_time() {
    // S_t has the law of t^{1/α} S_1; with α = 1/2, S_4 ~ 16 S_1
    let n = 5000;
    let s4: Vec<f64> = (0..n).map(|i| sample_stable_subordinator_value(0.5, 4.0, &mut rng_stream(21, i))).collect();
    let s1: Vec<f64> = (0..n)
        .map(|i| 16.0 * sample_stable_subordinator_value(0.5, 1.0, &mut rng_stream(22, i)))
        .collect();
    let d = ks_two_sample(&s4, &s1);
    assert!(d < ks_critical_1pct(n as usize, Some(n as usize)), "{d}");
}

#[test]
fn first_cycle_mean_is_the_potential() {
    let config = SimConfig::stable(0.5, 1.0, 1e-3, 10_000, 2);
    let est = estimate_first_cycle(&config).unwrap();
    assert!(est.agrees(1.1283791671, 3.0), "{est:?}");
}

#[test]
fn potential_estimator_examples() {
    let config = SimConfig::stable(0.5, 1.0, 1e-3, 10_000, 4);
    let one = estimate_potential(&config, &|_| 1.0).unwrap();
    assert!(one.agrees(1.1283791671, 3.0), "{one:?}");
    let zero = estimate_potential(&config, &|_| 0.0).unwrap();
    assert_eq!(zero.estimate, 0.0);
    let s = estimate_potential(&config, &|s| s).unwrap();
    assert!(s.agrees(0.7522527781, 3.0), "{s:?}");
}

#[test]
fn censored_functional_examples() {
    let config = SimConfig::stable(0.5, 1.0, 1e-3, 4000, 6);
    let zero = estimate_censored_functional(&config, &|_| 0.0, 0.0).unwrap();
    assert_eq!(zero.estimate, 0.0);
    assert!(estimate_censored_functional(&config, &|_| 1.0, 0.5).is_err());

    let p = stable_half();
    let grid = Grid::new(1.0, 1024).unwrap();
    let target = at_end(
        &Solver::new(&p, grid)
            .unwrap()
            .solve_resolvent_inhom(-1.0, 0.0, &GridFunction::constant(grid, 1.0), 1e-10)
            .unwrap()
            .phi,
    );
    let est = estimate_censored_functional(&config, &|_| 1.0, -1.0).unwrap();
    assert!(est.agrees(target, 3.0), "{target} vs {est:?}");
}

#[test]
fn chain_lifetime_mean_grows_with_start_and_vanishes_at_zero() {
    let p = stable_half();
    let one = estimate_lifetime_mean(&p, 1.0, 4000, 8).unwrap();
    let two = estimate_lifetime_mean(&p, 2.0, 4000, 8).unwrap();
    assert!(two.estimate > one.estimate);
    let tiny = estimate_lifetime_mean(&p, 1e-8, 1000, 8).unwrap();
    assert!(tiny.estimate < 1e-3, "{tiny:?}");
}

#[test]
fn path_and_chain_undershoots_share_a_law() {
    let n = 4000;
    let config = SimConfig::stable(0.5, 1.0, 1e-3, n, 9);
    let paths = simulate_paths(&config).unwrap();
    let from_paths: Vec<f64> = paths.iter().map(|p| p.undershoots[0]).collect();
    let chains = sample_chains(&stable_half(), 1.0, n, 10, 0.5).unwrap();
    let from_chains: Vec<f64> = chains.iter().map(|c| c.levels[1]).collect();
    let d = ks_two_sample(&from_paths, &from_chains);
    assert!(d < ks_critical_1pct(n, Some(n)), "{d}");
}
