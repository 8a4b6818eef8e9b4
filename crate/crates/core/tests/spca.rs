use robust_sparse::dualnorm::{matrix_dual_norm, MatrixBall};
use robust_sparse::spca::{spca_detect, spca_recover, weighted_second_moment, Verdict};
use robust_sparse::verify::nonrobust_spca_detect;
use robust_sparse::{generate_instance, Adversary, CorruptionSpec, ModelSpec, SolverConfig, WeightVector};

#[test]
fn uniform_objective_matches_nonrobust_statistic() {
    let cfg = SolverConfig::default();
    for seed in 0..3 {
        let s = generate_instance(&ModelSpec::Isotropic, 20, 3, 800, &CorruptionSpec::clean(seed)).unwrap();
        let robust = spca_detect(&s, 3, 0.5, 0.0, &cfg).unwrap();
        let plain = nonrobust_spca_detect(&s, 3, 0.25, &cfg).unwrap();
        assert!((robust.gamma - plain.statistic).abs() <= 1e-9, "{} vs {}", robust.gamma, plain.statistic);
        assert_eq!(robust.iterations, 0);
    }
}

#[test]
fn objective_scales_with_squared_sample_scale() {
    let c = 1.7;
    let s = generate_instance(&ModelSpec::spiked(0.8), 12, 2, 300, &CorruptionSpec::clean(3)).unwrap();
    let scaled = s.scaled(c);
    let w = WeightVector::uniform(300, 0.05).unwrap();
    let mut direct = weighted_second_moment(&scaled, &w).unwrap();
    let mut algebraic = weighted_second_moment(&s, &w).unwrap() * (c * c);
    assert!((&direct - &algebraic).amax() <= 1e-9 * direct.amax());
    for i in 0..12 {
        direct[(i, i)] -= 1.0;
        algebraic[(i, i)] -= 1.0;
    }
    let cfg = SolverConfig::default();
    let a = matrix_dual_norm(&direct, &MatrixBall::x_k(2), &cfg).unwrap();
    let b = matrix_dual_norm(&algebraic, &MatrixBall::x_k(2), &cfg).unwrap();
    assert!((a.value - b.value).abs() <= 1e-9, "{} vs {}", a.value, b.value);
}

#[test]
fn detect_brackets_are_ordered_and_verdict_consistent() {
    let cfg = SolverConfig::default();
    for (seed, model) in [(1, ModelSpec::Isotropic), (2, ModelSpec::spiked(1.0))] {
        let spec = CorruptionSpec::new(0.05, Adversary::SparseVarianceSpike { support: 3, scale: 10.0 }, seed);
        let s = generate_instance(&model, 20, 3, 1500, &spec).unwrap();
        let r = spca_detect(&s, 3, 1.0, 0.05, &cfg).unwrap();
        assert!(r.gamma_lower <= r.gamma_upper);
        assert!(r.gamma <= r.gamma_upper + 1e-12);
        match r.verdict {
            Verdict::Spiked => assert!(r.gamma_lower >= r.threshold),
            Verdict::Isotropic => assert!(r.gamma_upper < r.threshold),
            Verdict::Indeterminate => assert!(r.gamma_lower < r.threshold && r.gamma_upper >= r.threshold),
        }
        r.weights.check().unwrap();
    }
}

#[test]
fn recovery_output_invariants_and_determinism() {
    let cfg = SolverConfig { subgradient_iterations: 150, ..SolverConfig::default() };
    let spec = CorruptionSpec::new(0.02, Adversary::OrthogonalDecoy { rho_decoy: 1.0 }, 9);
    let s = generate_instance(&ModelSpec::spiked(1.0), 20, 3, 1500, &spec).unwrap();
    let a = spca_recover(&s, 3, 1.0, 0.02, &cfg).unwrap();
    let b = spca_recover(&s, 3, 1.0, 0.02, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let norm: f64 = a.v_hat.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() <= 1e-9);
    assert!(a.v_hat.iter().filter(|x| **x != 0.0).count() <= 3);
    assert!(a.objective <= a.initial_objective);
    assert!(MatrixBall::x_k(3).violation(&a.a_star).within(1e-6));
    a.w_star.check().unwrap();
}

#[test]
fn recovery_rejects_sparsity_that_does_not_fit() {
    let s = generate_instance(&ModelSpec::spiked(1.0), 6, 3, 100, &CorruptionSpec::clean(1)).unwrap();
    assert!(spca_recover(&s, 4, 1.0, 0.0, &SolverConfig::default()).is_err());
}

#[test]
fn spiked_rate_nondecreasing_in_rho() {
    // Small-scale version of the monotonicity property: 40 trials per ρ.
    let cfg = SolverConfig { subgradient_iterations: 200, subgradient_restarts: 1, ..SolverConfig::default() };
    let threshold_rho = 0.5;
    let rate = |rho: f64| {
        (0..40)
            .filter(|&t| {
                let spec = CorruptionSpec::new(0.02, Adversary::None, 1000 + t);
                let s = generate_instance(&ModelSpec::spiked(rho), 15, 3, 600, &spec).unwrap();
                spca_detect(&s, 3, threshold_rho, 0.02, &cfg).unwrap().verdict == Verdict::Spiked
            })
            .count()
    };
    let rates: Vec<usize> = [0.2, 0.5, 1.0].iter().map(|&r| rate(r)).collect();
    eprintln!("spiked counts per rho: {rates:?}");
    assert!(rates.windows(2).all(|w| w[0] <= w[1]), "{rates:?}");
}
