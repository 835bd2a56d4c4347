use nalgebra::DMatrix;
use pfdesign::design::{sample_assignments, sigma_of_d, DesignMatrix, Dosage};
use pfdesign::estimation::truncated_ols;
use pfdesign::model::{fourier_transform_bruteforce, generate_model, BoundPolicy, IndicatorModel};
use pfdesign::optimize::{
    acquisition_objective, emulate_dosage, kl_divergence, min_eig_additive_uniform, Objective,
    TargetDistribution,
};
use pfdesign::SubsetIndex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn order() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=8).prop_flat_map(|p| (Just(p), 0..=p.min(3)))
}

fn dosage(p: usize) -> impl Strategy<Value = Dosage> {
    prop::collection::vec(0.0f64..=1.0, p).prop_map(|d| Dosage::new(d).unwrap())
}

proptest! {
    #[test]
    fn index_round_trips((p, k) in order()) {
        let idx = SubsetIndex::new(p, k).unwrap();
        for (j, s) in idx.iter() {
            prop_assert_eq!(idx.position(s), Some(j));
            prop_assert!(s.len() <= k);
        }
        prop_assert_eq!(idx.subset(0).len(), 0);
    }

    #[test]
    fn sigma_spectral_bounds(((p, k), d) in order().prop_flat_map(|(p, k)| ((Just(p), Just(k)), dosage(p)))) {
        let idx = SubsetIndex::new(p, k).unwrap();
        let sigma = sigma_of_d(&d, &idx).unwrap();
        prop_assert_eq!(sigma.trace(), idx.len() as f64);
        prop_assert_eq!(sigma.matrix(), &sigma.matrix().transpose());
        let spectrum = sigma.spectrum();
        prop_assert!(spectrum[0] >= -1e-10);
        prop_assert!(spectrum[0] <= 1.0 + 1e-10);
        if k >= 1 {
            let bound = d.as_slice().iter().map(|di| 1.0 - (2.0 * di - 1.0).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(spectrum[0] <= bound + 1e-8, "λ_min {} > {}", spectrum[0], bound);
        }
    }

    #[test]
    fn bruteforce_inverts_evaluation(p in 1usize..=8, seed in any::<u64>()) {
        let k = p.min(3);
        let m = generate_model(SubsetIndex::new(p, k).unwrap(), 0.0, BoundPolicy::Norm, seed).unwrap();
        let beta = fourier_transform_bruteforce(&m.truth_table().unwrap(), m.index()).unwrap();
        for (a, b) in beta.iter().zip(m.beta()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_conversion_preserves_values(
        (p, k) in (1usize..=6).prop_flat_map(|p| (Just(p), 0..=p)),
        seed in any::<u64>(),
    ) {
        let idx = SubsetIndex::new(p, k).unwrap();
        let alpha = generate_model(idx.clone(), 0.0, BoundPolicy::Norm, seed).unwrap().beta().to_vec();
        let indicator = IndicatorModel::new(idx.clone(), alpha).unwrap();
        let beta = indicator.alpha_to_beta();
        prop_assert_eq!(beta.len(), idx.len());
        let fourier = pfdesign::OutcomeModel::new(idx, beta, 0.0, 1e6).unwrap();
        for x in 0..1u64 << p {
            prop_assert!((indicator.eval_mask(x) - fourier.eval_mask(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_is_linear_in_outcomes(seed in any::<u64>(), column in 0usize..11, shift in -3.0f64..3.0) {
        let idx = SubsetIndex::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DesignMatrix::new(sample_assignments(&Dosage::half(4), 80, &mut rng), &idx).unwrap();
        let y: Vec<f64> = (0..80).map(|m| (m as f64 * 0.37).sin()).collect();
        let base = truncated_ols(x.features(), &y, 1e6, 1.0).unwrap();
        prop_assume!(base.branch == pfdesign::Branch::Ols);
        let moved: Vec<f64> = y.iter().enumerate().map(|(m, v)| v + shift * x.features()[(m, column)]).collect();
        let fit = truncated_ols(x.features(), &moved, 1e6, 1.0).unwrap();
        for j in 0..idx.len() {
            let expected = base.beta_hat[j] + if j == column { shift } else { 0.0 };
            prop_assert!((fit.beta_hat[j] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn half_uniquely_minimizes_passive_objective((p, k) in order(), d in prop::collection::vec(0.0f64..=1.0, 8)) {
        let idx = SubsetIndex::new(p, k).unwrap();
        let zero = DMatrix::zeros(idx.len(), idx.len());
        let d = Dosage::new(d[..p].to_vec()).unwrap();
        prop_assume!(d.linf_distance(&Dosage::half(p)) > 1e-3);
        prop_assume!(k >= 1);
        let at_half = acquisition_objective(&idx, &zero, &Dosage::half(p), Objective::EigenSum).unwrap();
        let elsewhere = acquisition_objective(&idx, &zero, &d, Objective::EigenSum).unwrap();
        prop_assert!((at_half - idx.len() as f64).abs() < 1e-9);
        prop_assert!(elsewhere > at_half);
    }

    #[test]
    fn uniform_budget_dosage_maximizes_min_eigenvalue(
        p in 2usize..=8,
        fraction in 0.05f64..1.0,
        raw in prop::collection::vec(0.0f64..=1.0, 8),
    ) {
        let budget = fraction * p as f64 / 2.0;
        // rescale a random point into the budget polytope
        let raw = &raw[..p];
        let total: f64 = raw.iter().sum();
        let scale = if total > budget { budget / total } else { 1.0 };
        let d = Dosage::new(raw.iter().map(|v| v * scale).collect()).unwrap();
        let idx = SubsetIndex::new(p, 1).unwrap();
        let lambda = sigma_of_d(&d, &idx).unwrap().spectrum()[0];
        prop_assert!(lambda <= min_eig_additive_uniform(p, budget).unwrap() + 1e-8);
    }

    #[test]
    fn marginal_matching_minimizes_kl(
        p in 1usize..=5,
        weights in prop::collection::vec(0.0f64..1.0, 32),
        d in prop::collection::vec(0.001f64..0.999, 5),
    ) {
        let weights = &weights[..1 << p];
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let q = TargetDistribution::new(p, weights.iter().map(|w| w / total).collect()).unwrap();
        let best = kl_divergence(&q, &emulate_dosage(&q)).unwrap();
        let other = kl_divergence(&q, &Dosage::new(d[..p].to_vec()).unwrap()).unwrap();
        prop_assert!(best >= 0.0);
        prop_assert!(best <= other + 1e-12);
    }
}
