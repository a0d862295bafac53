//! Property tests for the statistics, compensation, calibration, and
//! regularization invariants.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use distcal::calibration::{calibrate_distribution, nearest_base_classes, CalibrationConfig};
use distcal::compensation::ema_update;
use distcal::distributions::{compute_class_stats, ClassStats, DistributionStore};
use distcal::linalg::Matrix;
use distcal::regularization::{reg_loss, RegPair};
use distcal::FeatureVector;

fn feat(values: &[f64]) -> FeatureVector {
    FeatureVector::new(values.to_vec()).unwrap()
}

/// Sample sets with a shared dimension: (d, n, flat values).
fn sample_sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 2usize..30).prop_flat_map(|(d, n)| {
        proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, d), n)
    })
}

fn as_features(samples: &[Vec<f64>]) -> Vec<FeatureVector> {
    samples.iter().map(|v| feat(v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_are_permutation_invariant(samples in sample_sets(), seed in 0u64..1000) {
        let original = compute_class_stats(&as_features(&samples), 0).unwrap();

        let mut shuffled = samples.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let permuted = compute_class_stats(&as_features(&shuffled), 0).unwrap();

        for (a, b) in permuted.mean.iter().zip(&original.mean) {
            prop_assert!(common::close_rel(*a, *b, 1e-9));
        }
        for (a, b) in permuted.covariance.iter().zip(original.covariance.iter()) {
            prop_assert!(common::close_rel(a, b, 1e-9));
        }
    }

    #[test]
    fn stats_translation_equivariance(samples in sample_sets(), shift in -100.0f64..100.0) {
        let d = samples[0].len();
        let t: Vec<f64> = (0..d).map(|j| shift + j as f64).collect();
        let original = compute_class_stats(&as_features(&samples), 0).unwrap();
        let moved: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| s.iter().zip(&t).map(|(v, tv)| v + tv).collect())
            .collect();
        let translated = compute_class_stats(&as_features(&moved), 0).unwrap();

        for j in 0..d {
            prop_assert!(common::close_rel(translated.mean[j], original.mean[j] + t[j], 1e-9));
        }
        for (a, b) in translated.covariance.iter().zip(original.covariance.iter()) {
            prop_assert!(common::close_rel(a, b, 1e-9));
        }
    }

    #[test]
    fn covariance_is_exactly_symmetric(samples in sample_sets()) {
        let stats = compute_class_stats(&as_features(&samples), 0).unwrap();
        prop_assert_eq!(stats.covariance.max_asymmetry(), 0.0);
    }

    #[test]
    fn stats_match_naive_oracle(samples in sample_sets()) {
        let stats = compute_class_stats(&as_features(&samples), 0).unwrap();
        let (mean, cov) = common::naive_mean_cov(&samples);
        for (a, b) in stats.mean.iter().zip(&mean) {
            prop_assert!(common::close_rel(*a, *b, 1e-10));
        }
        let d = mean.len();
        for i in 0..d {
            for j in 0..d {
                prop_assert!(common::close_rel(stats.covariance[(i, j)], cov[i][j], 1e-10));
            }
        }
    }

    #[test]
    fn ema_update_stays_in_the_coordinate_hull(
        samples in sample_sets(),
        xs in proptest::collection::vec(-80.0f64..80.0, 1..6),
        theta in 0.0f64..=1.0,
    ) {
        let d = samples[0].len();
        let x: Vec<f64> = (0..d).map(|j| xs[j % xs.len()]).collect();
        let stats = compute_class_stats(&as_features(&samples), 0).unwrap();
        let updated = ema_update(&stats, &feat(&x), theta).unwrap();
        for j in 0..d {
            let low = stats.mean[j].min(x[j]);
            let high = stats.mean[j].max(x[j]);
            let slack = 1e-12 * (stats.mean[j].abs() + x[j].abs() + 1.0);
            prop_assert!(updated.mean[j] >= low - slack && updated.mean[j] <= high + slack);
        }
        // Covariance is bitwise untouched.
        prop_assert_eq!(updated.covariance, stats.covariance);
        prop_assert_eq!(updated.count, stats.count);
    }

    #[test]
    fn reg_loss_nonnegative_and_zero_iff_identical(
        diffs in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..8),
    ) {
        let pairs: Vec<RegPair> = diffs
            .iter()
            .map(|d| RegPair::new(feat(d), feat(&[0.0, 0.0, 0.0])).unwrap())
            .collect();
        let loss = reg_loss(&pairs).unwrap();
        prop_assert!(loss >= 0.0);
        let identical = diffs.iter().all(|d| d.iter().all(|v| v.abs() <= 1e-12));
        prop_assert_eq!(loss <= 1e-12, identical);
    }

    #[test]
    fn reg_loss_swap_symmetry_and_scaling(
        diffs in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 4), 1..8),
        scale in 0.01f64..100.0,
    ) {
        let forward: Vec<RegPair> = diffs
            .iter()
            .map(|d| RegPair::new(feat(d), feat(&[0.0; 4])).unwrap())
            .collect();
        let swapped: Vec<RegPair> = diffs
            .iter()
            .map(|d| RegPair::new(feat(&[0.0; 4]), feat(d)).unwrap())
            .collect();
        prop_assert_eq!(reg_loss(&forward).unwrap(), reg_loss(&swapped).unwrap());

        let scaled: Vec<RegPair> = diffs
            .iter()
            .map(|d| {
                let s: Vec<f64> = d.iter().map(|v| v * scale).collect();
                RegPair::new(feat(&s), feat(&[0.0; 4])).unwrap()
            })
            .collect();
        let lhs = reg_loss(&scaled).unwrap();
        let rhs = scale * reg_loss(&forward).unwrap();
        prop_assert!(common::close_rel(lhs, rhs, 1e-12));
    }
}

fn store_from_means(means: &[Vec<f64>]) -> DistributionStore {
    let dim = means[0].len();
    let mut base = BTreeMap::new();
    for (i, mean) in means.iter().enumerate() {
        base.insert(
            i as u32,
            ClassStats {
                class_id: i as u32,
                count: 2,
                mean: mean.clone(),
                covariance: Matrix::identity(dim),
            },
        );
    }
    DistributionStore::from_parts(dim, base, BTreeMap::new()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_farther_class_never_changes_selection(
        means in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 2..8),
        x in proptest::collection::vec(-10.0f64..10.0, 3),
        k_raw in 1usize..4,
    ) {
        // The selection must already be full, or the new class fills a slot.
        let k = k_raw.min(means.len());
        let store = store_from_means(&means);
        let query = feat(&x);
        let before = nearest_base_classes(&query, &store, k).unwrap();

        // A new class strictly farther than every selected one.
        let max_selected = before.last().unwrap().1;
        let far: Vec<f64> = x.iter().map(|v| v + max_selected + 10.0).collect();
        let mut extended = means.clone();
        extended.push(far);
        let after = nearest_base_classes(&query, &store_from_means(&extended), k).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn literal_mean_is_translation_linear_given_fixed_neighbors(
        means in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 2..8),
        x in proptest::collection::vec(-10.0f64..10.0, 3),
        t in proptest::collection::vec(-0.01f64..0.01, 3),
    ) {
        let store = store_from_means(&means);
        let cfg = CalibrationConfig { k: 2, ..CalibrationConfig::default() };
        let query = feat(&x);
        let shifted = feat(&x.iter().zip(&t).map(|(a, b)| a + b).collect::<Vec<f64>>());

        let neighbors_a = nearest_base_classes(&query, &store, cfg.k).unwrap();
        let neighbors_b = nearest_base_classes(&shifted, &store, cfg.k).unwrap();
        let same_set: bool = neighbors_a.iter().map(|(id, _)| id).eq(neighbors_b.iter().map(|(id, _)| id));
        prop_assume!(same_set);

        let dist_a = calibrate_distribution(&query, &store, &cfg).unwrap();
        let dist_b = calibrate_distribution(&shifted, &store, &cfg).unwrap();
        for j in 0..3 {
            prop_assert!((dist_b.mean[j] - (dist_a.mean[j] + t[j])).abs() < 1e-12);
        }
        // Covariance depends only on the neighbor set.
        prop_assert_eq!(dist_a.covariance, dist_b.covariance);
    }

    #[test]
    fn oversized_k_equals_full_k_exactly(
        means in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 2..8),
        x in proptest::collection::vec(-10.0f64..10.0, 3),
        extra in 1usize..10,
    ) {
        let store = store_from_means(&means);
        let query = feat(&x);
        let full = CalibrationConfig { k: means.len(), ..CalibrationConfig::default() };
        let clamped = CalibrationConfig { k: means.len() + extra, ..CalibrationConfig::default() };
        let a = calibrate_distribution(&query, &store, &full).unwrap();
        let b = calibrate_distribution(&query, &store, &clamped).unwrap();
        prop_assert_eq!(&a.mean, &b.mean);
        prop_assert_eq!(&a.covariance, &b.covariance);
        prop_assert_eq!(&a.source_classes, &b.source_classes);
        prop_assert!(b.clamped && !a.clamped);
    }
}

mod harness_properties {
    use distcal::harness::{
        augment_support, build_base_store, evaluate_named, generate_world, sample_episode,
        EpisodeContext, EvalSettings, MethodRegistry, WorldConfig,
    };
    use distcal::rng::{mix_all, tags};
    use std::collections::BTreeMap;

    #[test]
    fn dc_training_set_is_balanced_at_k_times_one_plus_m() {
        let world = generate_world(&WorldConfig {
            dim: 8,
            num_base: 6,
            num_novel: 3,
            ..WorldConfig::default()
        })
        .unwrap();
        for (shots, m) in [(1usize, 1usize), (2, 3), (5, 2)] {
            let mut settings = EvalSettings::for_shots(shots);
            settings.calib.samples_per_support = m;
            settings.queries_per_class = 2;
            settings.base_stat_samples = 30;
            let store = build_base_store(&world, &settings).unwrap();
            let episode = sample_episode(
                &world,
                shots,
                settings.queries_per_class,
                mix_all(settings.seed, &[tags::EPISODE, 0]),
            );
            let ctx = EpisodeContext {
                world: &world,
                store: &store,
                episode: &episode,
                settings: &settings,
                episode_index: 0,
            };
            let synthetic = augment_support(&ctx, &store).unwrap();

            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for f in episode.support.iter().chain(&synthetic) {
                *counts.entry(f.class_id.unwrap()).or_default() += 1;
            }
            assert_eq!(counts.len(), world.all_ids().len());
            for (&id, &count) in &counts {
                assert_eq!(count, shots * (1 + m), "class {id} at shots={shots} m={m}");
            }
        }
    }

    #[test]
    fn reports_are_bitwise_reproducible() {
        let world = generate_world(&WorldConfig {
            dim: 6,
            num_base: 5,
            num_novel: 2,
            ..WorldConfig::default()
        })
        .unwrap();
        let registry = MethodRegistry::builtin();
        let settings = EvalSettings {
            episodes: 3,
            queries_per_class: 4,
            base_stat_samples: 30,
            sc_stream_len: 40,
            ..EvalSettings::for_shots(1)
        };
        for name in ["baseline", "dc", "dc_sc", "dr", "dc_dr"] {
            let a = evaluate_named(&world, &registry, name, &settings).unwrap();
            let b = evaluate_named(&world, &registry, name, &settings).unwrap();
            assert_eq!(a, b, "{name} not reproducible");
            assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
        }
    }
}
