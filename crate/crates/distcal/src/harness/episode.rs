//! One synthetic few-shot trial: a balanced support set (K features per
//! class, base and novel alike) and a labeled query set, drawn from the
//! world's ground-truth Gaussians with disjoint RNG streams.

use serde::{Deserialize, Serialize};

use crate::calibration::{cholesky_with_jitter, JitterPolicy};
use crate::feature::FeatureVector;
use crate::linalg;
use crate::rng::{self, tags};

use super::world::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub shots: usize,
    pub support: Vec<FeatureVector>,
    pub query: Vec<FeatureVector>,
    pub seed: u64,
}

/// Samples support and query sets class-major, base classes first.
pub fn sample_episode(world: &World, shots: usize, queries_per_class: usize, seed: u64) -> Episode {
    assert!(shots >= 1, "shots must be at least 1");
    let policy = JitterPolicy::default();
    let mut support_rng = rng::rng_from(rng::mix(seed, tags::SUPPORT));
    let mut query_rng = rng::rng_from(rng::mix(seed, tags::QUERY));

    let mut support = Vec::new();
    let mut query = Vec::new();
    for (id, gaussian) in world.true_base.iter().chain(world.true_novel.iter()) {
        let (factor, _) = cholesky_with_jitter(&gaussian.covariance, &policy)
            .expect("world covariances are positive definite");
        for _ in 0..shots {
            let z = rng::standard_normal_vec(&mut support_rng, world.dim());
            let values = linalg::add(&gaussian.mean, &factor.matvec(&z));
            support.push(FeatureVector::from_sampled(values, Some(*id)));
        }
        for _ in 0..queries_per_class {
            let z = rng::standard_normal_vec(&mut query_rng, world.dim());
            let values = linalg::add(&gaussian.mean, &factor.matvec(&z));
            query.push(FeatureVector::from_sampled(values, Some(*id)));
        }
    }

    Episode {
        shots,
        support,
        query,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::world::{generate_world, WorldConfig};
    use std::collections::BTreeMap;

    fn world() -> World {
        generate_world(&WorldConfig::default()).unwrap()
    }

    #[test]
    fn one_shot_gives_one_support_feature_per_class() {
        let world = world();
        let episode = sample_episode(&world, 1, 3, 9);
        let classes = world.all_ids().len();
        assert_eq!(episode.support.len(), classes);
        assert_eq!(episode.query.len(), classes * 3);
    }

    #[test]
    fn ten_shot_gives_ten_per_class() {
        let world = world();
        let episode = sample_episode(&world, 10, 2, 9);
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for f in &episode.support {
            *counts.entry(f.class_id.unwrap()).or_default() += 1;
        }
        assert!(counts.values().all(|&c| c == 10));
        assert_eq!(counts.len(), world.all_ids().len());
    }

    #[test]
    fn same_seed_same_episode() {
        let world = world();
        let a = sample_episode(&world, 2, 4, 33);
        let b = sample_episode(&world, 2, 4, 33);
        assert_eq!(a, b);
        let c = sample_episode(&world, 2, 4, 34);
        assert_ne!(a, c);
    }

    #[test]
    fn support_and_query_streams_are_disjoint() {
        let world = world();
        let episode = sample_episode(&world, 1, 1, 5);
        // Same class, same count: identical streams would duplicate values.
        assert_ne!(episode.support[0].values, episode.query[0].values);
    }
}
