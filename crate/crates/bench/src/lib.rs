//! Shared fixtures for the engine benchmarks.

use ggsr_core::derivation::StateToggles;
use ggsr_core::trainer::{sample_episode, Episode};
use ggsr_core::{builtin, generate_benchmark, Dataset, Grammar, ParseOptions, PolicyParameters, PolicyShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Grammar, data and an initialized policy for one benchmark.
pub struct Fixture {
    pub grammar: Grammar,
    pub train: Dataset,
    pub policy: PolicyParameters,
}

impl Fixture {
    pub fn nguyen(benchmark: &str, hidden: usize) -> Fixture {
        let b = generate_benchmark(benchmark, 0).expect("known benchmark");
        let grammar = Grammar::parse(builtin::NGUYEN, &ParseOptions::with_nvar(b.train.width())).expect("builtin grammar");
        let policy = PolicyParameters::init(PolicyShape::for_grammar(&grammar, hidden), 0)
            .expect("nonzero hidden size")
            .with_action_prior(&grammar);
        Fixture {
            grammar,
            train: b.train,
            policy,
        }
    }

    /// `n` episodes drawn from the untrained policy.
    pub fn episodes(&self, n: usize, horizon: usize, seed: u64) -> Vec<Episode> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                sample_episode(
                    &self.policy,
                    &self.grammar,
                    horizon,
                    &mut rng,
                    StateToggles::default(),
                    self.train.names(),
                )
                .expect("sampling succeeds")
            })
            .collect()
    }
}
