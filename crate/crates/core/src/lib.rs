//! Grammar-guided symbolic regression with a risk-seeking recurrent policy.
//!
//! A policy network derives expressions from a probabilistic context-free
//! grammar one leftmost action at a time. Sampled expressions are scored on
//! data, and the policy is trained on the best quantile of each batch.

pub mod benchmarks;
pub mod derivation;
pub mod evaluator;
pub mod grammar;
pub mod policy;
pub mod reporting;
pub mod trainer;

pub use benchmarks::{generate_benchmark, load_csv, BenchmarkSpec, GeneratedBenchmark};
pub use derivation::{DerivationError, DerivationState, ObservationShape, StateObservation, StateToggles};
pub use evaluator::{Dataset, Expr, Split};
pub use grammar::{ActionId, Grammar, GrammarError, Mask, ParseOptions, SymbolId};
pub use policy::{EpisodeTrace, HiddenState, PolicyParameters, PolicyShape};
pub use reporting::{aggregate, mann_whitney_u, significance_summary, Report, RunRow, RunTable};
pub use trainer::{train, Ablation, RunResult, TrainConfig};

/// Grammars shipped with the crate.
pub mod builtin {
    /// Benchmark grammar over `nvar` input variables.
    pub const NGUYEN: &str = include_str!("../grammars/nguyen.bnf");
    /// Dimensionally aware grammar for the airfoil self-noise data.
    pub const AIRFOIL: &str = include_str!("../grammars/airfoil.bnf");
    /// Small grammar used in examples and tests.
    pub const TOY: &str = include_str!("../grammars/toy.bnf");
}
