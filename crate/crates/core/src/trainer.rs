//! Batch sampling, scoring, risk-seeking filtering and policy updates.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derivation::{DerivationState, ObservationShape, StateToggles};
use crate::evaluator::{
    complexity, evaluate, expression_mse, fit_constants, r_squared, reward_from_mse, ConstantFitConfig, Dataset, Expr,
    EXACT_RECOVERY_MSE,
};
use crate::grammar::{ActionId, Grammar};
use crate::policy::{sample_action, EpisodeTrace, HiddenState, Optimizer, OptimizerKind, PolicyError, PolicyParameters, PolicyShape};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown ablation `{0}`")]
    UnknownAblation(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at iteration {iteration}: {source}")]
    NonFinite {
        iteration: usize,
        #[source]
        source: PolicyError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("writing run ledger: {0}")]
    Ledger(#[from] std::io::Error),
}

/// Training hyperparameters. Defaults are the full-scale settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub horizon: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub epsilon: f64,
    pub entropy_weight: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden: usize,
    pub embedding: usize,
    pub encoder: usize,
    pub past_window: usize,
    pub sibling_window: usize,
    pub optimizer: OptimizerKind,
    pub use_parent: bool,
    pub use_siblings: bool,
    pub use_past: bool,
    pub use_depth: bool,
    pub use_symbol: bool,
    pub use_risk_seeking: bool,
    pub use_entropy: bool,
    /// Fit `const` leaves when the grammar has any.
    pub fit_constants: bool,
    pub constant_budget: usize,
    pub constant_restarts: usize,
    /// Stop once the best train MSE drops below the exact-recovery threshold.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            horizon: 50,
            batch_size: 1000,
            iterations: 2000,
            epsilon: 0.05,
            entropy_weight: 0.005,
            learning_rate: 0.001,
            seed: 0,
            hidden: 64,
            embedding: 8,
            encoder: 16,
            past_window: 10,
            sibling_window: 4,
            optimizer: OptimizerKind::Adam,
            use_parent: true,
            use_siblings: true,
            use_past: true,
            use_depth: true,
            use_symbol: true,
            use_risk_seeking: true,
            use_entropy: true,
            fit_constants: true,
            constant_budget: 100,
            constant_restarts: 3,
            early_stop: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad("epsilon must lie in (0, 1]");
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return bad("entropy_weight must be finite and non-negative");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if self.embedding == 0 || self.encoder == 0 {
            return bad("embedding and encoder sizes must be at least 1");
        }
        Ok(())
    }

    pub fn toggles(&self) -> StateToggles {
        StateToggles {
            parent: self.use_parent,
            siblings: self.use_siblings,
            past: self.use_past,
            depth: self.use_depth,
            symbol: self.use_symbol,
        }
    }

    pub fn policy_shape(&self, g: &Grammar) -> PolicyShape {
        PolicyShape {
            action_count: g.action_count(),
            nonterminal_count: g.nonterminal_count(),
            hidden: self.hidden,
            embedding: self.embedding,
            encoder: self.encoder,
            past_window: self.past_window,
            sibling_window: self.sibling_window,
            horizon: self.horizon,
        }
    }

    /// Episodes kept per batch: `max(1, ceil(ε B))`.
    pub fn kept_count(&self) -> usize {
        kept_count(self.batch_size, self.epsilon)
    }

    pub fn with_ablation(&self, which: Ablation) -> TrainConfig {
        let mut c = self.clone();
        match which {
            Ablation::None => {}
            Ablation::NoEntropy => c.use_entropy = false,
            Ablation::NoRiskSeeking => c.use_risk_seeking = false,
            Ablation::NoParent => c.use_parent = false,
            Ablation::NoSiblings => c.use_siblings = false,
            Ablation::NoPast => c.use_past = false,
            Ablation::NoDepth => c.use_depth = false,
            Ablation::NoSymbol => c.use_symbol = false,
        }
        c
    }
}

fn kept_count(batch: usize, epsilon: f64) -> usize {
    // Guard against `0.1 * 30 = 3.0000000000000004` rounding up.
    let k = (epsilon * batch as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(batch.max(1))
}

/// Named ablations of the full method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    None,
    NoEntropy,
    NoRiskSeeking,
    NoParent,
    NoSiblings,
    NoPast,
    NoDepth,
    NoSymbol,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::NoEntropy,
        Ablation::NoRiskSeeking,
        Ablation::NoParent,
        Ablation::NoSiblings,
        Ablation::NoPast,
        Ablation::NoDepth,
        Ablation::NoSymbol,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::None => "baseline",
            Ablation::NoEntropy => "no_entropy",
            Ablation::NoRiskSeeking => "no_risk_seeking",
            Ablation::NoParent => "no_parent",
            Ablation::NoSiblings => "no_siblings",
            Ablation::NoPast => "no_past",
            Ablation::NoDepth => "no_depth",
            Ablation::NoSymbol => "no_symbol",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        std::iter::once(Ablation::None)
            .chain(Ablation::ALL)
            .find(|a| a.name() == key || (key == "none" && *a == Ablation::None))
            .ok_or_else(|| TrainError::UnknownAblation(s.to_string()))
    }
}

/// One sampled trajectory and its score.
#[derive(Clone, Debug)]
pub struct Episode {
    pub trace: EpisodeTrace,
    /// Probability of each taken action at sampling time.
    pub probabilities: Vec<f64>,
    pub complete: bool,
    pub expression: Option<Expr>,
    pub train_mse: f64,
    pub reward: f64,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.trace.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace.actions.is_empty()
    }
}

/// Roll out one episode. The expression is parsed but not scored.
pub fn sample_episode(
    policy: &PolicyParameters,
    g: &Grammar,
    horizon: usize,
    rng: &mut ChaCha8Rng,
    toggles: StateToggles,
    feature_names: &[String],
) -> Result<Episode, PolicyError> {
    let shape: ObservationShape = policy.shape().observation_shape();
    let initial = HiddenState::random(policy.shape().hidden, rng);
    let mut eta = initial.clone();
    let mut state = DerivationState::new(g);
    let mut probabilities = Vec::new();
    while !state.is_complete() && state.depth() < horizon {
        let obs = state.observation(g, &shape, toggles)?;
        let (probs, next) = policy.forward(&obs, &eta)?;
        let a = sample_action(&probs, rng);
        probabilities.push(probs[a.0]);
        state.apply(g, a)?;
        eta = next;
    }
    let complete = state.is_complete();
    let expression = if complete {
        state.to_expression(g, feature_names).ok()
    } else {
        None
    };
    Ok(Episode {
        trace: EpisodeTrace {
            actions: state.trajectory().to_vec(),
            initial,
            toggles,
        },
        probabilities,
        complete: complete && expression.is_some(),
        expression,
        train_mse: f64::INFINITY,
        reward: 0.0,
    })
}

/// Indices of the kept episodes (best first) and the threshold `R_ε`.
///
/// `R_ε` is the `(1 - ε)` empirical quantile: with `k = max(1, ceil(ε B))`
/// and rewards sorted ascending, it is the value just below the top `k`.
/// Exactly `k` episodes are kept, ranked by reward with ties going to the
/// earliest sampled.
pub fn quantile_filter(rewards: &[f64], epsilon: f64) -> (Vec<usize>, f64) {
    if rewards.is_empty() {
        return (Vec::new(), 0.0);
    }
    let b = rewards.len();
    let k = kept_count(b, epsilon);
    let mut asc: Vec<f64> = rewards.to_vec();
    asc.sort_by(|a, b| a.total_cmp(b));
    let r_eps = if k >= b { asc[0] } else { asc[b - k - 1] };
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| rewards[j].total_cmp(&rewards[i]).then(i.cmp(&j)));
    order.truncate(k);
    (order, r_eps)
}

/// Per-iteration line of the run ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_reward: f64,
    pub max_reward: f64,
    #[serde(rename = "R_eps")]
    pub r_eps: f64,
    pub best_mse: Option<f64>,
    pub best_expression: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Benchmark or data file the run was on; filled in by the caller.
    #[serde(default)]
    pub dataset: String,
    pub best_expression: Option<String>,
    /// Derivation of the best expression.
    #[serde(default)]
    pub best_actions: Vec<ActionId>,
    pub best_reward: f64,
    pub best_train_mse: Option<f64>,
    pub best_test_mse: Option<f64>,
    pub test_r2: Option<f64>,
    pub complexity: Option<usize>,
    pub recovered: bool,
    pub iterations_run: usize,
    pub expressions_sampled: usize,
    pub early_stopped: bool,
    pub reward_curve: Vec<IterationStats>,
    pub ablation: Ablation,
    pub seed: u64,
    pub config: TrainConfig,
}

/// Derive an independent stream id from `(seed, iteration, index)`.
pub fn stream_seed(seed: u64, iteration: u64, index: u64) -> u64 {
    let mut z = seed;
    for v in [iteration, index] {
        z = splitmix(z ^ splitmix(v.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Best {
    expr: Expr,
    train_mse: f64,
    actions: Vec<ActionId>,
}

/// Run the full training loop on `train`, reporting the best expression's
/// error on `test` (or on `train` when no test set is given).
pub fn train(
    cfg: &TrainConfig,
    g: &Grammar,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
    mut ledger: Option<&mut dyn Write>,
) -> Result<RunResult, TrainError> {
    cfg.validate()?;
    if train_data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let names = train_data.names().to_vec();
    // Index-style grammars print `x[i]`; named ones print `x.name`.
    let shown: Vec<String> = if g.terminals().iter().any(|t| t.contains("x.")) {
        names.clone()
    } else {
        Vec::new()
    };
    let toggles = cfg.toggles();
    let mut policy = PolicyParameters::init(cfg.policy_shape(g), stream_seed(cfg.seed, u64::MAX, 0))?.with_action_prior(g);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, policy.len());
    let lambda = if cfg.use_entropy { cfg.entropy_weight } else { 0.0 };
    let fit = cfg.fit_constants && g.has_constants();
    let k = cfg.kept_count();

    let mut best: Option<Best> = None;
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut iterations_run = 0;
    let mut early_stopped = false;

    for it in 0..cfg.iterations {
        let mut batch: Vec<Episode> = (0..cfg.batch_size)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, it as u64, i as u64));
                let mut ep = sample_episode(&policy, g, cfg.horizon, &mut rng, toggles, &names)?;
                if let Some(e) = &ep.expression {
                    ep.train_mse = expression_mse(e, train_data);
                    ep.reward = reward_from_mse(ep.train_mse);
                }
                Ok(ep)
            })
            .collect::<Result<_, PolicyError>>()?;

        if fit {
            let rewards: Vec<f64> = batch.iter().map(|e| e.reward).collect();
            let (top, _) = quantile_filter(&rewards, cfg.epsilon);
            let fitted: Vec<(usize, Expr, f64)> = top
                .par_iter()
                .filter_map(|&i| batch[i].expression.as_ref().map(|e| (i, e)))
                .filter(|(_, e)| e.const_count() > 0)
                .map(|(i, e)| {
                    let fc = ConstantFitConfig {
                        budget: cfg.constant_budget,
                        restarts: cfg.constant_restarts,
                        seed: stream_seed(cfg.seed ^ 0xc057, it as u64, i as u64),
                        ..Default::default()
                    };
                    let (fe, m) = fit_constants(e, train_data, &fc);
                    (i, fe, m)
                })
                .collect();
            for (i, fe, m) in fitted {
                batch[i].expression = Some(fe);
                batch[i].train_mse = m;
                batch[i].reward = reward_from_mse(m);
            }
        }

        for ep in &batch {
            if let Some(e) = &ep.expression {
                if ep.train_mse.is_finite() && best.as_ref().is_none_or(|b| ep.train_mse < b.train_mse) {
                    best = Some(Best {
                        expr: e.clone(),
                        train_mse: ep.train_mse,
                        actions: ep.trace.actions.clone(),
                    });
                }
            }
        }

        let rewards: Vec<f64> = batch.iter().map(|e| e.reward).collect();
        let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
        let max_reward = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (kept, r_eps) = quantile_filter(&rewards, cfg.epsilon);
        debug_assert_eq!(kept.len(), k);

        let grad_batch: Vec<(EpisodeTrace, f64)> = if cfg.use_risk_seeking {
            kept.iter().map(|&i| (batch[i].trace.clone(), rewards[i] - r_eps)).collect()
        } else {
            batch.iter().map(|e| (e.trace.clone(), e.reward - mean_reward)).collect()
        };
        let mut grad = policy
            .gradient(g, &grad_batch, lambda)
            .map_err(|source| TrainError::NonFinite { iteration: it, source })?;
        let scale = 1.0 / grad_batch.len() as f64;
        grad.0.iter_mut().for_each(|v| *v *= scale);
        opt.step(&mut policy, &grad)?;

        let stats = IterationStats {
            iteration: it,
            mean_reward,
            max_reward,
            r_eps,
            best_mse: best.as_ref().map(|b| b.train_mse),
            best_expression: best.as_ref().map(|b| b.expr.display_with(&shown).to_string()),
        };
        if let Some(w) = ledger.as_deref_mut() {
            serde_json::to_writer(&mut *w, &stats).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        debug!(
            "iteration {it}: mean {mean_reward:.4} max {max_reward:.4} R_eps {r_eps:.4} best {:?}",
            stats.best_mse
        );
        curve.push(stats);
        iterations_run = it + 1;
        if cfg.early_stop && best.as_ref().is_some_and(|b| b.train_mse < EXACT_RECOVERY_MSE) {
            info!("exact fit on the training data after {iterations_run} iterations, stopping early");
            early_stopped = true;
            break;
        }
    }

    let eval_data = test_data.unwrap_or(train_data);
    let (best_expression, best_reward, best_train_mse, best_test_mse, test_r2, cplx, recovered) = match &best {
        Some(b) => {
            let test_mse = expression_mse(&b.expr, eval_data);
            let r2 = r_squared(eval_data.target(), &evaluate(&b.expr, eval_data.columns()));
            (
                Some(b.expr.display_with(&shown).to_string()),
                reward_from_mse(b.train_mse),
                Some(b.train_mse),
                test_mse.is_finite().then_some(test_mse),
                r2.is_finite().then_some(r2),
                Some(complexity(&b.expr)),
                !eval_data.is_empty() && test_mse < EXACT_RECOVERY_MSE,
            )
        }
        None => (None, 0.0, None, None, None, None, false),
    };

    Ok(RunResult {
        dataset: String::new(),
        best_expression,
        best_actions: best.as_ref().map(|b| b.actions.clone()).unwrap_or_default(),
        best_reward,
        best_train_mse,
        best_test_mse,
        test_r2,
        complexity: cplx,
        recovered,
        iterations_run,
        expressions_sampled: iterations_run * cfg.batch_size,
        early_stopped,
        reward_curve: curve,
        ablation: Ablation::None,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}

/// [`train`] with one component of the method switched off.
pub fn run_ablation(
    cfg: &TrainConfig,
    which: Ablation,
    g: &Grammar,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
    ledger: Option<&mut dyn Write>,
) -> Result<RunResult, TrainError> {
    let mut r = train(&cfg.with_ablation(which), g, train_data, test_data, ledger)?;
    r.ablation = which;
    Ok(r)
}
