use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_with_constants, mse, Dataset, Expr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantFitConfig {
    /// Coordinate sweeps per start.
    pub budget: usize,
    /// Random restarts after the all-ones start.
    pub restarts: usize,
    /// Constants are kept inside `[-bound, bound]`.
    pub bound: f64,
    pub seed: u64,
}

impl Default for ConstantFitConfig {
    fn default() -> Self {
        ConstantFitConfig {
            budget: 100,
            restarts: 3,
            bound: 1e4,
            seed: 0,
        }
    }
}

fn objective(e: &Expr, data: &Dataset, c: &[f64]) -> f64 {
    let y_hat = evaluate_with_constants(e, data.columns(), c);
    if y_hat.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    match mse(data.target(), &y_hat) {
        Ok(m) if m.is_finite() => m,
        _ => f64::INFINITY,
    }
}

/// Fit the `const` leaves of `e` on `train` and return the expression with
/// the fitted values substituted, along with its train MSE.
///
/// Derivative-free coordinate search: every coordinate tries `±step`,
/// doubling the step on success and halving it on failure. The first start
/// is all ones; further starts draw log-uniform magnitudes in
/// `[1e-4, bound]` with a random sign. The all-ones point is always a
/// candidate, so the result is never worse than it.
pub fn fit_constants(e: &Expr, train: &Dataset, cfg: &ConstantFitConfig) -> (Expr, f64) {
    let k = e.const_count();
    if k == 0 {
        return (e.clone(), objective(e, train, &[]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ones = vec![1.0; k];
    let mut best = ones.clone();
    let mut best_f = objective(e, train, &ones);

    let log_hi = cfg.bound.log10();
    for start in 0..=cfg.restarts {
        let init: Vec<f64> = if start == 0 {
            ones.clone()
        } else {
            (0..k)
                .map(|_| {
                    let mag = 10f64.powf(rng.gen_range(-4.0..log_hi));
                    if rng.gen_bool(0.5) {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect()
        };
        let (c, f) = coordinate_search(e, train, init, cfg);
        if f < best_f {
            best_f = f;
            best = c;
        }
    }
    if !best_f.is_finite() {
        best = ones;
    }
    (e.substitute_constants(&best), best_f)
}

fn coordinate_search(e: &Expr, data: &Dataset, mut c: Vec<f64>, cfg: &ConstantFitConfig) -> (Vec<f64>, f64) {
    let mut f = objective(e, data, &c);
    let mut steps: Vec<f64> = c.iter().map(|v| 0.5 * v.abs().max(1.0)).collect();
    for _ in 0..cfg.budget {
        let mut converged = true;
        for i in 0..c.len() {
            if steps[i] < 1e-13 * (1.0 + c[i].abs()) {
                continue;
            }
            converged = false;
            let orig = c[i];
            let mut improved = false;
            for dir in [1.0, -1.0] {
                let cand = (orig + dir * steps[i]).clamp(-cfg.bound, cfg.bound);
                if cand == orig {
                    continue;
                }
                c[i] = cand;
                let fc = objective(e, data, &c);
                if fc < f {
                    f = fc;
                    improved = true;
                    break;
                }
                c[i] = orig;
            }
            if improved {
                steps[i] = (steps[i] * 2.0).min(cfg.bound);
            } else {
                steps[i] *= 0.5;
            }
        }
        if converged {
            break;
        }
    }
    (c, f)
}
