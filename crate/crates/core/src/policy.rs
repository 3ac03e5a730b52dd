//! Recurrent stochastic policy over grammar actions.
//!
//! Each observation component is encoded by its own single feed-forward
//! layer (tanh): the past-action window, the parent action and the sibling
//! window go through a shared action-embedding table first, the depth is
//! the scalar `h / H`, and the symbol is one-hot. The concatenated encodings
//! drive an LSTM cell whose hidden output feeds a linear head with one
//! logit per global action. Illegal actions are masked out by adding
//! `-1e9` to their logits before the softmax.
//!
//! All parameters live in one flat vector, so gradients, the optimizer and
//! checkpoints share one layout. Gradients are exact: the episode is
//! replayed and back-propagated through time.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derivation::{DerivationError, DerivationState, ObservationShape, StateObservation, StateToggles};
use crate::grammar::{ActionId, Grammar, Mask};

/// Added to the logits of masked actions.
pub const MASK_PENALTY: f64 = -1e9;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("hidden size must be at least 1")]
    ZeroHidden,
    #[error("mask allows no action")]
    EmptyMask,
    #[error("logits and mask lengths differ ({0} vs {1})")]
    MaskLength(usize, usize),
    #[error("recorded action {action} has zero probability on replay at step {step}")]
    ZeroProbability { action: ActionId, step: usize },
    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(&'static str),
    #[error("gradient has {0} entries, parameters have {1}")]
    ShapeMismatch(usize, usize),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sizes that fix the parameter layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub action_count: usize,
    pub nonterminal_count: usize,
    pub hidden: usize,
    pub embedding: usize,
    /// Width of each component encoder.
    pub encoder: usize,
    pub past_window: usize,
    pub sibling_window: usize,
    /// Episode horizon, used to scale the depth input.
    pub horizon: usize,
}

impl PolicyShape {
    pub fn new(action_count: usize, nonterminal_count: usize, hidden: usize) -> PolicyShape {
        let obs = ObservationShape::default();
        PolicyShape {
            action_count,
            nonterminal_count,
            hidden,
            embedding: 8,
            encoder: 16,
            past_window: obs.past_window,
            sibling_window: obs.sibling_window,
            horizon: 50,
        }
    }

    pub fn for_grammar(g: &Grammar, hidden: usize) -> PolicyShape {
        PolicyShape::new(g.action_count(), g.nonterminal_count(), hidden)
    }

    pub fn observation_shape(&self) -> ObservationShape {
        ObservationShape {
            past_window: self.past_window,
            sibling_window: self.sibling_window,
        }
    }

    fn lstm_input(&self) -> usize {
        5 * self.encoder
    }

    fn null_token(&self) -> usize {
        self.action_count
    }
}

#[derive(Clone, Copy, Debug)]
struct Block {
    name: &'static str,
    offset: usize,
    len: usize,
}

/// Offsets of every parameter block in the flat vector.
#[derive(Clone, Debug)]
struct Layout {
    emb: usize,
    past_w: usize,
    past_b: usize,
    parent_w: usize,
    parent_b: usize,
    sib_w: usize,
    sib_b: usize,
    depth_w: usize,
    depth_b: usize,
    sym_w: usize,
    sym_b: usize,
    wx: usize,
    wh: usize,
    lstm_b: usize,
    head_w: usize,
    head_b: usize,
    blocks: Vec<Block>,
    total: usize,
}

impl Layout {
    fn new(s: &PolicyShape) -> Layout {
        let (a, e, k, d) = (s.action_count, s.embedding, s.encoder, s.hidden);
        let sizes: [(&'static str, usize); 16] = [
            ("embedding", (a + 1) * e),
            ("past.weight", k * s.past_window * e),
            ("past.bias", k),
            ("parent.weight", k * e),
            ("parent.bias", k),
            ("siblings.weight", k * s.sibling_window * e),
            ("siblings.bias", k),
            ("depth.weight", k),
            ("depth.bias", k),
            ("symbol.weight", k * s.nonterminal_count),
            ("symbol.bias", k),
            ("lstm.input_weight", 4 * d * s.lstm_input()),
            ("lstm.hidden_weight", 4 * d * d),
            ("lstm.bias", 4 * d),
            ("head.weight", a * d),
            ("head.bias", a),
        ];
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for (name, len) in sizes {
            blocks.push(Block { name, offset: off, len });
            off += len;
        }
        let o = |i: usize| blocks[i].offset;
        Layout {
            emb: o(0),
            past_w: o(1),
            past_b: o(2),
            parent_w: o(3),
            parent_b: o(4),
            sib_w: o(5),
            sib_b: o(6),
            depth_w: o(7),
            depth_b: o(8),
            sym_w: o(9),
            sym_b: o(10),
            wx: o(11),
            wh: o(12),
            lstm_b: o(13),
            head_w: o(14),
            head_b: o(15),
            total: off,
            blocks,
        }
    }

    fn block_of(&self, index: usize) -> &'static str {
        self.blocks
            .iter()
            .find(|b| index >= b.offset && index < b.offset + b.len)
            .map_or("?", |b| b.name)
    }
}

/// Recurrent memory `(h, c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl HiddenState {
    pub fn zeros(dim: usize) -> HiddenState {
        HiddenState {
            h: vec![0.0; dim],
            c: vec![0.0; dim],
        }
    }

    /// Standard normal entries scaled by 0.1.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HiddenState {
        let mut draw = || (0..dim).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let h = draw();
        let c = draw();
        HiddenState { h, c }
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    shape: PolicyShape,
    data: Vec<f64>,
}

/// Parameter-shaped gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Everything needed to replay an episode through the policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub actions: Vec<ActionId>,
    pub initial: HiddenState,
    pub toggles: StateToggles,
}

struct StepInput {
    past: Vec<usize>,
    parent: usize,
    siblings: Vec<usize>,
    depth: f64,
    symbol: Option<usize>,
}

struct StepCache {
    input: StepInput,
    enc: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// i, f, o, g after activation.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    probs: Vec<f64>,
    mask: Mask,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax over allowed entries: `logits + (mask ? 0 : -1e9)`.
pub fn masked_softmax(logits: &[f64], mask: &Mask) -> Result<Vec<f64>, PolicyError> {
    if logits.len() != mask.len() {
        return Err(PolicyError::MaskLength(logits.len(), mask.len()));
    }
    if mask.count_allowed() == 0 {
        return Err(PolicyError::EmptyMask);
    }
    let shifted: Vec<f64> = logits
        .iter()
        .zip(mask.as_slice())
        .map(|(&z, &ok)| if ok { z } else { z + MASK_PENALTY })
        .collect();
    let max = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = shifted.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    Ok(out)
}

/// `-Σ p ln p` over allowed actions.
pub fn step_entropy(probs: &[f64], mask: &Mask) -> f64 {
    probs
        .iter()
        .zip(mask.as_slice())
        .filter(|(&p, &ok)| ok && p > 0.0)
        .map(|(&p, _)| -p * p.ln())
        .sum()
}

/// Draw an index from `probs`, never returning a zero-probability entry.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> ActionId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(i);
        if u < acc {
            return ActionId(i);
        }
    }
    ActionId(last.expect("distribution has positive mass"))
}

impl PolicyParameters {
    /// Seeded scaled-uniform initialization: weights in
    /// `±1/sqrt(fan_in)`, embeddings in `±0.5`, biases zero except the
    /// LSTM forget gate (1.0).
    pub fn init(shape: PolicyShape, seed: u64) -> Result<PolicyParameters, PolicyError> {
        if shape.hidden == 0 {
            return Err(PolicyError::ZeroHidden);
        }
        let lay = Layout::new(&shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; lay.total];
        let (e, k, d) = (shape.embedding, shape.encoder, shape.hidden);
        let mut fill = |data: &mut [f64], off: usize, len: usize, scale: f64| {
            for v in &mut data[off..off + len] {
                *v = rng.gen_range(-scale..scale);
            }
        };
        let inv = |n: usize| 1.0 / (n.max(1) as f64).sqrt();
        fill(&mut data, lay.emb, (shape.action_count + 1) * e, 0.5);
        fill(&mut data, lay.past_w, k * shape.past_window * e, inv(shape.past_window * e));
        fill(&mut data, lay.parent_w, k * e, inv(e));
        fill(&mut data, lay.sib_w, k * shape.sibling_window * e, inv(shape.sibling_window * e));
        fill(&mut data, lay.depth_w, k, 1.0);
        fill(&mut data, lay.sym_w, k * shape.nonterminal_count, inv(shape.nonterminal_count));
        fill(&mut data, lay.wx, 4 * d * shape.lstm_input(), inv(shape.lstm_input()));
        fill(&mut data, lay.wh, 4 * d * d, inv(d));
        fill(&mut data, lay.head_w, shape.action_count * d, inv(d));
        for v in &mut data[lay.lstm_b + d..lay.lstm_b + 2 * d] {
            *v = 1.0;
        }
        Ok(PolicyParameters { shape, data })
    }

    /// Set the action-head bias to the log of the grammar's rule
    /// probabilities, so the untrained policy starts near the grammar's
    /// own distribution.
    pub fn with_action_prior(mut self, g: &Grammar) -> PolicyParameters {
        let lay = Layout::new(&self.shape);
        for (i, r) in g.rules().iter().enumerate().take(self.shape.action_count) {
            self.data[lay.head_b + i] = r.probability.max(1e-12).ln();
        }
        self
    }

    pub fn shape(&self) -> &PolicyShape {
        &self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Name of the parameter block containing flat index `i`.
    pub fn block_name(&self, i: usize) -> &'static str {
        Layout::new(&self.shape).block_of(i)
    }

    fn tokens(&self, obs: &StateObservation) -> StepInput {
        let null = self.shape.null_token();
        let tok = |a: &Option<ActionId>| a.map_or(null, |a| a.0);
        StepInput {
            past: obs.past_actions.iter().map(tok).collect(),
            parent: tok(&obs.parent_action),
            siblings: obs.sibling_actions.iter().map(tok).collect(),
            depth: if obs.toggles.depth {
                obs.depth as f64 / self.shape.horizon.max(1) as f64
            } else {
                0.0
            },
            symbol: obs.symbol.map(|s| s.0),
        }
    }

    fn step(&self, lay: &Layout, input: StepInput, mask: &Mask, eta: &HiddenState) -> Result<(StepCache, HiddenState), PolicyError> {
        let s = &self.shape;
        let (e, k, d, a_n) = (s.embedding, s.encoder, s.hidden, s.action_count);
        let w = &self.data;
        let emb = |t: usize| &w[lay.emb + t * e..lay.emb + (t + 1) * e];

        let mut enc = vec![0.0; 5 * k];
        // past window
        for r in 0..k {
            let row = &w[lay.past_w + r * s.past_window * e..lay.past_w + (r + 1) * s.past_window * e];
            let mut acc = w[lay.past_b + r];
            for (slot, &t) in input.past.iter().enumerate() {
                acc += dot(&row[slot * e..(slot + 1) * e], emb(t));
            }
            enc[r] = acc.tanh();
        }
        for r in 0..k {
            let row = &w[lay.parent_w + r * e..lay.parent_w + (r + 1) * e];
            enc[k + r] = (w[lay.parent_b + r] + dot(row, emb(input.parent))).tanh();
        }
        for r in 0..k {
            let row = &w[lay.sib_w + r * s.sibling_window * e..lay.sib_w + (r + 1) * s.sibling_window * e];
            let mut acc = w[lay.sib_b + r];
            for (slot, &t) in input.siblings.iter().enumerate() {
                acc += dot(&row[slot * e..(slot + 1) * e], emb(t));
            }
            enc[2 * k + r] = acc.tanh();
        }
        for r in 0..k {
            enc[3 * k + r] = (w[lay.depth_b + r] + w[lay.depth_w + r] * input.depth).tanh();
        }
        for r in 0..k {
            let mut acc = w[lay.sym_b + r];
            if let Some(sym) = input.symbol {
                acc += w[lay.sym_w + r * s.nonterminal_count + sym];
            }
            enc[4 * k + r] = acc.tanh();
        }

        let n_in = s.lstm_input();
        let mut gates = vec![0.0; 4 * d];
        for (r, g) in gates.iter_mut().enumerate() {
            let z = w[lay.lstm_b + r]
                + dot(&w[lay.wx + r * n_in..lay.wx + (r + 1) * n_in], &enc)
                + dot(&w[lay.wh + r * d..lay.wh + (r + 1) * d], &eta.h);
            *g = if r < 3 * d { sigmoid(z) } else { z.tanh() };
        }
        let mut c = vec![0.0; d];
        let mut tanh_c = vec![0.0; d];
        let mut h = vec![0.0; d];
        for j in 0..d {
            let (ig, fg, og, gg) = (gates[j], gates[d + j], gates[2 * d + j], gates[3 * d + j]);
            c[j] = fg * eta.c[j] + ig * gg;
            tanh_c[j] = c[j].tanh();
            h[j] = og * tanh_c[j];
        }

        let mut logits = vec![0.0; a_n];
        for (a, l) in logits.iter_mut().enumerate() {
            if mask.as_slice()[a] {
                *l = w[lay.head_b + a] + dot(&w[lay.head_w + a * d..lay.head_w + (a + 1) * d], &h);
            } else {
                // Masked logits never influence the result.
                *l = 0.0;
            }
        }
        let probs = masked_softmax(&logits, mask)?;
        let cache = StepCache {
            input,
            enc,
            h_prev: eta.h.clone(),
            c_prev: eta.c.clone(),
            gates,
            tanh_c,
            probs,
            mask: mask.clone(),
        };
        Ok((cache, HiddenState { h, c }))
    }

    /// One policy step: action probabilities and the next memory.
    pub fn forward(&self, obs: &StateObservation, eta: &HiddenState) -> Result<(Vec<f64>, HiddenState), PolicyError> {
        if obs.mask.count_allowed() == 0 {
            return Err(PolicyError::EmptyMask);
        }
        let lay = Layout::new(&self.shape);
        let (cache, next) = self.step(&lay, self.tokens(obs), &obs.mask, eta)?;
        Ok((cache.probs, next))
    }

    /// Re-run an episode and keep every intermediate needed for BPTT.
    fn replay(&self, g: &Grammar, trace: &EpisodeTrace) -> Result<Vec<StepCache>, PolicyError> {
        let lay = Layout::new(&self.shape);
        let obs_shape = self.shape.observation_shape();
        let mut state = DerivationState::new(g);
        let mut eta = trace.initial.clone();
        let mut caches = Vec::with_capacity(trace.actions.len());
        for (step, &a) in trace.actions.iter().enumerate() {
            let obs = state.observation(g, &obs_shape, trace.toggles)?;
            let (cache, next) = self.step(&lay, self.tokens(&obs), &obs.mask, &eta)?;
            if cache.probs[a.0] <= 0.0 {
                return Err(PolicyError::ZeroProbability { action: a, step });
            }
            caches.push(cache);
            eta = next;
            state.apply(g, a)?;
        }
        Ok(caches)
    }

    /// Per-step probabilities of the recorded actions under replay.
    pub fn replay_probabilities(&self, g: &Grammar, trace: &EpisodeTrace) -> Result<Vec<f64>, PolicyError> {
        let caches = self.replay(g, trace)?;
        Ok(caches.iter().zip(&trace.actions).map(|(c, a)| c.probs[a.0]).collect())
    }

    /// `(Σ_h ln π(a_h | s_h), Σ_h entropy_h)` for a recorded episode.
    pub fn episode_logprob_and_entropy(&self, g: &Grammar, trace: &EpisodeTrace) -> Result<(f64, f64), PolicyError> {
        let caches = self.replay(g, trace)?;
        let mut lp = 0.0;
        let mut ent = 0.0;
        for (c, a) in caches.iter().zip(&trace.actions) {
            lp += c.probs[a.0].ln();
            ent += step_entropy(&c.probs, &c.mask);
        }
        Ok((lp, ent))
    }

    /// Objective `Σ_batch [adv · Σ_h ln π + λ · Σ_h entropy]`.
    pub fn objective(&self, g: &Grammar, batch: &[(EpisodeTrace, f64)], entropy_weight: f64) -> Result<f64, PolicyError> {
        let mut total = 0.0;
        for (trace, adv) in batch {
            let (lp, ent) = self.episode_logprob_and_entropy(g, trace)?;
            total += adv * lp + entropy_weight * ent;
        }
        Ok(total)
    }

    /// Exact gradient of [`PolicyParameters::objective`].
    pub fn gradient(&self, g: &Grammar, batch: &[(EpisodeTrace, f64)], entropy_weight: f64) -> Result<Gradient, PolicyError> {
        let parts: Vec<Result<Vec<f64>, PolicyError>> = batch
            .par_iter()
            .map(|(trace, adv)| self.episode_gradient(g, trace, *adv, entropy_weight))
            .collect();
        let mut total = vec![0.0; self.data.len()];
        for part in parts {
            for (t, p) in total.iter_mut().zip(part?) {
                *t += p;
            }
        }
        if let Some(i) = total.iter().position(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteGradient(self.block_name(i)));
        }
        Ok(Gradient(total))
    }

    fn episode_gradient(&self, g: &Grammar, trace: &EpisodeTrace, adv: f64, lambda: f64) -> Result<Vec<f64>, PolicyError> {
        let mut grad = vec![0.0; self.data.len()];
        if adv == 0.0 && lambda == 0.0 {
            return Ok(grad);
        }
        let caches = self.replay(g, trace)?;
        let lay = Layout::new(&self.shape);
        let s = &self.shape;
        let (e, k, d) = (s.embedding, s.encoder, s.hidden);
        let n_in = s.lstm_input();
        let w = &self.data;

        let mut dh_next = vec![0.0; d];
        let mut dc_next = vec![0.0; d];
        let mut dz = vec![0.0; 4 * d];
        let mut denc = vec![0.0; 5 * k];
        for (cache, action) in caches.iter().zip(&trace.actions).rev() {
            // d objective / d logits for this step.
            let p = &cache.probs;
            let ent = step_entropy(p, &cache.mask);
            let mut dh = dh_next.clone();
            for (a, &pa) in p.iter().enumerate() {
                if pa <= 0.0 {
                    continue;
                }
                let onehot = if a == action.0 { 1.0 } else { 0.0 };
                let dl = adv * (onehot - pa) - lambda * pa * (pa.ln() + ent);
                if dl == 0.0 {
                    continue;
                }
                let h: Vec<f64> = (0..d).map(|j| cache.gates[2 * d + j] * cache.tanh_c[j]).collect();
                let row = lay.head_w + a * d;
                for j in 0..d {
                    grad[row + j] += dl * h[j];
                    dh[j] += dl * w[row + j];
                }
                grad[lay.head_b + a] += dl;
            }

            // LSTM cell.
            for j in 0..d {
                let (ig, fg, og, gg) = (cache.gates[j], cache.gates[d + j], cache.gates[2 * d + j], cache.gates[3 * d + j]);
                let tc = cache.tanh_c[j];
                let d_o = dh[j] * tc;
                let dc = dc_next[j] + dh[j] * og * (1.0 - tc * tc);
                let d_i = dc * gg;
                let d_g = dc * ig;
                let d_f = dc * cache.c_prev[j];
                dc_next[j] = dc * fg;
                dz[j] = d_i * ig * (1.0 - ig);
                dz[d + j] = d_f * fg * (1.0 - fg);
                dz[2 * d + j] = d_o * og * (1.0 - og);
                dz[3 * d + j] = d_g * (1.0 - gg * gg);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            denc.iter_mut().for_each(|v| *v = 0.0);
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                grad[lay.lstm_b + r] += dzr;
                let rx = lay.wx + r * n_in;
                for i in 0..n_in {
                    grad[rx + i] += dzr * cache.enc[i];
                    denc[i] += dzr * w[rx + i];
                }
                let rh = lay.wh + r * d;
                for j in 0..d {
                    grad[rh + j] += dzr * cache.h_prev[j];
                    dh_next[j] += dzr * w[rh + j];
                }
            }

            // Encoders: pre-activation gradients.
            for (i, v) in denc.iter_mut().enumerate() {
                *v *= 1.0 - cache.enc[i] * cache.enc[i];
            }
            let inp = &cache.input;
            for r in 0..k {
                let dp = denc[r];
                grad[lay.past_b + r] += dp;
                let row = lay.past_w + r * s.past_window * e;
                for (slot, &t) in inp.past.iter().enumerate() {
                    for q in 0..e {
                        grad[row + slot * e + q] += dp * w[lay.emb + t * e + q];
                        grad[lay.emb + t * e + q] += dp * w[row + slot * e + q];
                    }
                }
            }
            for r in 0..k {
                let dp = denc[k + r];
                grad[lay.parent_b + r] += dp;
                let row = lay.parent_w + r * e;
                let t = inp.parent;
                for q in 0..e {
                    grad[row + q] += dp * w[lay.emb + t * e + q];
                    grad[lay.emb + t * e + q] += dp * w[row + q];
                }
            }
            for r in 0..k {
                let dp = denc[2 * k + r];
                grad[lay.sib_b + r] += dp;
                let row = lay.sib_w + r * s.sibling_window * e;
                for (slot, &t) in inp.siblings.iter().enumerate() {
                    for q in 0..e {
                        grad[row + slot * e + q] += dp * w[lay.emb + t * e + q];
                        grad[lay.emb + t * e + q] += dp * w[row + slot * e + q];
                    }
                }
            }
            for r in 0..k {
                let dp = denc[3 * k + r];
                grad[lay.depth_b + r] += dp;
                grad[lay.depth_w + r] += dp * inp.depth;
            }
            for r in 0..k {
                let dp = denc[4 * k + r];
                grad[lay.sym_b + r] += dp;
                if let Some(sym) = inp.symbol {
                    grad[lay.sym_w + r * s.nonterminal_count + sym] += dp;
                }
            }
        }
        Ok(grad)
    }

    /// Plain ascent step `θ + α g`.
    pub fn ascend(&mut self, grad: &Gradient, learning_rate: f64) -> Result<(), PolicyError> {
        if grad.0.len() != self.data.len() {
            return Err(PolicyError::ShapeMismatch(grad.0.len(), self.data.len()));
        }
        for (p, g) in self.data.iter_mut().zip(&grad.0) {
            *p += learning_rate * g;
        }
        Ok(())
    }

    /// Versioned little-endian binary checkpoint.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), PolicyError> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let s = &self.shape;
        for v in [
            s.action_count,
            s.nonterminal_count,
            s.hidden,
            s.embedding,
            s.encoder,
            s.past_window,
            s.sibling_window,
            s.horizon,
            self.data.len(),
        ] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<PolicyParameters, PolicyError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(PolicyError::Checkpoint("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(PolicyError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        let mut next = |input: &mut R| -> Result<usize, PolicyError> {
            input.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8) as usize)
        };
        let shape = PolicyShape {
            action_count: next(&mut input)?,
            nonterminal_count: next(&mut input)?,
            hidden: next(&mut input)?,
            embedding: next(&mut input)?,
            encoder: next(&mut input)?,
            past_window: next(&mut input)?,
            sibling_window: next(&mut input)?,
            horizon: next(&mut input)?,
        };
        let len = next(&mut input)?;
        if Layout::new(&shape).total != len {
            return Err(PolicyError::Checkpoint("shape and data length disagree".into()));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            input.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        Ok(PolicyParameters { shape, data })
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"GGSRPOL\0";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Plain,
}

/// Gradient-ascent optimizer state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, learning_rate: f64, len: usize) -> Optimizer {
        Optimizer {
            kind,
            learning_rate,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Move the parameters uphill on the objective.
    pub fn step(&mut self, params: &mut PolicyParameters, grad: &Gradient) -> Result<(), PolicyError> {
        if grad.0.len() != params.len() || self.m.len() != params.len() {
            return Err(PolicyError::ShapeMismatch(grad.0.len(), params.len()));
        }
        match self.kind {
            OptimizerKind::Plain => params.ascend(grad, self.learning_rate),
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - Self::BETA1.powi(self.t);
                let bc2 = 1.0 - Self::BETA2.powi(self.t);
                for (i, p) in params.data.iter_mut().enumerate() {
                    let g = grad.0[i];
                    self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
                    self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
                    let mh = self.m[i] / bc1;
                    let vh = self.v[i] / bc2;
                    *p += self.learning_rate * mh / (vh.sqrt() + Self::EPS);
                }
                Ok(())
            }
        }
    }
}
