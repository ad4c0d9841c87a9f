//! Synthetic checks-effects-interactions task and the toy training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::objective::{grpo_step, normalize_advantages, rollout_group, GrpoHyperparams};
use super::policy::ToyPolicy;
use super::GrpoError;
use crate::reward::RewardConfig;
use crate::scalar::Scalar;

/// A reward over fixed-length token sequences.
pub trait ToyEnv: Sync {
    fn vocab_size(&self) -> usize;
    fn seq_len(&self) -> usize;
    fn reward(&self, seq: &[usize]) -> f64;
}

/// Tokens: guard (a `require`), effect (a state write), interaction (an
/// external call), and two fillers.
///
/// * compile: the sequence contains an effect.
/// * security: a guard appears before the first effect and no interaction does.
/// * format: an interaction follows the first effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeiTask {
    pub seq_len: usize,
    pub weights: RewardConfig<f64>,
}

impl CeiTask {
    pub const GUARD: usize = 0;
    pub const EFFECT: usize = 1;
    pub const INTERACT: usize = 2;
    pub const VOCAB: usize = 5;

    pub fn new(seq_len: usize) -> Self {
        Self { seq_len, weights: RewardConfig::default() }
    }

    /// Binary (compile, security, format) scores.
    pub fn checks(seq: &[usize]) -> (u8, u8, u8) {
        let effect = seq.iter().position(|&t| t == Self::EFFECT);
        let before = &seq[..effect.unwrap_or(seq.len())];
        let compile = effect.is_some();
        let security = before.contains(&Self::GUARD) && !before.contains(&Self::INTERACT);
        let format = effect.is_some_and(|e| seq[e + 1..].contains(&Self::INTERACT));
        (u8::from(compile), u8::from(security), u8::from(format))
    }
}

impl Default for CeiTask {
    fn default() -> Self {
        Self::new(4)
    }
}

impl ToyEnv for CeiTask {
    fn vocab_size(&self) -> usize {
        Self::VOCAB
    }

    fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn reward(&self, seq: &[usize]) -> f64 {
        let (c, s, f) = Self::checks(seq);
        self.weights.total(c, s, f)
    }
}

/// Exact expected reward of `policy` on an empty prompt, by enumeration.
pub fn expected_reward<T: Scalar, E: ToyEnv>(policy: &ToyPolicy<T>, env: &E) -> f64 {
    let v = env.vocab_size();
    let l = env.seq_len();
    let mut total = 0.0;
    let mut seq = vec![0usize; l];
    for code in 0..v.pow(l as u32) {
        let mut c = code;
        for slot in seq.iter_mut().rev() {
            *slot = c % v;
            c /= v;
        }
        let p = policy.sequence_logprob(&[], &seq).exp().to_f64().unwrap_or(0.0);
        if p > 0.0 {
            total += p * env.reward(&seq);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub groups_per_step: usize,
    pub context_order: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, groups_per_step: 4, context_order: 1, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub epoch: usize,
    /// Mean sampled reward of the epoch's rollouts.
    pub mean_reward: f64,
    pub objective: f64,
    pub mean_kl: f64,
    /// Exact expected reward of the policy after the epoch's step.
    pub expected_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingCurve {
    pub initial_expected_reward: f64,
    pub points: Vec<CurvePoint>,
}

impl TrainingCurve {
    pub fn final_expected_reward(&self) -> f64 {
        self.points.last().map_or(self.initial_expected_reward, |p| p.expected_reward)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.points {
            w.serialize(p).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }
}

/// Runs rollout, scoring, normalization and one update per epoch from a
/// uniform policy. The reference policy is the initial one, frozen.
pub fn train_toy<T: Scalar, E: ToyEnv>(
    env: &E,
    hp: &GrpoHyperparams<T>,
    config: &TrainConfig,
) -> Result<(ToyPolicy<T>, TrainingCurve), GrpoError> {
    hp.validate()?;
    let mut policy = ToyPolicy::<T>::uniform(env.vocab_size(), config.context_order, config.seed);
    let reference = policy.clone();
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = expected_reward(&policy, env);
    let mut points = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let seeds: Vec<u64> = (0..config.groups_per_step).map(|_| master.gen()).collect();
        let groups = seeds
            .par_iter()
            .map(|&s| {
                let mut g = rollout_group(&policy, &[], hp.group_size, env.seq_len(), s);
                g.set_reference(&reference);
                let rewards = g.sequences.iter().map(|seq| T::lit(env.reward(seq))).collect();
                normalize_advantages(g.with_rewards(rewards)?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (next, report) = grpo_step(&policy, &groups, hp)?;
        policy = next;
        points.push(CurvePoint {
            epoch,
            mean_reward: report.mean_reward.to_f64().unwrap_or(f64::NAN),
            objective: report.objective.to_f64().unwrap_or(f64::NAN),
            mean_kl: report.mean_kl.to_f64().unwrap_or(f64::NAN),
            expected_reward: expected_reward(&policy, env),
        });
    }
    Ok((policy, TrainingCurve { initial_expected_reward: initial, points }))
}
