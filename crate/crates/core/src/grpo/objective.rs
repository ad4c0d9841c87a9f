use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::policy::ToyPolicy;
use super::GrpoError;
use crate::scalar::Scalar;

/// Advantages are zeroed when the group's reward spread is below this.
pub const STD_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrpoHyperparams<T> {
    pub epsilon: T,
    pub beta: T,
    pub group_size: usize,
    pub learning_rate: T,
}

impl<T: Scalar> Default for GrpoHyperparams<T> {
    fn default() -> Self {
        Self { epsilon: T::lit(0.2), beta: T::lit(0.001), group_size: 8, learning_rate: T::lit(1.0) }
    }
}

impl<T: Scalar> GrpoHyperparams<T> {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if !(self.epsilon > T::zero()) {
            return Err(GrpoError::InvalidHyperparams(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.beta >= T::zero()) {
            return Err(GrpoError::InvalidHyperparams(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.group_size < 2 {
            return Err(GrpoError::InvalidHyperparams(format!("group size must be >= 2, got {}", self.group_size)));
        }
        if !self.learning_rate.is_finite() {
            return Err(GrpoError::InvalidHyperparams("learning rate must be finite".into()));
        }
        Ok(())
    }
}

/// G sampled continuations of one prompt with their per-token statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutGroup<T> {
    pub prompt_id: String,
    pub prompt: Vec<usize>,
    pub sequences: Vec<Vec<usize>>,
    pub logp_current: Vec<Vec<T>>,
    pub logp_old: Vec<Vec<T>>,
    pub logp_ref: Vec<Vec<T>>,
    /// Empty until scored.
    pub rewards: Vec<T>,
    /// Empty until normalized; then one value per token.
    pub advantages: Vec<Vec<T>>,
}

impl<T: Scalar> RolloutGroup<T> {
    pub fn group_size(&self) -> usize {
        self.sequences.len()
    }

    pub fn with_rewards(mut self, rewards: Vec<T>) -> Result<Self, GrpoError> {
        if rewards.len() != self.group_size() {
            return Err(GrpoError::LengthMismatch(format!(
                "{} rewards for a group of {}",
                rewards.len(),
                self.group_size()
            )));
        }
        self.rewards = rewards;
        Ok(self)
    }

    /// Recompute reference log-probabilities under a frozen policy.
    pub fn set_reference(&mut self, reference: &ToyPolicy<T>) {
        self.logp_ref = self.sequences.iter().map(|s| reference.token_logprobs(&self.prompt, s)).collect();
    }

    pub fn set_old(&mut self, old: &ToyPolicy<T>) {
        self.logp_old = self.sequences.iter().map(|s| old.token_logprobs(&self.prompt, s)).collect();
    }

    pub fn refresh_current(&mut self, policy: &ToyPolicy<T>) {
        self.logp_current = self.sequences.iter().map(|s| policy.token_logprobs(&self.prompt, s)).collect();
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        let g = self.group_size();
        let tables = [("logp_current", &self.logp_current), ("logp_old", &self.logp_old), ("logp_ref", &self.logp_ref)];
        for (name, table) in tables {
            if table.len() != g || table.iter().zip(&self.sequences).any(|(a, s)| a.len() != s.len()) {
                return Err(GrpoError::LengthMismatch(format!("{name} not aligned with sequences")));
            }
        }
        if !self.advantages.is_empty()
            && (self.advantages.len() != g || self.advantages.iter().zip(&self.sequences).any(|(a, s)| a.len() != s.len()))
        {
            return Err(GrpoError::LengthMismatch("advantages not aligned with sequences".into()));
        }
        Ok(())
    }

    fn require_advantages(&self) -> Result<(), GrpoError> {
        self.validate()?;
        if self.advantages.is_empty() {
            return Err(GrpoError::AdvantagesUnset);
        }
        Ok(())
    }
}

/// Samples `group_size` independent sequences of `max_len` tokens.
///
/// One `ChaCha8Rng` seeded with `seed` drives every draw in order
/// (sequence-major, then token), each draw via [`ToyPolicy::sample_token`].
/// Old and reference log-probabilities start equal to the sampling ones.
pub fn rollout_group<T: Scalar>(
    policy: &ToyPolicy<T>,
    prompt: &[usize],
    group_size: usize,
    max_len: usize,
    seed: u64,
) -> RolloutGroup<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sequences = Vec::with_capacity(group_size);
    let mut logps = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let mut history = prompt.to_vec();
        let mut lp = Vec::with_capacity(max_len);
        for _ in 0..max_len {
            let ctx = policy.context_of(&history);
            let tok = policy.sample_token(ctx, &mut rng);
            lp.push(policy.log_prob(ctx, tok));
            history.push(tok);
        }
        sequences.push(history[prompt.len()..].to_vec());
        logps.push(lp);
    }
    RolloutGroup {
        prompt_id: prompt.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
        prompt: prompt.to_vec(),
        sequences,
        logp_old: logps.clone(),
        logp_ref: logps.clone(),
        logp_current: logps,
        rewards: Vec::new(),
        advantages: Vec::new(),
    }
}

/// (R_i - mean) / population std, or all zeros when the std is under the guard.
pub fn group_advantages<T: Scalar>(rewards: &[T]) -> Vec<T> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = T::from_usize_lossy(rewards.len());
    let mean = rewards.iter().copied().fold(T::zero(), |a, b| a + b) / n;
    let var = rewards.iter().map(|&r| (r - mean) * (r - mean)).fold(T::zero(), |a, b| a + b) / n;
    let std = var.sqrt();
    if std < T::lit(STD_GUARD) {
        return vec![T::zero(); rewards.len()];
    }
    rewards.iter().map(|&r| (r - mean) / std).collect()
}

pub fn normalize_advantages<T: Scalar>(mut group: RolloutGroup<T>) -> Result<RolloutGroup<T>, GrpoError> {
    if group.rewards.len() != group.group_size() {
        return Err(GrpoError::RewardsUnset);
    }
    let adv = group_advantages(&group.rewards);
    group.advantages = group.sequences.iter().zip(adv).map(|(s, a)| vec![a; s.len()]).collect();
    Ok(group)
}

fn clip<T: Scalar>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}

/// Per-token clipped surrogate and its derivative w.r.t. the current log-probability.
fn surrogate_token<T: Scalar>(logp: T, logp_old: T, adv: T, eps: T) -> (T, T) {
    let rho = (logp - logp_old).exp();
    let unclipped = rho * adv;
    let clipped = clip(rho, T::one() - eps, T::one() + eps) * adv;
    if unclipped <= clipped {
        (unclipped, unclipped)
    } else {
        (clipped, T::zero())
    }
}

/// `r - 1 - ln r` with `r = exp(logp_ref - logp)`, and its derivative `1 - r`.
fn kl_token<T: Scalar>(logp: T, logp_ref: T) -> (T, T) {
    let d = logp_ref - logp;
    (d.exp_m1() - d, T::one() - d.exp())
}

/// Per-token KL estimate.
pub fn kl_estimate<T: Scalar>(logp_current: T, logp_ref: T) -> T {
    kl_token(logp_current, logp_ref).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlEstimate<T> {
    pub per_token: Vec<T>,
    pub mean: T,
}

pub fn kl_penalty<T: Scalar>(logp_current: &[T], logp_ref: &[T]) -> Result<KlEstimate<T>, GrpoError> {
    if logp_current.len() != logp_ref.len() {
        return Err(GrpoError::LengthMismatch(format!(
            "{} current vs {} reference log-probabilities",
            logp_current.len(),
            logp_ref.len()
        )));
    }
    let per_token: Vec<T> = logp_current.iter().zip(logp_ref).map(|(&c, &r)| kl_estimate(c, r)).collect();
    let mean = if per_token.is_empty() {
        T::zero()
    } else {
        per_token.iter().copied().fold(T::zero(), |a, b| a + b) / T::from_usize_lossy(per_token.len())
    };
    Ok(KlEstimate { per_token, mean })
}

/// (1/G) Σ_i (1/|o_i|) Σ_t min(ρÂ, clip(ρ, 1-ε, 1+ε)Â) over the group's stored log-probabilities.
pub fn clipped_surrogate<T: Scalar>(group: &RolloutGroup<T>, epsilon: T) -> Result<T, GrpoError> {
    group.require_advantages()?;
    let mut total = T::zero();
    for i in 0..group.group_size() {
        let n = group.sequences[i].len();
        if n == 0 {
            continue;
        }
        let s = (0..n)
            .map(|t| surrogate_token(group.logp_current[i][t], group.logp_old[i][t], group.advantages[i][t], epsilon).0)
            .fold(T::zero(), |a, b| a + b);
        total = total + s / T::from_usize_lossy(n);
    }
    Ok(total / T::from_usize_lossy(group.group_size().max(1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue<T> {
    /// Surrogate minus β times KL.
    pub objective: T,
    pub surrogate: T,
    /// KL averaged with the same per-sequence weighting as the objective.
    pub mean_kl: T,
}

/// Full objective with `logp_current` recomputed from `policy`.
pub fn objective<T: Scalar>(
    policy: &ToyPolicy<T>,
    groups: &[RolloutGroup<T>],
    hp: &GrpoHyperparams<T>,
) -> Result<ObjectiveValue<T>, GrpoError> {
    evaluate(policy, groups, hp, false).map(|(v, _)| v)
}

/// Objective value and its gradient w.r.t. every logit of `policy`.
pub fn objective_gradient<T: Scalar>(
    policy: &ToyPolicy<T>,
    groups: &[RolloutGroup<T>],
    hp: &GrpoHyperparams<T>,
) -> Result<(ObjectiveValue<T>, Vec<T>), GrpoError> {
    evaluate(policy, groups, hp, true)
}

fn evaluate<T: Scalar>(
    policy: &ToyPolicy<T>,
    groups: &[RolloutGroup<T>],
    hp: &GrpoHyperparams<T>,
    with_grad: bool,
) -> Result<(ObjectiveValue<T>, Vec<T>), GrpoError> {
    let v = policy.vocab_size();
    let mut grad = if with_grad { vec![T::zero(); policy.logits().len()] } else { Vec::new() };
    let (mut sur, mut kl) = (T::zero(), T::zero());
    let n_groups = T::from_usize_lossy(groups.len().max(1));
    for g in groups {
        g.require_advantages()?;
        let gs = T::from_usize_lossy(g.group_size().max(1));
        for (i, seq) in g.sequences.iter().enumerate() {
            policy.check_tokens(seq)?;
            if seq.is_empty() {
                continue;
            }
            let w = T::one() / (n_groups * gs * T::from_usize_lossy(seq.len()));
            let mut history = g.prompt.clone();
            for (t, &tok) in seq.iter().enumerate() {
                let ctx = policy.context_of(&history);
                let logp = policy.log_prob(ctx, tok);
                let (s, ds) = surrogate_token(logp, g.logp_old[i][t], g.advantages[i][t], hp.epsilon);
                let (k, dk) = kl_token(logp, g.logp_ref[i][t]);
                sur = sur + w * s;
                kl = kl + w * k;
                if with_grad {
                    let coef = w * (ds - hp.beta * dk);
                    if coef != T::zero() {
                        let p = policy.probs(ctx);
                        for (b, pb) in p.into_iter().enumerate() {
                            let ind = if b == tok { T::one() } else { T::zero() };
                            grad[ctx * v + b] = grad[ctx * v + b] + coef * (ind - pb);
                        }
                    }
                }
                history.push(tok);
            }
        }
    }
    Ok((ObjectiveValue { objective: sur - hp.beta * kl, surrogate: sur, mean_kl: kl }, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport<T> {
    pub objective: T,
    pub mean_reward: T,
    pub mean_kl: T,
    pub grad_norm: T,
}

/// One plain gradient-ascent step on the objective.
pub fn grpo_step<T: Scalar>(
    policy: &ToyPolicy<T>,
    groups: &[RolloutGroup<T>],
    hp: &GrpoHyperparams<T>,
) -> Result<(ToyPolicy<T>, StepReport<T>), GrpoError> {
    hp.validate()?;
    let (value, grad) = objective_gradient(policy, groups, hp)?;
    let mut next = policy.clone();
    for (z, g) in next.logits_mut().iter_mut().zip(&grad) {
        *z = *z + hp.learning_rate * *g;
    }
    let rewards: Vec<T> = groups.iter().flat_map(|g| g.rewards.iter().copied()).collect();
    let mean_reward = if rewards.is_empty() {
        T::zero()
    } else {
        rewards.iter().copied().fold(T::zero(), |a, b| a + b) / T::from_usize_lossy(rewards.len())
    };
    let grad_norm = grad.iter().map(|&g| g * g).fold(T::zero(), |a, b| a + b).sqrt();
    Ok((next, StepReport { objective: value.objective, mean_reward, mean_kl: value.mean_kl, grad_norm }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn single(rho: f64, adv: f64) -> RolloutGroup<f64> {
        RolloutGroup {
            prompt_id: String::new(),
            prompt: vec![],
            sequences: vec![vec![0]],
            logp_current: vec![vec![rho.ln()]],
            logp_old: vec![vec![0.0]],
            logp_ref: vec![vec![0.0]],
            rewards: vec![0.0],
            advantages: vec![vec![adv]],
        }
    }

    #[test]
    fn clip_examples() {
        assert!((clipped_surrogate(&single(1.5, 1.0), 0.2).unwrap() - 1.2).abs() < 1e-12);
        assert!((clipped_surrogate(&single(0.5, -1.0), 0.2).unwrap() + 0.8).abs() < 1e-12);
    }

    #[test]
    fn advantage_examples() {
        let a = group_advantages(&[1.0, 0.5, 0.5, 0.0]);
        let expect = [2f64.sqrt(), 0.0, 0.0, -(2f64.sqrt())];
        for (x, y) in a.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12, "{a:?}");
        }
        assert_eq!(group_advantages(&[0.7; 5]), vec![0.0; 5]);
        assert_eq!(group_advantages(&[1.0, 0.0]), vec![1.0, -1.0]);
    }

    #[test]
    fn kl_examples() {
        let same = kl_penalty(&[-0.3, -1.2], &[-0.3, -1.2]).unwrap();
        assert_eq!(same.per_token, vec![0.0, 0.0]);
        let one = kl_penalty(&[-2.0], &[-1.0]).unwrap();
        assert!((one.per_token[0] - (std::f64::consts::E - 2.0)).abs() < 1e-12);
        assert!(kl_penalty(&[0.0], &[]).is_err());
    }

    #[test]
    fn rho_one_gives_mean_advantage() {
        let p = ToyPolicy::<f64>::random(3, 1, 1.0, 5);
        let g = rollout_group(&p, &[], 4, 3, 9).with_rewards(vec![1.0, 0.0, 0.3, 0.3]).unwrap();
        let g = normalize_advantages(g).unwrap();
        assert!(clipped_surrogate(&g, 0.2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rollout_determinism_and_onehot() {
        let p = ToyPolicy::<f64>::random(5, 2, 2.0, 1);
        assert_eq!(rollout_group(&p, &[1], 8, 6, 42), rollout_group(&p, &[1], 8, 6, 42));
        let mut det = ToyPolicy::<f64>::uniform(3, 1, 0);
        for ctx in 0..det.n_contexts() {
            det.set_context_logits(ctx, &[f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0]);
        }
        let g = rollout_group(&det, &[], 8, 4, 7);
        assert!(g.sequences.iter().all(|s| s == &g.sequences[0]));
    }

    #[test]
    fn sampler_matches_documented_algorithm() {
        let p = ToyPolicy::<f64>::uniform(2, 1, 0);
        for seed in 0..20 {
            let g = rollout_group(&p, &[], 2, 1, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let expect: Vec<Vec<usize>> =
                (0..2).map(|_| vec![if rng.gen::<f64>() < 0.5 { 0 } else { 1 }]).collect();
            assert_eq!(g.sequences, expect);
        }
    }

    #[test]
    fn zero_advantage_zero_beta_is_fixed_point() {
        let p = ToyPolicy::<f64>::random(3, 1, 1.0, 2);
        let g = normalize_advantages(rollout_group(&p, &[], 4, 3, 1).with_rewards(vec![0.5; 4]).unwrap()).unwrap();
        let hp = GrpoHyperparams { beta: 0.0, ..Default::default() };
        let (next, _) = grpo_step(&p, &[g], &hp).unwrap();
        assert_eq!(next, p);
    }

    #[test]
    fn best_sequence_gains_probability() {
        let p = ToyPolicy::<f64>::uniform(3, 1, 0);
        let g = rollout_group(&p, &[], 4, 3, 11);
        let best = 2;
        let rewards = (0..4).map(|i| if i == best { 1.0 } else { 0.0 }).collect();
        let g = normalize_advantages(g.with_rewards(rewards).unwrap()).unwrap();
        let hp = GrpoHyperparams { beta: 0.0, learning_rate: 0.5, ..Default::default() };
        let (next, _) = grpo_step(&p, std::slice::from_ref(&g), &hp).unwrap();
        let seq = &g.sequences[best];
        let before = p.token_logprobs(&[], seq);
        let after = next.token_logprobs(&[], seq);
        assert!(p.sequence_logprob(&[], seq) < next.sequence_logprob(&[], seq));
        assert!(before.iter().zip(&after).any(|(b, a)| a > b));
    }

    #[test]
    fn clip_saturation_has_zero_gradient() {
        let (_, d) = surrogate_token(1.6f64.ln(), 0.0, 1.0, 0.2);
        assert_eq!(d, 0.0);
        let (_, d) = surrogate_token(0.5f64.ln(), 0.0, -1.0, 0.2);
        assert_eq!(d, 0.0);
        let (_, d) = surrogate_token(1.1f64.ln(), 0.0, 1.0, 0.2);
        assert!((d - 1.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn advantages_standardized(rewards in proptest::collection::vec(0.0f64..=1.0, 2..16)) {
            let a = group_advantages(&rewards);
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            if a.iter().any(|x| *x != 0.0) {
                let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn kl_nonnegative(a in -20.0f64..0.0, b in -20.0f64..0.0) {
            let k = kl_estimate(a, b);
            prop_assert!(k >= 0.0);
            if a == b { prop_assert_eq!(k, 0.0); }
        }
    }
}
