//! Group-relative policy optimisation at toy scale: a tabular softmax
//! policy, group rollouts, advantage normalization, the clipped surrogate
//! with a per-token KL penalty, and analytic gradients.

mod lm;
mod objective;
mod policy;
mod toy;

use thiserror::Error;

pub use lm::{lm_cross_entropy, sft_cross_entropy, CrossEntropy};
pub use objective::{
    clipped_surrogate, group_advantages, grpo_step, kl_estimate, kl_penalty, normalize_advantages, objective,
    objective_gradient, rollout_group, GrpoHyperparams, KlEstimate, ObjectiveValue, RolloutGroup, StepReport,
    STD_GUARD,
};
pub use policy::{logsumexp, softmax, ToyPolicy};
pub use toy::{expected_reward, train_toy, CeiTask, CurvePoint, ToyEnv, TrainConfig, TrainingCurve};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrpoError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("empty window set")]
    EmptyWindows,
    #[error("token {token} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("group rewards not set")]
    RewardsUnset,
    #[error("group advantages not normalized")]
    AdvantagesUnset,
}

/// A random instance for gradient checks: `policy` plus scored groups whose
/// old/reference log-probabilities are perturbed away from the policy so the
/// clip and KL terms are active. Ratios are kept at least `margin` away from
/// the clip boundaries, where the objective is not differentiable.
pub fn random_instance(seed: u64, epsilon: f64, margin: f64) -> (ToyPolicy<f64>, Vec<RolloutGroup<f64>>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vocab = rng.gen_range(2..5);
    let order = rng.gen_range(1..3);
    let policy = ToyPolicy::<f64>::random(vocab, order, 1.5, rng.gen());
    let n_groups = rng.gen_range(1..3);
    let groups = (0..n_groups)
        .map(|_| {
            let g = rng.gen_range(2..5);
            let len = rng.gen_range(1..5);
            let prompt: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(0..vocab)).collect();
            let mut group = rollout_group(&policy, &prompt, g, len, rng.gen());
            for (cur, (old, rf)) in group.logp_current.iter().zip(group.logp_old.iter_mut().zip(group.logp_ref.iter_mut())) {
                for t in 0..cur.len() {
                    loop {
                        let shift: f64 = rng.gen_range(-0.6..0.6);
                        let rho = (-shift).exp();
                        if (rho - (1.0 + epsilon)).abs() > margin && (rho - (1.0 - epsilon)).abs() > margin {
                            old[t] = cur[t] + shift;
                            break;
                        }
                    }
                    rf[t] = cur[t] + rng.gen_range(-1.0..1.0);
                }
            }
            let rewards = (0..g).map(|_| rng.gen_range(0.0..1.0)).collect();
            normalize_advantages(group.with_rewards(rewards).expect("sized")).expect("scored")
        })
        .collect();
    (policy, groups)
}

/// Largest componentwise relative error between the analytic gradient and
/// central differences with step `h`. Components where both are below
/// `floor` in magnitude are compared on the absolute scale `floor`.
pub fn gradient_check(policy: &ToyPolicy<f64>, groups: &[RolloutGroup<f64>], hp: &GrpoHyperparams<f64>, h: f64, floor: f64) -> f64 {
    let (_, analytic) = objective_gradient(policy, groups, hp).expect("valid instance");
    let mut worst: f64 = 0.0;
    for k in 0..analytic.len() {
        let mut plus = policy.clone();
        plus.logits_mut()[k] += h;
        let mut minus = policy.clone();
        minus.logits_mut()[k] -= h;
        let fp = objective(&plus, groups, hp).expect("valid").objective;
        let fm = objective(&minus, groups, hp).expect("valid").objective;
        let numeric = (fp - fm) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let hp = GrpoHyperparams { beta: 0.04, ..Default::default() };
        for seed in 0..25 {
            let (p, groups) = random_instance(seed, hp.epsilon, 1e-3);
            let err = gradient_check(&p, &groups, &hp, 1e-4, 1e-6);
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }

    #[test]
    fn toy_training_improves() {
        let env = CeiTask::default();
        let hp = GrpoHyperparams::<f64>::default();
        let (_, curve) = train_toy(&env, &hp, &TrainConfig::default()).unwrap();
        let gain = curve.final_expected_reward() - curve.initial_expected_reward;
        assert!(gain >= 0.2, "gain {gain}");
    }
}
