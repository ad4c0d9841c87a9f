use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GrpoError;
use crate::scalar::Scalar;

/// Tabular n-gram softmax policy.
///
/// Logits are indexed by (context, token). A context is the last
/// `context_order` tokens of the history, left-padded with the beginning of
/// sequence marker `vocab_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy<T: Scalar> {
    vocab_size: usize,
    context_order: usize,
    logits: Vec<T>,
    pub seed: u64,
}

impl<T: Scalar> ToyPolicy<T> {
    /// All logits zero, so every context is uniform.
    pub fn uniform(vocab_size: usize, context_order: usize, seed: u64) -> Self {
        assert!(vocab_size > 0, "vocab_size must be positive");
        let n = Self::contexts_for(vocab_size, context_order) * vocab_size;
        Self { vocab_size, context_order, logits: vec![T::zero(); n], seed }
    }

    /// Logits drawn uniformly from `[-scale, scale]`.
    pub fn random(vocab_size: usize, context_order: usize, scale: f64, seed: u64) -> Self {
        let mut p = Self::uniform(vocab_size, context_order, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in &mut p.logits {
            *z = T::lit(rng.gen_range(-scale..=scale));
        }
        p
    }

    pub fn from_logits(vocab_size: usize, context_order: usize, logits: Vec<T>, seed: u64) -> Result<Self, GrpoError> {
        let expected = Self::contexts_for(vocab_size, context_order) * vocab_size;
        if logits.len() != expected {
            return Err(GrpoError::LengthMismatch(format!("logit table has {} entries, expected {expected}", logits.len())));
        }
        Ok(Self { vocab_size, context_order, logits, seed })
    }

    fn contexts_for(vocab_size: usize, order: usize) -> usize {
        (vocab_size + 1).pow(order as u32)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context_order(&self) -> usize {
        self.context_order
    }

    pub fn n_contexts(&self) -> usize {
        Self::contexts_for(self.vocab_size, self.context_order)
    }

    /// Padding token used before the start of a sequence.
    pub fn bos(&self) -> usize {
        self.vocab_size
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [T] {
        &mut self.logits
    }

    pub fn context_logits(&self, ctx: usize) -> &[T] {
        &self.logits[ctx * self.vocab_size..(ctx + 1) * self.vocab_size]
    }

    pub fn set_context_logits(&mut self, ctx: usize, z: &[T]) {
        assert_eq!(z.len(), self.vocab_size);
        self.logits[ctx * self.vocab_size..(ctx + 1) * self.vocab_size].copy_from_slice(z);
    }

    /// Context index for the next token after `history`.
    pub fn context_of(&self, history: &[usize]) -> usize {
        let k = self.context_order;
        (0..k).fold(0, |idx, j| {
            let pos = history.len() as isize - k as isize + j as isize;
            let tok = if pos < 0 { self.bos() } else { history[pos as usize] };
            idx * (self.vocab_size + 1) + tok
        })
    }

    pub fn probs(&self, ctx: usize) -> Vec<T> {
        softmax(self.context_logits(ctx))
    }

    pub fn log_prob(&self, ctx: usize, token: usize) -> T {
        let z = self.context_logits(ctx);
        z[token] - logsumexp(z)
    }

    /// Per-token log-probabilities of `seq` continuing `prompt`.
    pub fn token_logprobs(&self, prompt: &[usize], seq: &[usize]) -> Vec<T> {
        let mut history = prompt.to_vec();
        seq.iter()
            .map(|&tok| {
                let lp = self.log_prob(self.context_of(&history), tok);
                history.push(tok);
                lp
            })
            .collect()
    }

    pub fn sequence_logprob(&self, prompt: &[usize], seq: &[usize]) -> T {
        self.token_logprobs(prompt, seq).into_iter().fold(T::zero(), |a, b| a + b)
    }

    /// Inverse-CDF draw: `u = rng.gen::<f64>()`, then the first token whose
    /// cumulative probability exceeds `u`.
    pub fn sample_token<R: Rng>(&self, ctx: usize, rng: &mut R) -> usize {
        let p = self.probs(ctx);
        let u = rng.gen::<f64>();
        let mut cum = 0.0;
        let mut last = 0;
        for (b, pb) in p.iter().enumerate() {
            let pb = pb.to_f64().unwrap_or(0.0);
            if pb <= 0.0 {
                continue;
            }
            cum += pb;
            last = b;
            if u < cum {
                return b;
            }
        }
        last
    }

    pub(super) fn check_tokens(&self, tokens: &[usize]) -> Result<(), GrpoError> {
        match tokens.iter().find(|&&t| t >= self.vocab_size) {
            Some(&token) => Err(GrpoError::TokenOutOfRange { token, vocab: self.vocab_size }),
            None => Ok(()),
        }
    }
}

pub fn logsumexp<T: Scalar>(z: &[T]) -> T {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + z.iter().map(|&v| (v - m).exp()).fold(T::zero(), |a, b| a + b).ln()
}

pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s = e.iter().copied().fold(T::zero(), |a, b| a + b);
    e.into_iter().map(|v| v / s).collect()
}
