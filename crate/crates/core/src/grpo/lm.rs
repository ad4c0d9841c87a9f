use serde::Serialize;

use super::policy::ToyPolicy;
use super::GrpoError;
use crate::scalar::Scalar;

/// Summed negative log-likelihood with both normalizations available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossEntropy<T> {
    pub nll_sum: T,
    pub sequences: usize,
    pub tokens: usize,
}

impl<T: Scalar> CrossEntropy<T> {
    /// Sum divided by the number of sequences (windows or pairs).
    pub fn per_sequence(&self) -> T {
        self.nll_sum / T::from_usize_lossy(self.sequences)
    }

    /// Sum divided by the number of scored tokens.
    pub fn per_token(&self) -> T {
        self.nll_sum / T::from_usize_lossy(self.tokens)
    }
}

/// Left-to-right language-modelling loss over whole windows.
pub fn lm_cross_entropy<T: Scalar>(policy: &ToyPolicy<T>, windows: &[Vec<usize>]) -> Result<CrossEntropy<T>, GrpoError> {
    let pairs: Vec<(&[usize], &[usize])> = windows.iter().map(|w| (&[][..], w.as_slice())).collect();
    masked(policy, &pairs)
}

/// Response-only loss: each prompt conditions its response but is not scored.
pub fn sft_cross_entropy<T: Scalar>(
    policy: &ToyPolicy<T>,
    pairs: &[(Vec<usize>, Vec<usize>)],
) -> Result<CrossEntropy<T>, GrpoError> {
    let pairs: Vec<(&[usize], &[usize])> = pairs.iter().map(|(p, r)| (p.as_slice(), r.as_slice())).collect();
    masked(policy, &pairs)
}

fn masked<T: Scalar>(policy: &ToyPolicy<T>, pairs: &[(&[usize], &[usize])]) -> Result<CrossEntropy<T>, GrpoError> {
    if pairs.is_empty() {
        return Err(GrpoError::EmptyWindows);
    }
    let mut nll = T::zero();
    let mut tokens = 0;
    for (prompt, resp) in pairs {
        policy.check_tokens(prompt)?;
        policy.check_tokens(resp)?;
        nll = nll - policy.sequence_logprob(prompt, resp);
        tokens += resp.len();
    }
    if tokens == 0 {
        return Err(GrpoError::EmptyWindows);
    }
    Ok(CrossEntropy { nll_sum: nll, sequences: pairs.len(), tokens })
}
