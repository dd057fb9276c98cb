//! Bandit learners driven one round at a time: `select` on the revealed
//! action set, then `update` with the realized loss.

mod doubling;
mod exp4;
mod logdet_ftrl;
mod uniform;

pub use doubling::{Doubling, LearnerFactory};
pub use exp4::{build_linear_policy_net, Exp4, Exp4Config, LinearPolicy, Policy, DEFAULT_POLICY_CAP};
pub use logdet_ftrl::{LogdetFtrl, LogdetFtrlConfig, SolverStats};
pub use uniform::UniformRandom;

use rand::Rng;

use crate::error::Result;
use crate::lifted::{ActionDistribution, ActionSet};

/// One round's decision: the distribution played and the sampled index.
#[derive(Debug, Clone)]
pub struct Selection {
    pub distribution: ActionDistribution,
    pub index: usize,
}

pub trait Learner: Send {
    /// Choose an action on `set`. Must be followed by exactly one of
    /// [`Learner::update`] or [`Learner::discard`].
    fn select(&mut self, set: &ActionSet) -> Result<Selection>;

    /// Feed back the realized loss `ℓ ∈ [−1, 1]` of the selected action.
    fn update(&mut self, loss: f64) -> Result<()>;

    /// Drop the pending round without learning from it.
    fn discard(&mut self);

    fn name(&self) -> &'static str;
}

pub(crate) const LOSS_TOL: f64 = 1e-9;

pub(crate) fn check_loss(loss: f64) -> Result<()> {
    if !(loss.abs() <= 1.0 + LOSS_TOL) {
        return Err(crate::BanditError::LossOutOfRange(loss));
    }
    Ok(())
}

/// Inverse-CDF draw from nonnegative weights, accumulated with compensated
/// summation. Falls back to the last positive weight on round-off.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let (mut acc, mut comp) = (0.0_f64, 0.0_f64);
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last_positive = i;
        let y = w - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        if u < acc {
            return i;
        }
    }
    last_positive
}
