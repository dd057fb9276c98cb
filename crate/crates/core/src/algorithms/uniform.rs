use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_loss, Learner, Selection};
use crate::error::{BanditError, Result};
use crate::lifted::{ActionDistribution, ActionSet};

/// Baseline that plays a uniformly random action and ignores feedback.
#[derive(Debug)]
pub struct UniformRandom {
    rng: ChaCha8Rng,
    pending: bool,
}

impl UniformRandom {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: false,
        }
    }
}

impl Learner for UniformRandom {
    fn select(&mut self, set: &ActionSet) -> Result<Selection> {
        if self.pending {
            return Err(BanditError::PendingRound);
        }
        let distribution = ActionDistribution::uniform(set.len());
        let index = super::sample_index(distribution.weights(), &mut self.rng);
        self.pending = true;
        Ok(Selection {
            distribution,
            index,
        })
    }

    fn update(&mut self, loss: f64) -> Result<()> {
        check_loss(loss)?;
        if !self.pending {
            return Err(BanditError::NoPendingRound);
        }
        self.pending = false;
        Ok(())
    }

    fn discard(&mut self) {
        self.pending = false;
    }

    fn name(&self) -> &'static str {
        "uniform_random"
    }
}
