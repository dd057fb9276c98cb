use super::{Learner, Selection};
use crate::error::{BanditError, Result};
use crate::lifted::ActionSet;

/// Builds a fresh fixed-horizon learner for the given horizon.
pub type LearnerFactory = Box<dyn FnMut(u64) -> Result<Box<dyn Learner>> + Send>;

/// Anytime wrapper: epoch `k` covers rounds `2^k ..= 2^{k+1} − 1` and is
/// played by a fresh instance built with horizon `2^k`.
///
/// Rounds are counted only when `update` completes, so discarded rounds do
/// not advance the schedule.
pub struct Doubling {
    factory: LearnerFactory,
    current: Option<Box<dyn Learner>>,
    epoch: u32,
    completed: u64,
    instances: u64,
    pending: bool,
}

impl std::fmt::Debug for Doubling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Doubling")
            .field("epoch", &self.epoch)
            .field("completed", &self.completed)
            .field("instances", &self.instances)
            .finish()
    }
}

impl Doubling {
    pub fn new(factory: LearnerFactory) -> Self {
        Self {
            factory,
            current: None,
            epoch: 0,
            completed: 0,
            instances: 0,
            pending: false,
        }
    }

    /// Index `k` of the epoch containing round `t ≥ 1`.
    pub fn epoch_of(t: u64) -> u32 {
        63 - t.max(1).leading_zeros()
    }

    pub fn instances_created(&self) -> u64 {
        self.instances
    }

    pub fn completed_rounds(&self) -> u64 {
        self.completed
    }

    /// Horizon of the instance that will play the next round.
    pub fn current_horizon(&self) -> u64 {
        1u64 << Self::epoch_of(self.completed + 1)
    }

    fn ensure_instance(&mut self) -> Result<()> {
        let k = Self::epoch_of(self.completed + 1);
        if self.current.is_none() || k != self.epoch {
            self.current = Some((self.factory)(1u64 << k)?);
            self.epoch = k;
            self.instances += 1;
        }
        Ok(())
    }
}

impl Learner for Doubling {
    fn select(&mut self, set: &ActionSet) -> Result<Selection> {
        if self.pending {
            return Err(BanditError::PendingRound);
        }
        self.ensure_instance()?;
        let sel = self.current.as_mut().expect("instance exists").select(set)?;
        self.pending = true;
        Ok(sel)
    }

    fn update(&mut self, loss: f64) -> Result<()> {
        if !self.pending {
            return Err(BanditError::NoPendingRound);
        }
        self.current.as_mut().expect("instance exists").update(loss)?;
        self.pending = false;
        self.completed += 1;
        Ok(())
    }

    fn discard(&mut self) {
        if let Some(c) = self.current.as_mut() {
            c.discard();
        }
        self.pending = false;
    }

    fn name(&self) -> &'static str {
        "doubling"
    }
}
