//! Model selection over unknown misspecification: a probability-revealing
//! feedback protocol, the STABILISE wrapper that equalizes feedback rates
//! across sub-instances, and a log-barrier Corral master.

mod corral;
mod stabilise;

pub use corral::{clamped_log_barrier_weights, Corral, CorralConfig, FixedActionArm};
pub use stabilise::{forward_probability, route, theta, Route, Stabilise, SubLearnerFactory};

use crate::algorithms::Selection;
use crate::error::Result;
use crate::lifted::ActionSet;

/// A learner under the protocol where, each round, a probability `w` is
/// revealed before acting and feedback arrives only with probability `w`.
pub trait ProtocolArm: Send {
    fn select(&mut self, w: f64, set: &ActionSet) -> Result<Selection>;

    /// Close the round: `Some(loss)` if feedback was received, `None` otherwise.
    fn receive(&mut self, loss: Option<f64>) -> Result<()>;
}
