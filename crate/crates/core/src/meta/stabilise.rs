use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProtocolArm;
use crate::algorithms::{Learner, Selection};
use crate::error::{BanditError, Result};
use crate::lifted::{ActionDistribution, ActionSet};

/// `θ_j = 2^{−j}εT + 4√(2^{−j}T ln T) + 8 ln T`.
pub fn theta(j: u32, epsilon: f64, horizon: u64) -> f64 {
    let t = horizon as f64;
    let scale = 0.5_f64.powi(j as i32);
    let ln_t = t.ln();
    scale * epsilon * t + 4.0 * (scale * t * ln_t).sqrt() + 8.0 * ln_t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// `w ≤ 1/T`: play anything, update nothing.
    Skip,
    /// Bucket `j` with `w ∈ (2^{−j−1}, 2^{−j}]`.
    Instance(u32),
}

pub fn route(w: f64, horizon: u64) -> Result<Route> {
    if !(0.0..=1.0).contains(&w) {
        return Err(BanditError::InvalidProbability(w));
    }
    if w <= 1.0 / horizon as f64 {
        return Ok(Route::Skip);
    }
    // smallest j with 2^{−j−1} < w
    let mut j = 0u32;
    while 0.5_f64.powi(j as i32 + 1) >= w {
        j += 1;
    }
    Ok(Route::Instance(j))
}

/// `2^{−j−1}/w`, the probability of forwarding received feedback.
pub fn forward_probability(w: f64, j: u32) -> f64 {
    (0.5_f64.powi(j as i32 + 1) / w).min(1.0)
}

/// Builds sub-instance `j` given its `θ_j`.
pub type SubLearnerFactory = Box<dyn FnMut(u32, f64) -> Result<Box<dyn Learner>> + Send>;

#[derive(Debug, Clone, Copy)]
struct Current {
    route: Route,
    w: f64,
}

/// `⌈log₂ T⌉` independent learners, each seeing feedback with the same
/// unconditional probability `2^{−j−1}` on the rounds routed to it.
pub struct Stabilise {
    epsilon: f64,
    horizon: u64,
    factory: SubLearnerFactory,
    instances: Vec<Option<Box<dyn Learner>>>,
    rng: ChaCha8Rng,
    current: Option<Current>,
    forwarded: Vec<u64>,
    assigned: Vec<u64>,
}

impl std::fmt::Debug for Stabilise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stabilise")
            .field("epsilon", &self.epsilon)
            .field("horizon", &self.horizon)
            .field("assigned", &self.assigned)
            .field("forwarded", &self.forwarded)
            .finish()
    }
}

impl Stabilise {
    pub fn new(epsilon: f64, horizon: u64, seed: u64, factory: SubLearnerFactory) -> Result<Self> {
        if horizon == 0 {
            return Err(BanditError::Config("horizon must be at least 1".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(BanditError::Config(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let levels = Self::levels_for(horizon);
        Ok(Self {
            epsilon,
            horizon,
            factory,
            instances: (0..levels).map(|_| None).collect(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            current: None,
            forwarded: vec![0; levels],
            assigned: vec![0; levels],
        })
    }

    /// `⌈log₂ T⌉`, at least 1.
    pub fn levels_for(horizon: u64) -> usize {
        let l = 64 - (horizon.max(1) - 1).leading_zeros() as usize;
        l.max(1)
    }

    pub fn levels(&self) -> usize {
        self.instances.len()
    }

    pub fn theta_of(&self, j: u32) -> f64 {
        theta(j, self.epsilon, self.horizon)
    }

    /// Rounds routed to each sub-instance so far.
    pub fn assigned_counts(&self) -> &[u64] {
        &self.assigned
    }

    /// Rounds whose feedback reached each sub-instance.
    pub fn forwarded_counts(&self) -> &[u64] {
        &self.forwarded
    }

    /// Whether sub-instance `j` has been built yet.
    pub fn is_instantiated(&self, j: usize) -> bool {
        self.instances.get(j).is_some_and(|i| i.is_some())
    }

    fn instance(&mut self, j: u32) -> Result<&mut Box<dyn Learner>> {
        let slot = j as usize;
        if self.instances[slot].is_none() {
            let th = theta(j, self.epsilon, self.horizon);
            self.instances[slot] = Some((self.factory)(j, th)?);
        }
        Ok(self.instances[slot].as_mut().expect("just built"))
    }

    /// One full protocol round: reveal `w`, act, then flip the reception
    /// coin and (if received) the forward coin, both from the owned RNG.
    pub fn simulate_round<F>(&mut self, w: f64, set: &ActionSet, loss_of: F) -> Result<(Selection, bool)>
    where
        F: FnOnce(usize) -> f64,
    {
        let sel = ProtocolArm::select(self, w, set)?;
        let loss = loss_of(sel.index);
        let received = self.rng.random::<f64>() < w;
        let forwarded = self.receive_inner(if received { Some(loss) } else { None })?;
        Ok((sel, forwarded))
    }

    fn receive_inner(&mut self, loss: Option<f64>) -> Result<bool> {
        let cur = self.current.take().ok_or(BanditError::NoPendingRound)?;
        let j = match cur.route {
            Route::Skip => return Ok(false),
            Route::Instance(j) => j,
        };
        let forward = match loss {
            Some(_) => self.rng.random::<f64>() < forward_probability(cur.w, j),
            None => false,
        };
        let inst = self.instances[j as usize].as_mut().expect("selected instance exists");
        match (forward, loss) {
            (true, Some(l)) => {
                inst.update(l)?;
                self.forwarded[j as usize] += 1;
                Ok(true)
            }
            _ => {
                inst.discard();
                Ok(false)
            }
        }
    }
}

impl ProtocolArm for Stabilise {
    fn select(&mut self, w: f64, set: &ActionSet) -> Result<Selection> {
        if self.current.is_some() {
            return Err(BanditError::PendingRound);
        }
        let r = route(w, self.horizon)?;
        let sel = match r {
            Route::Skip => Selection {
                distribution: ActionDistribution::point_mass(set.len(), 0),
                index: 0,
            },
            Route::Instance(j) => {
                let sel = self.instance(j)?.select(set)?;
                self.assigned[j as usize] += 1;
                sel
            }
        };
        self.current = Some(Current { route: r, w });
        Ok(sel)
    }

    fn receive(&mut self, loss: Option<f64>) -> Result<()> {
        self.receive_inner(loss).map(|_| ())
    }
}
