use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_loss, sample_index, Learner, Selection};
use crate::design::{affine_reduce, default_max_iter, solve_ftrl_step, FtrlObjective, DEFAULT_TOL};
use crate::error::{BanditError, Result};
use crate::estimators::{
    bonus_matrix, lifted_loss_estimate, loss_estimate, policy_stats, ContextStore, EstimatorState,
    Schedules, StoreMode,
};
use crate::lifted::{ActionDistribution, ActionSet, ContextId};
use crate::linalg;

#[derive(Debug, Clone, Copy)]
pub struct LogdetFtrlConfig {
    pub schedules: Schedules,
    pub seed: u64,
    pub tol: f64,
    /// `None` uses [`default_max_iter`] per action set.
    pub max_iter: Option<usize>,
    pub store: StoreMode,
}

impl LogdetFtrlConfig {
    pub fn new(d: usize, horizon: u64, epsilon: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            schedules: Schedules::new(d, horizon, epsilon)?,
            seed,
            tol: DEFAULT_TOL,
            max_iter: None,
            store: StoreMode::Exact,
        })
    }
}

/// Counters over every per-context FTRL solve performed so far.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub solves: u64,
    pub not_converged: u64,
    pub iterations: u64,
    pub worst_gap: f64,
}

#[derive(Debug)]
struct Pending {
    state: EstimatorState,
    set: ActionSet,
    index: usize,
}

/// FTRL with the log-determinant barrier over lifted covariances, run
/// independently on every action set but sharing one accumulated loss `Z`.
///
/// With `epsilon > 0` in the schedules this is the known-misspecification
/// variant (larger bonus, smaller learning rate); nothing else changes.
#[derive(Debug)]
pub struct LogdetFtrl {
    cfg: LogdetFtrlConfig,
    z: DMatrix<f64>,
    store: ContextStore,
    round: u64,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
    stats: SolverStats,
}

impl LogdetFtrl {
    pub fn new(cfg: LogdetFtrlConfig) -> Self {
        let d = cfg.schedules.d();
        // reservoir draws use their own stream so they never perturb action sampling
        let store = ContextStore::with_mode(cfg.store, cfg.seed ^ 0x5eed_5eed_5eed_5eed);
        Self {
            z: DMatrix::zeros(d + 1, d + 1),
            store,
            round: 1,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            pending: None,
            stats: SolverStats::default(),
            cfg,
        }
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn store(&self) -> &ContextStore {
        &self.store
    }

    pub fn schedules(&self) -> &Schedules {
        &self.cfg.schedules
    }

    pub fn solver_stats(&self) -> SolverStats {
        self.stats
    }

    /// Estimator snapshot of the pending round, if any.
    pub fn pending_state(&self) -> Option<&EstimatorState> {
        self.pending.as_ref().map(|p| &p.state)
    }

    fn solve(&mut self, set: &ActionSet, obj: &FtrlObjective) -> Result<ActionDistribution> {
        let max_iter = match self.cfg.max_iter {
            Some(m) => m,
            None => default_max_iter(set.len(), affine_reduce(set).rank()),
        };
        let (p, rep) = solve_ftrl_step(set, obj, self.cfg.tol, max_iter)?;
        self.stats.solves += 1;
        self.stats.iterations += rep.iterations as u64;
        if !rep.converged {
            self.stats.not_converged += 1;
        }
        if rep.final_gap.is_finite() {
            self.stats.worst_gap = self.stats.worst_gap.max(rep.final_gap);
        }
        Ok(p)
    }

    /// The current policy on `set` (what `select` would play), without side effects
    /// on the round state.
    pub fn policy(&mut self, set: &ActionSet) -> Result<ActionDistribution> {
        let obj = FtrlObjective::new(self.z.clone(), self.cfg.schedules.eta(self.round))?;
        self.solve(set, &obj)
    }
}

impl Learner for LogdetFtrl {
    fn select(&mut self, set: &ActionSet) -> Result<Selection> {
        if self.pending.is_some() {
            return Err(BanditError::PendingRound);
        }
        if set.dim() != self.cfg.schedules.d() {
            return Err(BanditError::DimensionMismatch {
                expected: self.cfg.schedules.d(),
                got: set.dim(),
            });
        }
        let t = self.round;
        let obj = FtrlObjective::new(self.z.clone(), self.cfg.schedules.eta(t))?;

        // one solve per distinct context this round
        let mut cache: HashMap<ContextId, (ActionSet, ActionDistribution)> = HashMap::new();
        let state = if t == 1 {
            EstimatorState::first_round(self.cfg.schedules.d())
        } else {
            let store = std::mem::replace(&mut self.store, ContextStore::exact());
            let schedules = self.cfg.schedules;
            let res = policy_stats(
                |s| {
                    let p = self.solve(s, &obj)?;
                    cache.insert(s.id(), (s.clone(), p.clone()));
                    Ok(p)
                },
                &store,
                t,
                &schedules,
            );
            self.store = store;
            res?
        };

        let distribution = match cache.get(&set.id()) {
            Some((s, p)) if s == set => p.clone(),
            _ => self.solve(set, &obj)?,
        };
        let index = sample_index(distribution.weights(), &mut self.rng);
        self.pending = Some(Pending {
            state,
            set: set.clone(),
            index,
        });
        Ok(Selection {
            distribution,
            index,
        })
    }

    fn update(&mut self, loss: f64) -> Result<()> {
        check_loss(loss)?;
        let pending = self.pending.take().ok_or(BanditError::NoPendingRound)?;
        let t = self.round;
        let action = pending.set.get(pending.index);
        let y_hat = loss_estimate(&pending.state, action, loss);
        let gamma_hat = lifted_loss_estimate(&y_hat);
        let bonus = bonus_matrix(self.cfg.schedules.alpha(t), &pending.state);
        self.z += gamma_hat.matrix() - bonus;
        linalg::symmetrize(&mut self.z);
        self.store.push(pending.set);
        self.round += 1;
        Ok(())
    }

    fn discard(&mut self) {
        self.pending = None;
    }

    fn name(&self) -> &'static str {
        if self.cfg.schedules.epsilon() > 0.0 {
            "misspec_ftrl"
        } else {
            "logdet_ftrl"
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis2() -> ActionSet {
        ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn learner(d: usize, t: u64, eps: f64, seed: u64) -> LogdetFtrl {
        let mut cfg = LogdetFtrlConfig::new(d, t, eps, seed).unwrap();
        cfg.tol = 1e-10;
        LogdetFtrl::new(cfg)
    }

    #[test]
    fn first_round_plays_lifted_d_optimal_design() {
        let mut l = learner(2, 100, 0.0, 1);
        let sel = l.select(&basis2()).unwrap();
        for w in sel.distribution.weights() {
            assert!((w - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn first_update_leaves_z_zero() {
        let mut l = learner(2, 100, 0.0, 1);
        l.select(&basis2()).unwrap();
        l.update(0.7).unwrap();
        assert_eq!(l.z().amax(), 0.0);
        assert_eq!(l.store().total(), 1);
        assert_eq!(l.round(), 2);
    }

    #[test]
    fn zero_losses_only_accumulate_the_bonus() {
        let mut l = learner(2, 100, 0.0, 1);
        let a = basis2();
        l.select(&a).unwrap();
        l.update(0.0).unwrap();
        l.select(&a).unwrap();
        let state = l.pending_state().unwrap().clone();
        l.update(0.0).unwrap();
        let expected = -(state.lifted_sigma_inv() * l.schedules().alpha(2));
        assert!((l.z() - expected).amax() < 1e-15);
        assert!(linalg::is_symmetric(l.z(), 1e-12));
    }

    #[test]
    fn singleton_set_is_forced() {
        let mut l = learner(2, 10, 0.0, 1);
        let a = ActionSet::from_rows(vec![vec![0.3, 0.4]]).unwrap();
        for _ in 0..3 {
            let s = l.select(&a).unwrap();
            assert_eq!(s.index, 0);
            assert_eq!(s.distribution.weights(), &[1.0]);
            l.update(0.5).unwrap();
        }
    }

    #[test]
    fn protocol_misuse_is_reported() {
        let mut l = learner(2, 10, 0.0, 1);
        assert!(matches!(l.update(0.1), Err(BanditError::NoPendingRound)));
        l.select(&basis2()).unwrap();
        assert!(matches!(l.select(&basis2()), Err(BanditError::PendingRound)));
        assert!(matches!(l.update(1.5), Err(BanditError::LossOutOfRange(_))));
        l.update(1.0).unwrap();
    }

    #[test]
    fn discard_keeps_round() {
        let mut l = learner(2, 10, 0.0, 1);
        l.select(&basis2()).unwrap();
        l.discard();
        assert_eq!(l.round(), 1);
        l.select(&basis2()).unwrap();
    }
}
