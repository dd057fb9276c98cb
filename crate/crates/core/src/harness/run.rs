use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AlgorithmKind, ExperimentConfig};
use crate::algorithms::{
    build_linear_policy_net, Exp4, Exp4Config, Learner, LogdetFtrl, LogdetFtrlConfig, UniformRandom,
};
use crate::environments::{adversary_loss, misspec_value, sample_feedback};
use crate::error::{BanditError, Result};
use crate::estimators::{ScheduleScale, StoreMode};
use crate::lifted::{ActionSet, ContextId, LossVector};
use crate::meta::{Corral, CorralConfig};
use crate::seeding::derive_seed;

const CONTEXT_STREAM: u64 = 1;
const FEEDBACK_STREAM: u64 = 2;
const LEARNER_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub t: u64,
    pub context_id: ContextId,
    pub action_index: usize,
    pub realized_loss: f64,
    pub expected_loss: f64,
    pub cum_expected_loss: f64,
    pub cum_comparator_loss: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub comparator_loss: f64,
    pub learner_loss: f64,
    pub regret: f64,
    /// Regret against the best policy on rounds `1..=t`, indexed by `t − 1`.
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub traces: Vec<RoundTrace>,
    pub report: RegretReport,
}

/// The realized environment of one seed: contexts and the expected loss of
/// every available action, both fixed before the learner acts.
#[derive(Debug, Clone)]
pub struct Realization {
    pub contexts: Vec<ActionSet>,
    pub losses: Vec<Vec<f64>>,
}

pub fn realize(cfg: &ExperimentConfig, seed: u64) -> Result<Realization> {
    cfg.validate()?;
    let sampler = cfg.context.sampler(cfg.d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, CONTEXT_STREAM));
    let n = cfg.horizon as usize;
    let mut contexts = Vec::with_capacity(n);
    let mut losses = Vec::with_capacity(n);
    for t in 1..=cfg.horizon {
        let set = sampler.draw(&mut rng);
        let y: LossVector = adversary_loss(&cfg.adversary, cfg.d, t);
        losses.push(
            set.actions()
                .iter()
                .map(|a| misspec_value(&cfg.adversary, &y, a))
                .collect(),
        );
        contexts.push(set);
    }
    Ok(Realization { contexts, losses })
}

pub fn build_learner(cfg: &ExperimentConfig, seed: u64) -> Result<Box<dyn Learner>> {
    let s = &cfg.schedule;
    let learner_seed = derive_seed(seed, LEARNER_STREAM);
    let ftrl = |epsilon: f64| -> Result<Box<dyn Learner>> {
        let mut c = LogdetFtrlConfig::new(cfg.d, cfg.horizon, epsilon, learner_seed)?;
        c.schedules = c.schedules.with_scale(ScheduleScale {
            beta: s.beta_scale,
            alpha: s.alpha_scale,
            eta: s.eta_scale,
        })?;
        c.tol = s.tol;
        c.max_iter = s.max_iter;
        c.store = if cfg.context.sampler(cfg.d)?.is_finite() {
            StoreMode::Exact
        } else {
            StoreMode::Reservoir {
                capacity: s.reservoir,
            }
        };
        Ok(Box::new(LogdetFtrl::new(c)))
    };
    match cfg.algorithm {
        AlgorithmKind::LogdetFtrl => ftrl(0.0),
        AlgorithmKind::MisspecFtrl => ftrl(s.epsilon),
        AlgorithmKind::Exp4 => {
            let net = build_linear_policy_net(cfg.d, cfg.horizon, s.grid_step, s.policy_cap as u128)?;
            let c = Exp4Config::for_horizon(cfg.d, cfg.horizon, learner_seed);
            Ok(Box::new(Exp4::with_linear_policies(net, c)?))
        }
        AlgorithmKind::Corral => {
            let mut c = CorralConfig::with_defaults(cfg.d, cfg.horizon, learner_seed);
            if let Some(c1) = s.c1_prime {
                c.c1_prime = c1;
            }
            Ok(Box::new(Corral::for_misspecification(cfg.d, c)?))
        }
        AlgorithmKind::UniformRandom => Ok(Box::new(UniformRandom::new(learner_seed))),
    }
}

/// Running per-context best-action loss over a prefix of rounds.
#[derive(Debug, Default)]
pub struct PrefixComparator {
    groups: HashMap<ContextId, Vec<(ActionSet, Vec<f64>)>>,
    total: f64,
}

impl PrefixComparator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one round; returns the comparator loss over all rounds so far.
    pub fn push(&mut self, set: &ActionSet, losses: &[f64]) -> Result<f64> {
        if losses.len() != set.len() {
            return Err(BanditError::LengthMismatch {
                left: losses.len(),
                right: set.len(),
            });
        }
        let bucket = self.groups.entry(set.id()).or_default();
        let slot = match bucket.iter().position(|(s, _)| s == set) {
            Some(i) => i,
            None => {
                bucket.push((set.clone(), vec![0.0; set.len()]));
                bucket.len() - 1
            }
        };
        let sums = &mut bucket[slot].1;
        let old = min_of(sums);
        for (s, l) in sums.iter_mut().zip(losses) {
            *s += l;
        }
        self.total += min_of(sums) - old;
        Ok(self.total)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Sum of per-context minima recomputed from scratch.
    pub fn exact_total(&self) -> f64 {
        self.groups
            .values()
            .flat_map(|b| b.iter().map(|(_, s)| min_of(s)))
            .sum()
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Loss of the best fixed policy in hindsight: for every distinct context,
/// the smallest cumulative loss of one of its actions.
pub fn comparator_loss(contexts: &[ActionSet], losses: &[Vec<f64>]) -> Result<f64> {
    if contexts.len() != losses.len() {
        return Err(BanditError::LengthMismatch {
            left: contexts.len(),
            right: losses.len(),
        });
    }
    let mut pc = PrefixComparator::new();
    for (s, l) in contexts.iter().zip(losses) {
        pc.push(s, l)?;
    }
    Ok(pc.exact_total())
}

/// Linear special case: `f_t(a) = ⟨a, y_t⟩`.
pub fn comparator_loss_linear(contexts: &[ActionSet], ys: &[LossVector]) -> Result<f64> {
    let losses: Vec<Vec<f64>> = contexts
        .iter()
        .zip(ys)
        .map(|(s, y)| s.actions().iter().map(|a| y.dot(a)).collect())
        .collect();
    if contexts.len() != ys.len() {
        return Err(BanditError::LengthMismatch {
            left: contexts.len(),
            right: ys.len(),
        });
    }
    comparator_loss(contexts, &losses)
}

/// Drive `learner` through a realized environment.
pub fn run_learner(
    learner: &mut dyn Learner,
    env: &Realization,
    feedback: crate::environments::FeedbackModel,
    seed: u64,
) -> Result<SeedRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, FEEDBACK_STREAM));
    let mut comparator = PrefixComparator::new();
    let mut traces = Vec::with_capacity(env.contexts.len());
    let mut cum = 0.0;
    for (i, (set, losses)) in env.contexts.iter().zip(&env.losses).enumerate() {
        let sel = learner.select(set)?;
        let expected = losses[sel.index];
        let realized = sample_feedback(feedback, expected, &mut rng);
        learner.update(realized)?;
        cum += expected;
        let comp = comparator.push(set, losses)?;
        traces.push(RoundTrace {
            t: i as u64 + 1,
            context_id: set.id(),
            action_index: sel.index,
            realized_loss: realized,
            expected_loss: expected,
            cum_expected_loss: cum,
            cum_comparator_loss: comp,
            cum_regret: cum - comp,
        });
    }
    let comparator_loss = comparator.exact_total();
    let report = RegretReport {
        comparator_loss,
        learner_loss: cum,
        regret: cum - comparator_loss,
        curve: traces.iter().map(|r| r.cum_regret).collect(),
    };
    Ok(SeedRun {
        seed,
        traces,
        report,
    })
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let env = realize(cfg, seed)?;
    let mut learner = build_learner(cfg, seed)?;
    run_learner(learner.as_mut(), &env, cfg.feedback, seed)
}

/// Every seed of `cfg`, in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    cfg.validate()?;
    cfg.seeds.iter().map(|&s| run_seed(cfg, s)).collect()
}
