//! Per-round statistics built by re-evaluating the current policy on every
//! past context: the mean feature `x̂_t`, centered covariance `Ĥ_t`, the lifted
//! second moment `𝐇̂_t`, their `β_t`-regularized versions, the loss estimator
//! `ŷ_t = Σ̂_t⁻¹(a_t − x̂_t)ℓ_t`, and the step-size schedules.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BanditError, Result};
use crate::lifted::{lifted_cov, lifted_loss, Action, ActionDistribution, ActionSet, ContextId, LiftedLoss, LossVector};
use crate::linalg;

/// Step sizes and regularization for a run of horizon `T` in dimension `d`,
/// with an optional known misspecification level `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    d: usize,
    horizon: u64,
    epsilon: f64,
    scale: ScheduleScale,
}

/// Multipliers on `β_t`, `α_t`, `η_t`. All 1 by default; other values
/// depart from the analyzed constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleScale {
    pub beta: f64,
    pub alpha: f64,
    pub eta: f64,
}

impl Default for ScheduleScale {
    fn default() -> Self {
        Self {
            beta: 1.0,
            alpha: 1.0,
            eta: 1.0,
        }
    }
}

impl Schedules {
    pub fn new(d: usize, horizon: u64, epsilon: f64) -> Result<Self> {
        if d == 0 {
            return Err(BanditError::Config("d must be at least 1".into()));
        }
        if horizon == 0 {
            return Err(BanditError::Config("horizon must be at least 1".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(BanditError::Config(format!(
                "epsilon must be a nonnegative number, got {epsilon}"
            )));
        }
        Ok(Self {
            d,
            horizon,
            epsilon,
            scale: ScheduleScale::default(),
        })
    }

    pub fn with_scale(mut self, scale: ScheduleScale) -> Result<Self> {
        for (name, v) in [("beta", scale.beta), ("alpha", scale.alpha), ("eta", scale.eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BanditError::Config(format!("{name} scale must be positive, got {v}")));
            }
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn scale(&self) -> ScheduleScale {
        self.scale
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `β_t = 100 (d+1)³ ln(3T) / (t−1)`, defined for `t ≥ 2`.
    pub fn beta(&self, t: u64) -> Result<f64> {
        if t < 2 {
            return Err(BanditError::InvalidRound(t));
        }
        let d1 = (self.d + 1) as f64;
        Ok(self.scale.beta * 100.0 * d1.powi(3) * (3.0 * self.horizon as f64).ln() / (t - 1) as f64)
    }

    /// `α_t = d/√t + ε/√d`.
    pub fn alpha(&self, t: u64) -> f64 {
        let d = self.d as f64;
        let t = t.max(1) as f64;
        self.scale.alpha * (d / t.sqrt() + self.epsilon / d.sqrt())
    }

    /// `η_t = 1 / (64 (d√t + (ε/√d) t))`.
    pub fn eta(&self, t: u64) -> f64 {
        let d = self.d as f64;
        let t = t.max(1) as f64;
        self.scale.eta / (64.0 * (d * t.sqrt() + self.epsilon / d.sqrt() * t))
    }
}

/// Which past contexts the estimators average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoreMode {
    /// Every past context, grouped by canonical id.
    Exact,
    /// A uniform reservoir sample of past contexts (for unbounded support).
    Reservoir { capacity: usize },
}

/// The multiset of contexts seen in rounds `1..t−1`.
#[derive(Debug, Clone)]
pub struct ContextStore {
    mode: StoreMode,
    entries: BTreeMap<ContextId, (ActionSet, u64)>,
    reservoir: Vec<ActionSet>,
    total: u64,
    rng: ChaCha8Rng,
}

impl ContextStore {
    pub fn exact() -> Self {
        Self::with_mode(StoreMode::Exact, 0)
    }

    pub fn reservoir(capacity: usize, seed: u64) -> Self {
        Self::with_mode(StoreMode::Reservoir { capacity: capacity.max(1) }, seed)
    }

    pub fn with_mode(mode: StoreMode, seed: u64) -> Self {
        Self {
            mode,
            entries: BTreeMap::new(),
            reservoir: Vec::new(),
            total: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn mode(&self) -> StoreMode {
        self.mode
    }

    /// Number of contexts pushed so far (`t − 1` after round `t−1`).
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn push(&mut self, set: ActionSet) {
        self.total += 1;
        match self.mode {
            StoreMode::Exact => {
                self.entries
                    .entry(set.id())
                    .and_modify(|e| e.1 += 1)
                    .or_insert((set, 1));
            }
            StoreMode::Reservoir { capacity } => {
                if self.reservoir.len() < capacity {
                    self.reservoir.push(set);
                } else {
                    let k = self.rng.random_range(0..self.total);
                    if (k as usize) < capacity {
                        self.reservoir[k as usize] = set;
                    }
                }
            }
        }
    }

    /// Distinct stored contexts with their counts, in id order.
    pub fn counted(&self) -> Vec<(&ActionSet, u64)> {
        match self.mode {
            StoreMode::Exact => self.entries.values().map(|(s, c)| (s, *c)).collect(),
            StoreMode::Reservoir { .. } => {
                let mut m: BTreeMap<ContextId, (&ActionSet, u64)> = BTreeMap::new();
                for s in &self.reservoir {
                    m.entry(s.id()).and_modify(|e| e.1 += 1).or_insert((s, 1));
                }
                m.into_values().collect()
            }
        }
    }

    pub fn distinct(&self) -> usize {
        self.counted().len()
    }
}

/// Snapshot of the estimator statistics used in one round.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub h_hat: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub lifted_h_hat: DMatrix<f64>,
    pub lifted_sigma_hat: DMatrix<f64>,
    pub beta: f64,
    pub round: u64,
    sigma_inv: DMatrix<f64>,
    lifted_sigma_inv: DMatrix<f64>,
}

impl EstimatorState {
    /// Round one: no history, and both inverses are defined as zero.
    pub fn first_round(d: usize) -> Self {
        Self {
            x_hat: DVector::zeros(d),
            h_hat: DMatrix::zeros(d, d),
            sigma_hat: DMatrix::zeros(d, d),
            lifted_h_hat: DMatrix::zeros(d + 1, d + 1),
            lifted_sigma_hat: DMatrix::zeros(d + 1, d + 1),
            beta: 0.0,
            round: 1,
            sigma_inv: DMatrix::zeros(d, d),
            lifted_sigma_inv: DMatrix::zeros(d + 1, d + 1),
        }
    }

    /// Build the statistics from weighted `(context, policy on it)` pairs.
    /// Weights are normalized internally.
    pub fn from_weighted(
        samples: &[(&ActionSet, f64, ActionDistribution)],
        beta: f64,
        round: u64,
    ) -> Result<Self> {
        let first = samples.first().ok_or(BanditError::EmptyStore)?;
        let d = first.0.dim();
        let total: f64 = samples.iter().map(|s| s.1).sum();

        let mut x_hat = DVector::zeros(d);
        for (set, w, p) in samples {
            x_hat.axpy(w / total, &p.mean(set)?, 1.0);
        }
        let mut h_hat = DMatrix::zeros(d, d);
        let mut lifted_h_hat = DMatrix::zeros(d + 1, d + 1);
        for (set, w, p) in samples {
            let w = w / total;
            for (pi, a) in p.weights().iter().zip(set.actions()) {
                if *pi > 0.0 {
                    let c = a.coords() - &x_hat;
                    h_hat.ger(w * pi, &c, &c, 1.0);
                }
            }
            lifted_h_hat += lifted_cov(p, set)?.into_inner() * w;
        }
        linalg::symmetrize(&mut h_hat);
        linalg::symmetrize(&mut lifted_h_hat);

        let sigma_hat = &h_hat + DMatrix::identity(d, d) * beta;
        let lifted_sigma_hat = &lifted_h_hat + DMatrix::identity(d + 1, d + 1) * beta;
        let sigma_inv = linalg::spd_inverse(&sigma_hat)?;
        let lifted_sigma_inv = linalg::spd_inverse(&lifted_sigma_hat)?;
        Ok(Self {
            x_hat,
            h_hat,
            sigma_hat,
            lifted_h_hat,
            lifted_sigma_hat,
            beta,
            round,
            sigma_inv,
            lifted_sigma_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    /// `Σ̂_t⁻¹` (zero in round one).
    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// `𝚺̂_t⁻¹` (zero in round one).
    pub fn lifted_sigma_inv(&self) -> &DMatrix<f64> {
        &self.lifted_sigma_inv
    }

    /// Max deviation between `𝐇̂_t` and `[[Ĥ + x̂x̂ᵀ, x̂], [x̂ᵀ, 1]]`.
    pub fn block_consistency_error(&self) -> f64 {
        if self.round < 2 {
            return 0.0;
        }
        let d = self.dim();
        let mut expected = DMatrix::zeros(d + 1, d + 1);
        expected
            .view_mut((0, 0), (d, d))
            .copy_from(&(&self.h_hat + &self.x_hat * self.x_hat.transpose()));
        for i in 0..d {
            expected[(i, d)] = self.x_hat[i];
            expected[(d, i)] = self.x_hat[i];
        }
        expected[(d, d)] = 1.0;
        (&self.lifted_h_hat - expected).amax()
    }
}

/// Statistics for round `t` from the store of the `t−1` previous contexts,
/// re-evaluating the current policy on each distinct stored context.
pub fn policy_stats<F>(
    mut resolver: F,
    store: &ContextStore,
    t: u64,
    schedules: &Schedules,
) -> Result<EstimatorState>
where
    F: FnMut(&ActionSet) -> Result<ActionDistribution>,
{
    if store.total() == 0 {
        return Err(BanditError::EmptyStore);
    }
    if store.total() + 1 != t {
        return Err(BanditError::InvalidRound(t));
    }
    let beta = schedules.beta(t)?;
    let counted = store.counted();
    let mut samples = Vec::with_capacity(counted.len());
    for (set, count) in counted {
        let p = resolver(set)?;
        samples.push((set, count as f64, p));
    }
    EstimatorState::from_weighted(&samples, beta, t)
}

/// `ŷ_t = Σ̂_t⁻¹ (a_t − x̂_t) ℓ_t`; the zero vector in round one.
pub fn loss_estimate(state: &EstimatorState, action: &Action, ell: f64) -> LossVector {
    let centered = action.coords() - &state.x_hat;
    LossVector::unbounded(state.sigma_inv() * centered * ell)
}

/// `γ̂_t`, the lifted loss estimate.
pub fn lifted_loss_estimate(y_hat: &LossVector) -> LiftedLoss {
    lifted_loss(y_hat)
}

/// `α · 𝚺̂_t⁻¹`; the zero matrix in round one.
pub fn bonus_matrix(alpha: f64, state: &EstimatorState) -> DMatrix<f64> {
    state.lifted_sigma_inv() * alpha
}
