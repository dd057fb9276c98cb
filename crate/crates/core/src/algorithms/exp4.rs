use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_loss, sample_index, Learner, Selection};
use crate::design::{default_max_iter, g_optimal_design, span_rank};
use crate::error::{BanditError, Result};
use crate::lifted::{ActionDistribution, ActionSet};
use crate::linalg;

pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// A deterministic map from action sets to one of their actions.
pub trait Policy: Send + Sync + std::fmt::Debug {
    fn choose(&self, set: &ActionSet) -> usize;
}

/// `π_θ(𝒜) = argmin_{a∈𝒜} ⟨a, θ⟩`, ties to the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    theta: DVector<f64>,
}

impl LinearPolicy {
    pub fn new(theta: Vec<f64>) -> Self {
        Self {
            theta: DVector::from_vec(theta),
        }
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }
}

impl Policy for LinearPolicy {
    fn choose(&self, set: &ActionSet) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, a) in set.actions().iter().enumerate() {
            let v = a.coords().dot(&self.theta);
            if v < best.1 {
                best = (i, v);
            }
        }
        best.0
    }
}

/// Axis-aligned grid over `[−T, T]^d` with spacing `grid_step`.
pub fn build_linear_policy_net(
    d: usize,
    horizon: u64,
    grid_step: f64,
    cap: u128,
) -> Result<Vec<LinearPolicy>> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(BanditError::Config(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    if d == 0 {
        return Err(BanditError::Config("d must be at least 1".into()));
    }
    let t = horizon as f64;
    let per_axis = (2.0 * t / grid_step + 1e-9).floor() as u128 + 1;
    let size = per_axis.checked_pow(d as u32).unwrap_or(u128::MAX);
    if size > cap {
        return Err(BanditError::PolicyNetTooLarge { size, cap });
    }
    let axis: Vec<f64> = (0..per_axis).map(|k| -t + k as f64 * grid_step).collect();
    let mut out = Vec::with_capacity(size as usize);
    let mut idx = vec![0usize; d];
    loop {
        out.push(LinearPolicy::new(idx.iter().map(|&k| axis[k]).collect()));
        let mut pos = d;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < axis.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Exp4Config {
    pub gamma: f64,
    pub eta: f64,
    pub seed: u64,
    /// Gap tolerance for the exploration design.
    pub design_tol: f64,
}

impl Exp4Config {
    /// `γ = 2d√(ln T / T)` (capped at 1) and `η = √(ln T / T)`.
    pub fn for_horizon(d: usize, horizon: u64, seed: u64) -> Self {
        let t = horizon.max(1) as f64;
        let base = (t.ln() / t).sqrt();
        Self {
            gamma: (2.0 * d as f64 * base).min(1.0),
            eta: base,
            seed,
            design_tol: 1e-10,
        }
    }
}

#[derive(Debug)]
struct Pending {
    set: ActionSet,
    choices: Vec<usize>,
    h_pinv: DMatrix<f64>,
    index: usize,
}

/// Exponential weights over a finite policy class, with the loss of each
/// policy estimated through the inverse of the sampling second moment and
/// exploration mixed in from a G-optimal design.
#[derive(Debug)]
pub struct Exp4 {
    policies: Vec<Box<dyn Policy>>,
    log_weights: Vec<f64>,
    cfg: Exp4Config,
    round: u64,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
    last_estimates: Vec<f64>,
    last_nu: Option<ActionDistribution>,
}

impl Exp4 {
    pub fn new(policies: Vec<Box<dyn Policy>>, cfg: Exp4Config) -> Result<Self> {
        if policies.is_empty() {
            return Err(BanditError::EmptyPolicySet);
        }
        if !(0.0..=1.0).contains(&cfg.gamma) || !(cfg.eta >= 0.0) {
            return Err(BanditError::Config(format!(
                "need gamma in [0,1] and eta >= 0, got gamma={} eta={}",
                cfg.gamma, cfg.eta
            )));
        }
        let n = policies.len();
        Ok(Self {
            policies,
            log_weights: vec![0.0; n],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            round: 1,
            pending: None,
            last_estimates: Vec::new(),
            last_nu: None,
        })
    }

    pub fn with_linear_policies(policies: Vec<LinearPolicy>, cfg: Exp4Config) -> Result<Self> {
        Self::new(
            policies
                .into_iter()
                .map(|p| Box::new(p) as Box<dyn Policy>)
                .collect(),
            cfg,
        )
    }

    pub fn config(&self) -> &Exp4Config {
        &self.cfg
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// `P_t`, the softmax of the log-weights.
    pub fn policy_weights(&self) -> Vec<f64> {
        let m = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.log_weights.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    /// `ℓ̂_{t,π}` from the most recent update.
    pub fn last_estimates(&self) -> &[f64] {
        &self.last_estimates
    }

    /// `ν_t` from the most recent select.
    pub fn last_design(&self) -> Option<&ActionDistribution> {
        self.last_nu.as_ref()
    }
}

impl Learner for Exp4 {
    fn select(&mut self, set: &ActionSet) -> Result<Selection> {
        if self.pending.is_some() {
            return Err(BanditError::PendingRound);
        }
        let n = set.len();
        let weights = self.policy_weights();
        let choices: Vec<usize> = self.policies.iter().map(|p| p.choose(set)).collect();
        let mut p = vec![0.0; n];
        for (w, &c) in weights.iter().zip(&choices) {
            p[c] += w;
        }
        let (nu, _) = g_optimal_design(
            set,
            self.cfg.design_tol,
            default_max_iter(n, span_rank(set)) * 10,
        )?;
        let g = self.cfg.gamma;
        let mix: Vec<f64> = p
            .iter()
            .zip(nu.weights())
            .map(|(pa, na)| (1.0 - g) * pa + g * na)
            .collect();
        let distribution = ActionDistribution::normalized(mix)?;
        let h = distribution.second_moment(set)?;
        let h_pinv = linalg::pinv_psd(&h);
        let index = sample_index(distribution.weights(), &mut self.rng);
        self.last_nu = Some(nu);
        self.pending = Some(Pending {
            set: set.clone(),
            choices,
            h_pinv,
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
        let played = pending.set.get(pending.index).coords();
        let v = &pending.h_pinv * played * loss;
        let per_action: Vec<f64> = pending
            .set
            .actions()
            .iter()
            .map(|a| a.coords().dot(&v))
            .collect();
        self.last_estimates = pending.choices.iter().map(|&c| per_action[c]).collect();
        for (lw, est) in self.log_weights.iter_mut().zip(&self.last_estimates) {
            *lw -= self.cfg.eta * est;
        }
        let m = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_weights.iter_mut().for_each(|l| *l -= m);
        self.round += 1;
        Ok(())
    }

    fn discard(&mut self) {
        self.pending = None;
    }

    fn name(&self) -> &'static str {
        "exp4"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn net_sizes() {
        let net = build_linear_policy_net(1, 1, 1.0, DEFAULT_POLICY_CAP).unwrap();
        let thetas: Vec<f64> = net.iter().map(|p| p.theta()[0]).collect();
        assert_eq!(thetas, vec![-1.0, 0.0, 1.0]);
        assert_eq!(build_linear_policy_net(2, 1, 1.0, DEFAULT_POLICY_CAP).unwrap().len(), 9);
        assert_eq!(build_linear_policy_net(2, 10, 1.0, DEFAULT_POLICY_CAP).unwrap().len(), 441);
        let err = build_linear_policy_net(4, 1000, 1.0, DEFAULT_POLICY_CAP).unwrap_err();
        assert!(matches!(err, BanditError::PolicyNetTooLarge { size, .. } if size == 2001u128.pow(4)));
    }

    #[test]
    fn linear_policy_ties_go_low() {
        let s = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(LinearPolicy::new(vec![0.0, 0.0]).choose(&s), 0);
        assert_eq!(LinearPolicy::new(vec![1.0, 0.0]).choose(&s), 2);
        assert_eq!(LinearPolicy::new(vec![0.0, -1.0]).choose(&s), 1);
    }

    fn cfg(gamma: f64) -> Exp4Config {
        Exp4Config {
            gamma,
            eta: 0.1,
            seed: 5,
            design_tol: 1e-10,
        }
    }

    #[test]
    fn first_round_is_uniform_over_policies() {
        let net = build_linear_policy_net(2, 1, 1.0, DEFAULT_POLICY_CAP).unwrap();
        let e = Exp4::with_linear_policies(net, cfg(0.1)).unwrap();
        for w in e.policy_weights() {
            assert!((w - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn agreeing_policies_without_exploration_are_deterministic() {
        let s = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let pols = vec![LinearPolicy::new(vec![1.0, 0.0]), LinearPolicy::new(vec![2.0, 0.5])];
        let mut e = Exp4::with_linear_policies(pols, cfg(0.0)).unwrap();
        let sel = e.select(&s).unwrap();
        assert_eq!(sel.distribution.weights(), &[0.0, 1.0]);
        assert_eq!(sel.index, 1);
    }

    #[test]
    fn full_exploration_equals_design() {
        let s = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.6]]).unwrap();
        let net = build_linear_policy_net(2, 1, 1.0, DEFAULT_POLICY_CAP).unwrap();
        let mut e = Exp4::with_linear_policies(net, cfg(1.0)).unwrap();
        let sel = e.select(&s).unwrap();
        let nu = e.last_design().unwrap().clone();
        for (a, b) in sel.distribution.weights().iter().zip(nu.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_loss_keeps_weights_and_single_policy_stays_put() {
        let s = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let net = build_linear_policy_net(2, 1, 1.0, DEFAULT_POLICY_CAP).unwrap();
        let mut e = Exp4::with_linear_policies(net, cfg(0.2)).unwrap();
        let before = e.policy_weights();
        e.select(&s).unwrap();
        e.update(0.0).unwrap();
        assert_eq!(before, e.policy_weights());

        let mut one = Exp4::with_linear_policies(vec![LinearPolicy::new(vec![1.0, 1.0])], cfg(0.2)).unwrap();
        for _ in 0..5 {
            one.select(&s).unwrap();
            one.update(0.9).unwrap();
            assert_eq!(one.policy_weights(), vec![1.0]);
        }
    }

    #[test]
    fn empty_policy_set_rejected() {
        assert!(matches!(
            Exp4::new(vec![], cfg(0.1)),
            Err(BanditError::EmptyPolicySet)
        ));
    }

    #[test]
    fn estimate_magnitude_bound() {
        let s = ActionSet::from_rows(vec![
            vec![0.9, 0.1],
            vec![-0.2, 0.7],
            vec![0.3, -0.8],
            vec![0.05, 0.05],
        ])
        .unwrap();
        let net = build_linear_policy_net(2, 3, 1.0, DEFAULT_POLICY_CAP).unwrap();
        let c = Exp4Config::for_horizon(2, 500, 9);
        let mut e = Exp4::with_linear_policies(net, c).unwrap();
        for t in 0..200 {
            e.select(&s).unwrap();
            e.update(if t % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
            let m = e.last_estimates().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            assert!(m <= 2.0 / c.gamma + 1e-6, "{m}");
        }
    }
}
