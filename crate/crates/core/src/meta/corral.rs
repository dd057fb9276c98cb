use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stabilise::Stabilise;
use super::ProtocolArm;
use crate::algorithms::{sample_index, Doubling, Learner, LogdetFtrl, LogdetFtrlConfig, Selection};
use crate::error::{BanditError, Result};
use crate::lifted::{ActionDistribution, ActionSet};
use crate::seeding::derive_seed;

/// Minimizer of `⟨w, L⟩ + (1/η) Σ log(1/wᵢ)` over `{w ∈ Δ(M) : wᵢ ≥ floor}`.
///
/// Uses `wᵢ(λ) = max(floor, 1/(η(Lᵢ + λ)))`, which is decreasing in `λ`, and
/// bisects `Σ wᵢ(λ) = 1` down to adjacent floats.
pub fn clamped_log_barrier_weights(losses: &[f64], eta: f64, floor: f64) -> Result<Vec<f64>> {
    let m = losses.len();
    if m == 0 {
        return Err(BanditError::Config("need at least one arm".into()));
    }
    if !(eta > 0.0) || !(floor >= 0.0) || floor * m as f64 > 1.0 + 1e-12 {
        return Err(BanditError::Config(format!(
            "infeasible master problem: eta={eta}, floor={floor}, arms={m}"
        )));
    }
    let min_l = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let eval = |lam: f64| -> f64 {
        losses
            .iter()
            .map(|&l| {
                let d = eta * (l + lam);
                if d <= 0.0 {
                    f64::INFINITY
                } else {
                    floor.max(1.0 / d)
                }
            })
            .sum()
    };
    // at lo the smallest-loss arm's weight is unbounded; at hi every term ≤ max(floor, 1/M)
    let mut lo = -min_l;
    let mut hi = -min_l + m as f64 / eta;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w: Vec<f64> = losses.iter().map(|&l| floor.max(1.0 / (eta * (l + hi)))).collect();
    // distribute the bisection residual over the unclamped coordinates
    let clamped: Vec<bool> = losses.iter().map(|&l| 1.0 / (eta * (l + hi)) <= floor).collect();
    let free_sum: f64 = w.iter().zip(&clamped).filter(|(_, &c)| !c).map(|(x, _)| x).sum();
    let n_clamped = clamped.iter().filter(|&&c| c).count();
    let target = 1.0 - floor * n_clamped as f64;
    if free_sum > 0.0 {
        let scale = target / free_sum;
        for (x, &c) in w.iter_mut().zip(&clamped) {
            if !c {
                *x *= scale;
            }
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorralConfig {
    pub horizon: u64,
    pub c1_prime: f64,
    pub c2_prime: f64,
    pub seed: u64,
}

impl CorralConfig {
    /// `c₁′ = (d² ln T + √d)√(ln T)`, `c₂′ = √d ln T`.
    pub fn with_defaults(d: usize, horizon: u64, seed: u64) -> Self {
        let ln_t = (horizon.max(2) as f64).ln();
        let df = d as f64;
        Self {
            horizon,
            c1_prime: (df * df * ln_t + df.sqrt()) * ln_t.sqrt(),
            c2_prime: df.sqrt() * ln_t,
            seed,
        }
    }

    pub fn eta(&self) -> f64 {
        1.0 / (4.0 * self.c1_prime * (self.horizon as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
struct Pending {
    arm: usize,
    weights: Vec<f64>,
}

/// Log-barrier master over protocol arms, with the increasing-bonus
/// correction `r_{t,i} = c₁′(√(ρ_{t,i}T) − √(ρ_{t−1,i}T))`.
pub struct Corral {
    cfg: CorralConfig,
    arms: Vec<Box<dyn ProtocolArm>>,
    cumulative: Vec<f64>,
    rho: Vec<f64>,
    bonus_totals: Vec<f64>,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
    round: u64,
}

impl std::fmt::Debug for Corral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Corral")
            .field("cfg", &self.cfg)
            .field("cumulative", &self.cumulative)
            .field("rho", &self.rho)
            .field("round", &self.round)
            .finish()
    }
}

impl Corral {
    pub fn new(cfg: CorralConfig, arms: Vec<Box<dyn ProtocolArm>>) -> Result<Self> {
        let m = arms.len();
        if m == 0 {
            return Err(BanditError::Config("corral needs at least one arm".into()));
        }
        if cfg.horizon == 0 || m as f64 / cfg.horizon as f64 > 1.0 {
            return Err(BanditError::Config(format!(
                "clamp 1/T infeasible with {m} arms and T={}",
                cfg.horizon
            )));
        }
        if !(cfg.c1_prime > 0.0 && cfg.c1_prime.is_finite()) {
            return Err(BanditError::Config(format!(
                "c1_prime must be positive, got {}",
                cfg.c1_prime
            )));
        }
        Ok(Self {
            arms,
            cumulative: vec![0.0; m],
            rho: vec![m as f64; m],
            bonus_totals: vec![0.0; m],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            pending: None,
            round: 1,
            cfg,
        })
    }

    /// `⌈log₂ T⌉` arms; arm `k` runs STABILISE over doubling-wrapped
    /// misspecified Logdet-FTRL hypothesizing total misspecification `εT = 2^{k+1}`.
    pub fn for_misspecification(d: usize, cfg: CorralConfig) -> Result<Self> {
        let horizon = cfg.horizon;
        let m = Stabilise::levels_for(horizon);
        let mut arms: Vec<Box<dyn ProtocolArm>> = Vec::with_capacity(m);
        for k in 0..m {
            let arm_seed = derive_seed(cfg.seed, 100 + k as u64);
            let eps = 2f64.powi(k as i32 + 1) / horizon as f64;
            let factory = Box::new(move |j: u32, theta: f64| {
                let sub_seed = derive_seed(arm_seed, 1 + j as u64);
                let eps_base = theta / horizon as f64;
                let inner = Box::new(move |h: u64| {
                    let c = LogdetFtrlConfig::new(d, h, eps_base, derive_seed(sub_seed, h))?;
                    Ok(Box::new(LogdetFtrl::new(c)) as Box<dyn Learner>)
                });
                Ok(Box::new(Doubling::new(inner)) as Box<dyn Learner>)
            });
            arms.push(Box::new(Stabilise::new(eps, horizon, derive_seed(arm_seed, 0), factory)?));
        }
        Self::new(cfg, arms)
    }

    pub fn config(&self) -> &CorralConfig {
        &self.cfg
    }

    pub fn arms(&self) -> usize {
        self.arms.len()
    }

    pub fn eta(&self) -> f64 {
        self.cfg.eta()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// `Σ_τ (ẑ_τ − r_τ)` per arm.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// `Σ_τ r_{τ,i}` per arm.
    pub fn bonus_totals(&self) -> &[f64] {
        &self.bonus_totals
    }

    /// Master distribution for the current round.
    pub fn weights(&self) -> Result<Vec<f64>> {
        clamped_log_barrier_weights(&self.cumulative, self.eta(), 1.0 / self.cfg.horizon as f64)
    }

    /// Master bookkeeping after arm `arm` was played under `weights` and
    /// incurred loss `z`.
    pub fn record(&mut self, arm: usize, z: f64, weights: &[f64]) -> Result<()> {
        let m = self.arms.len();
        if weights.len() != m {
            return Err(BanditError::LengthMismatch {
                left: weights.len(),
                right: m,
            });
        }
        let floor = 1.0 / self.cfg.horizon as f64;
        if weights[arm] < floor - 1e-12 {
            return Err(BanditError::InvalidProbability(weights[arm]));
        }
        let t = self.cfg.horizon as f64;
        for i in 0..m {
            let z_hat = if i == arm { z / weights[i] } else { 0.0 };
            let prev = self.rho[i];
            let next = prev.max(1.0 / weights[i]);
            let r = if next > prev {
                self.cfg.c1_prime * ((next * t).sqrt() - (prev * t).sqrt())
            } else {
                0.0
            };
            self.rho[i] = next;
            self.bonus_totals[i] += r;
            self.cumulative[i] += z_hat - r;
        }
        self.round += 1;
        Ok(())
    }

    /// Weights and arm of the pending round.
    pub fn pending(&self) -> Option<(usize, &[f64])> {
        self.pending.as_ref().map(|p| (p.arm, p.weights.as_slice()))
    }
}

impl Learner for Corral {
    fn select(&mut self, set: &ActionSet) -> Result<Selection> {
        if self.pending.is_some() {
            return Err(BanditError::PendingRound);
        }
        let weights = self.weights()?;
        let arm = sample_index(&weights, &mut self.rng);
        let sel = self.arms[arm].select(weights[arm], set)?;
        self.pending = Some(Pending { arm, weights });
        Ok(sel)
    }

    fn update(&mut self, loss: f64) -> Result<()> {
        crate::algorithms::check_loss(loss)?;
        let p = self.pending.take().ok_or(BanditError::NoPendingRound)?;
        self.arms[p.arm].receive(Some(loss))?;
        self.record(p.arm, loss, &p.weights)
    }

    fn discard(&mut self) {
        if let Some(p) = self.pending.take() {
            let _ = self.arms[p.arm].receive(None);
        }
    }

    fn name(&self) -> &'static str {
        "corral"
    }
}

/// Protocol arm that always plays the same action index.
#[derive(Debug, Clone)]
pub struct FixedActionArm {
    index: usize,
    received: u64,
}

impl FixedActionArm {
    pub fn new(index: usize) -> Self {
        Self { index, received: 0 }
    }

    pub fn received(&self) -> u64 {
        self.received
    }
}

impl ProtocolArm for FixedActionArm {
    fn select(&mut self, _w: f64, set: &ActionSet) -> Result<Selection> {
        let index = self.index.min(set.len() - 1);
        Ok(Selection {
            distribution: ActionDistribution::point_mass(set.len(), index),
            index,
        })
    }

    fn receive(&mut self, loss: Option<f64>) -> Result<()> {
        if loss.is_some() {
            self.received += 1;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kkt_residual(w: &[f64], l: &[f64], eta: f64, floor: f64) -> f64 {
        // free coordinates share λ = 1/(η wᵢ) − Lᵢ; clamped ones need Lᵢ + λ ≥ 1/(η floor)
        let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > floor * (1.0 + 1e-9)).collect();
        let lam: Vec<f64> = free.iter().map(|&i| 1.0 / (eta * w[i]) - l[i]).collect();
        let mean = lam.iter().sum::<f64>() / lam.len() as f64;
        let mut worst = lam.iter().map(|x| ((x - mean) * eta).abs()).fold(0.0, f64::max);
        for i in 0..w.len() {
            if !free.contains(&i) {
                let reduced = l[i] + mean - 1.0 / (eta * floor);
                worst = worst.max((-reduced * eta).max(0.0));
            }
        }
        worst
    }

    #[test]
    fn weight_examples() {
        let w = clamped_log_barrier_weights(&[0.0; 5], 0.1, 0.01).unwrap();
        assert!(w.iter().all(|x| (x - 0.2).abs() < 1e-12));
        let w = clamped_log_barrier_weights(&[3.0, 3.0], 0.1, 0.01).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        let w = clamped_log_barrier_weights(&[0.0, 1e6], 0.05, 0.1).unwrap();
        assert!((w[0] - 0.9).abs() < 1e-12 && (w[1] - 0.1).abs() < 1e-12);
        assert_eq!(clamped_log_barrier_weights(&[1.0], 0.1, 0.1).unwrap(), vec![1.0]);
    }

    #[test]
    fn weights_satisfy_kkt() {
        let cases: Vec<Vec<f64>> = vec![
            vec![0.0, 1.0, 2.0, 5.0],
            vec![-40.0, 3.0, 100.0],
            vec![10.0, 10.5, 9.0, -2.0, 7.0, 1e4],
        ];
        for l in cases {
            for eta in [0.001, 0.05, 1.0] {
                let floor = 0.01;
                let w = clamped_log_barrier_weights(&l, eta, floor).unwrap();
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(w.iter().all(|&x| x >= floor - 1e-15 && x <= 1.0));
                assert!(kkt_residual(&w, &l, eta, floor) < 1e-8, "{l:?} {eta} {w:?}");
            }
        }
    }

    #[test]
    fn bonus_example_and_telescoping() {
        let cfg = CorralConfig {
            horizon: 100,
            c1_prime: 1.0,
            c2_prime: 1.0,
            seed: 0,
        };
        let arms: Vec<Box<dyn ProtocolArm>> = (0..4).map(|i| Box::new(FixedActionArm::new(i)) as _).collect();
        let mut c = Corral::new(cfg, arms).unwrap();
        // ρ: 4 → 9 on arm 1
        c.record(0, 0.5, &[0.5, 1.0 / 9.0, 0.25, 0.25 - 1.0 / 9.0]).unwrap();
        assert!((c.bonus_totals()[1] - 10.0).abs() < 1e-12);
        assert_eq!(c.bonus_totals()[0], 0.0);
        assert!((c.cumulative()[0] - 1.0).abs() < 1e-15);
        assert!((c.cumulative()[1] + 10.0).abs() < 1e-12);
        // ρ unchanged → no bonus
        c.record(2, 0.0, &[0.25; 4]).unwrap();
        assert!((c.bonus_totals()[1] - 10.0).abs() < 1e-12);
        for i in 0..4 {
            let expect = (c.rho()[i] * 100.0).sqrt() - (4.0f64 * 100.0).sqrt();
            assert!((c.bonus_totals()[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn clamp_violation_and_infeasible_config() {
        let cfg = CorralConfig {
            horizon: 10,
            c1_prime: 1.0,
            c2_prime: 1.0,
            seed: 0,
        };
        let arms = || -> Vec<Box<dyn ProtocolArm>> { (0..2).map(|i| Box::new(FixedActionArm::new(i)) as _).collect() };
        let mut c = Corral::new(cfg, arms()).unwrap();
        assert!(c.record(1, 0.1, &[0.95, 0.05]).is_err());
        let small = CorralConfig { horizon: 1, ..cfg };
        assert!(Corral::new(small, arms()).is_err());
    }

    #[test]
    fn single_arm_always_chosen() {
        let cfg = CorralConfig::with_defaults(2, 50, 3);
        let mut c = Corral::new(cfg, vec![Box::new(FixedActionArm::new(0))]).unwrap();
        let set = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        for _ in 0..20 {
            assert_eq!(c.weights().unwrap(), vec![1.0]);
            assert_eq!(c.select(&set).unwrap().index, 0);
            c.update(0.4).unwrap();
        }
    }

    #[test]
    fn misspecification_tree_runs() {
        let cfg = CorralConfig::with_defaults(2, 64, 9);
        let mut c = Corral::for_misspecification(2, cfg).unwrap();
        assert_eq!(c.arms(), 6);
        let set = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-0.5, 0.5]]).unwrap();
        for t in 0..64 {
            c.select(&set).unwrap();
            c.update(if t % 3 == 0 { 0.5 } else { -0.2 }).unwrap();
        }
        assert_eq!(c.round(), 65);
    }
}
