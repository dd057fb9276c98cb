//! Runnable checks of the library's identities, solver certificates and
//! statistical invariants. Each check produces one row of a pass/fail table.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{AlgorithmKind, ExperimentConfig};
use super::run::{comparator_loss, run_seed};
use super::trace_csv::emit_csv;
use crate::algorithms::{build_linear_policy_net, Exp4, Exp4Config, Learner, UniformRandom};
use crate::design::{
    affine_reduce, ftrl_objective, g_optimal_design_default, max_leverage, solve_ftrl_step, FtrlObjective,
};
use crate::environments::{uniform_ball, AdversaryKind, AdversarySpec, ContextSpec, MisspecMode, WeightedSet};
use crate::error::Result;
use crate::estimators::EstimatorState;
use crate::lifted::{bregman_div, lifted_cov, lifted_loss, ActionDistribution, ActionSet, LossVector};
use crate::linalg;
use crate::meta::{clamped_log_barrier_weights, Corral, CorralConfig, FixedActionArm, ProtocolArm, Stabilise};
use crate::seeding::derive_seed;

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Outcome of a single check before timing is attached.
pub struct Outcome {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn at_most(value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            value,
            threshold,
            pass: value <= threshold,
            detail: detail.into(),
        }
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<Outcome>;

pub const CHECKS: &[(&str, Check)] = &[
    ("lifted_trace_identity", check_lifted_trace),
    ("bregman_identity", check_bregman),
    ("lifted_loss_inner_product", check_lifted_loss),
    ("special_trace_bound", check_special_trace),
    ("affine_reduction_round_trip", check_reduction),
    ("fw_grid_cross_check", check_fw_grid),
    ("fw_symmetric_instance", check_fw_symmetric),
    ("g_design_basis", check_g_basis),
    ("g_design_random", check_g_random),
    ("concentration_violation_rate", check_concentration),
    ("loss_estimator_conditional_mean", check_estimator_mean),
    ("stabilise_dispatch_rate", check_dispatch),
    ("stabilise_skip_rounds", check_skip),
    ("corral_weights_kkt", check_corral_kkt),
    ("corral_bonus_telescoping", check_telescoping),
    ("comparator_brute_force", check_comparator),
    ("exp4_estimate_magnitude", check_exp4_magnitude),
    ("misspec_zero_replay", check_replay),
    ("csv_determinism", check_csv_determinism),
];

/// Run every check with its own RNG stream derived from `seed`.
pub fn verify_suites(seed: u64) -> VerifyReport {
    let rows = CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, f))| run_check(name, *f, derive_seed(seed, 1000 + i as u64)))
        .collect();
    VerifyReport { seed, rows }
}

pub fn run_check(name: &str, f: Check, stream_seed: u64) -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let start = Instant::now();
    let res = f(&mut rng);
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok(o) => CheckRow {
            name: name.into(),
            value: o.value,
            threshold: o.threshold,
            pass: o.pass,
            detail: o.detail,
            seconds,
        },
        Err(e) => CheckRow {
            name: name.into(),
            value: f64::NAN,
            threshold: f64::NAN,
            pass: false,
            detail: format!("error: {e}"),
            seconds,
        },
    }
}

fn random_pd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * rng.random_range(0.05..0.5);
    linalg::symmetrize(&mut m);
    m
}

fn random_ball_vec<R: Rng>(d: usize, rng: &mut R) -> DVector<f64> {
    uniform_ball(d, rng).coords().clone()
}

fn lifted_block(g: &DMatrix<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let d = x.len();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(&(g + x * x.transpose()));
    for i in 0..d {
        m[(i, d)] = x[i];
        m[(d, i)] = x[i];
    }
    m[(d, d)] = 1.0;
    m
}

fn check_lifted_trace(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let (g, h) = (random_pd(d, rng), random_pd(d, rng));
        let (gv, hv) = (random_ball_vec(d, rng), random_ball_vec(d, rng));
        let big_g = lifted_block(&g, &gv);
        let big_h = lifted_block(&h, &hv);
        let lhs = (linalg::spd_inverse(&big_h)? * &big_g).trace();
        let h_inv = linalg::spd_inverse(&h)?;
        let rhs = (&h_inv * &g).trace() + linalg::quad_form(&h_inv, &(&gv - &hv)) + 1.0;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(Outcome::at_most(worst, 1e-8, "max |error| over 1000 instances"))
}

fn check_bregman(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let (g, h) = (random_pd(d, rng), random_pd(d, rng));
        let (gv, hv) = (random_ball_vec(d, rng), random_ball_vec(d, rng));
        let lhs = bregman_div(&lifted_block(&g, &gv), &lifted_block(&h, &hv))?;
        let h_inv = linalg::spd_inverse(&h)?;
        let rhs = bregman_div(&g, &h)? + linalg::quad_form(&h_inv, &(&gv - &hv));
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(Outcome::at_most(worst, 1e-8, "max |error| over 1000 instances"))
}

fn random_set<R: Rng>(d: usize, n: usize, rng: &mut R) -> ActionSet {
    ActionSet::new((0..n).map(|_| uniform_ball(d, rng)).collect()).expect("ball draws")
}

fn random_distribution<R: Rng>(n: usize, rng: &mut R) -> ActionDistribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    ActionDistribution::normalized(w).expect("positive weights")
}

fn check_lifted_loss(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let set = random_set(d, n, rng);
        let p = random_distribution(n, rng);
        let y = LossVector::unbounded(random_ball_vec(d, rng));
        let gamma = lifted_loss(&y);
        let lhs = linalg::frobenius(lifted_cov(&p, &set)?.matrix(), gamma.matrix());
        let rhs = p.mean(&set)?.dot(y.coords());
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(Outcome::at_most(worst, 1e-8, "max |⟨Cov(p), γ(y)⟩ − ⟨E_p a, y⟩|"))
}

fn check_special_trace(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let set = random_set(d, n, rng);
        let p = random_distribution(n, rng);
        let beta = 10f64.powf(rng.random_range(-3.0..2.0));
        let st = EstimatorState::from_weighted(&[(&set, 1.0, p)], beta, 2)?;
        let u = random_ball_vec(d, rng);
        let mut lifted_u = u.clone().insert_row(d, 1.0);
        let lhs = linalg::quad_form(st.lifted_sigma_inv(), &lifted_u);
        lifted_u = u - &st.x_hat;
        let rhs = 0.25 * linalg::quad_form(st.sigma_inv(), &lifted_u) - 0.25;
        let slack = lhs - rhs;
        worst = worst.min(slack);
        if slack < -1e-9 {
            violations += 1;
        }
    }
    Ok(Outcome {
        value: violations as f64,
        threshold: 0.0,
        pass: violations == 0,
        detail: format!("min slack {worst:.3e} over 1000 instances"),
    })
}

fn check_reduction(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=6);
        let n = rng.random_range(1..=8);
        // some sets live on a lower-dimensional affine subspace
        let set = if rng.random::<bool>() && d > 1 {
            let k = rng.random_range(0..d);
            let rows = (0..n)
                .map(|_| {
                    let mut v = random_ball_vec(d, rng);
                    v[k] = 0.0;
                    v.iter().cloned().collect()
                })
                .collect();
            ActionSet::from_rows(rows)?
        } else {
            random_set(d, n, rng)
        };
        let red = affine_reduce(&set);
        for a in set.actions() {
            let back = red.reconstruct(&red.reduce(a.coords()));
            worst = worst.max((back - a.coords()).amax());
        }
    }
    Ok(Outcome::at_most(worst, 1e-9, "max reconstruction error"))
}

/// Objective of the d = 1 FTRL step in closed form, for the grid oracle.
fn d1_objective(p: &[f64; 3], xs: &[f64; 3], z: &DMatrix<f64>, eta: f64) -> f64 {
    let m1: f64 = p.iter().zip(xs).map(|(a, b)| a * b).sum();
    let m2: f64 = p.iter().zip(xs).map(|(a, b)| a * b * b).sum();
    let lin = z[(0, 0)] * m2 + 2.0 * z[(0, 1)] * m1 + z[(1, 1)];
    let det = m2 - m1 * m1;
    if det <= 0.0 {
        return f64::INFINITY;
    }
    lin - det.ln() / eta
}

fn check_fw_grid(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..20 {
        let xs = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let set = ActionSet::from_rows(xs.iter().map(|&x| vec![x]).collect())?;
        let mut z = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
        linalg::symmetrize(&mut z);
        let eta = rng.random_range(0.2..2.0);
        let obj = FtrlObjective::new(z.clone(), eta)?;
        let (p, _) = solve_ftrl_step(&set, &obj, 1e-9, 100_000)?;
        let mine = ftrl_objective(&p, &set, &obj)?;
        let mut best = f64::INFINITY;
        let n = 1000;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let q = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                best = best.min(d1_objective(&q, &xs, &z, eta));
            }
        }
        worst = worst.max(mine - best);
    }
    Ok(Outcome::at_most(worst, 1e-4, "max (solver − grid minimum) over 20 instances"))
}

fn check_fw_symmetric(_rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let set = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let (p, _) = solve_ftrl_step(&set, &FtrlObjective::zero(2, 1.0), 1e-6, 1000)?;
    let err = p.weights().iter().map(|w| (w - 0.5).abs()).fold(0.0, f64::max);
    Ok(Outcome::at_most(err, 1e-3, "max |p − 1/2| on {e1, e2}, Z = 0"))
}

fn check_g_basis(_rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in 2..=8 {
        let rows = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        let set = ActionSet::from_rows(rows)?;
        let (nu, _) = g_optimal_design_default(&set, 1e-6)?;
        let linf = nu.weights().iter().map(|w| (w - 1.0 / d as f64).abs()).fold(0.0, f64::max);
        let lev = max_leverage(&nu, &set)?;
        worst = worst.max(linf).max((lev - d as f64).abs());
    }
    Ok(Outcome::at_most(worst, 1e-3, "max of L∞ distance to uniform and |leverage − d|, d = 2..8"))
}

fn check_g_random(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let set = random_set(5, 20, rng);
        let (nu, _) = g_optimal_design_default(&set, 1e-6)?;
        let lev = max_leverage(&nu, &set)?;
        worst = worst.max(lev - crate::design::span_rank(&set) as f64);
    }
    Ok(Outcome::at_most(worst, 1e-2, "max (leverage − rank) over 20 random 20-action sets"))
}

fn check_concentration(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let (c, d, n, delta) = (2.0, 3usize, 500usize, 0.05);
    let kappa = 1.5 * c * (d as f64 / n as f64) * (d as f64 / delta).ln();
    // fixed finite-support instance: contexts with policies, H_i = E_p[aaᵀ]
    let atoms: Vec<DMatrix<f64>> = (0..6)
        .map(|_| {
            let set = random_set(d, 4, rng);
            let p = random_distribution(4, rng);
            p.second_moment(&set).expect("dimensions match")
        })
        .collect();
    let probs: Vec<f64> = ActionDistribution::normalized((0..6).map(|_| rng.random_range(0.1..1.0)).collect())?
        .weights()
        .to_vec();
    let mut h = DMatrix::zeros(d, d);
    for (a, p) in atoms.iter().zip(&probs) {
        h += a * *p;
    }
    let trials = 400;
    let mut violations = 0;
    for _ in 0..trials {
        let mut h_hat = DMatrix::zeros(d, d);
        for _ in 0..n {
            h_hat += &atoms[crate::algorithms::sample_index(&probs, rng)];
        }
        h_hat /= n as f64;
        let m = h_hat + DMatrix::identity(d, d) * kappa - &h * 0.5;
        if linalg::min_eigenvalue(&m) < 0.0 {
            violations += 1;
        }
    }
    let rate = violations as f64 / trials as f64;
    Ok(Outcome::at_most(
        rate,
        2.0 * delta,
        format!("{violations}/{trials} violations, shift {kappa:.4}, threshold 2δ"),
    ))
}

/// Closed-form conditional mean against Monte Carlo; returns the largest
/// deviation in standard errors.
pub fn estimator_mean_z_score<R: Rng>(rng: &mut R, draws: usize) -> Result<f64> {
    let d = 3;
    let k = rng.random_range(2..=4);
    let sets: Vec<ActionSet> = (0..k).map(|_| random_set(d, rng.random_range(2..=5), rng)).collect();
    let policies: Vec<ActionDistribution> = sets.iter().map(|s| random_distribution(s.len(), rng)).collect();
    let probs = ActionDistribution::normalized((0..k).map(|_| rng.random_range(0.1..1.0)).collect())?;
    let samples: Vec<(&ActionSet, f64, ActionDistribution)> = sets
        .iter()
        .zip(&policies)
        .zip(probs.weights())
        .map(|((s, p), w)| (s, *w, p.clone()))
        .collect();
    let st = EstimatorState::from_weighted(&samples, rng.random_range(0.05..1.0), 2)?;
    let y = random_ball_vec(d, rng);

    let mut cross = DMatrix::zeros(d, d);
    for ((s, p), w) in sets.iter().zip(&policies).zip(probs.weights()) {
        for (a, pa) in s.actions().iter().zip(p.weights()) {
            cross += (a.coords() - &st.x_hat) * a.coords().transpose() * (w * pa);
        }
    }
    let expected = st.sigma_inv() * cross * &y;

    let mut sum = DVector::zeros(d);
    let mut sum_sq = DVector::zeros(d);
    for _ in 0..draws {
        let ci = crate::algorithms::sample_index(probs.weights(), rng);
        let ai = crate::algorithms::sample_index(policies[ci].weights(), rng);
        let a = sets[ci].get(ai);
        let mean = a.coords().dot(&y);
        let ell = if rng.random::<f64>() < (1.0 + mean) / 2.0 { 1.0 } else { -1.0 };
        let est = st.sigma_inv() * (a.coords() - &st.x_hat) * ell;
        sum += &est;
        sum_sq += est.component_mul(&est);
    }
    let nf = draws as f64;
    let mut worst: f64 = 0.0;
    for i in 0..d {
        let m = sum[i] / nf;
        let var = (sum_sq[i] / nf - m * m).max(0.0);
        let se = (var / nf).sqrt();
        worst = worst.max((m - expected[i]).abs() / se.max(1e-300));
    }
    Ok(worst)
}

fn check_estimator_mean(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        worst = worst.max(estimator_mean_z_score(rng, 100_000)?);
    }
    Ok(Outcome::at_most(worst, 3.0, "max |MC − closed form| in standard errors, 5 instances × 3 coords"))
}

fn uniform_stabilise(seed: u64, horizon: u64) -> Result<Stabilise> {
    Stabilise::new(
        0.0,
        horizon,
        seed,
        Box::new(move |j, _| Ok(Box::new(UniformRandom::new(derive_seed(seed, j as u64))) as Box<dyn Learner>)),
    )
}

/// Largest deviation, in binomial standard errors, between each bucket's
/// forwarded fraction and `2^{−j−1}`.
pub fn dispatch_z_score<R: Rng>(rng: &mut R, rounds_per_bucket: usize) -> Result<f64> {
    let horizon = 1u64 << 20;
    let mut st = uniform_stabilise(rng.random(), horizon)?;
    let set = ActionSet::from_rows(vec![vec![1.0], vec![-1.0]])?;
    for _ in 0..rounds_per_bucket {
        for j in 0..4 {
            let lo = 0.5f64.powi(j + 1);
            let w = lo + (lo * 2.0 - lo) * rng.random_range(1e-9..=1.0);
            st.simulate_round(w, &set, |_| 0.5)?;
        }
    }
    let mut worst: f64 = 0.0;
    for j in 0..4usize {
        let n = st.assigned_counts()[j] as f64;
        let p = 0.5f64.powi(j as i32 + 1);
        let rate = st.forwarded_counts()[j] as f64 / n;
        worst = worst.max((rate - p).abs() / (p * (1.0 - p) / n).sqrt());
    }
    Ok(worst)
}

fn check_dispatch(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let z = dispatch_z_score(rng, 10_000)?;
    Ok(Outcome::at_most(z, 3.0, "max |rate − 2^{−j−1}| in binomial standard errors, j = 0..3"))
}

fn check_skip(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let horizon = 100;
    let mut st = uniform_stabilise(rng.random(), horizon)?;
    let set = ActionSet::from_rows(vec![vec![1.0], vec![-1.0]])?;
    let mut touched = 0;
    for _ in 0..1000 {
        let w = rng.random_range(0.0..=1.0 / horizon as f64);
        let (sel, fwd) = st.simulate_round(w, &set, |_| 0.5)?;
        if fwd || sel.index != 0 {
            touched += 1;
        }
    }
    touched += st.assigned_counts().iter().sum::<u64>() as usize;
    Ok(Outcome {
        value: touched as f64,
        threshold: 0.0,
        pass: touched == 0,
        detail: "rounds with w ≤ 1/T that reached an instance".into(),
    })
}

/// Worst KKT residual of the clamped log-barrier solution, together with
/// simplex and clamp violations.
pub fn log_barrier_kkt_residual(w: &[f64], l: &[f64], eta: f64, floor: f64) -> f64 {
    let sum_err = (w.iter().sum::<f64>() - 1.0).abs();
    let clamp_err = w.iter().map(|&x| (floor - x).max(x - 1.0).max(0.0)).fold(0.0, f64::max);
    let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > floor * (1.0 + 1e-9)).collect();
    if free.is_empty() {
        return sum_err.max(clamp_err);
    }
    // stationarity: Lᵢ − 1/(η wᵢ) + λ = 0 on free coordinates, scaled by η wᵢ
    let lams: Vec<f64> = free.iter().map(|&i| 1.0 / (eta * w[i]) - l[i]).collect();
    let lam = lams.iter().sum::<f64>() / lams.len() as f64;
    let mut worst = sum_err.max(clamp_err);
    for (&i, li) in free.iter().zip(&lams) {
        worst = worst.max((li - lam).abs() * eta * w[i]);
    }
    for i in 0..w.len() {
        if !free.contains(&i) {
            // reduced gradient at the clamp must be nonnegative
            let g = l[i] - 1.0 / (eta * floor) + lam;
            worst = worst.max((-g * eta * floor).max(0.0));
        }
    }
    worst
}

fn check_corral_kkt(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let m = rng.random_range(1..=12);
        let horizon = rng.random_range(m as u64..5000);
        let eta = 10f64.powf(rng.random_range(-4.0..0.0));
        let scale = 10f64.powf(rng.random_range(-1.0..4.0));
        let l: Vec<f64> = (0..m).map(|_| rng.random_range(-scale..scale)).collect();
        let floor = 1.0 / horizon as f64;
        let w = clamped_log_barrier_weights(&l, eta, floor)?;
        worst = worst.max(log_barrier_kkt_residual(&w, &l, eta, floor));
    }
    Ok(Outcome::at_most(worst, 1e-8, "max KKT / simplex / clamp residual over 500 problems"))
}

/// Runs a two-arm Corral (constant losses `0.9` and `0.1`) for `horizon`
/// rounds; returns (final weight of the good arm, worst clamp violation,
/// worst telescoping error).
pub fn two_arm_corral(seed: u64, horizon: u64, c1_prime: f64) -> Result<(f64, f64, f64)> {
    let cfg = CorralConfig {
        horizon,
        c1_prime,
        c2_prime: 1.0,
        seed,
    };
    let arms: Vec<Box<dyn ProtocolArm>> = vec![Box::new(FixedActionArm::new(0)), Box::new(FixedActionArm::new(1))];
    let mut corral = Corral::new(cfg, arms)?;
    let set = ActionSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let floor = 1.0 / horizon as f64;
    let mut clamp_err: f64 = 0.0;
    for _ in 0..horizon {
        let sel = corral.select(&set)?;
        let (_, w) = corral.pending().expect("round pending");
        let s: f64 = w.iter().sum();
        clamp_err = clamp_err.max((s - 1.0).abs());
        for &x in w {
            clamp_err = clamp_err.max((floor - x).max(x - 1.0).max(0.0));
        }
        corral.update(if sel.index == 0 { 0.9 } else { 0.1 })?;
    }
    let m = corral.arms() as f64;
    let t = horizon as f64;
    let mut tele: f64 = 0.0;
    for i in 0..corral.arms() {
        let expected = c1_prime * ((corral.rho()[i] * t).sqrt() - (m * t).sqrt());
        tele = tele.max((corral.bonus_totals()[i] - expected).abs());
    }
    Ok((corral.weights()?[1], clamp_err, tele))
}

fn check_telescoping(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let (_, clamp, tele) = two_arm_corral(rng.random(), 2000, 1.0)?;
    Ok(Outcome::at_most(
        clamp.max(tele),
        1e-6,
        format!("clamp residual {clamp:.2e}, telescoping error {tele:.2e}"),
    ))
}

/// Minimum over every per-context action assignment.
pub fn brute_force_comparator(contexts: &[ActionSet], losses: &[Vec<f64>]) -> f64 {
    let mut distinct: Vec<&ActionSet> = Vec::new();
    let mut group = Vec::with_capacity(contexts.len());
    for c in contexts {
        match distinct.iter().position(|s| *s == c) {
            Some(i) => group.push(i),
            None => {
                distinct.push(c);
                group.push(distinct.len() - 1);
            }
        }
    }
    let sizes: Vec<usize> = distinct.iter().map(|s| s.len()).collect();
    let total: usize = sizes.iter().product();
    let mut best = f64::INFINITY;
    for code in 0..total {
        let mut rem = code;
        let choice: Vec<usize> = sizes
            .iter()
            .map(|&s| {
                let c = rem % s;
                rem /= s;
                c
            })
            .collect();
        let loss: f64 = group.iter().zip(losses).map(|(&g, l)| l[choice[g]]).sum();
        best = best.min(loss);
    }
    best
}

fn check_comparator(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=3);
        let k = rng.random_range(1..=3);
        let pool: Vec<ActionSet> = (0..k).map(|_| random_set(d, rng.random_range(1..=3), rng)).collect();
        let rounds = rng.random_range(1..=12);
        let contexts: Vec<ActionSet> = (0..rounds).map(|_| pool[rng.random_range(0..k)].clone()).collect();
        let losses: Vec<Vec<f64>> = contexts
            .iter()
            .map(|s| (0..s.len()).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let fast = comparator_loss(&contexts, &losses)?;
        worst = worst.max((fast - brute_force_comparator(&contexts, &losses)).abs());
    }
    Ok(Outcome::at_most(worst, 1e-12, "max |comparator − brute force| over 50 instances"))
}

fn check_exp4_magnitude(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let d = 2;
    let horizon = 400;
    let net = build_linear_policy_net(d, 20, 2.0, 10_000)?;
    let cfg = Exp4Config::for_horizon(d, horizon, rng.random());
    let mut exp4 = Exp4::with_linear_policies(net, cfg)?;
    let mut worst: f64 = 0.0;
    for _ in 0..horizon {
        let set = random_set(d, rng.random_range(1..=6), rng);
        exp4.select(&set)?;
        exp4.update(rng.random_range(-1.0..=1.0))?;
        worst = worst.max(exp4.last_estimates().iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let bound = d as f64 / cfg.gamma;
    Ok(Outcome::at_most(worst - bound, 1e-6, format!("max |ℓ̂| = {worst:.4}, d/γ = {bound:.4}")))
}

fn small_sleeping(algorithm: AlgorithmKind, horizon: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::example(algorithm, 3, horizon);
    cfg.adversary = AdversarySpec {
        kind: AdversaryKind::Fixed {
            y: vec![0.5, -0.3, 0.1],
        },
        epsilon: 0.1,
        misspec_mode: MisspecMode::Sign,
    };
    cfg
}

fn check_replay(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let seed = rng.random();
    let base = run_seed(&small_sleeping(AlgorithmKind::LogdetFtrl, 150), seed)?;
    let mis = run_seed(&small_sleeping(AlgorithmKind::MisspecFtrl, 150), seed)?;
    let diffs = base
        .traces
        .iter()
        .zip(&mis.traces)
        .filter(|(a, b)| a != b)
        .count();
    Ok(Outcome {
        value: diffs as f64,
        threshold: 0.0,
        pass: diffs == 0 && base.traces.len() == mis.traces.len(),
        detail: "rounds differing between ε = 0 variant and base algorithm".into(),
    })
}

fn check_csv_determinism(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let seed = rng.random();
    let mut cfg = small_sleeping(AlgorithmKind::LogdetFtrl, 100);
    cfg.context = ContextSpec::FiniteSupport {
        sets: vec![
            WeightedSet {
                actions: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.6, 0.0]],
                probability: 0.5,
            },
            WeightedSet {
                actions: vec![vec![0.0, 0.0, -1.0], vec![0.3, 0.3, 0.3], vec![0.0, -0.5, 0.0]],
                probability: 0.5,
            },
        ],
    };
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let run = run_seed(&cfg, seed)?;
        let mut buf = Vec::new();
        emit_csv(&run.traces, &mut buf)?;
        bytes.push(buf);
    }
    let same = bytes[0] == bytes[1];
    Ok(Outcome {
        value: if same { 0.0 } else { 1.0 },
        threshold: 0.0,
        pass: same,
        detail: "byte comparison of two runs with the same config and seed".into(),
    })
}
