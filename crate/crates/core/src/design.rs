//! Simplex optimizers for log-determinant objectives.
//!
//! Both the per-context FTRL step and the G-optimal exploration design reduce
//! to minimizing
//!
//! ```text
//!     f(p) = Σᵢ pᵢ ℓᵢ − κ · log det( Σᵢ pᵢ vᵢ vᵢᵀ )      over the simplex,
//! ```
//!
//! for vectors `vᵢ` that span their space. For the FTRL step the `vᵢ` are the
//! lifted actions expressed in the affine hull of the set, `ℓᵢ = 𝐚ᵢᵀ Z 𝐚ᵢ` and
//! `κ = 1/η`; for the design `vᵢ` are the actions in their linear span, `ℓ = 0`
//! and `κ = 1`. The solver is Frank–Wolfe with away steps and an exact line
//! search built on the rank-one determinant update.

use nalgebra::{DMatrix, DVector};

use crate::error::{BanditError, Result};
use crate::lifted::{lift, ActionDistribution, ActionSet};
use crate::linalg::{self, PINV_CUTOFF};

/// Rank tolerance for the pivoted orthogonalization in [`affine_reduce`].
pub const AFFINE_RANK_TOL: f64 = 1e-10;

pub const DEFAULT_TOL: f64 = 1e-6;

const LINE_SEARCH_TOL: f64 = 1e-12;
const STEP_CAP: f64 = 1.0 - 1e-12;

/// Coordinates of an action set inside its affine hull: `a = base + basisᵀ c`.
#[derive(Debug, Clone)]
pub struct AffineReduction {
    base: DVector<f64>,
    basis: DMatrix<f64>,
}

impl AffineReduction {
    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    /// `rank × d`, orthonormal rows.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    pub fn reduce(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.basis * (a - &self.base)
    }

    pub fn reconstruct(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.base + self.basis.transpose() * c
    }
}

/// Orthonormal basis of the directions `aᵢ − a₀`, by pivoted Gram–Schmidt.
pub fn affine_reduce(set: &ActionSet) -> AffineReduction {
    let base = set.get(0).coords().clone();
    let d = set.dim();
    let mut residuals: Vec<DVector<f64>> = set
        .actions()
        .iter()
        .skip(1)
        .map(|a| a.coords() - &base)
        .collect();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    while rows.len() < d {
        let (idx, norm) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm()))
            .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if idx == usize::MAX || norm <= AFFINE_RANK_TOL {
            break;
        }
        let mut q = residuals[idx].clone() / norm;
        // second pass keeps the rows orthonormal to ~1e-16
        for r in &rows {
            let c = r.dot(&q);
            q.axpy(-c, r, 1.0);
        }
        q /= q.norm();
        for r in residuals.iter_mut() {
            let c = q.dot(r);
            r.axpy(-c, &q, 1.0);
        }
        rows.push(q);
    }
    let mut basis = DMatrix::zeros(rows.len(), d);
    for (i, r) in rows.iter().enumerate() {
        basis.row_mut(i).copy_from(&r.transpose());
    }
    AffineReduction { base, basis }
}

/// `f(p) = ⟨Ĉov(p), Z⟩ + F(Ĉov(p)) / η`.
#[derive(Debug, Clone)]
pub struct FtrlObjective {
    z: DMatrix<f64>,
    eta: f64,
}

impl FtrlObjective {
    pub fn new(z: DMatrix<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(BanditError::Config(format!("eta must be positive, got {eta}")));
        }
        if !linalg::is_symmetric(&z, 1e-10) {
            return Err(BanditError::Config("Z must be symmetric".into()));
        }
        Ok(Self { z, eta })
    }

    pub fn zero(d: usize, eta: f64) -> Self {
        Self {
            z: DMatrix::zeros(d + 1, d + 1),
            eta,
        }
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub final_gap: f64,
    pub objective: f64,
    pub converged: bool,
}

/// `max(200, 10 · n · (r+1)²)`.
pub fn default_max_iter(n_actions: usize, rank: usize) -> usize {
    (10 * n_actions * (rank + 1) * (rank + 1)).max(200)
}

/// A log-det objective over the simplex in reduced coordinates.
struct LogdetProblem {
    vectors: Vec<DVector<f64>>,
    linear: Vec<f64>,
    kappa: f64,
    dim: usize,
}

struct Eval {
    objective: f64,
    /// `vᵢᵀ M⁻¹ vᵢ`
    leverage: Vec<f64>,
    /// `ℓᵢ − κ · leverageᵢ`
    grad: Vec<f64>,
}

impl LogdetProblem {
    fn moment(&self, p: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (w, v) in p.iter().zip(&self.vectors) {
            if *w > 0.0 {
                m.ger(*w, v, v, 1.0);
            }
        }
        linalg::symmetrize(&mut m);
        m
    }

    fn evaluate(&self, p: &[f64]) -> Option<Eval> {
        let m = self.moment(p);
        let chol = m.cholesky()?;
        let l = chol.l();
        let logdet: f64 = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        if !logdet.is_finite() {
            return None;
        }
        let lin: f64 = p.iter().zip(&self.linear).map(|(w, l)| w * l).sum();
        let mut leverage = Vec::with_capacity(self.vectors.len());
        for v in &self.vectors {
            let y = l.solve_lower_triangular(v)?;
            leverage.push(y.norm_squared());
        }
        let grad = leverage
            .iter()
            .zip(&self.linear)
            .map(|(q, l)| l - self.kappa * q)
            .collect();
        Some(Eval {
            objective: lin - self.kappa * logdet,
            leverage,
            grad,
        })
    }

    /// Exact minimization of `s ↦ f(p + s·dir)` where `dir = σ(e_v − p)`.
    /// `lin_slope = σ(ℓ_v − Σ pᵢℓᵢ)`, `q = v_vᵀ M⁻¹ v_v`.
    fn line_search(&self, lin_slope: f64, q: f64, sigma: f64, s_max: f64) -> f64 {
        let m = self.dim as f64;
        let k = self.kappa;
        let dphi = |s: f64| -> f64 {
            let a = 1.0 - sigma * s;
            let b = 1.0 + sigma * s * (q - 1.0);
            if a <= 0.0 || b <= 0.0 {
                return f64::INFINITY;
            }
            lin_slope + k * sigma * (m - 1.0) / a - k * sigma * (q - 1.0) / b
        };
        let ddphi = |s: f64| -> f64 {
            let a = 1.0 - sigma * s;
            let b = 1.0 + sigma * s * (q - 1.0);
            k * ((m - 1.0) / (a * a) + (q - 1.0) * (q - 1.0) / (b * b))
        };
        if dphi(0.0) >= 0.0 {
            return 0.0;
        }
        let g_max = dphi(s_max);
        if g_max.is_finite() && g_max <= 0.0 {
            return s_max;
        }
        let (mut lo, mut hi) = (0.0_f64, s_max);
        let mut s = 0.0;
        for _ in 0..200 {
            let g = dphi(s);
            if g.is_finite() && g.abs() < 1e-15 * (1.0 + lin_slope.abs()) {
                return s;
            }
            if g < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            if hi - lo <= LINE_SEARCH_TOL {
                break;
            }
            let h = ddphi(s);
            let newton = if g.is_finite() && h > 0.0 { s - g / h } else { f64::NAN };
            s = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        if dphi(s) > 0.0 {
            lo
        } else {
            s
        }
    }

    /// Frank–Wolfe with away steps from `p`. `threshold(objective)` gives the
    /// gap at which to stop.
    fn minimize(
        &self,
        mut p: Vec<f64>,
        max_iter: usize,
        threshold: impl Fn(f64) -> f64,
    ) -> (Vec<f64>, SolverReport) {
        let mut eval = match self.evaluate(&p) {
            Some(e) => e,
            None => {
                return (
                    p,
                    SolverReport {
                        iterations: 0,
                        final_gap: f64::INFINITY,
                        objective: f64::INFINITY,
                        converged: false,
                    },
                )
            }
        };
        let mut iterations = 0;
        loop {
            let avg: f64 = p.iter().zip(&eval.grad).map(|(w, g)| w * g).sum();
            let (fw, g_fw) = argmin_first(&eval.grad);
            let gap = (avg - g_fw).max(0.0);
            if gap <= threshold(eval.objective) || iterations >= max_iter {
                let converged = gap <= threshold(eval.objective);
                return (
                    p,
                    SolverReport {
                        iterations,
                        final_gap: gap,
                        objective: eval.objective,
                        converged,
                    },
                );
            }
            let away = p
                .iter()
                .zip(&eval.grad)
                .enumerate()
                .filter(|(_, (w, _))| **w > 0.0)
                .fold(None, |best: Option<(usize, f64)>, (i, (_, g))| match best {
                    Some((_, bg)) if *g <= bg => best,
                    _ => Some((i, *g)),
                });
            let lin_avg: f64 = p.iter().zip(&self.linear).map(|(w, l)| w * l).sum();
            let use_away = match away {
                Some((j, g_aw)) => g_aw - avg > gap && p[j] < 1.0,
                None => false,
            };
            if use_away {
                let j = away.unwrap().0;
                let s_max = p[j] / (1.0 - p[j]);
                let s = self.line_search(
                    -(self.linear[j] - lin_avg),
                    eval.leverage[j],
                    -1.0,
                    s_max,
                );
                for w in p.iter_mut() {
                    *w *= 1.0 + s;
                }
                p[j] -= s;
                if s >= s_max || p[j] < 0.0 {
                    p[j] = 0.0;
                }
            } else {
                let s = self.line_search(
                    self.linear[fw] - lin_avg,
                    eval.leverage[fw],
                    1.0,
                    STEP_CAP,
                );
                for w in p.iter_mut() {
                    *w *= 1.0 - s;
                }
                p[fw] += s;
            }
            renormalize(&mut p);
            iterations += 1;
            match self.evaluate(&p) {
                Some(e) => eval = e,
                None => {
                    // numerically singular after a step; report where we are
                    return (
                        p,
                        SolverReport {
                            iterations,
                            final_gap: f64::INFINITY,
                            objective: eval.objective,
                            converged: false,
                        },
                    );
                }
            }
        }
    }
}

fn renormalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|w| *w /= s);
}

/// Lowest index attaining the minimum.
fn argmin_first(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

fn ftrl_problem(set: &ActionSet, obj: &FtrlObjective) -> Result<LogdetProblem> {
    let d = set.dim();
    if obj.z.nrows() != d + 1 {
        return Err(BanditError::DimensionMismatch {
            expected: d + 1,
            got: obj.z.nrows(),
        });
    }
    let red = affine_reduce(set);
    let r = red.rank();
    let mut vectors = Vec::with_capacity(set.len());
    let mut linear = Vec::with_capacity(set.len());
    for a in set.actions() {
        let c = red.reduce(a.coords());
        let mut v = DVector::zeros(r + 1);
        v.rows_mut(0, r).copy_from(&c);
        v[r] = 1.0;
        vectors.push(v);
        let la = lift(a).into_inner();
        linear.push(linalg::quad_form(&obj.z, &la));
    }
    Ok(LogdetProblem {
        vectors,
        linear,
        kappa: 1.0 / obj.eta,
        dim: r + 1,
    })
}

/// One FTRL step on a single action set: the distribution minimizing
/// `⟨Ĉov(p), Z⟩ + F(Ĉov(p))/η`, with the barrier evaluated in the affine hull
/// of the set. Non-convergence is recorded in the report, not raised.
pub fn solve_ftrl_step(
    set: &ActionSet,
    obj: &FtrlObjective,
    tol: f64,
    max_iter: usize,
) -> Result<(ActionDistribution, SolverReport)> {
    if !(tol > 0.0) {
        return Err(BanditError::Config(format!("tol must be positive, got {tol}")));
    }
    let problem = ftrl_problem(set, obj)?;
    if set.len() == 1 {
        let objective = problem.linear[0];
        return Ok((
            ActionDistribution::point_mass(1, 0),
            SolverReport {
                iterations: 0,
                final_gap: 0.0,
                objective,
                converged: true,
            },
        ));
    }
    let p0 = vec![1.0 / set.len() as f64; set.len()];
    let (p, report) = problem.minimize(p0, max_iter, |f| tol * f.abs().max(1.0));
    Ok((ActionDistribution::normalized(p)?, report))
}

/// [`solve_ftrl_step`] with the default tolerance and iteration budget.
pub fn solve_ftrl_step_default(
    set: &ActionSet,
    obj: &FtrlObjective,
) -> Result<(ActionDistribution, SolverReport)> {
    let r = affine_reduce(set).rank();
    solve_ftrl_step(set, obj, DEFAULT_TOL, default_max_iter(set.len(), r))
}

/// Objective value of `p` in the same reduced form the solver minimizes.
pub fn ftrl_objective(p: &ActionDistribution, set: &ActionSet, obj: &FtrlObjective) -> Result<f64> {
    let problem = ftrl_problem(set, obj)?;
    match problem.evaluate(p.weights()) {
        Some(e) => Ok(e.objective),
        None => Ok(f64::INFINITY),
    }
}

/// Frank–Wolfe duality gap `⟨Ĉov(p) − Ĉov(e_k), ∇f(p)⟩` with `k` the
/// gradient-minimizing vertex. Infinite when `Ĉov(p)` is singular on the
/// affine hull (the barrier's gradient blows up there).
pub fn fw_gap(p: &ActionDistribution, set: &ActionSet, obj: &FtrlObjective) -> Result<f64> {
    if p.len() != set.len() {
        return Err(BanditError::DimensionMismatch {
            expected: set.len(),
            got: p.len(),
        });
    }
    if set.len() == 1 {
        return Ok(0.0);
    }
    let problem = ftrl_problem(set, obj)?;
    Ok(match problem.evaluate(p.weights()) {
        Some(e) => {
            let avg: f64 = p.weights().iter().zip(&e.grad).map(|(w, g)| w * g).sum();
            (avg - argmin_first(&e.grad).1).max(0.0)
        }
        None => f64::INFINITY,
    })
}

/// Orthonormal basis (rows) of the linear span of the actions, using the
/// relative eigenvalue cutoff [`PINV_CUTOFF`] on `Σ aaᵀ`.
fn span_basis(set: &ActionSet) -> DMatrix<f64> {
    let d = set.dim();
    let mut s = DMatrix::zeros(d, d);
    for a in set.actions() {
        s.ger(1.0, a.coords(), a.coords(), 1.0);
    }
    linalg::symmetrize(&mut s);
    let eig = nalgebra::SymmetricEigen::new(s);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let keep: Vec<usize> = (0..d)
        .filter(|&k| lmax > 0.0 && eig.eigenvalues[k] > PINV_CUTOFF * lmax)
        .collect();
    let mut basis = DMatrix::zeros(keep.len(), d);
    for (row, &k) in keep.iter().enumerate() {
        basis
            .row_mut(row)
            .copy_from(&eig.eigenvectors.column(k).transpose());
    }
    basis
}

/// Exploration design `ν` with `max_a ‖a‖²_{G(ν)⁺} ≤ rank + tol`, where
/// `G(ν) = E_{a∼ν}[aaᵀ]`. Computed as the D-optimal design in the span of the
/// actions; the two coincide at the optimum.
pub fn g_optimal_design(
    set: &ActionSet,
    tol: f64,
    max_iter: usize,
) -> Result<(ActionDistribution, SolverReport)> {
    if !(tol > 0.0) {
        return Err(BanditError::Config(format!("tol must be positive, got {tol}")));
    }
    let n = set.len();
    let basis = span_basis(set);
    let r = basis.nrows();
    if n == 1 || r == 0 {
        return Ok((
            ActionDistribution::point_mass(n, 0),
            SolverReport {
                iterations: 0,
                final_gap: 0.0,
                objective: 0.0,
                converged: true,
            },
        ));
    }
    let problem = LogdetProblem {
        vectors: set.actions().iter().map(|a| &basis * a.coords()).collect(),
        linear: vec![0.0; n],
        kappa: 1.0,
        dim: r,
    };
    let (p, report) = problem.minimize(vec![1.0 / n as f64; n], max_iter, |_| tol);
    Ok((ActionDistribution::normalized(p)?, report))
}

pub fn g_optimal_design_default(set: &ActionSet, tol: f64) -> Result<(ActionDistribution, SolverReport)> {
    let r = span_basis(set).nrows();
    g_optimal_design(set, tol, default_max_iter(set.len(), r))
}

/// `max_a aᵀ G(ν)⁺ a`, evaluated directly in the ambient space.
pub fn max_leverage(nu: &ActionDistribution, set: &ActionSet) -> Result<f64> {
    let g = nu.second_moment(set)?;
    let g_pinv = linalg::pinv_psd(&g);
    Ok(set
        .actions()
        .iter()
        .map(|a| linalg::quad_form(&g_pinv, a.coords()))
        .fold(0.0, f64::max))
}

/// Dimension of the linear span of the actions.
pub fn span_rank(set: &ActionSet) -> usize {
    span_basis(set).nrows()
}
