//! Lifted-space domain types.
//!
//! An action `a ∈ ℝᵈ` is lifted to `𝐚 = (a, 1)`, and a distribution `p` over an
//! action set to the (d+1)×(d+1) second-moment matrix `Ĉov(p) = E_{a∼p}[𝐚𝐚ᵀ]`.
//! Linear losses become `γ = [[0, y/2], [yᵀ/2, 0]]`, so that
//! `⟨Ĉov(p), γ⟩ = E_{a∼p}⟨a, y⟩`. The learner's regularizer is `F(𝐇) = −log det 𝐇`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{BanditError, Result};
use crate::linalg;

const NORM_TOL: f64 = 1e-9;
const SIMPLEX_TOL: f64 = 1e-9;
const ID_QUANTUM: f64 = 1e-12;

/// A feature vector inside the closed unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Action(DVector<f64>);

impl Action {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(BanditError::InvalidAction("zero-dimensional action".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(BanditError::InvalidAction("non-finite coordinate".into()));
        }
        let v = DVector::from_vec(coords);
        let n = v.norm();
        if n > 1.0 + NORM_TOL {
            return Err(BanditError::InvalidAction(format!(
                "norm {n} exceeds the unit ball"
            )));
        }
        Ok(Self(v))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        Self::new(v.iter().cloned().collect())
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn lift(&self) -> LiftedAction {
        lift(self)
    }
}

/// `(a, 1)`; the last coordinate is always exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedAction(DVector<f64>);

impl LiftedAction {
    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

pub fn lift(a: &Action) -> LiftedAction {
    let d = a.dim();
    let mut v = DVector::zeros(d + 1);
    v.rows_mut(0, d).copy_from(a.coords());
    v[d] = 1.0;
    LiftedAction(v)
}

/// Canonical, order-insensitive identifier of an action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextId(pub u64);

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// A nonempty, ordered list of actions of common dimension (one context).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    actions: Vec<Action>,
    id: ContextId,
}

impl ActionSet {
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        let first = actions.first().ok_or(BanditError::EmptyActionSet)?;
        let d = first.dim();
        if let Some(bad) = actions.iter().find(|a| a.dim() != d) {
            return Err(BanditError::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        let id = canonical_id(&actions);
        Ok(Self { actions, id })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Action::new).collect::<Result<_>>()?)
    }

    pub fn id(&self) -> ContextId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.actions[0].dim()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn get(&self, i: usize) -> &Action {
        &self.actions[i]
    }
}

fn canonical_id(actions: &[Action]) -> ContextId {
    let mut keys: Vec<Vec<i64>> = actions
        .iter()
        .map(|a| {
            a.coords()
                .iter()
                .map(|c| (c / ID_QUANTUM).round() as i64)
                .collect()
        })
        .collect();
    keys.sort_by(|x, y| x.iter().cmp(y.iter()));
    let mut h = Sha256::new();
    h.update((actions[0].dim() as u64).to_le_bytes());
    for k in &keys {
        for c in k {
            h.update(c.to_le_bytes());
        }
    }
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    ContextId(u64::from_le_bytes(b))
}

/// A probability vector aligned with an [`ActionSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution(Vec<f64>);

impl ActionDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(BanditError::InvalidDistribution("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(BanditError::InvalidDistribution(format!(
                "weight {w} is negative or non-finite"
            )));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(BanditError::InvalidDistribution(format!(
                "weights sum to {s}"
            )));
        }
        Ok(Self(weights))
    }

    /// Clamp tiny negatives and rescale onto the simplex.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(BanditError::InvalidDistribution("zero total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&w| w > 0.0).count()
    }

    fn check_aligned(&self, set: &ActionSet) -> Result<()> {
        if self.len() != set.len() {
            return Err(BanditError::DimensionMismatch {
                expected: set.len(),
                got: self.len(),
            });
        }
        Ok(())
    }

    /// `E_{a∼p}[a]`.
    pub fn mean(&self, set: &ActionSet) -> Result<DVector<f64>> {
        self.check_aligned(set)?;
        let mut m = DVector::zeros(set.dim());
        for (w, a) in self.0.iter().zip(set.actions()) {
            if *w > 0.0 {
                m.axpy(*w, a.coords(), 1.0);
            }
        }
        Ok(m)
    }

    /// `E_{a∼p}[a aᵀ]`.
    pub fn second_moment(&self, set: &ActionSet) -> Result<DMatrix<f64>> {
        self.check_aligned(set)?;
        let d = set.dim();
        let mut m = DMatrix::zeros(d, d);
        for (w, a) in self.0.iter().zip(set.actions()) {
            if *w > 0.0 {
                m.ger(*w, a.coords(), a.coords(), 1.0);
            }
        }
        linalg::symmetrize(&mut m);
        Ok(m)
    }
}

/// `Ĉov(p)`: symmetric PSD, bottom-right entry one.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedCov(DMatrix<f64>);

impl LiftedCov {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Check the structural invariants (symmetry, PSD, corner, trace).
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let m = &self.0;
        let n = m.nrows();
        if !linalg::is_symmetric(m, 1e-10) {
            return Err("not symmetric".into());
        }
        let me = linalg::min_eigenvalue(m);
        if me < -1e-9 {
            return Err(format!("min eigenvalue {me}"));
        }
        if (m[(n - 1, n - 1)] - 1.0).abs() > 1e-9 {
            return Err(format!("corner entry {}", m[(n - 1, n - 1)]));
        }
        if m.trace() > 2.0 + 1e-9 {
            return Err(format!("trace {}", m.trace()));
        }
        Ok(())
    }
}

pub fn lifted_cov(p: &ActionDistribution, set: &ActionSet) -> Result<LiftedCov> {
    p.check_aligned(set)?;
    let n = set.dim() + 1;
    let mut m = DMatrix::zeros(n, n);
    for (w, a) in p.weights().iter().zip(set.actions()) {
        if *w > 0.0 {
            let v = lift(a).into_inner();
            m.ger(*w, &v, &v, 1.0);
        }
    }
    linalg::symmetrize(&mut m);
    Ok(LiftedCov(m))
}

/// A loss vector. Adversarial losses live in the unit ball; estimates built by
/// the learner do not, so the bound is only enforced by [`LossVector::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(DVector<f64>);

impl LossVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let v = DVector::from_vec(coords);
        if v.iter().any(|c| !c.is_finite()) || v.norm() > 1.0 + NORM_TOL {
            return Err(BanditError::InvalidAction(format!(
                "loss vector norm {} exceeds the unit ball",
                v.norm()
            )));
        }
        Ok(Self(v))
    }

    pub fn unbounded(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, a: &Action) -> f64 {
        self.0.dot(a.coords())
    }
}

/// `[[0, y/2], [yᵀ/2, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedLoss(DMatrix<f64>);

impl LiftedLoss {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

pub fn lifted_loss(y: &LossVector) -> LiftedLoss {
    let d = y.dim();
    let mut m = DMatrix::zeros(d + 1, d + 1);
    for i in 0..d {
        m[(i, d)] = 0.5 * y.coords()[i];
        m[(d, i)] = 0.5 * y.coords()[i];
    }
    LiftedLoss(m)
}

/// `F(H) = −log det H`, defined only for positive-definite `H`.
pub fn logdet_barrier(h: &DMatrix<f64>) -> Result<f64> {
    Ok(-linalg::logdet_pd(h)?)
}

/// Bregman divergence of the log-det barrier,
/// `D_F(G, H) = log(det H / det G) + tr(H⁻¹G) − n`.
pub fn bregman_div(g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    if g.shape() != h.shape() {
        return Err(BanditError::DimensionMismatch {
            expected: h.nrows(),
            got: g.nrows(),
        });
    }
    let n = h.nrows() as f64;
    let h_inv = linalg::spd_inverse(h)?;
    let ld_h = linalg::logdet_pd(h)?;
    let ld_g = linalg::logdet_pd(g)?;
    Ok(ld_h - ld_g + (h_inv * g).trace() - n)
}

/// Lexicographic comparison helper used for deterministic orderings.
pub fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}
