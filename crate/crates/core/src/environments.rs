//! Context generators, oblivious loss schedules, nonlinear mean-loss
//! perturbations and bounded noisy feedback.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algorithms::sample_index;
use crate::error::{BanditError, Result};
use crate::lifted::{Action, ActionSet, LossVector};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedSet {
    pub actions: Vec<Vec<f64>>,
    pub probability: f64,
}

/// Per-arm availability: one value for every arm, or one per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Availability {
    Shared(f64),
    PerArm(Vec<f64>),
}

impl Availability {
    pub fn per_arm(&self, d: usize) -> Vec<f64> {
        match self {
            Availability::Shared(q) => vec![*q; d],
            Availability::PerArm(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContextSpec {
    FiniteSupport { sets: Vec<WeightedSet> },
    /// Each `eᵢ` available independently with probability `qᵢ`, conditioned on
    /// at least one being available.
    Sleeping { q: Availability },
    /// `k` i.i.d. uniform points of the unit ball.
    Ball { k: usize },
}

/// A [`ContextSpec`] checked against a dimension, with finite-support sets
/// parsed once.
#[derive(Debug, Clone)]
pub struct ContextSampler {
    d: usize,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Finite { sets: Vec<ActionSet>, probs: Vec<f64> },
    Sleeping { q: Vec<f64> },
    Ball { k: usize },
}

impl ContextSpec {
    pub fn sampler(&self, d: usize) -> Result<ContextSampler> {
        if d == 0 {
            return Err(BanditError::Config("d must be at least 1".into()));
        }
        let kind = match self {
            ContextSpec::FiniteSupport { sets } => {
                if sets.is_empty() {
                    return Err(BanditError::Config("finite_support needs at least one set".into()));
                }
                let mut parsed = Vec::with_capacity(sets.len());
                let mut probs = Vec::with_capacity(sets.len());
                for (i, ws) in sets.iter().enumerate() {
                    let s = ActionSet::from_rows(ws.actions.clone())
                        .map_err(|e| BanditError::Config(format!("context.sets[{i}]: {e}")))?;
                    if s.dim() != d {
                        return Err(BanditError::Config(format!(
                            "context.sets[{i}]: actions have dimension {}, expected {d}",
                            s.dim()
                        )));
                    }
                    if !(ws.probability >= 0.0) {
                        return Err(BanditError::Config(format!(
                            "context.sets[{i}].probability must be >= 0"
                        )));
                    }
                    parsed.push(s);
                    probs.push(ws.probability);
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(BanditError::Config(format!(
                        "context.sets probabilities sum to {total}, expected 1"
                    )));
                }
                SamplerKind::Finite { sets: parsed, probs }
            }
            ContextSpec::Sleeping { q } => {
                let q = q.per_arm(d);
                if q.len() != d {
                    return Err(BanditError::Config(format!(
                        "context.q has {} entries, expected {d}",
                        q.len()
                    )));
                }
                if q.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                    return Err(BanditError::Config("context.q entries must lie in (0, 1]".into()));
                }
                SamplerKind::Sleeping { q }
            }
            ContextSpec::Ball { k } => {
                if *k == 0 {
                    return Err(BanditError::Config("context.k must be at least 1".into()));
                }
                SamplerKind::Ball { k: *k }
            }
        };
        Ok(ContextSampler { d, kind })
    }
}

impl ContextSampler {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Whether the context distribution has finitely many atoms.
    pub fn is_finite(&self) -> bool {
        !matches!(self.kind, SamplerKind::Ball { .. })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionSet {
        match &self.kind {
            SamplerKind::Finite { sets, probs } => sets[sample_index(probs, rng)].clone(),
            SamplerKind::Sleeping { q } => loop {
                let awake: Vec<usize> = (0..self.d).filter(|&i| rng.random::<f64>() < q[i]).collect();
                if awake.is_empty() {
                    continue;
                }
                let rows = awake
                    .into_iter()
                    .map(|i| {
                        let mut e = vec![0.0; self.d];
                        e[i] = 1.0;
                        e
                    })
                    .collect();
                break ActionSet::from_rows(rows).expect("unit vectors are valid actions");
            },
            SamplerKind::Ball { k } => {
                let actions = (0..*k).map(|_| uniform_ball(self.d, rng)).collect();
                ActionSet::new(actions).expect("ball draws are valid actions")
            }
        }
    }
}

/// Uniform point of the `d`-dimensional unit ball.
pub fn uniform_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Action {
    loop {
        let g: DVector<f64> = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let n = g.norm();
        if n == 0.0 {
            continue;
        }
        let r = rng.random::<f64>().powf(1.0 / d as f64);
        let v = g * (r / n);
        if let Ok(a) = Action::from_vector(v) {
            return a;
        }
    }
}

pub fn draw_context<R: Rng + ?Sized>(spec: &ContextSpec, d: usize, rng: &mut R) -> Result<ActionSet> {
    Ok(spec.sampler(d)?.draw(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisspecMode {
    #[default]
    None,
    /// `+2ε(‖a‖² − ½)`
    Radial,
    /// `+ε·sign(a₁)`
    Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryKind {
    Fixed {
        y: Vec<f64>,
    },
    /// `vectors[k]` is used for `switches[k−1] < t ≤ switches[k]`.
    Piecewise {
        vectors: Vec<Vec<f64>>,
        switches: Vec<u64>,
    },
    /// `cos(ωt)e₁ + sin(ωt)e₂`.
    Drift {
        omega: f64,
    },
}

// unknown keys are rejected by the flattened kind
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(flatten)]
    pub kind: AdversaryKind,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub misspec_mode: MisspecMode,
}

fn renormalize(mut v: DVector<f64>) -> LossVector {
    let n = v.norm();
    if n > 1.0 {
        v /= n;
    }
    LossVector::unbounded(v)
}

impl AdversarySpec {
    pub fn linear(kind: AdversaryKind) -> Self {
        Self {
            kind,
            epsilon: 0.0,
            misspec_mode: MisspecMode::None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let check = |v: &Vec<f64>, what: &str| -> Result<()> {
            if v.len() != d {
                return Err(BanditError::Config(format!(
                    "{what} has dimension {}, expected {d}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(BanditError::Config(format!("{what} has non-finite entries")));
            }
            Ok(())
        };
        match &self.kind {
            AdversaryKind::Fixed { y } => check(y, "adversary.y")?,
            AdversaryKind::Piecewise { vectors, switches } => {
                if vectors.len() != switches.len() + 1 {
                    return Err(BanditError::Config(format!(
                        "adversary.vectors needs switches+1 = {} entries, got {}",
                        switches.len() + 1,
                        vectors.len()
                    )));
                }
                if switches.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(BanditError::Config("adversary.switches must be increasing".into()));
                }
                for (i, v) in vectors.iter().enumerate() {
                    check(v, &format!("adversary.vectors[{i}]"))?;
                }
            }
            AdversaryKind::Drift { omega } => {
                if !omega.is_finite() {
                    return Err(BanditError::Config("adversary.omega must be finite".into()));
                }
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(BanditError::Config(format!(
                "adversary.epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// `y_t`; a function of `t` only.
pub fn adversary_loss(spec: &AdversarySpec, d: usize, t: u64) -> LossVector {
    match &spec.kind {
        AdversaryKind::Fixed { y } => renormalize(DVector::from_column_slice(y)),
        AdversaryKind::Piecewise { vectors, switches } => {
            let k = switches.iter().take_while(|&&s| t > s).count();
            renormalize(DVector::from_column_slice(&vectors[k]))
        }
        AdversaryKind::Drift { omega } => {
            let phase = omega * t as f64;
            let mut v = DVector::zeros(d);
            v[0] = phase.cos();
            if d > 1 {
                v[1] = phase.sin();
            }
            renormalize(v)
        }
    }
}

/// `f_t(a)`, within `ε` of `⟨a, y_t⟩` and clipped to `[−1, 1]`.
pub fn misspec_value(spec: &AdversarySpec, y: &LossVector, a: &Action) -> f64 {
    let lin = y.dot(a);
    let eps = spec.epsilon;
    let v = match spec.misspec_mode {
        MisspecMode::None => lin,
        MisspecMode::Radial => lin + 2.0 * eps * (a.coords().norm_squared() - 0.5),
        MisspecMode::Sign => {
            let a1 = a.coords()[0];
            let s = if a1 > 0.0 {
                1.0
            } else if a1 < 0.0 {
                -1.0
            } else {
                0.0
            };
            lin + eps * s
        }
    };
    v.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackModel {
    /// `±1` with mean `f_t(a_t)`.
    #[default]
    TwoPoint,
    /// The mean itself.
    Exact,
}

pub fn sample_feedback<R: Rng + ?Sized>(model: FeedbackModel, mean: f64, rng: &mut R) -> f64 {
    let mean = mean.clamp(-1.0, 1.0);
    match model {
        FeedbackModel::Exact => mean,
        FeedbackModel::TwoPoint => {
            if rng.random::<f64>() < (1.0 + mean) / 2.0 {
                1.0
            } else {
                -1.0
            }
        }
    }
}
