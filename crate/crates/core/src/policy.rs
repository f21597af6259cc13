//! Softmax policies over Fourier-basis features with action masking.
//!
//! Parameters are read-only during episode sampling (shared immutably
//! across workers) and mutated only by the single-threaded optimizer step
//! between iterations.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, ActionSet, DecisionPolicy, EnvKind, Environment};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("feature input component {index} = {value} outside [0, 1]")]
    FeatureOutOfRange { index: usize, value: f64 },
    #[error("feature input has dimension {got}, basis expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("no admissible actions were supplied")]
    EmptyActionSet,
    #[error("action {0:?} has zero probability under the current parameters")]
    ZeroProbabilityAction(Action),
    #[error("action {0:?} is not in the admissible set")]
    ActionNotAdmissible(Action),
    #[error("basis would produce {0} features; refusing above {1}")]
    BasisTooLarge(usize, usize),
    #[error("policy file error: {0}")]
    File(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

/// Orders of the Fourier basis: `dependent_order` bounds the coupled
/// coefficient vectors (max-norm), `independent_order` extends the
/// axis-aligned terms beyond that. Sine terms are always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierBasisSpec {
    pub dependent_order: u32,
    pub independent_order: u32,
}

impl FourierBasisSpec {
    pub fn new(dependent_order: u32, independent_order: u32) -> Self {
        Self {
            dependent_order,
            independent_order,
        }
    }

    /// Axis-aligned terms added on top of the coupled grid, per dimension.
    fn extra_axis_orders(&self) -> u32 {
        self.independent_order.saturating_sub(self.dependent_order)
    }

    /// Closed-form feature count: one constant, cosine and sine branches
    /// over the non-zero coupled vectors plus the axis-aligned extras.
    pub fn feature_count(&self, input_dim: usize) -> usize {
        let grid = (self.dependent_order as usize + 1).pow(input_dim as u32);
        let extras = input_dim * self.extra_axis_orders() as usize;
        2 * (grid + extras) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trig {
    Cos,
    Sin,
}

/// Precomputed Fourier basis over `[0,1]^m`: features are
/// `cos(pi <c, x>)` and `sin(pi <c, x>)` for integer coefficient vectors
/// `c`, enumerated in a fixed, serialization-stable order: the constant
/// term, coupled cosine terms in lexicographic order, coupled sine terms,
/// then the axis-aligned extras (cosine, then sine), ordered by dimension
/// and order.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    spec: FourierBasisSpec,
    input_dim: usize,
    terms: Vec<(Vec<f64>, Trig)>,
}

const MAX_FEATURES: usize = 2_000_000;

impl FourierBasis {
    pub fn new(spec: FourierBasisSpec, input_dim: usize) -> Result<Self, PolicyError> {
        assert!(input_dim > 0, "input dimension must be positive");
        let count = spec.feature_count(input_dim);
        if count > MAX_FEATURES {
            return Err(PolicyError::BasisTooLarge(count, MAX_FEATURES));
        }
        let d = spec.dependent_order as usize;
        let grid = (d + 1).pow(input_dim as u32);
        let mut coupled = Vec::with_capacity(grid);
        // Counting in base (d+1), first component most significant, yields
        // lexicographic order.
        for k in 0..grid {
            let mut c = vec![0.0; input_dim];
            let mut rem = k;
            for i in (0..input_dim).rev() {
                c[i] = (rem % (d + 1)) as f64;
                rem /= d + 1;
            }
            coupled.push(c);
        }
        let mut extras = Vec::new();
        for dim in 0..input_dim {
            for order in (d + 1)..=(spec.independent_order as usize) {
                let mut c = vec![0.0; input_dim];
                c[dim] = order as f64;
                extras.push(c);
            }
        }
        let mut terms = Vec::with_capacity(count);
        // Constant term (c = 0 cosine).
        terms.push((coupled[0].clone(), Trig::Cos));
        for c in coupled.iter().skip(1) {
            terms.push((c.clone(), Trig::Cos));
        }
        for c in coupled.iter().skip(1) {
            terms.push((c.clone(), Trig::Sin));
        }
        for c in &extras {
            terms.push((c.clone(), Trig::Cos));
        }
        for c in &extras {
            terms.push((c.clone(), Trig::Sin));
        }
        debug_assert_eq!(terms.len(), count);
        Ok(Self {
            spec,
            input_dim,
            terms,
        })
    }

    pub fn spec(&self) -> FourierBasisSpec {
        self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_features(&self) -> usize {
        self.terms.len()
    }

    /// L1 norms of the coefficient vectors, in feature order. The basis is
    /// Lipschitz with constant `pi * ||c||_1` per feature.
    pub fn coefficient_l1_norms(&self) -> Vec<f64> {
        self.terms
            .iter()
            .map(|(c, _)| c.iter().sum::<f64>())
            .collect()
    }

    pub fn featurize(&self, x: &[f64]) -> Result<Array1<f64>, PolicyError> {
        if x.len() != self.input_dim {
            return Err(PolicyError::DimensionMismatch {
                got: x.len(),
                expected: self.input_dim,
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(PolicyError::FeatureOutOfRange { index, value });
            }
        }
        let mut out = Array1::zeros(self.num_features());
        for (slot, (c, trig)) in self.terms.iter().enumerate() {
            let dot: f64 = c.iter().zip(x).map(|(ci, xi)| ci * xi).sum();
            let arg = PI * dot;
            out[slot] = match trig {
                Trig::Cos => arg.cos(),
                Trig::Sin => arg.sin(),
            };
        }
        Ok(out)
    }
}

/// Weight matrix over `[num_actions x num_features]`, zero-initialized so
/// the starting policy is uniform over admissible actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub weights: Array2<f64>,
}

impl PolicyParameters {
    pub fn zeros(num_actions: usize, num_features: usize) -> Self {
        Self {
            weights: Array2::zeros((num_actions, num_features)),
        }
    }
}

/// A softmax policy: action preferences linear in the Fourier features,
/// normalized over the admissible set only. Masked actions carry exactly
/// zero probability and zero gradient rows.
#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    basis: FourierBasis,
    params: PolicyParameters,
}

impl SoftmaxPolicy {
    pub fn new(basis: FourierBasis, num_actions: usize) -> Self {
        let params = PolicyParameters::zeros(num_actions, basis.num_features());
        Self { basis, params }
    }

    pub fn with_params(basis: FourierBasis, params: PolicyParameters) -> Self {
        assert_eq!(params.weights.ncols(), basis.num_features());
        Self { basis, params }
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn params(&self) -> &PolicyParameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut PolicyParameters {
        &mut self.params
    }

    pub fn num_actions(&self) -> usize {
        self.params.weights.nrows()
    }

    pub fn featurize(&self, x: &[f64]) -> Result<Array1<f64>, PolicyError> {
        self.basis.featurize(x)
    }

    /// Probabilities over the admissible actions, aligned with `admissible`.
    pub fn action_probabilities(
        &self,
        features: &Array1<f64>,
        admissible: &[Action],
    ) -> Result<Vec<f64>, PolicyError> {
        if admissible.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        let prefs: Vec<f64> = admissible
            .iter()
            .map(|a| self.params.weights.row(a.index()).dot(features))
            .collect();
        let max = prefs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = prefs.iter().map(|h| (h - max).exp()).collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Ok(probs)
    }

    pub fn sample_action(
        &self,
        features: &Array1<f64>,
        admissible: &[Action],
        rng: &mut dyn RngCore,
    ) -> Result<Action, PolicyError> {
        let probs = self.action_probabilities(features, admissible)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (action, p) in admissible.iter().zip(&probs) {
            acc += p;
            if u < acc {
                return Ok(*action);
            }
        }
        Ok(*admissible.last().unwrap())
    }

    /// Admissible action with maximal probability; ties break toward the
    /// fixed action enumeration order.
    pub fn greedy_action(
        &self,
        features: &Array1<f64>,
        admissible: &[Action],
    ) -> Result<Action, PolicyError> {
        if admissible.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        let mut sorted: ActionSet = admissible.iter().copied().collect();
        sorted.sort_by_key(Action::index);
        let mut best = sorted[0];
        let mut best_pref = self.params.weights.row(best.index()).dot(features);
        for action in sorted.iter().skip(1) {
            let pref = self.params.weights.row(action.index()).dot(features);
            if pref > best_pref {
                best = *action;
                best_pref = pref;
            }
        }
        Ok(best)
    }

    /// Gradient of `ln pi(action)` with respect to the weights:
    /// `features x (indicator - pi)` over the admissible set, zero rows
    /// elsewhere.
    pub fn log_prob_gradient(
        &self,
        features: &Array1<f64>,
        admissible: &[Action],
        action: Action,
    ) -> Result<Array2<f64>, PolicyError> {
        let mut grad = Array2::zeros(self.params.weights.raw_dim());
        self.accumulate_log_prob_gradient(features, admissible, action, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale * d ln pi(action) / d theta` into `acc`; shared by the
    /// gradient estimator so per-step outer products are never materialized
    /// more than once.
    pub fn accumulate_log_prob_gradient(
        &self,
        features: &Array1<f64>,
        admissible: &[Action],
        action: Action,
        scale: f64,
        acc: &mut Array2<f64>,
    ) -> Result<(), PolicyError> {
        let slot = admissible
            .iter()
            .position(|a| *a == action)
            .ok_or(PolicyError::ActionNotAdmissible(action))?;
        let probs = self.action_probabilities(features, admissible)?;
        if probs[slot] <= 0.0 {
            return Err(PolicyError::ZeroProbabilityAction(action));
        }
        for (k, other) in admissible.iter().enumerate() {
            let indicator = if k == slot { 1.0 } else { 0.0 };
            let coeff = scale * (indicator - probs[k]);
            if coeff != 0.0 {
                acc.row_mut(other.index()).scaled_add(coeff, features);
            }
        }
        Ok(())
    }
}

impl<E: Environment> DecisionPolicy<E> for SoftmaxPolicy {
    fn decide(
        &self,
        env: &E,
        state: &E::State,
        rng: &mut dyn RngCore,
    ) -> Result<Action, crate::env::EnvError> {
        let admissible = env.admissible_actions(state)?;
        let features = self
            .basis
            .featurize(&env.state_features(state))
            .unwrap_or_else(|e| panic!("state features outside the basis domain: {e}"));
        self.sample_action(&features, &admissible, rng)
            .map_err(|e| crate::env::EnvError::Construction(e.to_string()))
    }
}

/// Deterministic argmax wrapper around a trained policy.
pub struct GreedyPolicy<'a>(pub &'a SoftmaxPolicy);

impl<E: Environment> DecisionPolicy<E> for GreedyPolicy<'_> {
    fn decide(
        &self,
        env: &E,
        state: &E::State,
        _rng: &mut dyn RngCore,
    ) -> Result<Action, crate::env::EnvError> {
        let admissible = env.admissible_actions(state)?;
        let features = self
            .0
            .basis
            .featurize(&env.state_features(state))
            .unwrap_or_else(|e| panic!("state features outside the basis domain: {e}"));
        self.0
            .greedy_action(&features, &admissible)
            .map_err(|e| crate::env::EnvError::Construction(e.to_string()))
    }
}

/// On-disk policy format. JSON with shortest-round-trip float encoding, so
/// weights survive a save/load cycle bit-exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format_version: u32,
    pub environment: EnvKind,
    pub feature_dim: usize,
    pub num_actions: usize,
    pub basis: FourierBasisSpec,
    pub weights: Vec<Vec<f64>>,
}

pub const POLICY_FORMAT_VERSION: u32 = 1;

impl PolicyFile {
    pub fn from_policy(policy: &SoftmaxPolicy, environment: EnvKind) -> Self {
        let weights = policy
            .params
            .weights
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect();
        PolicyFile {
            format_version: POLICY_FORMAT_VERSION,
            environment,
            feature_dim: policy.basis.input_dim(),
            num_actions: policy.num_actions(),
            basis: policy.basis.spec(),
            weights,
        }
    }

    pub fn into_policy(self) -> Result<(SoftmaxPolicy, EnvKind), PolicyError> {
        if self.format_version != POLICY_FORMAT_VERSION {
            return Err(PolicyError::File(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        let basis = FourierBasis::new(self.basis, self.feature_dim)?;
        if self.weights.len() != self.num_actions {
            return Err(PolicyError::File("weight row count mismatch".into()));
        }
        let mut weights = Array2::zeros((self.num_actions, basis.num_features()));
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != basis.num_features() {
                return Err(PolicyError::File(format!(
                    "weight row {i} has {} entries, basis expects {}",
                    row.len(),
                    basis.num_features()
                )));
            }
            for (j, w) in row.iter().enumerate() {
                if !w.is_finite() {
                    return Err(PolicyError::File(format!("non-finite weight at ({i},{j})")));
                }
                weights[(i, j)] = *w;
            }
        }
        Ok((
            SoftmaxPolicy::with_params(basis, PolicyParameters { weights }),
            self.environment,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let data = serde_json::to_string_pretty(self)
            .map_err(|e| PolicyError::File(e.to_string()))?;
        std::fs::write(path, data).map_err(|e| PolicyError::File(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let data =
            std::fs::read_to_string(path).map_err(|e| PolicyError::File(e.to_string()))?;
        serde_json::from_str(&data).map_err(|e| PolicyError::File(e.to_string()))
    }
}
