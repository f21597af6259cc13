//! REINFORCE-style trainer for non-linear utilities of multiple expected
//! returns.
//!
//! Each iteration samples a batch of episodes, estimates one policy
//! gradient per reward channel from the shared log-probability gradients,
//! combines them through the chain rule with the analytic partials of the
//! chosen utility, and takes an Adam ascent step.
//!
//! Episode sampling fans out to parallel workers over fixed-size,
//! episode-index-ordered chunks; partial sums are reduced in chunk order,
//! so results are bit-identical for any worker count.

use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    run_episode, Environment, EpisodeHistory, RewardChannel, MAX_EPISODE_STEPS,
};
use crate::policy::{PolicyError, SoftmaxPolicy};
use crate::quantum::binary_entropy;
use crate::{derive_seed, streams};

/// Episodes per reduction chunk; fixed so the reduction order never
/// depends on the thread count.
pub const EPISODE_CHUNK: usize = 64;

/// Clamping margin for utility partials near singular boundaries.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("channel count mismatch: got {got}, utility consumes {expected}")]
    ChannelMismatch { got: usize, expected: usize },
    #[error("mean time return {0} is not positive")]
    NonPositiveTimeReturn(f64),
    #[error("estimate {name} = {value} leaves the utility's feasible region")]
    EstimateOutOfRange { name: &'static str, value: f64 },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty episode batch")]
    EmptyBatch,
    #[error("training diverged at iteration {iteration}: utility = {utility}")]
    Diverged { iteration: usize, utility: f64 },
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
}

/// The trainable secret-key-rate objectives. Werner variants consume the
/// `(J_F, J_T)` channels, Bell-diagonal variants `(J_B, J_C, J_D, J_T)`.
///
/// `value` omits the `max(0, .)` clamp so the objective stays
/// differentiable during training; evaluation reports apply the clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Bb84Werner,
    Bb84Bds,
    SixStateWerner,
    SixStateBds,
}

impl UtilityKind {
    pub fn channels(&self) -> &'static [RewardChannel] {
        match self {
            UtilityKind::Bb84Werner | UtilityKind::SixStateWerner => crate::env::WERNER_CHANNELS,
            UtilityKind::Bb84Bds | UtilityKind::SixStateBds => crate::env::BDS_CHANNELS,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            UtilityKind::Bb84Werner => "bb84_werner",
            UtilityKind::Bb84Bds => "bb84_bds",
            UtilityKind::SixStateWerner => "six_state_werner",
            UtilityKind::SixStateBds => "six_state_bds",
        }
    }

    fn check_channels(&self, j: &[f64]) -> Result<(), UtilityError> {
        let expected = self.channels().len();
        if j.len() != expected {
            return Err(UtilityError::ChannelMismatch {
                got: j.len(),
                expected,
            });
        }
        Ok(())
    }

    /// Unclamped utility at the given channel means (training objective).
    pub fn value(&self, j: &[f64]) -> Result<f64, UtilityError> {
        self.check_channels(j)?;
        let time = *j.last().unwrap();
        if time <= 0.0 {
            return Err(UtilityError::NonPositiveTimeReturn(time));
        }
        let raw = match self {
            UtilityKind::Bb84Werner => {
                1.0 - 2.0 * binary_entropy(2.0 / 3.0 * (1.0 - j[0]))
            }
            UtilityKind::SixStateWerner => {
                let f = j[0].clamp(0.0, 1.0);
                let mut entropy = 0.0;
                if f > 0.0 {
                    entropy -= f * f.log2();
                }
                if f < 1.0 {
                    entropy -= (1.0 - f) * ((1.0 - f) / 3.0).log2();
                }
                1.0 - entropy
            }
            UtilityKind::Bb84Bds => {
                1.0 - binary_entropy(j[0] + j[1]) - binary_entropy(j[0] + j[2])
            }
            UtilityKind::SixStateBds => {
                let a = 1.0 - j[0] - j[1] - j[2];
                let mut entropy = 0.0;
                for x in [a, j[0], j[1], j[2]] {
                    let x = x.clamp(0.0, 1.0);
                    if x > 0.0 {
                        entropy -= x * x.log2();
                    }
                }
                1.0 - entropy
            }
        };
        Ok(raw / time)
    }

    /// Evaluation-side utility: `max(0, value)`.
    pub fn clamped_value(&self, j: &[f64]) -> Result<f64, UtilityError> {
        Ok(self.value(j)?.max(0.0))
    }

    /// Analytic partial derivatives at the estimated channel means, in
    /// channel order. The boolean reports whether the boundary clamp
    /// activated.
    ///
    /// Near-singular estimates are clamped by [`BOUNDARY_EPS`]; estimates
    /// outside the feasible region (for example a mean fidelity of 1,
    /// where the BB84 partial diverges) are an error.
    pub fn partials(&self, j: &[f64]) -> Result<(Vec<f64>, bool), UtilityError> {
        self.check_channels(j)?;
        let time = *j.last().unwrap();
        if time <= 0.0 {
            return Err(UtilityError::NonPositiveTimeReturn(time));
        }
        // Derivative of the binary entropy: h'(p) = log2((1-p)/p).
        let h_prime = |p: f64| ((1.0 - p) / p).log2();
        let clamped = std::cell::Cell::new(false);
        // Clamps near-singular estimates into [BOUNDARY_EPS, hi]; values
        // at or beyond the feasible boundary (x < 0 or x >= 1, where the
        // logarithms diverge) are an error.
        let guard = |name: &'static str, x: f64, hi: f64| {
            if !(0.0..1.0).contains(&x) {
                return Err(UtilityError::EstimateOutOfRange { name, value: x });
            }
            let y = x.clamp(BOUNDARY_EPS, hi);
            if y != x {
                clamped.set(true);
            }
            Ok(y)
        };
        let partials = match self {
            UtilityKind::Bb84Werner => {
                // u = (1 - 2 h(beta)) / J_T with beta = (2/3)(1 - J_F);
                // the upper clamp puts beta at exactly BOUNDARY_EPS.
                let jf = guard("j_fidelity", j[0], 1.0 - 1.5 * BOUNDARY_EPS)?;
                let beta = 2.0 / 3.0 * (1.0 - jf);
                let du_df = -(4.0 / (3.0 * time)) * (beta / (1.0 - beta)).log2();
                let du_dt = -(1.0 - 2.0 * binary_entropy(beta)) / (time * time);
                vec![du_df, du_dt]
            }
            UtilityKind::SixStateWerner => {
                // u = (1 - H(J_F)) / J_T; dH/dF = log2((1-F)/(3F)).
                let jf = guard("j_fidelity", j[0], 1.0 - BOUNDARY_EPS)?;
                let du_df = (3.0 * jf / (1.0 - jf)).log2() / time;
                let mut entropy = 0.0;
                entropy -= jf * jf.log2();
                entropy -= (1.0 - jf) * ((1.0 - jf) / 3.0).log2();
                let du_dt = -(1.0 - entropy) / (time * time);
                vec![du_df, du_dt]
            }
            UtilityKind::Bb84Bds => {
                // u = (1 - h(B+C) - h(B+D)) / J_T.
                let s1 = guard("j_b + j_c", j[0] + j[1], 1.0 - BOUNDARY_EPS)?;
                let s2 = guard("j_b + j_d", j[0] + j[2], 1.0 - BOUNDARY_EPS)?;
                let du_db = -(h_prime(s1) + h_prime(s2)) / time;
                let du_dc = -h_prime(s1) / time;
                let du_dd = -h_prime(s2) / time;
                let du_dt =
                    -(1.0 - binary_entropy(s1) - binary_entropy(s2)) / (time * time);
                vec![du_db, du_dc, du_dd, du_dt]
            }
            UtilityKind::SixStateBds => {
                // u = (1 - H(A,B,C,D)) / J_T with A = 1-B-C-D;
                // dH/dX = log2(A/X), so du/dJ_X = log2(X/A) / J_T.
                // A = 1 exactly (an all-truncated batch) clamps rather
                // than errors: the fidelity-channel gradients it scales
                // are zero there.
                let a_raw = 1.0 - j[0] - j[1] - j[2];
                if a_raw <= 0.0 {
                    return Err(UtilityError::EstimateOutOfRange {
                        name: "1 - j_b - j_c - j_d",
                        value: a_raw,
                    });
                }
                let a = a_raw.clamp(BOUNDARY_EPS, 1.0 - BOUNDARY_EPS);
                if a != a_raw {
                    clamped.set(true);
                }
                let b = guard("j_b", j[0], 1.0 - BOUNDARY_EPS)?;
                let c = guard("j_c", j[1], 1.0 - BOUNDARY_EPS)?;
                let d = guard("j_d", j[2], 1.0 - BOUNDARY_EPS)?;
                let mut entropy = 0.0;
                for x in [a, b, c, d] {
                    entropy -= x * x.log2();
                }
                vec![
                    (b / a).log2() / time,
                    (c / a).log2() / time,
                    (d / a).log2() / time,
                    -(1.0 - entropy) / (time * time),
                ]
            }
        };
        Ok((partials, clamped.get()))
    }
}

/// Discounted return-from-`t` for every step and reward channel:
/// `out[channel][t] = sum_k gamma^k R_{t+k}`.
pub fn per_channel_returns(
    history: &EpisodeHistory,
    channels: &[RewardChannel],
    gamma: f64,
) -> Vec<Vec<f64>> {
    let len = history.steps.len();
    let mut out = vec![vec![0.0; len]; channels.len()];
    for (ci, &channel) in channels.iter().enumerate() {
        let mut running = 0.0;
        for t in (0..len).rev() {
            running = history.steps[t].reward.channel(channel) + gamma * running;
            out[ci][t] = running;
        }
    }
    out
}

/// Per-channel policy gradients and mean returns estimated from a batch.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub channels: Vec<RewardChannel>,
    pub gradients: Vec<Array2<f64>>,
    pub mean_returns: Vec<f64>,
    pub episodes: usize,
}

/// Accumulates one episode's REINFORCE contribution
/// `sum_t gamma^t G_t^c d ln pi / d theta` into per-channel sums.
fn accumulate_episode(
    policy: &SoftmaxPolicy,
    channels: &[RewardChannel],
    gamma: f64,
    history: &EpisodeHistory,
    grad_sums: &mut [Array2<f64>],
    return_sums: &mut [f64],
) -> Result<(), TrainError> {
    let returns = per_channel_returns(history, channels, gamma);
    for (ci, r) in returns.iter().enumerate() {
        if let Some(g0) = r.first() {
            return_sums[ci] += g0;
        }
    }
    let mut discount = 1.0;
    for (t, step) in history.steps.iter().enumerate() {
        // Single admissible action: the log-gradient vanishes.
        if step.admissible.len() > 1 {
            let phi = policy.featurize(&step.features)?;
            for (ci, r) in returns.iter().enumerate() {
                let scale = discount * r[t];
                if scale != 0.0 {
                    policy.accumulate_log_prob_gradient(
                        &phi,
                        &step.admissible,
                        step.action,
                        scale,
                        &mut grad_sums[ci],
                    )?;
                }
            }
        }
        discount *= gamma;
    }
    Ok(())
}

/// Estimates per-channel policy gradients from a batch of histories
/// sampled under `policy`'s current parameters.
pub fn estimate_policy_gradients<E: Environment>(
    env: &E,
    histories: &[EpisodeHistory],
    policy: &SoftmaxPolicy,
    gamma: f64,
) -> Result<GradientEstimate, TrainError> {
    if histories.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let channels = env.reward_channels();
    let shape = policy.params().weights.raw_dim();
    let partials: Vec<Result<_, TrainError>> = histories
        .par_chunks(EPISODE_CHUNK)
        .map(|chunk| {
            let mut grads: Vec<Array2<f64>> =
                channels.iter().map(|_| Array2::zeros(shape)).collect();
            let mut sums = vec![0.0; channels.len()];
            for h in chunk {
                accumulate_episode(policy, channels, gamma, h, &mut grads, &mut sums)?;
            }
            Ok((grads, sums))
        })
        .collect();
    let mut grads: Vec<Array2<f64>> = channels.iter().map(|_| Array2::zeros(shape)).collect();
    let mut sums = vec![0.0; channels.len()];
    for part in partials {
        let (g, s) = part?;
        for (acc, add) in grads.iter_mut().zip(&g) {
            *acc += add;
        }
        for (acc, add) in sums.iter_mut().zip(&s) {
            *acc += add;
        }
    }
    let n = histories.len() as f64;
    for g in &mut grads {
        *g /= n;
    }
    for s in &mut sums {
        *s /= n;
    }
    Ok(GradientEstimate {
        channels: channels.to_vec(),
        gradients: grads,
        mean_returns: sums,
        episodes: histories.len(),
    })
}

/// Chain-rule combination `sum_i (du/dJ_i) * grad_i`.
pub fn combine_gradients(partials: &[f64], gradients: &[Array2<f64>]) -> Array2<f64> {
    assert_eq!(partials.len(), gradients.len());
    let mut total = Array2::zeros(gradients[0].raw_dim());
    for (w, g) in partials.iter().zip(gradients) {
        total.scaled_add(*w, g);
    }
    total
}

/// Full utility gradient at the estimated channel means.
pub fn utility_gradient(
    channel_gradients: &[Array2<f64>],
    channel_means: &[f64],
    utility: UtilityKind,
) -> Result<(Array2<f64>, bool), UtilityError> {
    if channel_gradients.len() != utility.channels().len() {
        return Err(UtilityError::ChannelMismatch {
            got: channel_gradients.len(),
            expected: utility.channels().len(),
        });
    }
    let (partials, clamped) = utility.partials(channel_means)?;
    Ok((combine_gradients(&partials, channel_gradients), clamped))
}

/// Adam in ascent form with bias correction.
#[derive(Debug, Clone)]
pub struct AdamAscent {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Array2<f64>,
    v: Array2<f64>,
    step: u64,
}

impl AdamAscent {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64, shape: (usize, usize)) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            step: 0,
        }
    }

    pub fn ascend(&mut self, params: &mut Array2<f64>, gradient: &Array2<f64>) {
        self.step += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        ndarray::Zip::from(&mut self.m)
            .and(gradient)
            .for_each(|m, &g| *m = b1 * *m + (1.0 - b1) * g);
        ndarray::Zip::from(&mut self.v)
            .and(gradient)
            .for_each(|v, &g| *v = b2 * *v + (1.0 - b2) * g * g);
        let mc = 1.0 - b1.powi(self.step as i32);
        let vc = 1.0 - b2.powi(self.step as i32);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        ndarray::Zip::from(params)
            .and(&self.m)
            .and(&self.v)
            .for_each(|p, &m, &v| {
                *p += lr * (m / mc) / ((v / vc).sqrt() + eps);
            });
    }
}

/// Training hyperparameters. `discount` is 1 for every environment here;
/// the knob exists for completeness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub episodes_per_iteration: usize,
    pub iterations: usize,
    pub discount: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub max_steps: usize,
}

impl TrainerConfig {
    pub fn new(
        learning_rate: f64,
        episodes_per_iteration: usize,
        iterations: usize,
        seed: u64,
    ) -> Self {
        Self {
            learning_rate,
            episodes_per_iteration,
            iterations,
            discount: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed,
            max_steps: MAX_EPISODE_STEPS,
        }
    }
}

/// One learning-curve record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_returns: Vec<f64>,
    pub utility: f64,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub policy: SoftmaxPolicy,
    pub curve: Vec<IterationRecord>,
    /// How often the boundary clamp in the utility partials activated.
    pub boundary_clamps: usize,
}

/// Runs the iterative sample / estimate / combine / ascend loop and
/// returns the final parameters with the learning curve.
pub fn train<E: Environment>(
    env: &E,
    mut policy: SoftmaxPolicy,
    utility: UtilityKind,
    config: &TrainerConfig,
) -> Result<TrainOutcome, TrainError> {
    if config.episodes_per_iteration == 0 {
        return Err(TrainError::EmptyBatch);
    }
    assert_eq!(
        utility.channels(),
        env.reward_channels(),
        "utility consumes different channels than the environment emits"
    );
    let shape = (
        policy.params().weights.nrows(),
        policy.params().weights.ncols(),
    );
    let mut adam = AdamAscent::new(
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
        shape,
    );
    let channels = env.reward_channels();
    let mut curve = Vec::with_capacity(config.iterations);
    let mut boundary_clamps = 0usize;
    let n_eps = config.episodes_per_iteration;

    for iteration in 0..config.iterations {
        let started = Instant::now();
        let chunk_count = n_eps.div_ceil(EPISODE_CHUNK);
        let partials: Vec<Result<_, TrainError>> = (0..chunk_count)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * EPISODE_CHUNK;
                let hi = ((chunk + 1) * EPISODE_CHUNK).min(n_eps);
                let mut grads: Vec<Array2<f64>> = channels
                    .iter()
                    .map(|_| Array2::zeros(policy.params().weights.raw_dim()))
                    .collect();
                let mut sums = vec![0.0; channels.len()];
                for i in lo..hi {
                    let index = (iteration * n_eps + i) as u64;
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, streams::TRAIN, index));
                    let history = run_episode(env, &policy, &mut rng, config.max_steps)?;
                    accumulate_episode(
                        &policy,
                        channels,
                        config.discount,
                        &history,
                        &mut grads,
                        &mut sums,
                    )?;
                }
                Ok((grads, sums))
            })
            .collect();

        let mut grads: Vec<Array2<f64>> = channels
            .iter()
            .map(|_| Array2::zeros(policy.params().weights.raw_dim()))
            .collect();
        let mut sums = vec![0.0; channels.len()];
        for part in partials {
            let (g, s) = part?;
            for (acc, add) in grads.iter_mut().zip(&g) {
                *acc += add;
            }
            for (acc, add) in sums.iter_mut().zip(&s) {
                *acc += add;
            }
        }
        let n = n_eps as f64;
        for g in &mut grads {
            *g /= n;
        }
        for s in &mut sums {
            *s /= n;
        }

        let utility_estimate = utility.value(&sums)?;
        if !utility_estimate.is_finite() {
            return Err(TrainError::Diverged {
                iteration,
                utility: utility_estimate,
            });
        }
        let (partial_values, clamped) = utility.partials(&sums)?;
        if clamped {
            boundary_clamps += 1;
        }
        let total = combine_gradients(&partial_values, &grads);
        adam.ascend(&mut policy.params_mut().weights, &total);

        curve.push(IterationRecord {
            iteration,
            mean_returns: sums,
            utility: utility_estimate,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
    }
    if boundary_clamps > 1 {
        eprintln!(
            "warning: utility boundary clamp activated {boundary_clamps} times during training"
        );
    }
    Ok(TrainOutcome {
        policy,
        curve,
        boundary_clamps,
    })
}

/// Mean episode totals per channel under a decision policy; shares the
/// chunked deterministic reduction with training.
pub fn mean_episode_returns<E, P>(
    env: &E,
    policy: &P,
    episodes: usize,
    seed_stream: (u64, u64),
    max_steps: usize,
) -> Result<Vec<f64>, TrainError>
where
    E: Environment,
    P: crate::env::DecisionPolicy<E> + Sync,
{
    if episodes == 0 {
        return Err(TrainError::EmptyBatch);
    }
    let channels = env.reward_channels();
    let chunk_count = episodes.div_ceil(EPISODE_CHUNK);
    let partials: Vec<Result<Vec<f64>, TrainError>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * EPISODE_CHUNK;
            let hi = ((chunk + 1) * EPISODE_CHUNK).min(episodes);
            let mut sums = vec![0.0; channels.len()];
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    seed_stream.0,
                    seed_stream.1,
                    i as u64,
                ));
                let history = run_episode(env, policy, &mut rng, max_steps)?;
                for (ci, channel) in channels.iter().enumerate() {
                    sums[ci] += history.total(*channel);
                }
            }
            Ok(sums)
        })
        .collect();
    let mut sums = vec![0.0; channels.len()];
    for part in partials {
        for (acc, add) in sums.iter_mut().zip(&part?) {
            *acc += add;
        }
    }
    for s in &mut sums {
        *s /= episodes as f64;
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, ActionSet, EpisodeStep, RewardVector};
    use crate::policy::{FourierBasis, FourierBasisSpec};
    use approx::assert_relative_eq;

    fn history_with_times(times: &[f64]) -> EpisodeHistory {
        EpisodeHistory {
            steps: times
                .iter()
                .map(|&t| EpisodeStep {
                    features: vec![0.5],
                    admissible: ActionSet::from_slice(&[Action::Wait]),
                    action: Action::Wait,
                    reward: RewardVector {
                        time_s: t,
                        ..RewardVector::default()
                    },
                })
                .collect(),
            truncated: false,
        }
    }

    #[test]
    fn returns_are_suffix_sums_at_gamma_one() {
        let dt = 5e-5;
        let h = history_with_times(&[dt, dt, 0.0]);
        let r = per_channel_returns(&h, &[RewardChannel::Time], 1.0);
        assert_relative_eq!(r[0][0], 2.0 * dt, max_relative = 1e-15);
        assert_relative_eq!(r[0][1], dt, max_relative = 1e-15);
        assert_eq!(r[0][2], 0.0);
    }

    #[test]
    fn terminal_fidelity_reward_propagates_to_every_step() {
        let mut h = history_with_times(&[1.0, 1.0, 0.0]);
        h.steps[2].reward.fidelity = 0.93;
        let r = per_channel_returns(&h, &[RewardChannel::Fidelity], 1.0);
        assert_eq!(r[0], vec![0.93, 0.93, 0.93]);
    }

    #[test]
    fn discounted_returns_geometric_sum() {
        let h = history_with_times(&[1.0, 1.0, 1.0]);
        let r = per_channel_returns(&h, &[RewardChannel::Time], 0.5);
        assert_relative_eq!(r[0][0], 1.75, max_relative = 1e-15);
    }

    #[test]
    fn bb84_werner_value_matches_skr_when_positive() {
        let u = UtilityKind::Bb84Werner;
        for f in [0.85, 0.9, 0.95, 0.99] {
            for t in [0.5, 1.0, 2.0e-4] {
                let v = u.value(&[f, t]).unwrap();
                let skr = crate::quantum::skr_bb84_werner(f, t);
                if skr > 0.0 {
                    assert_relative_eq!(v, skr, max_relative = 1e-12);
                }
                assert_relative_eq!(
                    u.clamped_value(&[f, t]).unwrap(),
                    skr,
                    max_relative = 1e-12
                );
            }
        }
        // Below threshold the unclamped value goes negative.
        assert!(u.value(&[0.5, 1.0]).unwrap() < 0.0);
        assert_eq!(u.clamped_value(&[0.5, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn bds_values_match_skr() {
        let s = crate::quantum::BellDiagonalState::new(0.9, 0.04, 0.03, 0.03).unwrap();
        let j = [s.b(), s.c(), s.d(), 0.37];
        assert_relative_eq!(
            UtilityKind::Bb84Bds.clamped_value(&j).unwrap(),
            crate::quantum::skr_bb84_bds(&s, 0.37),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            UtilityKind::SixStateBds.clamped_value(&j).unwrap(),
            crate::quantum::skr_six_state(&s, 0.37),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            UtilityKind::SixStateWerner.clamped_value(&[0.9, 1.0]).unwrap(),
            crate::quantum::skr_six_state_werner(0.9, 1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn bb84_partials_at_worked_point() {
        // J_F = 0.9, J_T = 1: du/dJ_T = -(1 - 2h(1/15)).
        let (p, clamped) = UtilityKind::Bb84Werner.partials(&[0.9, 1.0]).unwrap();
        assert!(!clamped);
        assert_relative_eq!(p[1], -0.2932813299571573, max_relative = 1e-12);
        let beta: f64 = 2.0 / 3.0 * 0.1;
        assert_relative_eq!(
            p[0],
            -(4.0 / 3.0) * (beta / (1.0 - beta)).log2(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn partials_error_outside_feasible_region() {
        assert!(matches!(
            UtilityKind::Bb84Werner.partials(&[1.0, 1.0]),
            Err(UtilityError::EstimateOutOfRange { .. })
        ));
        assert!(matches!(
            UtilityKind::Bb84Werner.partials(&[0.9, 0.0]),
            Err(UtilityError::NonPositiveTimeReturn(_))
        ));
        assert!(matches!(
            UtilityKind::SixStateWerner.partials(&[1.0, 1.0]),
            Err(UtilityError::EstimateOutOfRange { .. })
        ));
        // Near-boundary estimates clamp instead of erroring.
        let (_, clamped) = UtilityKind::Bb84Werner
            .partials(&[1.0 - 1e-12, 1.0])
            .unwrap();
        assert!(clamped);
    }

    #[test]
    fn partials_match_finite_differences() {
        let cases: Vec<(UtilityKind, Vec<f64>)> = vec![
            (UtilityKind::Bb84Werner, vec![0.91, 3.4e-4]),
            (UtilityKind::SixStateWerner, vec![0.88, 2.1e-4]),
            (UtilityKind::Bb84Bds, vec![0.031, 0.024, 0.045, 4.4e-4]),
            (UtilityKind::SixStateBds, vec![0.031, 0.024, 0.045, 4.4e-4]),
        ];
        for (u, j) in cases {
            let (analytic, _) = u.partials(&j).unwrap();
            for (i, a) in analytic.iter().enumerate() {
                let mut plus = j.clone();
                let mut minus = j.clone();
                let step = 1e-7 * j[i].abs().max(1e-3);
                plus[i] += step;
                minus[i] -= step;
                let fd =
                    (u.value(&plus).unwrap() - u.value(&minus).unwrap()) / (2.0 * step);
                let denom = a.abs().max(1.0);
                assert!(
                    (fd - a).abs() / denom < 1e-5,
                    "{u:?} channel {i}: analytic {a}, fd {fd}"
                );
            }
        }
    }

    #[test]
    fn linear_utility_reduces_to_single_channel_gradient() {
        let g0 = Array2::from_shape_fn((2, 3), |(i, j)| (i * 3 + j) as f64);
        let g1 = Array2::from_shape_fn((2, 3), |(i, j)| -(1.0 + (i + j) as f64));
        let combined = combine_gradients(&[1.0, 0.0], &[g0.clone(), g1]);
        assert_eq!(combined, g0);
    }

    #[test]
    fn adam_with_zero_learning_rate_is_inert() {
        let mut params = Array2::from_elem((2, 2), 0.7);
        let before = params.clone();
        let mut adam = AdamAscent::new(0.0, 0.9, 0.999, 1e-8, (2, 2));
        for _ in 0..17 {
            adam.ascend(&mut params, &Array2::from_elem((2, 2), 3.0));
        }
        assert_eq!(params, before);
    }

    #[test]
    fn adam_ascends_a_concave_objective() {
        // Maximize -(x - 2)^2 elementwise; gradient is -2(x - 2).
        let mut params = Array2::zeros((1, 1));
        let mut adam = AdamAscent::new(0.05, 0.9, 0.999, 1e-8, (1, 1));
        for _ in 0..2000 {
            let grad = params.mapv(|x: f64| -2.0 * (x - 2.0));
            adam.ascend(&mut params, &grad);
        }
        assert_relative_eq!(params[(0, 0)], 2.0, max_relative = 1e-3);
    }

    #[test]
    fn estimator_rejects_empty_batch_and_zero_cases() {
        let env = crate::oracles::toy::ToyMdp::default();
        let basis = FourierBasis::new(FourierBasisSpec::new(1, 2), 1).unwrap();
        let policy = SoftmaxPolicy::new(basis, 2);
        assert!(matches!(
            estimate_policy_gradients(&env, &[], &policy, 1.0),
            Err(TrainError::EmptyBatch)
        ));
        // All-zero returns give a zero gradient for that channel.
        let h = history_with_times(&[0.0, 0.0]);
        let est = estimate_policy_gradients(&env, &[h], &policy, 1.0).unwrap();
        assert!(est.gradients[0].iter().all(|g| *g == 0.0));
        assert!(est.gradients[1].iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_admissible_action_yields_zero_gradient() {
        let basis = FourierBasis::new(FourierBasisSpec::new(1, 2), 1).unwrap();
        let policy = SoftmaxPolicy::new(basis, 2);
        let env = crate::oracles::toy::ToyMdp::default();
        let h = EpisodeHistory {
            steps: vec![EpisodeStep {
                features: vec![0.5],
                admissible: ActionSet::from_slice(&[Action::Consume]),
                action: Action::Consume,
                reward: RewardVector {
                    fidelity: 0.9,
                    time_s: 1.0,
                    ..RewardVector::default()
                },
            }],
            truncated: false,
        };
        let est = estimate_policy_gradients(&env, &[h], &policy, 1.0).unwrap();
        for g in &est.gradients {
            assert!(g.iter().all(|x| *x == 0.0));
        }
        assert_relative_eq!(est.mean_returns[0], 0.9, max_relative = 1e-15);
    }
}
