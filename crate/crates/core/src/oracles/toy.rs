//! A two-action, one-step MDP whose returns and policy gradients have
//! closed forms, used to validate the REINFORCE estimator and the
//! chain-rule utility gradient.
//!
//! From the single non-terminal state both actions end the episode:
//!
//! - `Wait`:    fidelity 0.7, time 2.0 (deterministic);
//! - `Consume`: fidelity 0.9, time 0.5 or fidelity 1.0, time 1.5,
//!   each with probability 1/2.
//!
//! With action probabilities `(pi_w, pi_c)` the channel means are
//! `J_F = 0.7 pi_w + 0.95 pi_c` and `J_T = 2 pi_w + pi_c`, and the exact
//! per-channel policy gradient is
//! `sum_a mean_reward_c(a) * pi(a) * d ln pi(a) / d theta`.

use ndarray::Array2;
use rand::{Rng, RngCore};

use crate::env::{
    Action, ActionSet, EnvError, Environment, RewardChannel, RewardVector, WERNER_CHANNELS,
};
use crate::policy::SoftmaxPolicy;

pub const TOY_FEATURES: [f64; 1] = [0.6];
pub const TOY_ACTIONS: [Action; 2] = [Action::Wait, Action::Consume];

const WAIT_REWARD: (f64, f64) = (0.7, 2.0);
const CONSUME_LOW: (f64, f64) = (0.9, 0.5);
const CONSUME_HIGH: (f64, f64) = (1.0, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyState {
    Start,
    Done,
}

#[derive(Debug, Default)]
pub struct ToyMdp;

impl Environment for ToyMdp {
    type State = ToyState;

    fn feature_dim(&self) -> usize {
        1
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reward_channels(&self) -> &'static [RewardChannel] {
        WERNER_CHANNELS
    }

    fn initial_state(&self) -> ToyState {
        ToyState::Start
    }

    fn is_terminal(&self, state: &ToyState) -> bool {
        *state == ToyState::Done
    }

    fn admissible_actions(&self, state: &ToyState) -> Result<ActionSet, EnvError> {
        if *state == ToyState::Done {
            return Err(EnvError::TerminalState);
        }
        Ok(ActionSet::from_slice(&TOY_ACTIONS))
    }

    fn state_features(&self, _state: &ToyState) -> Vec<f64> {
        TOY_FEATURES.to_vec()
    }

    fn step(
        &self,
        state: &ToyState,
        action: Action,
        rng: &mut dyn RngCore,
    ) -> Result<(ToyState, RewardVector), EnvError> {
        if *state == ToyState::Done {
            return Err(EnvError::TerminalState);
        }
        let (fidelity, time_s) = match action {
            Action::Wait => WAIT_REWARD,
            Action::Consume => {
                if rng.random::<f64>() < 0.5 {
                    CONSUME_LOW
                } else {
                    CONSUME_HIGH
                }
            }
            other => return Err(EnvError::InadmissibleAction(other)),
        };
        Ok((
            ToyState::Done,
            RewardVector {
                fidelity,
                time_s,
                ..RewardVector::default()
            },
        ))
    }
}

fn mean_rewards(action: Action) -> (f64, f64) {
    match action {
        Action::Wait => WAIT_REWARD,
        Action::Consume => (
            0.5 * (CONSUME_LOW.0 + CONSUME_HIGH.0),
            0.5 * (CONSUME_LOW.1 + CONSUME_HIGH.1),
        ),
        _ => unreachable!(),
    }
}

fn action_probabilities(policy: &SoftmaxPolicy) -> Vec<f64> {
    let phi = policy
        .featurize(&TOY_FEATURES)
        .expect("toy features lie in [0,1]");
    policy
        .action_probabilities(&phi, &TOY_ACTIONS)
        .expect("both toy actions are admissible")
}

/// Exact `(J_F, J_T)` under the policy.
pub fn exact_channel_means(policy: &SoftmaxPolicy) -> Vec<f64> {
    let probs = action_probabilities(policy);
    let mut jf = 0.0;
    let mut jt = 0.0;
    for (action, p) in TOY_ACTIONS.iter().zip(&probs) {
        let (f, t) = mean_rewards(*action);
        jf += p * f;
        jt += p * t;
    }
    vec![jf, jt]
}

/// Exact per-channel policy gradients by enumerating both episodes.
pub fn exact_channel_gradients(policy: &SoftmaxPolicy) -> Vec<Array2<f64>> {
    let phi = policy.featurize(&TOY_FEATURES).unwrap();
    let probs = action_probabilities(policy);
    let shape = policy.params().weights.raw_dim();
    let mut out = vec![Array2::zeros(shape), Array2::zeros(shape)];
    for (action, p) in TOY_ACTIONS.iter().zip(&probs) {
        let (f, t) = mean_rewards(*action);
        policy
            .accumulate_log_prob_gradient(&phi, &TOY_ACTIONS, *action, p * f, &mut out[0])
            .unwrap();
        policy
            .accumulate_log_prob_gradient(&phi, &TOY_ACTIONS, *action, p * t, &mut out[1])
            .unwrap();
    }
    out
}
