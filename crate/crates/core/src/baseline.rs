//! Threshold heuristic policies and grid search over consume/discard
//! thresholds.
//!
//! The heuristic consumes the best stored pair once it clears
//! `f_consume`, discards (only on fully heralded states) any pair below
//! `f_discard`, otherwise purifies the two closest-fidelity pairs when at
//! least two are stored — optimistically, without waiting for pending
//! distillation outcomes — and waits when nothing else applies.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    Action, DecisionPolicy, EnvError, LinkMdp, MdpState, MemoryPair,
    MAX_EPISODE_STEPS,
};
use crate::optim::{mean_episode_returns, TrainError, UtilityKind};
use crate::streams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("thresholds must satisfy 0.25 < f_discard < f_consume <= 1; got consume {consume}, discard {discard}")]
    InvalidThresholds { consume: f64, discard: f64 },
    #[error("empty grid range")]
    EmptyGrid,
}

/// Consume/discard thresholds on pair fidelity (the `A` coefficient for
/// Bell-diagonal pairs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub f_consume: f64,
    pub f_discard: f64,
}

impl ThresholdPolicy {
    pub fn new(f_consume: f64, f_discard: f64) -> Result<Self, BaselineError> {
        let ok = f_consume > 0.25
            && f_consume <= 1.0
            && f_discard > 0.25
            && f_discard < 1.0
            && f_discard < f_consume;
        if !ok {
            return Err(BaselineError::InvalidThresholds {
                consume: f_consume,
                discard: f_discard,
            });
        }
        Ok(ThresholdPolicy {
            f_consume,
            f_discard,
        })
    }

    /// The action for a state given as occupied-pair fidelities and the
    /// knowledge probability. Pure: same input, same action.
    pub fn action_for(&self, fidelities: &[f64], knowledge_p: f64) -> Action {
        let occupied = fidelities.len();
        if occupied > 0 {
            let f_max = fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if f_max >= self.f_consume {
                return Action::Consume;
            }
            if knowledge_p >= 1.0 {
                let f_min = fidelities.iter().cloned().fold(f64::INFINITY, f64::min);
                if f_min < self.f_discard {
                    return Action::Discard;
                }
            }
            if occupied >= 2 {
                return Action::Purify(self.purify_pair(fidelities).0, self.purify_pair(fidelities).1);
            }
        }
        Action::Wait
    }

    /// Pair with the smallest fidelity difference, following the fixed
    /// comparison order (ties fall to the earlier comparison).
    fn purify_pair(&self, fidelities: &[f64]) -> (usize, usize) {
        if fidelities.len() == 2 {
            return (0, 1);
        }
        let d12 = (fidelities[0] - fidelities[1]).abs();
        let d13 = (fidelities[0] - fidelities[2]).abs();
        let d23 = (fidelities[1] - fidelities[2]).abs();
        if d12 <= d13 {
            if d12 <= d23 {
                (0, 1)
            } else {
                (1, 2)
            }
        } else if d13 <= d23 {
            (0, 2)
        } else {
            (1, 2)
        }
    }
}

impl<M: MemoryPair> DecisionPolicy<LinkMdp<M>> for ThresholdPolicy {
    fn decide(
        &self,
        _env: &LinkMdp<M>,
        state: &MdpState<M>,
        _rng: &mut dyn RngCore,
    ) -> Result<Action, EnvError> {
        if state.is_terminal() {
            return Err(EnvError::TerminalState);
        }
        let fidelities: Vec<f64> = state.occupied().iter().map(|m| m.fidelity()).collect();
        Ok(self.action_for(&fidelities, state.knowledge_p()))
    }
}

/// Grid ranges (inclusive, step 0.01) and the Monte Carlo budget per
/// point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub consume_range: (f64, f64),
    pub discard_range: (f64, f64),
    pub eval_episodes: usize,
}

pub const GRID_STEP: f64 = 0.01;

impl GridSearchSpec {
    /// Search ranges keyed on the initial fidelity: `[0.83, 0.86] x
    /// [0.77, 0.80]` around `F0 = 0.83` and `[0.90, 0.94] x [0.87, 0.89]`
    /// around `F0 = 0.9`. Other values fall back to a window of the same
    /// shape anchored at `F0`.
    pub fn for_initial_fidelity(f0: f64, eval_episodes: usize) -> Self {
        let (consume_range, discard_range) = if (f0 - 0.83).abs() < 5e-3 {
            ((0.83, 0.86), (0.77, 0.80))
        } else if (f0 - 0.9).abs() < 5e-3 {
            ((0.90, 0.94), (0.87, 0.89))
        } else {
            let hi = (f0 + 0.04).min(0.99);
            ((f0, hi), ((f0 - 0.06).max(0.26), f0 - 0.03))
        };
        GridSearchSpec {
            consume_range,
            discard_range,
            eval_episodes,
        }
    }

    fn axis(range: (f64, f64)) -> Vec<f64> {
        let lo = (range.0 * 100.0).round() as i64;
        let hi = (range.1 * 100.0).round() as i64;
        (lo..=hi).map(|k| k as f64 / 100.0).collect()
    }

    pub fn consume_values(&self) -> Vec<f64> {
        Self::axis(self.consume_range)
    }

    pub fn discard_values(&self) -> Vec<f64> {
        Self::axis(self.discard_range)
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub f_consume: f64,
    pub f_discard: f64,
    pub utility: f64,
    pub mean_returns: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum GridSearchError {
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Utility(#[from] crate::optim::UtilityError),
}

/// Evaluates every grid point by Monte Carlo and returns the argmax with
/// the full table. All points share one common random-number stream, so
/// comparisons between points see the same draws. Ties break toward the
/// lower consume threshold, then the lower discard threshold; the table
/// is emitted in that scan order.
pub fn grid_search<M: MemoryPair>(
    env: &LinkMdp<M>,
    spec: &GridSearchSpec,
    utility: UtilityKind,
    seed: u64,
) -> Result<(ThresholdPolicy, Vec<GridPoint>), GridSearchError> {
    let consume = spec.consume_values();
    let discard = spec.discard_values();
    if consume.is_empty() || discard.is_empty() {
        return Err(BaselineError::EmptyGrid.into());
    }
    let mut combos = Vec::with_capacity(consume.len() * discard.len());
    for &fc in &consume {
        for &fd in &discard {
            combos.push(ThresholdPolicy::new(fc, fd)?);
        }
    }
    let points: Vec<Result<GridPoint, GridSearchError>> = combos
        .par_iter()
        .map(|policy| {
            let means = mean_episode_returns(
                env,
                policy,
                spec.eval_episodes,
                (seed, streams::GRID),
                MAX_EPISODE_STEPS,
            )?;
            let utility_value = utility.clamped_value(&means)?;
            Ok(GridPoint {
                f_consume: policy.f_consume,
                f_discard: policy.f_discard,
                utility: utility_value,
                mean_returns: means,
            })
        })
        .collect();
    let mut table = Vec::with_capacity(points.len());
    for p in points {
        table.push(p?);
    }
    let mut best = 0;
    for (i, point) in table.iter().enumerate() {
        if point.utility > table[best].utility {
            best = i;
        }
    }
    let winner = ThresholdPolicy::new(table[best].f_consume, table[best].f_discard)?;
    Ok((winner, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, WernerPair};
    use crate::quantum::LinkParameters;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_validation() {
        assert!(ThresholdPolicy::new(0.9, 0.87).is_ok());
        assert!(ThresholdPolicy::new(0.9, 0.9).is_err());
        assert!(ThresholdPolicy::new(0.9, 0.95).is_err());
        assert!(ThresholdPolicy::new(0.2, 0.1).is_err());
    }

    #[test]
    fn consume_branch_takes_priority() {
        let policy = ThresholdPolicy::new(0.92, 0.78).unwrap();
        assert_eq!(policy.action_for(&[0.95, 0.5], 1.0), Action::Consume);
        // Also on pending states.
        assert_eq!(policy.action_for(&[0.95], 0.6), Action::Consume);
    }

    #[test]
    fn discard_branch_hits_lowest_occupied_pair() {
        let policy = ThresholdPolicy::new(0.85, 0.78).unwrap();
        assert_eq!(policy.action_for(&[0.80, 0.76], 1.0), Action::Discard);
        // Pending knowledge suppresses the discard branch.
        assert_eq!(
            policy.action_for(&[0.80, 0.76], 0.9),
            Action::Purify(0, 1)
        );
        // Single decayed pair discards too.
        assert_eq!(policy.action_for(&[0.7], 1.0), Action::Discard);
    }

    #[test]
    fn purify_selects_smallest_fidelity_gap() {
        let policy = ThresholdPolicy::new(0.95, 0.77).unwrap();
        // |F1-F2| = 0.02 is the smallest gap.
        assert_eq!(
            policy.action_for(&[0.83, 0.85, 0.90], 1.0),
            Action::Purify(0, 1)
        );
        // Closest pair is (F2, F3).
        assert_eq!(
            policy.action_for(&[0.80, 0.88, 0.89], 1.0),
            Action::Purify(1, 2)
        );
        // Closest pair is (F1, F3).
        assert_eq!(
            policy.action_for(&[0.88, 0.80, 0.89], 1.0),
            Action::Purify(0, 2)
        );
        // Equal gaps fall to the earlier comparison.
        assert_eq!(
            policy.action_for(&[0.84, 0.86, 0.88], 1.0),
            Action::Purify(0, 1)
        );
        // Two occupied pairs purify directly, even with pending outcomes.
        assert_eq!(policy.action_for(&[0.86, 0.84], 0.7), Action::Purify(0, 1));
    }

    #[test]
    fn wait_when_nothing_applies() {
        let policy = ThresholdPolicy::new(0.92, 0.80).unwrap();
        assert_eq!(policy.action_for(&[], 1.0), Action::Wait);
        assert_eq!(policy.action_for(&[0.85], 1.0), Action::Wait);
        assert_eq!(policy.action_for(&[0.85], 0.5), Action::Wait);
    }

    proptest! {
        /// The heuristic only ever proposes admissible actions.
        #[test]
        fn baseline_actions_are_admissible(
            n in 0usize..4,
            fids in proptest::array::uniform3(0.26f64..1.0),
            pending in proptest::bool::ANY,
            fc in 0.3f64..1.0,
            gap in 0.01f64..0.4,
        ) {
            let f_discard = (fc - gap).max(0.26);
            prop_assume!(f_discard < fc);
            let policy = ThresholdPolicy::new(fc, f_discard).unwrap();
            let link = LinkParameters::new(15.0, 0.9).unwrap();
            let env = crate::env::LinkMdp::wn2m3(link).unwrap();
            let pairs: Vec<WernerPair> = fids[..n.min(3)].iter().map(|f| WernerPair(*f)).collect();
            // Pending states require at least one stored pair and arise with
            // at most two occupied slots.
            let p = if pending && !pairs.is_empty() && pairs.len() <= 2 { 0.6 } else { 1.0 };
            let state = MdpState::with_pairs(&pairs, p);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let action = policy.decide(&env, &state, &mut rng).unwrap();
            let admissible = env.admissible_actions(&state).unwrap();
            prop_assert!(admissible.contains(&action), "{action:?} not in {admissible:?}");
        }
    }

    #[test]
    fn grid_axes_are_exact_centi_steps() {
        let spec = GridSearchSpec::for_initial_fidelity(0.9, 100);
        assert_eq!(spec.consume_values(), vec![0.90, 0.91, 0.92, 0.93, 0.94]);
        assert_eq!(spec.discard_values(), vec![0.87, 0.88, 0.89]);
        let spec = GridSearchSpec::for_initial_fidelity(0.83, 100);
        assert_eq!(spec.consume_values(), vec![0.83, 0.84, 0.85, 0.86]);
        assert_eq!(spec.discard_values(), vec![0.77, 0.78, 0.79, 0.80]);
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let link = LinkParameters::new(10.0, 0.9).unwrap();
        let env = crate::env::LinkMdp::wn2m2(link).unwrap();
        let spec = GridSearchSpec {
            consume_range: (0.9, 0.9),
            discard_range: (0.87, 0.87),
            eval_episodes: 500,
        };
        let (best, table) = grid_search(&env, &spec, UtilityKind::Bb84Werner, 7).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(best.f_consume, 0.9);
        assert_eq!(best.f_discard, 0.87);
        assert!(table[0].utility > 0.0);
    }

    #[test]
    fn grid_table_is_exhaustive() {
        let link = LinkParameters::new(10.0, 0.9).unwrap();
        let env = crate::env::LinkMdp::wn2m2(link).unwrap();
        let spec = GridSearchSpec {
            consume_range: (0.9, 0.92),
            discard_range: (0.87, 0.88),
            eval_episodes: 200,
        };
        let (_, table) = grid_search(&env, &spec, UtilityKind::Bb84Werner, 7).unwrap();
        assert_eq!(table.len(), 3 * 2);
    }
}
