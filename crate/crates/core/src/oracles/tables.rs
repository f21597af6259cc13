//! Literal transcription of the transition tables for the two- and
//! three-memory environments, kept independent of the sampling code in
//! `env::LinkMdp::step`.
//!
//! Each `(state, action)` group is written out row by row with its
//! closed-form probability, successor state and reward columns, exactly
//! as tabulated. Tests and `oracle-check` verify that (a) every group's
//! probabilities sum to one and (b) sampled transition frequencies match
//! the rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{
    Action, Environment, LinkMdp, MdpState, MemoryPair, RewardVector, WernerPair,
};

const MATCH_TOL: f64 = 1e-9;

/// One tabulated transition.
#[derive(Debug, Clone)]
pub struct TableRow<M: MemoryPair> {
    pub probability: f64,
    pub next: MdpState<M>,
    pub reward: RewardVector,
}

fn consume_reward<M: MemoryPair>(pair: &M) -> RewardVector {
    let mut r = RewardVector::default();
    pair.write_consume_reward(&mut r);
    r
}

fn time_reward(dt: f64) -> RewardVector {
    RewardVector {
        time_s: dt,
        ..RewardVector::default()
    }
}

fn max_pair<M: MemoryPair>(pairs: &[M]) -> M {
    let mut best = pairs[0];
    for p in &pairs[1..] {
        if p.fidelity() > best.fidelity() {
            best = *p;
        }
    }
    best
}

/// Tabulated rows for a `(state, action)` group of a two-memory
/// environment (Werner or Bell-diagonal).
pub fn two_memory_rows<M: MemoryPair>(
    env: &LinkMdp<M>,
    state: &MdpState<M>,
    action: Action,
) -> Vec<TableRow<M>> {
    assert_eq!(env.num_slots(), 2);
    let g = env.p_gen();
    let gb = 1.0 - g;
    let dt = env.dt();
    let tc = env.link().coherence_time_s;
    let f0 = env.link().initial_fidelity;
    let fresh = M::fresh(f0);
    let p = state.knowledge_p();
    let pb = 1.0 - p;
    let pairs = state.occupied();
    let heralded = p >= 1.0;

    let state_of = |pairs: &[M], p: f64| MdpState::with_pairs(pairs, p);

    match (pairs.len(), heralded, action) {
        // Empty memory: generation attempts on both slots.
        (0, true, Action::Wait) => vec![
            TableRow {
                probability: gb * gb,
                next: MdpState::initial(),
                reward: time_reward(dt),
            },
            TableRow {
                probability: 2.0 * g * gb,
                next: state_of(&[fresh], 1.0),
                reward: time_reward(dt),
            },
            TableRow {
                probability: g * g,
                next: state_of(&[fresh, fresh], 1.0),
                reward: time_reward(dt),
            },
        ],
        // One heralded pair.
        (1, true, Action::Consume) => vec![TableRow {
            probability: 1.0,
            next: MdpState::terminal_state(),
            reward: consume_reward(&pairs[0]),
        }],
        (1, true, Action::Discard) => vec![TableRow {
            probability: 1.0,
            next: MdpState::initial(),
            reward: RewardVector::default(),
        }],
        (1, true, Action::Wait) => {
            let aged = pairs[0].depolarized(dt, tc);
            vec![
                TableRow {
                    probability: gb,
                    next: state_of(&[aged], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g,
                    next: state_of(&[aged, fresh], 1.0),
                    reward: time_reward(dt),
                },
            ]
        }
        // Two heralded pairs.
        (2, true, Action::Consume) => vec![TableRow {
            probability: 1.0,
            next: MdpState::terminal_state(),
            reward: consume_reward(&max_pair(pairs)),
        }],
        (2, true, Action::Discard) => vec![TableRow {
            probability: 1.0,
            next: state_of(&[max_pair(pairs)], 1.0),
            reward: RewardVector::default(),
        }],
        (2, true, Action::Purify(0, 1)) => {
            let (out, ps) = distill_for(env, &pairs[0], &pairs[1]);
            vec![TableRow {
                probability: 1.0,
                next: state_of(&[out], ps),
                reward: RewardVector::default(),
            }]
        }
        // One pair with a pending distillation outcome.
        (1, false, Action::Consume) => vec![
            TableRow {
                probability: pb,
                next: MdpState::initial(),
                reward: RewardVector::default(),
            },
            TableRow {
                probability: p,
                next: MdpState::terminal_state(),
                reward: consume_reward(&pairs[0]),
            },
        ],
        (1, false, Action::Wait) => {
            let aged = pairs[0].depolarized(dt, tc);
            vec![
                TableRow {
                    probability: pb * gb,
                    next: MdpState::initial(),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: pb * g,
                    next: state_of(&[fresh], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: p * gb,
                    next: state_of(&[aged], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: p * g,
                    next: state_of(&[aged, fresh], 1.0),
                    reward: time_reward(dt),
                },
            ]
        }
        other => panic!("no tabulated rows for {other:?}"),
    }
}

/// Tabulated rows for a `(state, action)` group of the three-memory
/// Werner environment.
pub fn three_memory_rows(
    env: &LinkMdp<WernerPair>,
    state: &MdpState<WernerPair>,
    action: Action,
) -> Vec<TableRow<WernerPair>> {
    assert_eq!(env.num_slots(), 3);
    let g = env.p_gen();
    let gb = 1.0 - g;
    let dt = env.dt();
    let tc = env.link().coherence_time_s;
    let fresh = WernerPair::fresh(env.link().initial_fidelity);
    let p = state.knowledge_p();
    let pb = 1.0 - p;
    let pairs = state.occupied();
    let heralded = p >= 1.0;

    let state_of = |pairs: &[WernerPair], p: f64| MdpState::with_pairs(pairs, p);
    let aged = |m: &WernerPair| m.depolarized(dt, tc);

    match (pairs.len(), heralded, action) {
        (0, true, Action::Wait) => vec![
            TableRow {
                probability: gb * gb * gb,
                next: MdpState::initial(),
                reward: time_reward(dt),
            },
            TableRow {
                probability: 3.0 * gb * gb * g,
                next: state_of(&[fresh], 1.0),
                reward: time_reward(dt),
            },
            TableRow {
                probability: 3.0 * gb * g * g,
                next: state_of(&[fresh, fresh], 1.0),
                reward: time_reward(dt),
            },
            TableRow {
                probability: g * g * g,
                next: state_of(&[fresh, fresh, fresh], 1.0),
                reward: time_reward(dt),
            },
        ],
        (1, true, Action::Consume) => vec![TableRow {
            probability: 1.0,
            next: MdpState::terminal_state(),
            reward: consume_reward(&pairs[0]),
        }],
        (1, true, Action::Discard) => vec![TableRow {
            probability: 1.0,
            next: MdpState::initial(),
            reward: RewardVector::default(),
        }],
        (1, true, Action::Wait) => {
            let d1 = aged(&pairs[0]);
            vec![
                TableRow {
                    probability: gb * gb,
                    next: state_of(&[d1], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: 2.0 * gb * g,
                    next: state_of(&[d1, fresh], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g * g,
                    next: state_of(&[d1, fresh, fresh], 1.0),
                    reward: time_reward(dt),
                },
            ]
        }
        (2, true, Action::Consume) => vec![TableRow {
            probability: 1.0,
            next: MdpState::terminal_state(),
            reward: consume_reward(&max_pair(pairs)),
        }],
        (2, true, Action::Discard) => vec![TableRow {
            probability: 1.0,
            next: state_of(&[max_pair(pairs)], 1.0),
            reward: RewardVector::default(),
        }],
        (2, true, Action::Wait) => {
            let d1 = aged(&pairs[0]);
            let d2 = aged(&pairs[1]);
            vec![
                TableRow {
                    probability: gb,
                    next: state_of(&[d1, d2], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g,
                    next: state_of(&[d1, d2, fresh], 1.0),
                    reward: time_reward(dt),
                },
            ]
        }
        (2, true, Action::Purify(0, 1)) => {
            let (out, ps) = distill_for(env, &pairs[0], &pairs[1]);
            vec![TableRow {
                probability: 1.0,
                next: state_of(&[out], ps),
                reward: RewardVector::default(),
            }]
        }
        (3, true, Action::Consume) => vec![TableRow {
            probability: 1.0,
            next: MdpState::terminal_state(),
            reward: consume_reward(&max_pair(pairs)),
        }],
        (3, true, Action::Discard) => {
            let mut sorted = pairs.to_vec();
            sorted.sort_by(|a, b| b.fidelity().partial_cmp(&a.fidelity()).unwrap());
            vec![TableRow {
                probability: 1.0,
                next: state_of(&sorted[..2], 1.0),
                reward: RewardVector::default(),
            }]
        }
        (3, true, Action::Purify(i, j)) => {
            let (out, ps) = distill_for(env, &pairs[i], &pairs[j]);
            let spectator = pairs[3 - i - j];
            vec![TableRow {
                probability: 1.0,
                next: state_of(&[out, spectator], ps),
                reward: RewardVector::default(),
            }]
        }
        (1, false, Action::Consume) => vec![
            TableRow {
                probability: p,
                next: MdpState::terminal_state(),
                reward: consume_reward(&pairs[0]),
            },
            TableRow {
                probability: pb,
                next: MdpState::initial(),
                reward: RewardVector::default(),
            },
        ],
        (1, false, Action::Wait) => {
            let d1 = aged(&pairs[0]);
            vec![
                TableRow {
                    probability: gb * gb * pb,
                    next: MdpState::initial(),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: gb * gb * p,
                    next: state_of(&[d1], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: 2.0 * g * gb * pb,
                    next: state_of(&[fresh], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: 2.0 * g * gb * p,
                    next: state_of(&[d1, fresh], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g * g * pb,
                    next: state_of(&[fresh, fresh], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g * g * p,
                    next: state_of(&[d1, fresh, fresh], 1.0),
                    reward: time_reward(dt),
                },
            ]
        }
        (2, false, Action::Consume) => vec![
            TableRow {
                probability: p,
                next: MdpState::terminal_state(),
                reward: consume_reward(&pairs[0]),
            },
            TableRow {
                probability: pb,
                next: state_of(&pairs[1..2], 1.0),
                reward: RewardVector::default(),
            },
        ],
        (2, false, Action::Purify(0, 1)) => {
            let (out, ps) = distill_for(env, &pairs[0], &pairs[1]);
            vec![TableRow {
                probability: 1.0,
                next: state_of(&[out], p * ps),
                reward: RewardVector::default(),
            }]
        }
        (2, false, Action::Wait) => {
            let d1 = aged(&pairs[0]);
            let d2 = aged(&pairs[1]);
            vec![
                TableRow {
                    probability: gb * pb,
                    next: state_of(&[d2], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: gb * p,
                    next: state_of(&[d1, d2], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g * pb,
                    next: state_of(&[d2, fresh], 1.0),
                    reward: time_reward(dt),
                },
                TableRow {
                    probability: g * p,
                    next: state_of(&[d1, d2, fresh], 1.0),
                    reward: time_reward(dt),
                },
            ]
        }
        other => panic!("no tabulated rows for {other:?}"),
    }
}

/// Distillation as the environments apply it: the two-memory
/// Bell-diagonal rows keep the raw output, Werner rows twirl. Matching
/// `LinkMdp` behavior here is intentional; the *quantum map* itself is
/// cross-checked by the density-matrix oracle.
fn distill_for<M: MemoryPair>(env: &LinkMdp<M>, a: &M, b: &M) -> (M, f64) {
    let (out, ps) = M::distilled(a, b);
    if env.kind().is_bell_diagonal() {
        (out, ps)
    } else {
        (out.twirled(), ps)
    }
}

/// Result of comparing sampled frequencies of one `(state, action)` group
/// against its tabulated distribution.
#[derive(Debug, Clone)]
pub struct FrequencyCheck {
    pub group: String,
    pub rows: usize,
    pub samples: u64,
    pub max_z: f64,
    pub unmatched: u64,
    pub row_sum_error: f64,
}

impl FrequencyCheck {
    /// Four-sigma binomial agreement with every row matched.
    pub fn pass(&self) -> bool {
        self.unmatched == 0 && self.max_z <= 4.0 && self.row_sum_error <= 1e-12
    }
}

/// Samples `step` repeatedly from a fixed `(state, action)` and bins the
/// outcomes against the table rows.
pub fn check_group<M, R>(
    env: &LinkMdp<M>,
    state: &MdpState<M>,
    action: Action,
    rows_fn: R,
    samples: u64,
    seed: u64,
) -> FrequencyCheck
where
    M: MemoryPair,
    R: Fn(&LinkMdp<M>, &MdpState<M>, Action) -> Vec<TableRow<M>>,
{
    let rows = rows_fn(env, state, action);
    let row_sum: f64 = rows.iter().map(|r| r.probability).sum();
    let mut counts = vec![0u64; rows.len()];
    let mut unmatched = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let (next, reward) = env
            .step(state, action, &mut rng)
            .expect("probe action must be admissible");
        match rows.iter().position(|row| {
            row.next.approx_eq(&next, MATCH_TOL) && row.reward.approx_eq(&reward, MATCH_TOL)
        }) {
            Some(i) => counts[i] += 1,
            None => unmatched += 1,
        }
    }
    let n = samples as f64;
    let mut max_z = 0.0f64;
    for (row, &count) in rows.iter().zip(&counts) {
        let q = row.probability;
        if q >= 1.0 {
            if count != samples {
                max_z = f64::INFINITY;
            }
            continue;
        }
        let sd = (n * q * (1.0 - q)).sqrt();
        let z = ((count as f64) - n * q).abs() / sd.max(1e-12);
        max_z = max_z.max(z);
    }
    FrequencyCheck {
        group: format!("{} {} x {}", env.kind(), describe(state), action),
        rows: rows.len(),
        samples,
        max_z,
        unmatched,
        row_sum_error: (row_sum - 1.0).abs(),
    }
}

fn describe<M: MemoryPair>(state: &MdpState<M>) -> String {
    if state.is_terminal() {
        return "terminal".to_string();
    }
    let fids: Vec<String> = state
        .occupied()
        .iter()
        .map(|m| format!("{:.3}", m.fidelity()))
        .collect();
    format!("({}; p={:.3})", fids.join(","), state.knowledge_p())
}

/// All `(state, action)` row groups of a two-memory environment, probed at
/// representative states.
pub fn two_memory_probe_groups<M: MemoryPair>(
    make_pair: impl Fn(f64) -> M,
) -> Vec<(MdpState<M>, Action)> {
    let lone = MdpState::with_pairs(&[make_pair(0.87)], 1.0);
    // Slot 2 deliberately holds the higher fidelity so that max-selection
    // is exercised.
    let full = MdpState::with_pairs(&[make_pair(0.87), make_pair(0.91)], 1.0);
    let pending = MdpState::with_pairs(&[make_pair(0.93)], 0.6);
    vec![
        (MdpState::initial(), Action::Wait),
        (lone.clone(), Action::Consume),
        (lone.clone(), Action::Discard),
        (lone, Action::Wait),
        (full.clone(), Action::Consume),
        (full.clone(), Action::Discard),
        (full, Action::Purify(0, 1)),
        (pending.clone(), Action::Consume),
        (pending, Action::Wait),
    ]
}

/// All `(state, action)` row groups of the three-memory environment.
pub fn three_memory_probe_groups() -> Vec<(MdpState<WernerPair>, Action)> {
    let w = WernerPair;
    let lone = MdpState::with_pairs(&[w(0.88)], 1.0);
    let two = MdpState::with_pairs(&[w(0.86), w(0.9)], 1.0);
    let three = MdpState::with_pairs(&[w(0.84), w(0.92), w(0.88)], 1.0);
    let pending1 = MdpState::with_pairs(&[w(0.94)], 0.6);
    let pending2 = MdpState::with_pairs(&[w(0.93), w(0.87)], 0.7);
    vec![
        (MdpState::initial(), Action::Wait),
        (lone.clone(), Action::Consume),
        (lone.clone(), Action::Discard),
        (lone, Action::Wait),
        (two.clone(), Action::Consume),
        (two.clone(), Action::Discard),
        (two.clone(), Action::Wait),
        (two, Action::Purify(0, 1)),
        (three.clone(), Action::Consume),
        (three.clone(), Action::Discard),
        (three.clone(), Action::Purify(0, 1)),
        (three.clone(), Action::Purify(0, 2)),
        (three, Action::Purify(1, 2)),
        (pending1.clone(), Action::Consume),
        (pending1, Action::Wait),
        (pending2.clone(), Action::Consume),
        (pending2.clone(), Action::Purify(0, 1)),
        (pending2, Action::Wait),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BdsPair;
    use crate::quantum::{LinkParameters, WernerState};

    fn make_bds(f: f64) -> BdsPair {
        // A genuinely non-Werner state so the coefficient plumbing is
        // exercised: distill two depolarized Werner pairs.
        let w = WernerState::new(f).unwrap().to_bell_diagonal();
        let aged = crate::quantum::depolarize(&w, 2e-4, 0.1);
        let (out, _) = crate::quantum::dejmps_distill(&aged, &w);
        BdsPair(out)
    }

    #[test]
    fn probabilities_sum_to_one_across_parameter_values() {
        for length in [5.0, 25.0, 50.0] {
            let link = LinkParameters::new(length, 0.9).unwrap();
            let env = LinkMdp::wn2m2(link).unwrap();
            for (state, action) in two_memory_probe_groups(WernerPair) {
                let rows = two_memory_rows(&env, &state, action);
                let sum: f64 = rows.iter().map(|r| r.probability).sum();
                assert!(
                    (sum - 1.0).abs() <= 1e-12,
                    "wn2m2 L={length} {action}: sum {sum}"
                );
            }
            let env3 = LinkMdp::wn2m3(link).unwrap();
            for (state, action) in three_memory_probe_groups() {
                let rows = three_memory_rows(&env3, &state, action);
                let sum: f64 = rows.iter().map(|r| r.probability).sum();
                assert!(
                    (sum - 1.0).abs() <= 1e-12,
                    "wn2m3 L={length} {action}: sum {sum}"
                );
            }
            let envb = LinkMdp::bn2m2(link).unwrap();
            for (state, action) in two_memory_probe_groups(make_bds) {
                let rows = two_memory_rows(&envb, &state, action);
                let sum: f64 = rows.iter().map(|r| r.probability).sum();
                assert!(
                    (sum - 1.0).abs() <= 1e-12,
                    "bn2m2 L={length} {action}: sum {sum}"
                );
            }
        }
    }

    #[test]
    fn sampled_frequencies_match_rows_smoke() {
        let link = LinkParameters::new(25.0, 0.9).unwrap();
        let env = LinkMdp::wn2m2(link).unwrap();
        for (i, (state, action)) in two_memory_probe_groups(WernerPair).into_iter().enumerate() {
            let check = check_group(&env, &state, action, two_memory_rows, 40_000, 90 + i as u64);
            assert!(check.pass(), "{check:?}");
        }
    }
}
