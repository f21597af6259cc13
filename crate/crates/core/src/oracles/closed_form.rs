//! Closed-form expectations used as evaluation oracles.

use crate::quantum::{generation_probability, skr_bb84_werner, LinkParameters};

/// Bisection root find on a monotone sign change.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iterations: usize) -> f64 {
    let flo = f(lo);
    assert!(
        flo * f(hi) <= 0.0,
        "bisection requires a sign change on [{lo}, {hi}]"
    );
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Werner fidelity where the BB84 rate crosses zero.
pub fn bb84_werner_zero_crossing() -> f64 {
    bisect(
        |f| {
            1.0 - 2.0 * crate::quantum::binary_entropy(2.0 / 3.0 * (1.0 - f))
        },
        0.5,
        1.0,
        200,
    )
}

/// Expected BB84 utility of the consume-as-soon-as-possible policy on the
/// two-memory Werner environment: pairs are consumed at fidelity `F0` and
/// the wait count is geometric with per-step success `1 - (1 - p_gen)^2`,
/// so the mean delivery time is `dt / (1 - (1 - p_gen)^2)`.
pub fn consume_asap_expected_utility(link: &LinkParameters) -> f64 {
    let p_gen = generation_probability(link);
    let success_per_step = 1.0 - (1.0 - p_gen) * (1.0 - p_gen);
    let mean_time = link.dt() / success_per_step;
    skr_bb84_werner(link.initial_fidelity, mean_time)
}
