//! Runnable bundle of the derived-value checks, shared by the test suite
//! and the `oracle-check` CLI subcommand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Action, LinkMdp, WernerPair};
use crate::optim::{utility_gradient, UtilityKind};
use crate::oracles::{closed_form, density, fd, tables, toy};
use crate::policy::{FourierBasis, FourierBasisSpec, SoftmaxPolicy};
use crate::quantum::{dejmps_distill, LinkParameters};

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        CheckReport {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// Distillation closed form vs. the density-matrix circuit on random
/// state pairs. Tolerance 1e-10 on coefficients and success probability.
pub fn check_distillation_circuit(pairs: usize, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    for _ in 0..pairs {
        let s1 = density::random_bds(&mut rng);
        let s2 = density::random_bds(&mut rng);
        let (closed, p_closed) = dejmps_distill(&s1, &s2);
        let (coeffs, p_circuit, offdiag) = density::distill_circuit(&s1, &s2);
        max_err = max_err.max((p_closed - p_circuit).abs()).max(offdiag);
        for (x, y) in closed.coefficients().iter().zip(coeffs) {
            max_err = max_err.max((x - y).abs());
        }
    }
    CheckReport::new(
        "dejmps-density-circuit",
        max_err < 1e-10,
        format!("max |closed - circuit| = {max_err:.3e} over {pairs} random pairs"),
    )
}

/// Log-probability gradient and full chain-rule utility gradient vs.
/// central finite differences on the enumerable toy MDP.
pub fn check_gradients(seed: u64) -> CheckReport {
    let basis = FourierBasis::new(FourierBasisSpec::new(1, 2), 1).unwrap();
    let mut policy = SoftmaxPolicy::new(basis, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in policy.params_mut().weights.iter_mut() {
        *w = 0.6 * (rand::Rng::random::<f64>(&mut rng) - 0.5);
    }
    let weights = policy.params().weights.clone();
    let step = 1e-5;

    // ln pi(consume) against finite differences.
    let log_prob = |w: &ndarray::Array2<f64>| {
        let p = SoftmaxPolicy::with_params(
            policy.basis().clone(),
            crate::policy::PolicyParameters { weights: w.clone() },
        );
        let phi = p.featurize(&toy::TOY_FEATURES).unwrap();
        p.action_probabilities(&phi, &toy::TOY_ACTIONS).unwrap()[1].ln()
    };
    let phi = policy.featurize(&toy::TOY_FEATURES).unwrap();
    let analytic = policy
        .log_prob_gradient(&phi, &toy::TOY_ACTIONS, Action::Consume)
        .unwrap();
    let numeric = fd::central_difference(log_prob, &weights, step);
    let log_err = fd::max_relative_error(&analytic, &numeric);

    // Full chain rule: d/dtheta u(J_F(theta), J_T(theta)) with exact
    // channel means and gradients.
    let utility = UtilityKind::Bb84Werner;
    let objective = |w: &ndarray::Array2<f64>| {
        let p = SoftmaxPolicy::with_params(
            policy.basis().clone(),
            crate::policy::PolicyParameters { weights: w.clone() },
        );
        utility.value(&toy::exact_channel_means(&p)).unwrap()
    };
    let exact_grads = toy::exact_channel_gradients(&policy);
    let means = toy::exact_channel_means(&policy);
    let (chain, _) = utility_gradient(&exact_grads, &means, utility).unwrap();
    let numeric = fd::central_difference(objective, &weights, step);
    let chain_err = fd::max_relative_error(&chain, &numeric);

    let worst = log_err.max(chain_err);
    CheckReport::new(
        "gradient-finite-differences",
        worst < 1e-4,
        format!("max relative error: log-prob {log_err:.3e}, chain rule {chain_err:.3e}"),
    )
}

/// Transition frequencies of every tabulated `(state, action)` group, for
/// all three environments.
pub fn check_transition_tables(samples: u64, seed: u64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    let link = LinkParameters::new(25.0, 0.9).unwrap();

    let env = LinkMdp::wn2m2(link).unwrap();
    for (i, (state, action)) in tables::two_memory_probe_groups(WernerPair)
        .into_iter()
        .enumerate()
    {
        let check = tables::check_group(
            &env,
            &state,
            action,
            tables::two_memory_rows,
            samples,
            seed.wrapping_add(i as u64),
        );
        out.push(CheckReport::new(
            &format!("table/{}", check.group),
            check.pass(),
            format!(
                "max z = {:.2}, unmatched = {}, row-sum err = {:.1e}",
                check.max_z, check.unmatched, check.row_sum_error
            ),
        ));
    }

    let env = LinkMdp::bn2m2(link).unwrap();
    for (i, (state, action)) in tables::two_memory_probe_groups(bds_probe_pair)
        .into_iter()
        .enumerate()
    {
        let check = tables::check_group(
            &env,
            &state,
            action,
            tables::two_memory_rows,
            samples,
            seed.wrapping_add(100 + i as u64),
        );
        out.push(CheckReport::new(
            &format!("table/{}", check.group),
            check.pass(),
            format!(
                "max z = {:.2}, unmatched = {}, row-sum err = {:.1e}",
                check.max_z, check.unmatched, check.row_sum_error
            ),
        ));
    }

    let env = LinkMdp::wn2m3(link).unwrap();
    for (i, (state, action)) in tables::three_memory_probe_groups().into_iter().enumerate() {
        let check = tables::check_group(
            &env,
            &state,
            action,
            tables::three_memory_rows,
            samples,
            seed.wrapping_add(200 + i as u64),
        );
        out.push(CheckReport::new(
            &format!("table/{}", check.group),
            check.pass(),
            format!(
                "max z = {:.2}, unmatched = {}, row-sum err = {:.1e}",
                check.max_z, check.unmatched, check.row_sum_error
            ),
        ));
    }
    out
}

/// A non-Werner Bell-diagonal probe pair with the given fidelity scale.
pub fn bds_probe_pair(f: f64) -> crate::env::BdsPair {
    let w = crate::quantum::WernerState::new(f).unwrap().to_bell_diagonal();
    let aged = crate::quantum::depolarize(&w, 2e-4, 0.1);
    let (out, _) = dejmps_distill(&aged, &w);
    crate::env::BdsPair(out)
}

/// Zero crossing of the BB84 Werner rate.
pub fn check_bb84_threshold() -> CheckReport {
    let f = closed_form::bb84_werner_zero_crossing();
    CheckReport::new(
        "bb84-zero-rate-threshold",
        (f - 0.835).abs() <= 0.002,
        format!("bisection root at F = {f:.6}"),
    )
}

/// Runs every oracle check. `quick` trims sample counts for interactive
/// use; the acceptance suite runs the full sizes.
pub fn run_all_checks(quick: bool) -> Vec<CheckReport> {
    let pairs = if quick { 200 } else { 1000 };
    let samples = if quick { 100_000 } else { 1_000_000 };
    let mut reports = vec![
        check_distillation_circuit(pairs, 0xD15),
        check_gradients(0x6AD),
        check_bb84_threshold(),
    ];
    reports.extend(check_transition_tables(samples, 0x7AB1E));
    reports
}
