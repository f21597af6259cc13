//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Tolerances and budgets are
//! pinned in the constants below.
//!
//! Budgets at a glance: the distillation-circuit check runs 1000 random
//! pairs (< 10 s); the transition-table check draws 1e6 samples per
//! `(state, action)` group (< 2 min); gradient checks are closed-form
//! (< 1 min); the closed-form evaluation check uses 10 trials of 50,000
//! episodes per length (< 2 min); the desk-scale learning check trains
//! 10 seeds at 50 iterations x 1000 episodes (< 15 min).

use entlink::baseline::{grid_search, GridSearchSpec, ThresholdPolicy};
use entlink::env::{Action, Environment, LinkMdp, MdpState, WernerPair};
use entlink::harness::{evaluate_policy, run_evaluation, run_training, EvalTarget};
use entlink::optim::{train, utility_gradient, TrainerConfig, UtilityKind};
use entlink::oracles::{checks, closed_form, fd, tables, toy};
use entlink::policy::{FourierBasis, FourierBasisSpec, GreedyPolicy, SoftmaxPolicy};
use entlink::quantum::LinkParameters;

fn pass(criterion: u32, name: &str, detail: &str) {
    println!("ACCEPTANCE {criterion} ({name}): PASS — {detail}");
}

/// 1. Distillation matches the independent 16x16 density-matrix circuit
///    on 1000 random Bell-diagonal pairs to 1e-10.
#[test]
fn criterion_1_distillation_circuit_equivalence() {
    let report = checks::check_distillation_circuit(1000, 0xACC1);
    assert!(report.pass, "{}", report.detail);
    pass(1, "dejmps oracle equivalence", &report.detail);
}

/// 2. For every (state, action) row group of all three transition
///    tables: closed-form probabilities sum to 1, and empirical
///    frequencies over 1e6 samples agree within 4 sigma.
#[test]
fn criterion_2_transition_table_fidelity() {
    // Row sums across several parameter points (p_gen varies with the
    // link length, the pending probability with the probe state).
    for length in [5.0, 25.0, 50.0] {
        let link = LinkParameters::new(length, 0.9).unwrap();
        let env = LinkMdp::wn2m2(link).unwrap();
        for (state, action) in tables::two_memory_probe_groups(WernerPair) {
            let rows = tables::two_memory_rows(&env, &state, action);
            let sum: f64 = rows.iter().map(|r| r.probability).sum();
            assert!((sum - 1.0).abs() <= 1e-12, "wn2m2 L={length}: {action}");
        }
        let envb = LinkMdp::bn2m2(link).unwrap();
        for (state, action) in tables::two_memory_probe_groups(checks::bds_probe_pair) {
            let rows = tables::two_memory_rows(&envb, &state, action);
            let sum: f64 = rows.iter().map(|r| r.probability).sum();
            assert!((sum - 1.0).abs() <= 1e-12, "bn2m2 L={length}: {action}");
        }
        let env3 = LinkMdp::wn2m3(link).unwrap();
        for (state, action) in tables::three_memory_probe_groups() {
            let rows = tables::three_memory_rows(&env3, &state, action);
            let sum: f64 = rows.iter().map(|r| r.probability).sum();
            assert!((sum - 1.0).abs() <= 1e-12, "wn2m3 L={length}: {action}");
        }
    }

    let reports = checks::check_transition_tables(1_000_000, 0xACC2);
    let groups = reports.len();
    let mut worst = 0.0f64;
    for report in reports {
        assert!(report.pass, "{}: {}", report.name, report.detail);
        if let Some(z) = report
            .detail
            .split("max z = ")
            .nth(1)
            .and_then(|s| s.split(',').next())
            .and_then(|s| s.parse::<f64>().ok())
        {
            worst = worst.max(z);
        }
    }
    pass(
        2,
        "transition-table fidelity",
        &format!("{groups} row groups at 1e6 samples, worst |z| = {worst:.2}"),
    );
}

/// 3. Log-probability gradient and the full chain-rule utility gradient
///    match central finite differences on the enumerable toy MDP to a
///    relative error below 1e-4.
#[test]
fn criterion_3_gradient_correctness() {
    let report = checks::check_gradients(0xACC3);
    assert!(report.pass, "{}", report.detail);

    // The chain also holds through the Monte Carlo estimator: estimated
    // gradients over a large batch stay within 4 standard-error bands of
    // the exact enumeration per channel (score-function CLT).
    let env = toy::ToyMdp;
    let basis = FourierBasis::new(FourierBasisSpec::new(1, 2), 1).unwrap();
    let mut policy = SoftmaxPolicy::new(basis, 2);
    policy.params_mut().weights[(0, 0)] = 0.3;
    policy.params_mut().weights[(1, 2)] = -0.2;
    let episodes = 100_000usize;
    let mut histories = Vec::with_capacity(episodes);
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACC3);
    for _ in 0..episodes {
        histories.push(entlink::env::run_episode(&env, &policy, &mut rng, 10).unwrap());
    }
    let estimate =
        entlink::optim::estimate_policy_gradients(&env, &histories, &policy, 1.0).unwrap();
    let exact = toy::exact_channel_gradients(&policy);
    let exact_means = toy::exact_channel_means(&policy);
    for (channel, (est, ex)) in estimate.gradients.iter().zip(&exact).enumerate() {
        // Conservative per-entry scale bound: |G| <= 2, |grad ln pi| <= 2 phi.
        let se = 4.0 / (episodes as f64).sqrt();
        for (a, b) in est.iter().zip(ex.iter()) {
            assert!(
                (a - b).abs() <= 4.0 * se,
                "channel {channel}: estimate {a} vs exact {b}"
            );
        }
    }
    // And the assembled utility gradient at the estimated means matches
    // finite differences of the exact objective within 1e-4 relative
    // error (checked exactly inside check_gradients; re-assert the full
    // estimator path end to end here with its Monte Carlo tolerance).
    let (chain, _) =
        utility_gradient(&estimate.gradients, &estimate.mean_returns, UtilityKind::Bb84Werner)
            .unwrap();
    let objective = |w: &ndarray::Array2<f64>| {
        let p = SoftmaxPolicy::with_params(
            policy.basis().clone(),
            entlink::policy::PolicyParameters { weights: w.clone() },
        );
        UtilityKind::Bb84Werner
            .value(&toy::exact_channel_means(&p))
            .unwrap()
    };
    let numeric = fd::central_difference(objective, &policy.params().weights.clone(), 1e-5);
    let err = fd::max_relative_error(&chain, &numeric);
    assert!(err < 0.05, "Monte Carlo chain gradient off by {err}");
    assert_eq!(exact_means.len(), 2);
    pass(3, "gradient correctness", &report.detail);
}

/// 4. CONSUME-ASAP on the two-memory Werner environment reproduces the
///    closed-form geometric-expectation utility at L in {5, 25, 50} km
///    within 3 Monte Carlo confidence half-widths.
#[test]
fn criterion_4_closed_form_evaluation_check() {
    let mut details = Vec::new();
    for (i, length) in [5.0, 25.0, 50.0].into_iter().enumerate() {
        let link = LinkParameters::new(length, 0.9).unwrap();
        let env = LinkMdp::wn2m2(link).unwrap();
        // f_consume = F0 consumes every fresh pair immediately.
        let asap = ThresholdPolicy::new(0.9, 0.87).unwrap();
        let report = evaluate_policy(
            &env,
            &asap,
            10,
            50_000,
            UtilityKind::Bb84Werner,
            0xACC4 + i as u64,
        )
        .unwrap();
        let expected = closed_form::consume_asap_expected_utility(&link);
        let tolerance = 3.0 * report.ci95_half_width;
        assert!(
            (report.mean_utility - expected).abs() <= tolerance,
            "L={length}: measured {} vs analytic {expected} (3 ci = {tolerance})",
            report.mean_utility
        );
        details.push(format!(
            "L={length}: {:.1} vs {:.1} (+/-{:.1})",
            report.mean_utility, expected, tolerance
        ));
    }
    pass(4, "closed-form evaluation check", &details.join("; "));
}

/// 5. Bisection on the Werner BB84 rate finds the zero crossing at
///    F = 0.835 +/- 0.002.
#[test]
fn criterion_5_bb84_zero_rate_threshold() {
    let f = closed_form::bb84_werner_zero_crossing();
    assert!((f - 0.835).abs() <= 0.002, "threshold {f}");
    pass(5, "bb84 zero-rate threshold", &format!("F* = {f:.6}"));
}

/// 6. Desk-scale learning sanity: training on the two-memory Werner
///    environment at L = 10 km, F0 = 0.9 with the standard
///    hyperparameters at scale 0.1 (1000 episodes x 50 iterations)
///    produces, in at least 8 of 10 seeds, a greedy policy that consumes
///    at (F0, 0, 1) and evaluates to at least 95% of the grid-search
///    baseline utility.
#[test]
fn criterion_6_learning_sanity_desk_scale() {
    let link = LinkParameters::new(10.0, 0.9).unwrap();
    let env = LinkMdp::wn2m2(link).unwrap();
    let utility = UtilityKind::Bb84Werner;

    // Grid-search baseline at scale 0.1 (2000 episodes per point), then
    // evaluate the winner on the scaled evaluation budget.
    let spec = GridSearchSpec::for_initial_fidelity(0.9, 2000);
    let (best, _) = grid_search(&env, &spec, utility, 0xACC6).unwrap();
    let baseline = evaluate_policy(&env, &best, 1, 25_000, utility, 0xACC6 + 1).unwrap();

    let probe = MdpState::with_pairs(&[WernerPair(0.9)], 1.0);
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let basis = FourierBasis::new(FourierBasisSpec::new(5, 20), env.feature_dim()).unwrap();
        let policy = SoftmaxPolicy::new(basis, env.num_actions());
        let config = TrainerConfig::new(1e-4, 1000, 50, seed);
        let outcome = train(&env, policy, utility, &config).unwrap();

        let phi = outcome
            .policy
            .featurize(&env.state_features(&probe))
            .unwrap();
        let admissible = env.admissible_actions(&probe).unwrap();
        let greedy = outcome.policy.greedy_action(&phi, &admissible).unwrap();

        let report = evaluate_policy(
            &env,
            &GreedyPolicy(&outcome.policy),
            1,
            25_000,
            utility,
            0xBEEF + seed,
        )
        .unwrap();
        let ratio = report.mean_utility / baseline.mean_utility;
        ratios.push(ratio);
        if greedy == Action::Consume && ratio >= 0.95 {
            wins += 1;
        }
    }
    assert!(wins >= 8, "only {wins}/10 seeds succeeded (ratios {ratios:?})");
    pass(
        6,
        "learning sanity (desk scale)",
        &format!("{wins}/10 seeds consume at (F0,0,1) and reach >= 0.95x baseline"),
    );
}

/// 7. Baseline conformance: the heuristic's branch coverage suite holds
///    (see baseline module tests for the per-branch cases; re-driven
///    here across random states), and the full grid search at F0 = 0.9
///    picks f_consume = 0.9 at 20,000 episodes per point.
#[test]
fn criterion_7_baseline_conformance() {
    // Drive every branch of the heuristic at least once.
    let policy = ThresholdPolicy::new(0.9, 0.8).unwrap();
    let mut hit_consume = false;
    let mut hit_discard = false;
    let mut hit_purify_12 = false;
    let mut hit_purify_13 = false;
    let mut hit_purify_23 = false;
    let mut hit_wait = false;
    use rand::Rng as _;
    use rand::SeedableRng as _;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xACC7);
    for _ in 0..20_000 {
        let n = rng.random_range(0..=3usize);
        let fids: Vec<f64> = (0..n).map(|_| rng.random_range(0.26..1.0)).collect();
        let p = if n >= 1 && n <= 2 && rng.random::<bool>() {
            0.6
        } else {
            1.0
        };
        match policy.action_for(&fids, p) {
            Action::Consume => hit_consume = true,
            Action::Discard => hit_discard = true,
            Action::Purify(0, 1) => hit_purify_12 = true,
            Action::Purify(0, 2) => hit_purify_13 = true,
            Action::Purify(1, 2) => hit_purify_23 = true,
            Action::Wait => hit_wait = true,
            other => panic!("unexpected action {other:?}"),
        }
    }
    assert!(
        hit_consume && hit_discard && hit_purify_12 && hit_purify_13 && hit_purify_23 && hit_wait,
        "missing branches: consume={hit_consume} discard={hit_discard} p12={hit_purify_12} p13={hit_purify_13} p23={hit_purify_23} wait={hit_wait}"
    );

    let link = LinkParameters::new(10.0, 0.9).unwrap();
    let env = LinkMdp::wn2m2(link).unwrap();
    let spec = GridSearchSpec::for_initial_fidelity(0.9, 20_000);
    let (best, table) = grid_search(&env, &spec, UtilityKind::Bb84Werner, 0xACC7).unwrap();
    assert_eq!(table.len(), 15);
    assert_eq!(best.f_consume, 0.9, "grid selected {best:?}");
    pass(
        7,
        "baseline conformance",
        &format!(
            "all branches covered; grid argmax at f_consume = {:.2}, f_discard = {:.2}",
            best.f_consume, best.f_discard
        ),
    );
}

/// 8. Determinism: repeated seeded runs of train and evaluate produce
///    bit-identical CSV outputs. The learning curve's wall-clock column
///    is the one sanctioned exception and is masked before comparison.
#[test]
fn criterion_8_determinism() {
    let base = std::env::temp_dir().join("entlink_acceptance_determinism");
    let _ = std::fs::remove_dir_all(&base);

    let config_text = |out: &std::path::Path| {
        format!(
            r#"
[experiment]
environment = "wn2m2"
utility = "bb84"
f0 = 0.9
link_lengths_km = [10.0]
seed = 1234
output_dir = "{}"

[trainer]
episodes_per_iteration = 200
iterations = 4

[evaluation]
trials = 3
episodes_per_trial = 2000
"#,
            out.display()
        )
    };

    let strip_wall_time = |csv: &str| -> String {
        csv.lines()
            .map(|line| {
                let mut cols: Vec<&str> = line.split(',').collect();
                cols.pop();
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };

    let mut curve_files = Vec::new();
    let mut policy_files = Vec::new();
    let mut eval_files = Vec::new();
    for run in 0..2 {
        let dir = base.join(format!("run{run}"));
        std::fs::create_dir_all(&dir).unwrap();
        let config =
            entlink::harness::config::ExperimentConfig::from_toml_str(&config_text(&dir))
                .unwrap();
        let artifacts = run_training(&config, 10.0).unwrap();
        curve_files.push(std::fs::read_to_string(&artifacts.curve_path).unwrap());
        policy_files.push(std::fs::read(&artifacts.policy_path).unwrap());
        let (_, eval_csv) = run_evaluation(
            &config,
            10.0,
            &EvalTarget::Thresholds {
                f_consume: 0.9,
                f_discard: 0.87,
            },
        )
        .unwrap();
        eval_files.push(std::fs::read(&eval_csv).unwrap());
    }
    assert_eq!(
        strip_wall_time(&curve_files[0]),
        strip_wall_time(&curve_files[1]),
        "learning curves diverged"
    );
    assert_eq!(policy_files[0], policy_files[1], "policy files diverged");
    assert_eq!(eval_files[0], eval_files[1], "evaluation CSVs diverged");
    pass(
        8,
        "determinism",
        "train and evaluate outputs are bit-identical across repeated seeded runs",
    );
}
