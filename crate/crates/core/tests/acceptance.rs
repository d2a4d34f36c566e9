//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them). Tolerances are pinned
//! in the constants below.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crossloss_core::blend::{blend_predictions, grid_search_weights, GridSearchConfig, WeightVector};
use crossloss_core::elicitation::{fit_loss_params, CleanedSamples, LossPoint};
use crossloss_core::loss::{component_loss, fellegi_loss, total_loss, LossParams, Observation, PredictionSet};
use crossloss_core::metrics::{average_estimated_variance, generate_noisy_predictions, mean_webster_loss, medape, table1_demo};

/// Tolerance for the printed loss cells of the demonstration table.
const CELL_TOLERANCE: f64 = 0.005;
/// Tolerance for the printed MAPE means.
const MAPE_MEAN_TOLERANCE: f64 = 0.005;
/// Tolerance for the printed mean losses (covers the table's own rounding).
const LOSS_MEAN_TOLERANCE: f64 = 0.05;
/// Relative tolerance for the constant regime of the fixed-relative-error law.
const BOUNDARY_RELATIVE_TOLERANCE: f64 = 1e-12;
/// Relative tolerance for noiseless coefficient recovery.
const EXACT_RECOVERY_TOLERANCE: f64 = 1e-9;
/// Band for the Monte Carlo variance estimate at factor 4.
const VARIANCE_BAND: (f64, f64) = (3.8, 4.2);
/// Weight distance allowed between the refined search and the closed form.
const REFINED_WEIGHT_TOLERANCE: f64 = 1e-4;
/// Relative tolerance for the hand-computed share-loss example.
const FELLEGI_EXAMPLE_TOLERANCE: f64 = 1e-12;

fn obs(id: &str, actual: f64, predicted: f64) -> Observation {
    Observation::new(id, actual, predicted).unwrap()
}

fn set(name: &str, actuals: &[f64], preds: &[f64]) -> PredictionSet {
    let ids: Vec<String> = (1..=actuals.len()).map(|i| i.to_string()).collect();
    PredictionSet::from_columns(name, &ids, actuals, preds).unwrap()
}

#[test]
fn criterion_1_table1_cell_reproduction() {
    let started = Instant::now();
    let demo = table1_demo();

    let printed_losses: [[f64; 6]; 3] = [
        [40.00, 20.00, 4.00, 2.00, 0.40, 0.04],
        [10.0, 5.0, 1.0, 0.5, 0.1, 1.0],
        [90.00, 14.45, 2.89, 1.45, 0.29, 0.04],
    ];
    let printed_apes: [[f64; 6]; 3] = [
        [2.0, 2.0, 2.0, 2.0, 2.0, 2.0],
        [1.0, 1.0, 1.0, 1.0, 1.0, 10.0],
        [3.0, 1.7, 1.7, 1.7, 1.7, 2.0],
    ];

    for (s, report) in demo.reports.iter().enumerate() {
        let losses = &report.per_observation["loss_mean"];
        let apes = &report.per_observation["mape"];
        for i in 0..6 {
            assert!(
                (losses[i] - printed_losses[s][i]).abs() <= CELL_TOLERANCE,
                "scenario {} area {}: loss {} vs printed {}",
                s + 1,
                i + 1,
                losses[i],
                printed_losses[s][i]
            );
            assert!(
                (apes[i] - printed_apes[s][i]).abs() <= 1e-9,
                "scenario {} area {}: APE {} vs printed {}",
                s + 1,
                i + 1,
                apes[i],
                printed_apes[s][i]
            );
        }
    }
    assert!(started.elapsed().as_millis() < 1000);
    println!("ACCEPTANCE PASS [1] all 18 loss cells within +-0.005 and all APE cells exact");
}

#[test]
fn criterion_2_table1_means() {
    let demo = table1_demo();
    let printed_mape = [2.0, 2.5, 1.97];
    let printed_loss_mean = [11.08, 2.9, 18.19];
    for (s, report) in demo.reports.iter().enumerate() {
        let mape = report.metric_values["mape"];
        let loss_mean = report.metric_values["loss_mean"];
        assert!(
            (mape - printed_mape[s]).abs() <= MAPE_MEAN_TOLERANCE,
            "scenario {}: MAPE {mape} vs printed {}",
            s + 1,
            printed_mape[s]
        );
        assert!(
            (loss_mean - printed_loss_mean[s]).abs() <= LOSS_MEAN_TOLERANCE,
            "scenario {}: mean loss {loss_mean} vs printed {}",
            s + 1,
            printed_loss_mean[s]
        );
    }
    println!("ACCEPTANCE PASS [2] MAPE means within +-0.005 and mean losses within +-0.05");
}

#[test]
fn criterion_3_ranking_reversal() {
    let demo = table1_demo();
    let mape: Vec<f64> = demo.reports.iter().map(|r| r.metric_values["mape"]).collect();
    let loss: Vec<f64> = demo
        .reports
        .iter()
        .map(|r| r.metric_values["loss_mean"])
        .collect();

    // MAPE best-to-worst: scenario 3, 1, 2
    assert!(mape[2] < mape[0] && mape[0] < mape[1], "MAPE order: {mape:?}");
    // mean loss best-to-worst: scenario 2, 1, 3 — exactly opposite
    assert!(loss[1] < loss[0] && loss[0] < loss[2], "loss order: {loss:?}");
    println!("ACCEPTANCE PASS [3] MAPE ranks S3<S1<S2 while the loss ranks S2<S1<S3");
}

#[test]
fn criterion_4_fixed_relative_error_law_and_assumptions() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // three regimes of loss-vs-actual at a fixed relative error
    for _ in 0..100 {
        let p = rng.random_range(0.2..3.0);
        let gap = rng.random_range(0.05..2.0);
        let rel = rng.random_range(1e-3..0.9);
        let a1 = rng.random_range(0.5..1e4);
        let a2 = a1 * rng.random_range(1.5..10.0);
        let at = |params: LossParams, a: f64| component_loss(&obs("x", a, a + rel * a), params);

        let rising = LossParams::new(p, gap - p).unwrap();
        assert!(at(rising, a2) > at(rising, a1), "p+q>0 must rise in A");

        let boundary = LossParams::new(p, -p).unwrap();
        let (lo, hi) = (at(boundary, a1), at(boundary, a2));
        assert!(
            (hi - lo).abs() <= BOUNDARY_RELATIVE_TOLERANCE * lo.abs().max(hi.abs()),
            "p+q=0 must be constant: {lo} vs {hi}"
        );

        let falling = LossParams::new(p, -p - gap).unwrap();
        assert!(at(falling, a2) < at(falling, a1), "p+q<0 must fall in A");
    }

    // assumptions 1-3 over random valid inputs
    for _ in 0..100 {
        let p = rng.random_range(0.2..3.0);
        let q = rng.random_range(-3.0..-0.05);
        let params = LossParams::new(p, q).unwrap();
        let a = rng.random_range(1.0..1e5);
        let eps = a * rng.random_range(1e-4..0.9);

        let over = component_loss(&obs("o", a, a + eps), params);
        let under = component_loss(&obs("u", a, a - eps), params);
        assert!(
            (over - under).abs() <= 1e-12 * over.max(under),
            "symmetry: {over} vs {under}"
        );

        let bigger = component_loss(&obs("b", a, a + eps * 1.5), params);
        assert!(bigger > over, "monotone in the error");

        let larger_a = a * 2.0;
        let same_eps = component_loss(&obs("c", larger_a, larger_a + eps), params);
        assert!(same_eps < over, "q<0 must fall in A at fixed error");
    }
    println!("ACCEPTANCE PASS [4] fixed-relative-error law in all three regimes plus assumptions 1-3");
}

#[test]
fn criterion_5_regression_recovery() {
    let started = Instant::now();

    // noiseless log-linear data is recovered to machine precision
    let mut points = Vec::new();
    for &eps in &[10.0f64, 20.0, 40.0, 80.0] {
        for &actual in &[100.0f64, 1000.0, 10_000.0] {
            points.push(LossPoint {
                epsilon: eps,
                actual,
                loss: eps.powi(2) / actual,
            });
        }
    }
    let cleaned = CleanedSamples {
        n_used: points.len(),
        points,
        n_dropped_zero_u: 0,
        n_floored: 0,
        n_dropped_saturated: 0,
    };
    let fit = fit_loss_params(&cleaned).unwrap();
    assert!((fit.p_hat - 2.0).abs() <= EXACT_RECOVERY_TOLERANCE * 2.0);
    assert!((fit.q_hat + 1.0).abs() <= EXACT_RECOVERY_TOLERANCE);
    assert!(fit.intercept.abs() <= EXACT_RECOVERY_TOLERANCE);

    // noisy synthetic data: both exponents within 3 reported standard
    // errors in at least 99 of 100 seeded replications
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut points = Vec::with_capacity(200);
        for _ in 0..200 {
            let eps = 10.0 * rng.random_range(0.0..3.0f64).exp();
            let actual = 100.0 * rng.random_range(0.0..5.0f64).exp();
            let log_loss = 5.0f64.ln() + 1.5 * eps.ln() - 0.8 * actual.ln() + rng.sample(noise);
            points.push(LossPoint {
                epsilon: eps,
                actual,
                loss: log_loss.exp(),
            });
        }
        let cleaned = CleanedSamples {
            n_used: points.len(),
            points,
            n_dropped_zero_u: 0,
            n_floored: 0,
            n_dropped_saturated: 0,
        };
        let fit = fit_loss_params(&cleaned).unwrap();
        if (fit.p_hat - 1.5).abs() <= 3.0 * fit.standard_errors.se_p
            && (fit.q_hat + 0.8).abs() <= 3.0 * fit.standard_errors.se_q
        {
            hits += 1;
        }
    }
    assert!(hits >= 99, "only {hits}/100 replications within 3 standard errors");
    assert!(started.elapsed().as_secs_f64() < 1.0, "criterion 5 must run in < 1 s");
    println!("ACCEPTANCE PASS [5] exact recovery at 1e-9 and {hits}/100 noisy replications in band");
}

#[test]
fn criterion_6_variance_interpretation() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let actuals: Vec<f64> = (0..100_000).map(|_| rng.random_range(1e3..1e5)).collect();
    let noisy = generate_noisy_predictions(&actuals, 4.0, 64).unwrap();
    let v = average_estimated_variance(&noisy);
    assert!(
        v >= VARIANCE_BAND.0 && v <= VARIANCE_BAND.1,
        "average estimated variance {v} outside [{}, {}]",
        VARIANCE_BAND.0,
        VARIANCE_BAND.1
    );
    assert!(started.elapsed().as_secs_f64() < 5.0, "criterion 6 must run in < 5 s");
    println!("ACCEPTANCE PASS [6] average estimated variance {v:.4} inside [3.8, 4.2] at n=100000");
}

/// Minimizer of the two-set Webster quadratic, clamped to [0, 1].
fn closed_form_w1(a: &[f64], p1: &[f64], p2: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        let d = p1[i] - p2[i];
        num += (a[i] - p2[i]) * d / a[i];
        den += d * d / a[i];
    }
    (num / den).clamp(0.0, 1.0)
}

#[test]
fn criterion_7_blend_optimality() {
    let started = Instant::now();
    let params = LossParams::webster();

    // refined search vs the closed form on 50 seeded instances
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(5..20usize);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..1e5)).collect();
        let p1: Vec<f64> = a
            .iter()
            .map(|x| x * (1.0 + rng.random_range(-0.3..0.3)))
            .collect();
        let p2: Vec<f64> = a
            .iter()
            .map(|x| x * (1.0 + rng.random_range(-0.3..0.3)))
            .collect();
        let w_star = closed_form_w1(&a, &p1, &p2);

        let result = grid_search_weights(
            &[set("one", &a, &p1), set("two", &a, &p2)],
            params,
            &GridSearchConfig {
                resolution: 0.01,
                refine: true,
                ..GridSearchConfig::default()
            },
            None,
        )
        .unwrap();
        let w1 = result.best_weights.weights()[0];
        assert!(
            (w1 - w_star).abs() <= REFINED_WEIGHT_TOLERANCE,
            "seed {seed}: search {w1} vs closed form {w_star}"
        );
    }

    // unrefined 0.01 grid vs a 10^4-point brute-force sweep
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 12;
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..1e5)).collect();
    let p1: Vec<f64> = a
        .iter()
        .map(|x| x * (1.0 + rng.random_range(-0.3..0.3)))
        .collect();
    let p2: Vec<f64> = a
        .iter()
        .map(|x| x * (1.0 + rng.random_range(-0.3..0.3)))
        .collect();
    let sets = [set("one", &a, &p1), set("two", &a, &p2)];
    let coarse = grid_search_weights(
        &sets,
        params,
        &GridSearchConfig {
            resolution: 0.01,
            ..GridSearchConfig::default()
        },
        None,
    )
    .unwrap();
    let mut brute_w = 0.0;
    let mut brute_loss = f64::INFINITY;
    for i in 0..=10_000 {
        let w1 = i as f64 / 10_000.0;
        let w = WeightVector::new(vec![w1, 1.0 - w1]).unwrap();
        let loss = total_loss(&blend_predictions(&sets, &w).unwrap(), params);
        if loss < brute_loss {
            brute_loss = loss;
            brute_w = w1;
        }
    }
    assert!(
        (coarse.best_weights.weights()[0] - brute_w).abs() <= 0.01 + 1e-12,
        "coarse {} vs brute force {}",
        coarse.best_weights.weights()[0],
        brute_w
    );

    assert!(started.elapsed().as_secs_f64() < 5.0, "criterion 7 must run in < 5 s");
    println!("ACCEPTANCE PASS [7] refined search within 1e-4 of the closed form on 50 instances");
}

#[test]
fn criterion_8_share_loss_properties() {
    // zero exactly when shares match
    let a = [100.0, 300.0, 600.0];
    let doubled: Vec<f64> = a.iter().map(|x| x * 2.0).collect();
    let proportional = set("prop", &a, &doubled);
    assert_eq!(fellegi_loss(&proportional).unwrap(), 0.0);

    let skewed = set("skew", &a, &[110.0, 290.0, 600.0]);
    assert!(fellegi_loss(&skewed).unwrap() > 0.0);

    // invariant under uniform scaling of the predictions
    let p = [110.0, 280.0, 640.0];
    let scaled: Vec<f64> = p.iter().map(|x| x * 3.7).collect();
    let l1 = fellegi_loss(&set("base", &a, &p)).unwrap();
    let l2 = fellegi_loss(&set("scaled", &a, &scaled)).unwrap();
    assert!((l1 - l2).abs() <= 1e-12 * l1, "{l1} vs {l2}");

    // hand-computed two-area value
    let example = set("two", &[100.0, 300.0], &[110.0, 290.0]);
    let loss = fellegi_loss(&example).unwrap();
    assert!(
        (loss - 3.125e-6).abs() <= FELLEGI_EXAMPLE_TOLERANCE * 3.125e-6,
        "got {loss}"
    );
    println!("ACCEPTANCE PASS [8] share loss: zero iff shares match, scale invariant, example exact");
}

#[test]
fn criterion_9_quantile_insensitivity() {
    // scenario 2 of the demonstration table, then the largest APE times 10
    let demo = table1_demo();
    let scenario2 = &demo.table.prediction_sets()[1];
    let med_before = medape(scenario2);
    let loss_before = mean_webster_loss(scenario2);

    let exaggerated: Vec<Observation> = scenario2
        .observations()
        .iter()
        .map(|o| {
            if o.id() == "6" {
                // APE 10 -> APE 100 on the 100-person area
                obs(o.id(), o.actual(), o.actual() + 10.0 * o.abs_error())
            } else {
                o.clone()
            }
        })
        .collect();
    let exaggerated = PredictionSet::new("exaggerated", exaggerated).unwrap();

    assert_eq!(medape(&exaggerated), med_before, "MedAPE must not move");
    let loss_after = mean_webster_loss(&exaggerated);
    assert!(
        loss_after > loss_before,
        "mean loss must register the blowup: {loss_before} vs {loss_after}"
    );
    println!("ACCEPTANCE PASS [9] MedAPE blind to a tenfold largest-APE blowup that the loss registers");
}
