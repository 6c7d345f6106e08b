//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured quantities. Every tolerance is pinned here.
//!
//! The synthetic benchmarks share a linear ground truth with a ridge
//! learner in the zoo (well-specified), a flat mean learner and a weak
//! boosted learner, so the selection problem has a known best answer. The
//! oracle-trend benchmark shrinks the regression span relative to the
//! noise so that selection is genuinely ambiguous at small city counts and
//! sharpens as the panel widens.

use std::time::{Duration, Instant};

use osassl_core::features::{
    aggregate_swi, cdf_probabilities, compound_covariates, fit_quarter_cdfs, quarter_means,
    GridSwi, HouseRecord, OverlapWeights,
};
use osassl_core::importance::{permutation_test, score_continuous};
use osassl_core::learners::{combine_average, combine_median, BaseLearner};
use osassl_core::panel::{CityId, Observation, Panel, PanelSlice, TimeIndex};
use osassl_core::superlearner::{
    binomial, epsilon_net, run_schedule, AlgorithmSpec, PenaltyVariant, ScheduleConfig,
    ScheduleOutput, TruthModel,
};
use osassl_core::synthgen::{
    generate, CovariateSpec, DeclarationModel, GeneratorSpec, NoiseModel, NoiseSpec, ThetaFamily,
    Topology,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

// ---------------------------------------------------------------------
// shared benchmark material
// ---------------------------------------------------------------------

fn standard_zoo() -> Vec<BaseLearner> {
    vec![
        BaseLearner::mean("mean"),
        BaseLearner::ridge("ridge", 1.0).unwrap(),
        BaseLearner::boosted_linear("boost", 10, 0.5).unwrap(),
    ]
}

fn standard_spec(
    n_cities: usize,
    rows: usize,
    cols: usize,
    n_slices: usize,
    seed: u64,
) -> GeneratorSpec {
    GeneratorSpec {
        n_cities,
        n_slices,
        topology: Topology::Lattice { rows, cols },
        theta: ThetaFamily::Linear,
        declaration: DeclarationModel {
            base: 0.35,
            slope: 0.5,
        },
        noise: NoiseSpec {
            model: NoiseModel::Constant,
            fraction: 0.5,
            edge_correlation: 0.3,
        },
        seed,
        covariates: CovariateSpec::default(),
        theta_span: 1.0,
        cost_bound: None,
    }
}

fn overarching_config(stages: (usize, usize, usize)) -> ScheduleConfig {
    ScheduleConfig {
        stages,
        lambda: 0.05,
        epsilon: 0.1,
        penalty_variant: PenaltyVariant::Literal,
        algorithms: vec![
            AlgorithmSpec::DiscreteOverLearners,
            AlgorithmSpec::NetOverLearners { epsilon: 0.25 },
            AlgorithmSpec::Average,
            AlgorithmSpec::Median,
            AlgorithmSpec::RidgeStack { lambda: 1.0 },
        ],
    }
}

/// Runs a schedule and applies the run-level invariants shared by the
/// whole suite: exact net dominance at every evaluation step, exact zeros
/// on every non-declared prediction, and argmin invariance of the literal
/// penalty. Returns the output plus the number of masked predictions
/// checked.
fn run_checked(
    panel: &Panel,
    zoo: &[BaseLearner],
    config: &ScheduleConfig,
    truth: Option<&dyn TruthModel>,
) -> (ScheduleOutput, usize) {
    let out = run_schedule(panel, zoo, config, truth).expect("schedule run");

    // criterion 4 support: continuous criterion <= discrete criterion
    for record in &out.dominance {
        assert!(
            record.continuous_criterion <= record.discrete_criterion,
            "net dominance violated at {:?}: {} > {}",
            record.time,
            record.continuous_criterion,
            record.discrete_criterion
        );
    }

    // criterion 8 support: masked predictions are exactly zero
    let mut masked = 0usize;
    for record in &out.slice_records {
        for stream in &record.preds {
            for (pred, declared) in stream.iter().zip(&record.declared) {
                if !declared {
                    assert_eq!(*pred, 0.0, "masked algorithm prediction nonzero");
                    masked += 1;
                }
            }
        }
    }
    for row in &out.report.rows {
        let record = out
            .slice_records
            .iter()
            .find(|r| r.time == row.time)
            .expect("record for evaluation row");
        for (city, declared) in record.declared.iter().enumerate() {
            if !declared {
                assert_eq!(row.city_predictions[city], 0.0);
                assert_eq!(row.city_predictions_continuous[city], 0.0);
                masked += 2;
            }
        }
    }

    // criterion 6 support: the literal (stream-constant) penalty never
    // changes the argmin at any committed time
    if config.penalty_variant == PenaltyVariant::Literal {
        let ledger = &out.algorithm_ledger;
        for t in 1..=ledger.updates() {
            let by_penalized = ledger.select(t).unwrap();
            let risks: Vec<f64> = (0..ledger.n_streams())
                .map(|j| ledger.empirical_risk(j, t).unwrap())
                .collect();
            let mut by_empirical = 0;
            for (j, r) in risks.iter().enumerate() {
                if *r < risks[by_empirical] {
                    by_empirical = j;
                }
            }
            assert_eq!(
                by_penalized, by_empirical,
                "literal penalty changed the selection at t={t}"
            );
        }
    }

    (out, masked)
}

fn assert_within(elapsed: Duration, budget: Duration, label: &str) {
    assert!(
        elapsed <= budget,
        "{label}: runtime {elapsed:?} exceeded budget {budget:?}"
    );
}

// ---------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------

/// Criterion 1: incremental cumulative risks equal the double-loop
/// definition for every algorithm and time, at 1e-12 relative tolerance,
/// over 20 seeded runs (50 cities, 10 slices, J = 5). Budget 30 s.
#[test]
fn criterion_01_risk_oracle_equivalence() {
    let start = Instant::now();
    let zoo = standard_zoo();
    let config = overarching_config((2, 2, 2));
    let mut checked = 0usize;
    for seed in 0..20_u64 {
        let (panel, _) = generate(&standard_spec(50, 10, 5, 10, seed)).unwrap();
        let (out, _) = run_checked(&panel, &zoo, &config, None);
        let ledger = &out.algorithm_ledger;
        let n_cities = panel.n_cities() as f64;
        for t in 1..=ledger.updates() {
            for j in 0..ledger.n_streams() {
                // Eq-style double loop over the cached one-step-ahead
                // predictions, independent of the incremental sums.
                let mut sum = 0.0;
                for record in &out.slice_records[..t] {
                    for (pred, actual) in record.preds[j].iter().zip(&record.actuals) {
                        let r = actual - pred;
                        sum += r * r;
                    }
                }
                let oracle = sum / (t as f64 * n_cities);
                let incremental = ledger.empirical_risk(j, t).unwrap();
                let rel = (incremental - oracle).abs() / oracle.abs().max(1e-300);
                assert!(rel <= 1e-12, "seed {seed}, j={j}, t={t}: rel {rel:e}");
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert_within(elapsed, Duration::from_secs(30), "criterion 1");
    println!(
        "acceptance criterion 1: PASS (risk-oracle equivalence on {checked} (j,t) pairs, {elapsed:?})"
    );
}

/// Criterion 2: with a linear truth and ridge in the zoo, the discrete
/// overarching selector picks the well-specified algorithm in > 90% of
/// the final third of evaluation steps across 50 seeds (500 cities,
/// 20 slices). Budget 5 min.
#[test]
fn criterion_02_selection_consistency() {
    let start = Instant::now();
    let zoo = standard_zoo();
    let ridge_index = 1;
    let config = ScheduleConfig {
        stages: (3, 4, 3),
        lambda: 0.05,
        epsilon: 0.1,
        penalty_variant: PenaltyVariant::Literal,
        algorithms: vec![
            AlgorithmSpec::Single { learner: 0 },
            AlgorithmSpec::Single { learner: 1 },
            AlgorithmSpec::Single { learner: 2 },
        ],
    };
    let mut hits = 0usize;
    let mut total = 0usize;
    let mut masked_total = 0usize;
    for seed in 0..50_u64 {
        let (panel, _) = generate(&standard_spec(500, 25, 20, 20, seed)).unwrap();
        let (out, masked) = run_checked(&panel, &zoo, &config, None);
        masked_total += masked;
        let n_eval = out.report.rows.len();
        assert_eq!(n_eval, 10);
        let third = n_eval.div_ceil(3);
        for row in &out.report.rows[n_eval - third..] {
            total += 1;
            if row.selected == ridge_index {
                hits += 1;
            }
        }
    }
    let frequency = hits as f64 / total as f64;
    assert!(
        frequency > 0.9,
        "selection frequency {frequency} not above 0.9"
    );
    let elapsed = start.elapsed();
    assert_within(elapsed, Duration::from_secs(300), "criterion 2");
    println!(
        "acceptance criterion 2: PASS (well-specified selected {hits}/{total} = {frequency:.3}, \
         {masked_total} masked predictions checked, {elapsed:?})"
    );
}

/// Criterion 3: with T = 15 and a 4-neighbor lattice fixed, the
/// Monte-Carlo mean excess gap (eps = 0.1, averaged over the evaluation
/// steps) is nonincreasing across city counts 100, 500, 2000 and at 2000
/// is at most 2% of the noise variance. Budget 15 min.
#[test]
fn criterion_03_oracle_inequality_trend() {
    let start = Instant::now();
    let zoo = vec![
        BaseLearner::mean("mean"),
        BaseLearner::ridge("ridge", 1.0).unwrap(),
        BaseLearner::boosted_linear("boost", 3, 0.4).unwrap(),
    ];
    let config = ScheduleConfig {
        stages: (3, 3, 3),
        lambda: 0.05,
        epsilon: 0.1,
        penalty_variant: PenaltyVariant::Literal,
        algorithms: vec![
            AlgorithmSpec::Single { learner: 0 },
            AlgorithmSpec::Single { learner: 1 },
            AlgorithmSpec::Single { learner: 2 },
            AlgorithmSpec::Average,
        ],
    };
    let n_seeds = 50_u64;
    let mut mean_gaps = Vec::new();
    let mut noise_at_2000 = 0.0;
    for (n_cities, rows, cols) in [(100, 10, 10), (500, 25, 20), (2000, 50, 40)] {
        let mut gap_sum = 0.0;
        let mut noise_sum = 0.0;
        for seed in 0..n_seeds {
            let spec = GeneratorSpec {
                n_cities,
                n_slices: 15,
                topology: Topology::Lattice { rows, cols },
                theta: ThetaFamily::Linear,
                declaration: DeclarationModel {
                    base: 0.5,
                    slope: 0.3,
                },
                noise: NoiseSpec {
                    model: NoiseModel::Constant,
                    fraction: 0.9,
                    edge_correlation: 0.3,
                },
                seed,
                covariates: CovariateSpec::default(),
                theta_span: 0.1,
                cost_bound: Some(1.0),
            };
            let (panel, truth) = generate(&spec).unwrap();
            let (out, _) = run_checked(&panel, &zoo, &config, Some(&truth));
            let probe = out.probe.as_ref().unwrap();
            let updates = probe.updates();
            let n_eval = out.report.rows.len();
            // average the gap over the evaluation-phase selection times
            let mut per_seed = 0.0;
            for t in (updates - n_eval + 1)..=updates {
                per_seed += probe.excess_gap(t, 0.1).unwrap().gap;
            }
            gap_sum += per_seed / n_eval as f64;
            noise_sum += probe.truth_risk(updates).unwrap();
        }
        mean_gaps.push(gap_sum / n_seeds as f64);
        if n_cities == 2000 {
            noise_at_2000 = noise_sum / n_seeds as f64;
        }
    }
    assert!(
        mean_gaps[0] >= mean_gaps[1] && mean_gaps[1] >= mean_gaps[2],
        "mean gaps not nonincreasing: {mean_gaps:?}"
    );
    assert!(
        mean_gaps[2] <= 0.02 * noise_at_2000,
        "gap at 2000 cities ({}) above 2% of noise variance ({})",
        mean_gaps[2],
        noise_at_2000
    );
    let elapsed = start.elapsed();
    assert_within(elapsed, Duration::from_secs(900), "criterion 3");
    println!(
        "acceptance criterion 3: PASS (mean gaps {:?} nonincreasing, gap/noise at 2000 = {:.2e}, {elapsed:?})",
        mean_gaps,
        mean_gaps[2] / noise_at_2000
    );
}

/// Criterion 4: the continuous selection's penalized criterion never
/// exceeds the discrete selection's, at every evaluation step of every
/// run (exact inequality; the run helper asserts this for every schedule
/// run in the suite, this test reports a dedicated batch).
#[test]
fn criterion_04_net_dominance() {
    let zoo = standard_zoo();
    let config = overarching_config((2, 2, 2));
    let mut steps = 0usize;
    for seed in 0..20_u64 {
        let (panel, _) = generate(&standard_spec(50, 10, 5, 12, seed)).unwrap();
        let (out, _) = run_checked(&panel, &zoo, &config, None);
        steps += out.dominance.len();
        for record in &out.dominance {
            assert!(record.continuous_criterion <= record.discrete_criterion);
        }
    }
    assert!(steps > 0);
    println!(
        "acceptance criterion 4: PASS (net dominance exact on {steps} evaluation steps, zero violations)"
    );
}

/// Criterion 5: epsilon-net cardinality equals C(m + J - 1, J - 1) for
/// J in 1..=5 and m = ceil(1/eps) in 1..=8, against exhaustive
/// enumeration. Budget 1 s.
#[test]
fn criterion_05_epsilon_net_cardinality() {
    let start = Instant::now();

    fn enumerate_compositions(
        steps: usize,
        parts: usize,
        out: &mut Vec<Vec<usize>>,
        prefix: &mut Vec<usize>,
    ) {
        if parts == 1 {
            prefix.push(steps);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for take in 0..=steps {
            prefix.push(take);
            enumerate_compositions(steps - take, parts - 1, out, prefix);
            prefix.pop();
        }
    }

    let mut cases = 0usize;
    for j in 1..=5_usize {
        for m in 1..=8_usize {
            let eps = 1.0 / m as f64;
            let net = epsilon_net(j, eps).unwrap();
            let expected = binomial(m + j - 1, j - 1);
            assert_eq!(net.len() as u128, expected, "J={j}, m={m}");

            // exhaustive composition oracle: every net point appears
            let mut oracle = Vec::new();
            enumerate_compositions(m, j, &mut oracle, &mut Vec::new());
            assert_eq!(oracle.len() as u128, expected);
            for counts in &oracle {
                let weights: Vec<f64> = counts.iter().map(|c| *c as f64 / m as f64).collect();
                assert!(
                    net.iter().any(|w| w.as_slice() == weights.as_slice()),
                    "missing composition {counts:?} for J={j}, m={m}"
                );
            }
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    assert_within(elapsed, Duration::from_secs(1), "criterion 5");
    println!("acceptance criterion 5: PASS ({cases} (J, m) cases, {elapsed:?})");
}

/// Criterion 6: with lambda = 0 the penalized criterion equals the
/// cumulative risk exactly (bitwise), and the literal j-constant penalty
/// never changes the selection (checked per run by the helper; verified
/// here on a dedicated batch).
#[test]
fn criterion_06_penalized_criterion_algebra() {
    let zoo = standard_zoo();

    // lambda = 0: bitwise equality of criterion and risk
    let mut zero_config = overarching_config((2, 2, 2));
    zero_config.lambda = 0.0;
    let mut pairs = 0usize;
    for seed in 0..5_u64 {
        let (panel, _) = generate(&standard_spec(50, 10, 5, 10, seed)).unwrap();
        let (out, _) = run_checked(&panel, &zoo, &zero_config, None);
        let ledger = &out.algorithm_ledger;
        for t in 1..=ledger.updates() {
            for j in 0..ledger.n_streams() {
                assert_eq!(
                    ledger.penalized_risk(j, t).unwrap().to_bits(),
                    ledger.empirical_risk(j, t).unwrap().to_bits(),
                    "lambda=0 criterion differs from risk at j={j}, t={t}"
                );
                pairs += 1;
            }
        }
    }

    // literal penalty: argmin invariance across a penalized batch
    let config = overarching_config((2, 2, 2));
    let mut argmin_checks = 0usize;
    for seed in 0..5_u64 {
        let (panel, _) = generate(&standard_spec(50, 10, 5, 12, seed)).unwrap();
        let (out, _) = run_checked(&panel, &zoo, &config, None);
        argmin_checks += out.algorithm_ledger.updates();
    }
    println!(
        "acceptance criterion 6: PASS (lambda-0 equality on {pairs} pairs, argmin invariance on {argmin_checks} times)"
    );
}

/// Criterion 7: replacing the declared costs of slice t with the cost
/// bound leaves every prediction at times <= t bitwise unchanged, on 5
/// seeded runs. (Non-declared costs are pinned to zero by the data model,
/// so the perturbation raises every cost that can legally move.)
#[test]
fn criterion_07_leakage() {
    let zoo = standard_zoo();
    let config = overarching_config((2, 2, 2));
    let perturb_time = TimeIndex(9);
    let mut compared = 0usize;
    for seed in 0..5_u64 {
        let (panel, _) = generate(&standard_spec(50, 10, 5, 12, seed)).unwrap();
        let bound = panel.cost_bound();
        let perturbed_slices: Vec<PanelSlice> = panel
            .slices()
            .iter()
            .map(|slice| PanelSlice {
                time: slice.time,
                observations: slice
                    .observations
                    .iter()
                    .map(|o| {
                        let y = if slice.time == perturb_time && o.declared {
                            bound
                        } else {
                            o.y
                        };
                        Observation::new(
                            o.city,
                            o.time,
                            o.x.clone(),
                            o.z.clone(),
                            y,
                            o.declared,
                            panel.schema(),
                        )
                        .unwrap()
                    })
                    .collect(),
            })
            .collect();
        let perturbed =
            Panel::from_slices(panel.schema().clone(), perturbed_slices, Some(bound)).unwrap();

        let (base_out, _) = run_checked(&panel, &zoo, &config, None);
        let (pert_out, _) = run_checked(&perturbed, &zoo, &config, None);

        for (a, b) in base_out
            .base_records
            .iter()
            .zip(&pert_out.base_records)
            .filter(|(a, _)| a.time <= perturb_time)
        {
            assert_eq!(a.time, b.time);
            for (sa, sb) in a.preds.iter().zip(&b.preds) {
                for (pa, pb) in sa.iter().zip(sb) {
                    assert_eq!(pa.to_bits(), pb.to_bits(), "base leakage at {:?}", a.time);
                    compared += 1;
                }
            }
        }
        for (a, b) in base_out
            .slice_records
            .iter()
            .zip(&pert_out.slice_records)
            .filter(|(a, _)| a.time <= perturb_time)
        {
            for (sa, sb) in a.preds.iter().zip(&b.preds) {
                for (pa, pb) in sa.iter().zip(sb) {
                    assert_eq!(
                        pa.to_bits(),
                        pb.to_bits(),
                        "algorithm leakage at {:?}",
                        a.time
                    );
                    compared += 1;
                }
            }
        }
        for (a, b) in base_out
            .report
            .rows
            .iter()
            .zip(&pert_out.report.rows)
            .filter(|(a, _)| a.time <= perturb_time)
        {
            for (pa, pb) in a.city_predictions.iter().zip(&b.city_predictions) {
                assert_eq!(pa.to_bits(), pb.to_bits());
                compared += 1;
            }
            for (pa, pb) in a
                .city_predictions_continuous
                .iter()
                .zip(&b.city_predictions_continuous)
            {
                assert_eq!(pa.to_bits(), pb.to_bits());
                compared += 1;
            }
        }
    }
    println!("acceptance criterion 7: PASS (leakage test, {compared} predictions bitwise equal)");
}

/// Criterion 8: every prediction for a non-declared city is exactly 0,
/// fuzzed over at least 1e5 predictions across predictor kinds and
/// combiners, plus the schedule-level scans performed by every run in
/// this suite.
#[test]
fn criterion_08_mask_invariant() {
    let (panel, _) = generate(&standard_spec(50, 10, 5, 8, 424_242)).unwrap();
    let zoo = vec![
        BaseLearner::mean("mean"),
        BaseLearner::ridge("ridge", 1.0).unwrap(),
        BaseLearner::boosted_linear("boost", 5, 0.7).unwrap(),
        BaseLearner::knn_ks(
            "knn",
            3,
            vec![
                vec!["z0".into(), "z1".into()],
                vec!["z2".into(), "z3".into()],
            ],
            vec![0.5, 0.5],
        )
        .unwrap(),
    ];
    let mut predictors: Vec<_> = zoo.iter().map(|l| l.fit(&panel).unwrap()).collect();
    predictors.push(combine_average(predictors.clone()).unwrap());
    predictors.push(combine_median(predictors[..4].to_vec()).unwrap());

    let schema = panel.schema().clone();
    let mut rng = ChaCha12Rng::seed_from_u64(8_888);
    let mut checked = 0usize;
    while checked < 100_000 {
        let x = vec![
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
            (rng.random::<f64>() * 3.0).floor().min(2.0),
        ];
        let z: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let obs = Observation::new(
            CityId(rng.random::<u32>() % 1000),
            TimeIndex(1),
            x,
            z,
            0.0,
            false,
            &schema,
        )
        .unwrap();
        for predictor in &predictors {
            assert_eq!(predictor.predict(&obs), 0.0, "mask violated");
            checked += 1;
        }
    }

    // plus one schedule run scanned by the shared helper
    let config = overarching_config((2, 2, 2));
    let (_, masked) = run_checked(&panel, &standard_zoo(), &config, None);
    println!(
        "acceptance criterion 8: PASS ({checked} fuzzed + {masked} schedule-level masked predictions, all exactly 0)"
    );
}

/// Criterion 9: permutation p-values are calibrated under independence
/// (fraction of p <= 0.05 within [0.02, 0.09] over 200 replicates) and the
/// observed statistic exceeds the maximum of 10,000 permuted statistics
/// under a strong monotone association. Budget 3 min.
#[test]
fn criterion_09_importance_calibration() {
    let start = Instant::now();

    // realistic predictions: pooled evaluation-window meta predictions
    let zoo = standard_zoo();
    let config = overarching_config((2, 2, 2));
    let (panel, _) = generate(&standard_spec(100, 10, 10, 12, 31_415)).unwrap();
    let (out, _) = run_checked(&panel, &zoo, &config, None);
    let predictions: Vec<f64> = out
        .report
        .rows
        .iter()
        .flat_map(|row| row.city_predictions.iter().copied())
        .take(500)
        .collect();
    assert!(predictions.len() >= 500);

    // null calibration: independent injected covariate
    let n_replicates = 200;
    let mut low_p = 0usize;
    for replicate in 0..n_replicates {
        let mut rng = ChaCha12Rng::seed_from_u64(1_000_000 + replicate as u64);
        let covariate: Vec<f64> = (0..predictions.len()).map(|_| rng.random()).collect();
        let score = score_continuous(
            "injected",
            "probe",
            &predictions,
            &covariate,
            999,
            77_000 + replicate as u64,
        )
        .unwrap();
        if score.p_value <= 0.05 {
            low_p += 1;
        }
    }
    let fraction = low_p as f64 / n_replicates as f64;
    assert!(
        (0.02..=0.09).contains(&fraction),
        "null calibration fraction {fraction} outside [0.02, 0.09]"
    );

    // strong association: predictions monotone in the covariate
    let associated: Vec<f64> = predictions.iter().map(|y| 0.3 + y + y * y).collect();
    let strong = score_continuous(
        "associated",
        "probe",
        &predictions,
        &associated,
        10_000,
        2_025,
    )
    .unwrap();
    assert!(
        strong.rho > strong.perm_max,
        "observed rho {} does not exceed permutation max {}",
        strong.rho,
        strong.perm_max
    );

    let elapsed = start.elapsed();
    assert_within(elapsed, Duration::from_secs(180), "criterion 9");
    println!(
        "acceptance criterion 9: PASS (null fraction {fraction:.3} in [0.02, 0.09]; \
         rho {:.3} > perm max {:.3} over 10000 permutations, {elapsed:?})",
        strong.rho, strong.perm_max
    );
}

/// Criterion 10: index aggregation, CDF probabilities and compound
/// weighted means/quantiles match brute-force recomputations at 1e-12
/// relative tolerance on 1000 randomized instances each. Budget 30 s.
#[test]
fn criterion_10_feature_pipeline_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(606);
    let rel_ok = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);

    // grid-to-city aggregation
    for _ in 0..1000 {
        let n_cells = 1 + (rng.random::<f64>() * 5.0) as usize;
        let mut records = Vec::new();
        let mut areas = Vec::new();
        for cell in 0..n_cells {
            for period in 1..=36 {
                records.push((cell as u64, 2000, period, rng.random::<f64>()));
            }
            areas.push((CityId(1), cell as u64, 0.1 + 10.0 * rng.random::<f64>()));
        }
        let grid = GridSwi::from_records(&records).unwrap();
        let weights = OverlapWeights::from_records(&areas).unwrap();
        let out = aggregate_swi(&grid, &weights, CityId(1), 2000).unwrap();
        let total: f64 = areas.iter().map(|(_, _, a)| a).sum();
        for period in 1..=36 {
            let oracle: f64 = records
                .iter()
                .filter(|(_, _, p, _)| *p == period)
                .map(|(cell, _, _, v)| areas[*cell as usize].2 * v)
                .sum::<f64>()
                / total;
            assert!(rel_ok(out[period - 1], oracle));
        }
    }

    // quarter CDF probabilities
    for _ in 0..1000 {
        let samples: [Vec<f64>; 4] = std::array::from_fn(|_| {
            let n = 1 + (rng.random::<f64>() * 49.0) as usize;
            (0..n).map(|_| rng.random::<f64>()).collect()
        });
        let cdfs = fit_quarter_cdfs(&samples).unwrap();
        let series: Vec<f64> = (0..36).map(|_| rng.random::<f64>()).collect();
        let qmeans = quarter_means(&series);
        let queries = [qmeans, qmeans.map(|m| m * 0.9), qmeans.map(|m| m * 1.1)];
        let probs = cdf_probabilities(&cdfs, &queries);
        for q in 1..=4 {
            for lag in 0..3 {
                let x = queries[lag][q - 1];
                let oracle = samples[q - 1].iter().filter(|v| **v <= x).count() as f64
                    / samples[q - 1].len() as f64;
                assert!(rel_ok(probs[(q - 1) * 3 + lag], oracle));
            }
        }
    }

    // compound weighted means and quantiles
    for _ in 0..1000 {
        let n_houses = 1 + (rng.random::<f64>() * 39.0) as usize;
        let houses: Vec<HouseRecord> = (0..n_houses)
            .map(|h| {
                HouseRecord::new(
                    h as u64,
                    CityId(1),
                    2000,
                    0.5 + rng.random::<f64>() * 4.0,
                    [rng.random(), rng.random(), rng.random()],
                )
                .unwrap()
            })
            .collect();
        let k = 1 + (rng.random::<f64>() * 34.0) as usize;
        let out = compound_covariates(&houses, k).unwrap();
        let total: f64 = houses.iter().map(|h| h.insured_sum).sum();
        let attr = |h: &HouseRecord, which: usize| -> f64 {
            match which {
                0..=2 => h.attrs[which],
                3 => h.attrs[0] * h.attrs[1],
                4 => h.attrs[0] * h.attrs[2],
                _ => h.attrs[0] * h.attrs[1] * h.attrs[2],
            }
        };
        for which in 0..6 {
            let oracle = houses
                .iter()
                .map(|h| h.insured_sum * attr(h, which))
                .sum::<f64>()
                / total;
            assert!(rel_ok(out.means[which], oracle));
        }
        for a in 0..3 {
            let mut scaled: Vec<f64> = houses.iter().map(|h| h.insured_sum * h.attrs[a]).collect();
            scaled.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (i, quantile) in out.quantiles[a].iter().enumerate() {
                let p = (i + 1) as f64 / (k + 1) as f64;
                let idx = ((scaled.len() as f64 * p).ceil() as usize).max(1) - 1;
                assert_eq!(*quantile, scaled[idx]);
            }
        }
    }

    let elapsed = start.elapsed();
    assert_within(elapsed, Duration::from_secs(30), "criterion 10");
    println!("acceptance criterion 10: PASS (3000 randomized feature instances, {elapsed:?})");
}

/// Criterion 11: on the heterogeneous benchmark the discrete overarching
/// selector beats the average- and median-of-learners baselines on both
/// |mean ratio - 1| and ratio standard deviation (direction only).
#[test]
fn criterion_11_baseline_ordering() {
    let start = Instant::now();
    let zoo = vec![
        BaseLearner::mean("mean"),
        BaseLearner::ridge("ridge", 1.0).unwrap(),
        BaseLearner::boosted_linear("boost", 6, 0.5).unwrap(),
        BaseLearner::knn_ks(
            "knn",
            25,
            vec![
                vec!["z0".into(), "z1".into()],
                vec!["z2".into(), "z3".into()],
            ],
            vec![0.5, 0.5],
        )
        .unwrap(),
    ];
    let config = overarching_config((3, 3, 3));
    let average_index = 2;
    let median_index = 3;

    let mut ratios_discrete = Vec::new();
    let mut ratios_average = Vec::new();
    let mut ratios_median = Vec::new();
    for seed in 0..50_u64 {
        let mut spec = standard_spec(200, 20, 10, 16, 9_000 + seed);
        spec.covariates.year_factor_weight = 0.7;
        let (panel, _) = generate(&spec).unwrap();
        let (out, _) = run_checked(&panel, &zoo, &config, None);
        for row in &out.report.rows {
            assert!(row.total_actual > 0.0, "benchmark needs nonzero actuals");
            ratios_discrete.push(row.total_predicted / row.total_actual);
            ratios_average.push(row.algorithm_totals[average_index] / row.total_actual);
            ratios_median.push(row.algorithm_totals[median_index] / row.total_actual);
        }
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt();
        (m, sd)
    };
    let (mean_d, sd_d) = stats(&ratios_discrete);
    let (mean_a, sd_a) = stats(&ratios_average);
    let (mean_m, sd_m) = stats(&ratios_median);
    assert!(
        (mean_d - 1.0).abs() <= (mean_a - 1.0).abs(),
        "discrete |mean-1| {} above average baseline {}",
        (mean_d - 1.0).abs(),
        (mean_a - 1.0).abs()
    );
    assert!(
        (mean_d - 1.0).abs() <= (mean_m - 1.0).abs(),
        "discrete |mean-1| {} above median baseline {}",
        (mean_d - 1.0).abs(),
        (mean_m - 1.0).abs()
    );
    assert!(
        sd_d <= sd_a,
        "discrete sd {sd_d} above average baseline {sd_a}"
    );
    assert!(
        sd_d <= sd_m,
        "discrete sd {sd_d} above median baseline {sd_m}"
    );
    let elapsed = start.elapsed();
    println!(
        "acceptance criterion 11: PASS (|mean-1|: discrete {:.4} <= average {:.4}, median {:.4}; \
         sd: discrete {:.4} <= average {:.4}, median {:.4}; {elapsed:?})",
        (mean_d - 1.0).abs(),
        (mean_a - 1.0).abs(),
        (mean_m - 1.0).abs(),
        sd_d,
        sd_a,
        sd_m
    );
}

/// Sanity check on the permutation engine used by criterion 9: a
/// statistic dominating every permutation gets the minimal p-value.
#[test]
fn permutation_engine_minimal_p() {
    let outcome = permutation_test(10.0, 20, |_| 0.0, 999, 3).unwrap();
    assert_eq!(outcome.p_value, 1.0 / 1000.0);
}
