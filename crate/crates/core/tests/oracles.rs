//! Derived expected values checked against independent oracles: pair
//! enumeration for tau, quadrature for chi-square tails, brute-force search
//! for threshold policies, and pipeline self-consistency runs.

mod common;

use fairaudit_core::correlation::{correlation_matrix, flag_proxies, kendall_tau};
use fairaudit_core::dataset::{self, NormalizeMethod};
use fairaudit_core::metrics::{self, GroupPolicy};
use fairaudit_core::mitigate;
use fairaudit_core::model::{self, TrainConfig};
use fairaudit_core::rng::Rng64;
use fairaudit_core::selector::{self, NodeId, SelectorThresholds};
use fairaudit_core::{synth, Criterion};
use std::collections::BTreeMap;

fn random_tied_vector(rng: &mut Rng64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.bernoulli(0.5) {
                // quantized: forces ties
                (rng.next_below(8) as f64) / 4.0
            } else {
                rng.next_f64() * 2.0
            }
        })
        .collect()
}

#[test]
fn tau_matches_pair_enumeration_oracle() {
    let mut rng = Rng64::new(2024);
    for trial in 0..200 {
        let n = 2 + rng.next_below(60);
        let x = random_tied_vector(&mut rng, n);
        let y = random_tied_vector(&mut rng, n);
        let fast = kendall_tau(&x, &y).unwrap();
        let slow = common::oracle_tau(&x, &y);
        match (fast, slow) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() < 1e-12, "trial {trial}: {a} vs {b}")
            }
            (None, None) => {}
            other => panic!("trial {trial}: definedness disagrees: {other:?}"),
        }
    }
}

#[test]
fn chi_square_p_value_matches_quadrature() {
    // 60/40 split against uniform: statistic (10^2/50)*2 = 4, dof 1.
    use fairaudit_core::dataset::{ColumnData, ColumnSchema, Dataset, Dtype, Role};
    let mut labels = vec!["M".to_string(); 60];
    labels.extend(vec!["F".to_string(); 40]);
    let ds = Dataset::new(
        vec![
            ColumnSchema::new("gender", Role::Protected, Dtype::Categorical),
            ColumnSchema::new("hired", Role::Outcome, Dtype::Binary),
        ],
        vec![
            ColumnData::Categorical(labels),
            ColumnData::Binary((0..100).map(|i| (i % 2) as u8).collect()),
        ],
        100,
    )
    .unwrap();
    let report = dataset::representativeness_test(&ds, "gender", None, 0.05).unwrap();
    assert!((report.statistic - 4.0).abs() < 1e-12);
    let oracle_p = 1.0 - common::chi2_cdf_quadrature(report.statistic, 1);
    assert!(
        (report.p_value - oracle_p).abs() < 1e-8,
        "p {} vs quadrature {oracle_p}",
        report.p_value
    );
    // the 90/10 case from the same construction: statistic 64, vanishing p
    let quad_tail = 1.0 - common::chi2_cdf_quadrature(64.0, 1);
    assert!(quad_tail < 1e-10);
}

#[test]
fn parity_example_agrees_with_brute_force() {
    let scores = vec![0.9, 0.6, 0.3, 0.8, 0.7, 0.2];
    let labels = vec![1, 0, 0, 1, 0, 0];
    let groups: Vec<String> = ["A", "A", "A", "B", "B", "B"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let policy =
        mitigate::fit_thresholds(&scores, &labels, &groups, Criterion::DemographicParity, 0.0)
            .unwrap();
    let oracle =
        common::brute_best_accuracy(&scores, &labels, &groups, Criterion::DemographicParity, 0.0)
            .unwrap();
    assert!((policy.achieved_accuracy - oracle).abs() < 1e-9);
    assert_eq!(policy.achieved_accuracy, 1.0);
}

#[test]
fn mitigation_matches_brute_force_on_random_instances() {
    let epsilons = [0.0, 0.02, 0.05, 0.1, 0.2];
    for seed in 0..40u64 {
        let (scores, labels, groups) = common::random_instance(seed);
        let epsilon = epsilons[(seed % 5) as usize];
        for criterion in [
            Criterion::DemographicParity,
            Criterion::EqualityOfOpportunity,
            Criterion::EqualizedOdds,
        ] {
            let policy = mitigate::fit_thresholds(&scores, &labels, &groups, criterion, epsilon)
                .unwrap_or_else(|e| panic!("seed {seed} {criterion}: {e}"));
            let oracle =
                common::brute_best_accuracy(&scores, &labels, &groups, criterion, epsilon)
                    .expect("trivial policies keep these criteria feasible");
            assert!(
                (policy.achieved_accuracy - oracle).abs() < 1e-9,
                "seed {seed} {criterion} eps {epsilon}: fit {} vs brute {oracle}",
                policy.achieved_accuracy
            );
            for metric in criterion.relevant_gaps() {
                assert!(policy.achieved_gaps[*metric] <= epsilon + 1e-9);
            }
        }
    }
}

#[test]
fn proxy_generator_flags_through_the_pipeline() {
    use fairaudit_core::dataset::ColumnData;
    let ds = synth::gen_proxy(1000, 1, 0.8).unwrap();
    let matrix = correlation_matrix(&ds);
    let entry = matrix.get("region_code", "group").unwrap().unwrap();
    assert!((entry - 0.8).abs() <= 0.05, "tau {entry}");
    // the matrix entry agrees with the pair-enumeration oracle
    let group: Vec<f64> = match ds.column("group").unwrap().1 {
        ColumnData::Binary(v) => v.iter().map(|b| *b as f64).collect(),
        _ => unreachable!(),
    };
    let region: Vec<f64> = match ds.column("region_code").unwrap().1 {
        ColumnData::Numeric(v) => v.clone(),
        _ => unreachable!(),
    };
    let oracle = common::oracle_tau(&group, &region).unwrap();
    assert!((entry - oracle).abs() < 1e-12);
    let flags = flag_proxies(&matrix, ds.schema(), 0.5).unwrap();
    assert!(flags
        .flags
        .iter()
        .any(|f| f.feature == "region_code" && f.protected == "group"));

    let clean = synth::gen_proxy(1000, 1, 0.0).unwrap();
    let matrix = correlation_matrix(&clean);
    let flags = flag_proxies(&matrix, clean.schema(), 0.5).unwrap();
    assert!(flags.flags.is_empty(), "{flags:?}");
}

#[test]
fn q2_default_tracks_measured_accuracy_drop() {
    // region_code drives the outcome, so removing it costs real accuracy
    let ds = synth::gen_proxy(1000, 7, 0.8).unwrap();
    let split = dataset::split(&ds, 0.7, 7).unwrap();
    let matrix = correlation_matrix(&ds);
    let flags = flag_proxies(&matrix, ds.schema(), 0.5).unwrap();
    assert!(!flags.flags.is_empty());
    let thresholds = SelectorThresholds::default();
    let ctx = selector::ModelContext {
        train: &split.train,
        validation: &split.test,
        train_config: TrainConfig::default(),
        group_attribute: "group".to_string(),
    };
    let answers =
        selector::evaluate_defaults(&ds, &flags, Some(&ctx), &BTreeMap::new(), &thresholds)
            .unwrap();
    let q2 = answers
        .iter()
        .find(|a| a.node_id == NodeId::Q2RemovableWithinTolerance)
        .expect("Q1 is yes, so Q2 is on the path");
    let with = q2.evidence["accuracy_with_flagged"];
    let without = q2.evidence["accuracy_without_flagged"];
    let drop = q2.evidence["accuracy_drop"];
    assert!((drop - (with - without)).abs() < 1e-12);
    assert!(drop > thresholds.acc_tolerance, "drop {drop}");
    assert_eq!(q2.default_answer, Some(false));

    // redundant proxy: outcome depends only on the clean features, so the
    // flagged feature is removable
    let redundant = {
        use fairaudit_core::dataset::{ColumnData, ColumnSchema, Dataset, Dtype, Role};
        let mut rng = Rng64::new(5);
        let n = 600;
        let group: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let aptitude: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        // proxy mirrors the protected attribute but carries no outcome signal
        let proxy: Vec<f64> = group.iter().map(|g| *g as f64).collect();
        let outcome: Vec<u8> = aptitude.iter().map(|a| (*a > 0.0) as u8).collect();
        Dataset::new(
            vec![
                ColumnSchema::new("group", Role::Protected, Dtype::Binary),
                ColumnSchema::new("mirror", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("aptitude", Role::Feature, Dtype::Numeric),
                ColumnSchema::new("hired", Role::Outcome, Dtype::Binary),
            ],
            vec![
                ColumnData::Binary(group),
                ColumnData::Numeric(proxy),
                ColumnData::Numeric(aptitude),
                ColumnData::Binary(outcome),
            ],
            n,
        )
        .unwrap()
    };
    let split = dataset::split(&redundant, 0.7, 3).unwrap();
    let matrix = correlation_matrix(&redundant);
    let flags = flag_proxies(&matrix, redundant.schema(), 0.5).unwrap();
    assert!(flags.flags.iter().any(|f| f.feature == "mirror"));
    let ctx = selector::ModelContext {
        train: &split.train,
        validation: &split.test,
        train_config: TrainConfig::default(),
        group_attribute: "group".to_string(),
    };
    let answers =
        selector::evaluate_defaults(&redundant, &flags, Some(&ctx), &BTreeMap::new(), &thresholds)
            .unwrap();
    let q2 = answers
        .iter()
        .find(|a| a.node_id == NodeId::Q2RemovableWithinTolerance)
        .unwrap();
    assert_eq!(q2.default_answer, Some(true), "{:?}", q2.evidence);
}

#[test]
fn separable_training_reaches_high_accuracy() {
    let ds = synth::gen_hiring_basic(200, 1).unwrap();
    let (inputs, _) = dataset::drop_protected(&ds);
    let model = model::train(&inputs, TrainConfig::default()).unwrap();
    let scores = model::predict_scores(&model, &inputs).unwrap().scores;
    let labels = inputs.labels().unwrap();
    let acc = model::accuracy_at_half(&scores, &labels);
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn panel_a_geometry_shows_gender_gap() {
    let ds = synth::gen_gender_marital(2000, 42, &Default::default()).unwrap();
    let ds = dataset::normalize(
        &ds,
        NormalizeMethod::MinMax,
        &["aptitude".into(), "experience".into()],
    )
    .unwrap();
    let split = dataset::split(&ds, 0.7, 42).unwrap();
    let trained = model::train(&split.train, TrainConfig::default()).unwrap();
    let scores = model::predict_scores(&trained, &split.test).unwrap().scores;
    let labels = split.test.labels().unwrap();
    let groups = split.test.group_labels("gender").unwrap();
    let gm = metrics::group_metrics(&scores, &labels, &groups, GroupPolicy::Uniform(0.5)).unwrap();
    let gaps = metrics::fairness_gaps(&gm, Criterion::DemographicParity, 0.05).unwrap();
    assert!(gaps.gaps["positive_rate"] > 0.3, "{}", gaps.gaps["positive_rate"]);

    // symmetric geometry with a group-independent outcome rule stays fair
    let fair = synth::gen_gender_marital(2000, 42, &synth::ScenarioParams::symmetric()).unwrap();
    let fair = dataset::normalize(
        &fair,
        NormalizeMethod::MinMax,
        &["aptitude".into(), "experience".into()],
    )
    .unwrap();
    let split = dataset::split(&fair, 0.7, 42).unwrap();
    let trained = model::train(&split.train, TrainConfig::default()).unwrap();
    let scores = model::predict_scores(&trained, &split.test).unwrap().scores;
    let labels = split.test.labels().unwrap();
    let groups = split.test.group_labels("gender").unwrap();
    let gm = metrics::group_metrics(&scores, &labels, &groups, GroupPolicy::Uniform(0.5)).unwrap();
    let gaps = metrics::fairness_gaps(&gm, Criterion::DemographicParity, 0.05).unwrap();
    assert!(gaps.gaps["positive_rate"] < 0.05, "{}", gaps.gaps["positive_rate"]);
}

#[test]
fn model_scores_reproduce_training_accuracy() {
    let ds = synth::gen_hiring_basic(200, 3).unwrap();
    let (inputs, _) = dataset::drop_protected(&ds);
    let trained = model::train(&inputs, TrainConfig::default()).unwrap();
    let labels = inputs.labels().unwrap();
    let a = model::predict_scores(&trained, &inputs).unwrap().scores;
    let b = model::predict_scores(&trained, &inputs).unwrap().scores;
    assert_eq!(a, b);
    let acc = model::accuracy_at_half(&a, &labels);
    assert!(acc >= 0.95);
}
