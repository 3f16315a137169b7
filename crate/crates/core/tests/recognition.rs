use std::collections::BTreeMap;

use gomkit_core::recognition::{
    classify, cross_validate, hmm_fit, loglik, CvConfig, HmmConfig, HmmModel, HmmTopology, RecognitionError, Standardizer,
};
use gomkit_testkit::oracles::hmm_path_sum;
use gomkit_testkit::synth::{level_sequence, sample_hmm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stochastic(rng: &mut ChaCha8Rng, n: usize, allowed: impl Fn(usize) -> bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|j| if allowed(j) { rng.gen_range(0.05..1.0) } else { 0.0 }).collect();
    let z: f64 = raw.iter().sum();
    raw.iter().map(|v| v / z).collect()
}

fn random_model(rng: &mut ChaCha8Rng, n: usize, d: usize, topology: HmmTopology) -> HmmModel<f64> {
    let (initial, transition) = match topology {
        HmmTopology::Ergodic => (stochastic(rng, n, |_| true), (0..n).map(|_| stochastic(rng, n, |_| true)).collect()),
        HmmTopology::LeftToRight => (
            (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            (0..n).map(|i| stochastic(rng, n, |j| j == i || j == i + 1)).collect(),
        ),
    };
    let means = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let variances = (0..n).map(|_| (0..d).map(|_| rng.gen_range(0.2..2.0)).collect()).collect();
    HmmModel::new(topology, initial, transition, means, variances).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn forward_equals_path_enumeration(seed in any::<u64>(), n in 1usize..=5, len in 1usize..=6, d in 1usize..=3, ergodic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topology = if ergodic { HmmTopology::Ergodic } else { HmmTopology::LeftToRight };
        let m = random_model(&mut rng, n, d, topology);
        let seq: Vec<Vec<f64>> = (0..len).map(|_| (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
        let oracle = hmm_path_sum(&m.initial, &m.transition, &m.means, &m.variances, &seq);
        let ll = loglik(&m, &seq).unwrap();
        prop_assert!((ll - oracle).abs() < 1e-8, "{} vs {}", ll, oracle);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn baum_welch_never_decreases_and_keeps_structural_zeros(seed in any::<u64>(), n in 1usize..=4, ergodic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topology = if ergodic { HmmTopology::Ergodic } else { HmmTopology::LeftToRight };
        let seqs: Vec<Vec<Vec<f64>>> = (0..rng.gen_range(1..5))
            .map(|_| (0..rng.gen_range(n.max(2)..30)).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.0..5.0)]).collect())
            .collect();
        let fit = hmm_fit(&seqs, n, topology, &HmmConfig::default()).unwrap();
        for w in fit.loglik_history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", fit.loglik_history);
        }
        prop_assert!(fit.loglik_history.len() <= 101);
        let m = &fit.model;
        for row in &m.transition {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        if topology == HmmTopology::LeftToRight {
            prop_assert_eq!(m.initial[0], 1.0);
            for i in 0..n {
                for j in 0..n {
                    if j < i || j > i + 1 {
                        prop_assert_eq!(m.transition[i][j], 0.0);
                    }
                }
            }
        }
        prop_assert!(m.variances.iter().flatten().all(|&v| v >= 1e-6));
        let last = *fit.loglik_history.last().unwrap();
        let total: f64 = seqs.iter().map(|s| loglik(m, s).unwrap()).sum();
        prop_assert!((total - last).abs() < 1e-8 * last.abs().max(1.0));
    }
}

#[test]
fn recovers_two_state_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let initial = [1.0, 0.0];
    let transition = vec![vec![0.95, 0.05], vec![0.0, 1.0]];
    let means = vec![vec![0.0], vec![5.0]];
    let sds = vec![vec![1.0], vec![1.0]];
    let seqs: Vec<_> = (0..30).map(|_| sample_hmm(&mut rng, &initial, &transition, &means, &sds, 60)).collect();
    let fit = hmm_fit(&seqs, 2, HmmTopology::LeftToRight, &HmmConfig::default()).unwrap();
    let mut mu: Vec<f64> = fit.model.means.iter().map(|m| m[0]).collect();
    mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!((mu[0] - 0.0).abs() < 0.3 && (mu[1] - 5.0).abs() < 0.3, "{mu:?}");
}

#[test]
fn scaled_forward_survives_long_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_model(&mut rng, 4, 2, HmmTopology::Ergodic);
    let seq: Vec<Vec<f64>> = (0..50_000).map(|_| vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]).collect();
    assert!(loglik(&m, &seq).unwrap().is_finite());
}

fn vocabulary(rng: &mut ChaCha8Rng, classes: &[&str], per_class: usize, sd: f64) -> Vec<(String, Vec<Vec<f64>>)> {
    let mut data = Vec::new();
    for (k, c) in classes.iter().enumerate() {
        let levels: Vec<Vec<f64>> = (0..3).map(|b| vec![(k * 10 + b * 3) as f64, -(k as f64) * 4.0 + b as f64]).collect();
        for _ in 0..per_class {
            let len = rng.gen_range(20..40);
            data.push((c.to_string(), level_sequence(rng, &levels, len, sd)));
        }
    }
    data
}

#[test]
fn decisions_are_invariant_to_affine_feature_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let data = vocabulary(&mut rng, &["a", "b", "c"], 8, 2.0);
    let affine = |s: &Vec<Vec<f64>>| s.iter().map(|r| vec![r[0] * 3.5 - 40.0, r[1] * 0.01 + 7.0]).collect::<Vec<_>>();
    let train_models = |data: &[(String, Vec<Vec<f64>>)]| {
        let scaler = Standardizer::fit(data.iter().map(|(_, s)| s.as_slice())).unwrap();
        let mut by: BTreeMap<String, Vec<Vec<Vec<f64>>>> = BTreeMap::new();
        for (c, s) in data {
            by.entry(c.clone()).or_default().push(scaler.apply(s));
        }
        let models: BTreeMap<String, HmmModel<f64>> = by
            .into_iter()
            .map(|(c, seqs)| (c, hmm_fit(&seqs, 3, HmmTopology::LeftToRight, &HmmConfig::default()).unwrap().model))
            .collect();
        (scaler, models)
    };
    let (s1, m1) = train_models(&data);
    let scaled: Vec<_> = data.iter().map(|(c, s)| (c.clone(), affine(s))).collect();
    let (s2, m2) = train_models(&scaled);
    for ((_, raw), (_, sc)) in data.iter().zip(&scaled) {
        assert_eq!(classify(&m1, &s1.apply(raw)).unwrap(), classify(&m2, &s2.apply(sc)).unwrap());
    }
}

#[test]
fn separable_vocabulary_is_recognised_perfectly() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data = vocabulary(&mut rng, &["one", "two", "three"], 12, 0.5);
    let config = CvConfig { n_states: 3, ..CvConfig::default() };
    let report = cross_validate(&data, &config).unwrap();
    assert_eq!(report.folds, 10);
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.macro_f1, 1.0);
    for (i, row) in report.confusion.iter().enumerate() {
        assert_eq!(row.iter().sum::<usize>(), 12);
        assert_eq!(row[i], 12);
    }
    let again = cross_validate(&data, &config).unwrap();
    assert_eq!(report, again);
    assert_eq!(report.to_json(), again.to_json());
}

#[test]
fn folds_shrink_to_the_smallest_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut data = vocabulary(&mut rng, &["a"], 10, 0.5);
    data.extend(vocabulary(&mut rng, &["a", "b"], 4, 0.5).into_iter().filter(|(c, _)| c == "b"));
    let report = cross_validate(&data, &CvConfig { n_states: 2, ..CvConfig::default() }).unwrap();
    assert_eq!(report.folds, 4);
    assert_eq!(report.fold_accuracy.len(), 4);
    assert_eq!(report.predictions.len(), 14);
}

#[test]
fn degenerate_training_fold_is_reported() {
    let data: Vec<(String, Vec<Vec<f64>>)> = (0..6)
        .map(|i| (if i % 2 == 0 { "a" } else { "b" }.to_string(), vec![vec![i as f64, 1.0]; 5]))
        .collect();
    let err = cross_validate(&data, &CvConfig { n_states: 2, folds: 3, ..CvConfig::default() }).unwrap_err();
    assert_eq!(err, RecognitionError::DegenerateData { feature: 1 });
}
