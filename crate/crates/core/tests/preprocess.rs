use gomkit_core::bvh::parse_bvh;
use gomkit_core::preprocess::{
    butterworth_lowpass, invert_unwrap, magnitude_squared, read_annotations, segment, select_cutoff, unwrap_discontinuities,
    validate_annotations, write_annotations, FilterSpec, PreprocessError, SegmentAnnotation,
};
use gomkit_testkit::oracles::{butterworth_power_gain, tone_amplitude};
use proptest::prelude::*;

/// A path with steps below 170 degrees staying inside +-250, starting in the principal range.
fn admissible() -> impl Strategy<Value = Vec<f64>> {
    (-179.9..179.9f64, prop::collection::vec(-170.0..170.0f64, 0..80)).prop_map(|(start, steps)| {
        let mut u = vec![start];
        for s in steps {
            let next = u.last().unwrap() + s;
            u.push(if next.abs() <= 249.0 { next } else { u.last().unwrap() - s });
        }
        u
    })
}

fn wrap(v: f64) -> f64 {
    let w = (v + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 { 180.0 } else { w }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unwrap_recovers_path_and_inverts_exactly(u in admissible()) {
        let x: Vec<f64> = u.iter().map(|&v| wrap(v)).collect();
        let (y, log) = unwrap_discontinuities(&x).unwrap();
        prop_assert!(y.iter().all(|v| v.abs() <= 250.0));
        for (a, b) in y.iter().zip(&u) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
        prop_assert_eq!(invert_unwrap(&y, &log).unwrap(), x);
    }
}

#[test]
fn filter_response_follows_the_analytic_gain() {
    let fs = 90.0;
    let spec = FilterSpec::new(4, 5.0, fs).unwrap();
    for f in [0.5, 1.0, 2.0, 4.0, 5.0, 7.0, 10.0, 40.0] {
        let x: Vec<f64> = (0..4000).map(|t| (std::f64::consts::TAU * f * t as f64 / fs).sin()).collect();
        let y = butterworth_lowpass(&x, &spec).unwrap();
        // zero-phase filtering applies the magnitude twice: amplitude gain = |H|^2
        let gain = tone_amplitude(&y[1000..3000], f, fs);
        let expected = butterworth_power_gain(4, 5.0, fs, f);
        assert!((gain - expected).abs() < 1e-3, "{f} Hz: {gain} vs {expected}");
        assert!((magnitude_squared(&spec, f) - expected).abs() < 1e-12);
    }
}

#[test]
fn zero_phase_keeps_peaks_in_place() {
    let fs = 90.0;
    let x: Vec<f64> = (0..900).map(|t| (std::f64::consts::TAU * 1.0 * t as f64 / fs).sin()).collect();
    let y = butterworth_lowpass(&x, &FilterSpec::new(4, 6.0, fs).unwrap()).unwrap();
    let argmax = |s: &[f64]| s.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
    assert_eq!(argmax(&x[300..400]), argmax(&y[300..400]));
}

#[test]
fn cutoff_selection_bounds() {
    let fs = 90.0;
    let slow: Vec<f64> = (0..600).map(|t| 20.0 * (std::f64::consts::TAU * 0.3 * t as f64 / fs).sin()).collect();
    assert_eq!(select_cutoff(&slow, fs).unwrap(), 1.0);
    assert!(matches!(select_cutoff(&slow[..63], fs), Err(PreprocessError::TooShort { needed: 64, got: 63 })));
}

#[test]
fn annotations_round_trip_and_cut_clips() {
    let anns = vec![
        SegmentAnnotation { label: "TVA_1".into(), start_frame: 0, end_frame: 3 },
        SegmentAnnotation { label: "TVA_2".into(), start_frame: 4, end_frame: 6 },
    ];
    let csv = write_annotations(&anns);
    assert!(csv.starts_with("label,start_frame,end_frame\n"));
    assert_eq!(read_annotations(&csv).unwrap(), anns);
    let doc = "HIERARCHY\nROOT H\n{\nOFFSET 0 0 0\nCHANNELS 1 Xrotation\nEnd Site\n{\nOFFSET 0 1 0\n}\n}\nMOTION\nFrames: 6\nFrame Time: 0.1\n0\n1\n2\n3\n4\n5\n";
    let (_, clip) = parse_bvh::<f64>(doc).unwrap();
    let parts = segment(&clip, &anns).unwrap();
    assert_eq!(parts.len(), 2);
    assert_eq!(parts[0].1.column(0), vec![0.0, 1.0, 2.0]);
    assert_eq!(parts[1].1.column(0), vec![4.0, 5.0]);
    let overlapping = vec![anns[0].clone(), SegmentAnnotation { label: "x".into(), start_frame: 2, end_frame: 5 }];
    assert!(validate_annotations(&overlapping, 6).is_err());
    assert!(validate_annotations(&anns, 5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn filtering_band_limited_signal_is_idempotent(
        tones in prop::collection::vec((1.0..60.0f64, 0.02..0.15f64, 0.0..6.3f64), 1..4),
        offset in -90.0..90.0f64,
        cutoff in 4.0..12.0f64,
        len in 300usize..1200,
    ) {
        let fs = 90.0;
        let x: Vec<f64> = (0..len)
            .map(|t| {
                let s = t as f64 / fs;
                offset + tones.iter().map(|&(a, r, ph)| a * (std::f64::consts::TAU * r * cutoff * s + ph).sin()).sum::<f64>()
            })
            .collect();
        let spec = FilterSpec::new(4, cutoff, fs).unwrap();
        let once = butterworth_lowpass(&x, &spec).unwrap();
        let twice = butterworth_lowpass(&once, &spec).unwrap();
        let range = once.iter().copied().fold(f64::NEG_INFINITY, f64::max) - once.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = once.iter().zip(&twice).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-6 * range, "deviation {} over range {}", worst, range);
    }
}

proptest! {
    #[test]
    fn unwrap_changes_steps_by_whole_turns(u in admissible()) {
        let x: Vec<f64> = u.iter().map(|&v| wrap(v)).collect();
        let (y, _) = unwrap_discontinuities(&x).unwrap();
        for t in 1..x.len() {
            let turns = ((y[t] - y[t - 1]) - (x[t] - x[t - 1])) / 360.0;
            prop_assert!((turns - turns.round()).abs() < 1e-9);
        }
    }
}
