use gomkit_core::similarity::{dtw, frame_distance, select_reference};
use gomkit_testkit::oracles::dtw_exhaustive;
use proptest::prelude::*;

fn seq(max_len: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), 1..=max_len)
}

fn pair() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..4).prop_flat_map(|d| (seq(6, d), seq(6, d)))
}

proptest! {
    #[test]
    fn cost_matches_enumeration_exactly((a, b) in pair()) {
        prop_assert_eq!(dtw(&a, &b).unwrap().cost, dtw_exhaustive(&a, &b));
    }

    #[test]
    fn symmetric((a, b) in pair()) {
        prop_assert_eq!(dtw(&a, &b).unwrap().cost, dtw(&b, &a).unwrap().cost);
    }

    #[test]
    fn path_is_admissible_and_sums_to_cost((a, b) in pair()) {
        let r = dtw(&a, &b).unwrap();
        prop_assert_eq!(r.path.first(), Some(&(0, 0)));
        prop_assert_eq!(r.path.last(), Some(&(a.len() - 1, b.len() - 1)));
        for w in r.path.windows(2) {
            let step = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            prop_assert!(matches!(step, (1, 0) | (0, 1) | (1, 1)));
        }
        let summed: f64 = r.path.iter().map(|&(i, j)| frame_distance(&a[i], &b[j])).sum();
        prop_assert!((summed - r.cost).abs() <= 1e-9 * (1.0 + r.cost));
    }

    #[test]
    fn appending_a_frame_never_lowers_cost((a, b) in pair(), extra in -10.0..10.0f64) {
        let base = dtw(&a, &b).unwrap().cost;
        let mut longer = a.clone();
        longer.push(vec![extra + 100.0; a[0].len()]);
        prop_assert!(dtw(&longer, &b).unwrap().cost >= base);
    }

    #[test]
    fn repeated_frames_cost_nothing(a in seq(6, 2), reps in prop::collection::vec(1usize..3, 6)) {
        let stretched: Vec<Vec<f64>> = a.iter().zip(reps.iter().cycle()).flat_map(|(f, &k)| std::iter::repeat_n(f.clone(), k)).collect();
        prop_assert_eq!(dtw(&a, &stretched).unwrap().cost, 0.0);
    }
}

#[test]
fn reference_is_the_medoid() {
    let mk = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    let reps = vec![mk(&[0.0, 0.0, 0.0]), mk(&[5.0, 5.0]), mk(&[1.0, 1.0, 1.0, 1.0]), mk(&[9.0])];
    // costs: 0->[0, 10, 4, 9] 1->[10, 0, 8, 4] 2->[4, 8, 0, 8] 3->[9, 8, 32, 0]
    let sums: Vec<f64> = (0..4).map(|i| (0..4).map(|j| dtw(&reps[i], &reps[j]).unwrap().cost).sum()).collect();
    let best = sums.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
    assert_eq!(select_reference(&reps).unwrap(), best);
}
