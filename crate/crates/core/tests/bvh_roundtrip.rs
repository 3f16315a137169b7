use gomkit_core::bvh::{parse_bvh, write_bvh, MotionClip, Skeleton};
use gomkit_testkit::bvh_gen::random_bvh;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn assert_close(a: &(Skeleton<f64>, MotionClip<f64>), b: &(Skeleton<f64>, MotionClip<f64>), tol: f64) {
    let (ja, jb) = (a.0.joints(), b.0.joints());
    assert_eq!(ja.len(), jb.len());
    assert_eq!(a.0.root_index(), b.0.root_index());
    for (x, y) in ja.iter().zip(jb) {
        assert_eq!((&x.name, &x.channels, x.parent, &x.children, x.end_site), (&y.name, &y.channels, y.parent, &y.children, y.end_site));
        for k in 0..3 {
            assert!((x.offset[k] - y.offset[k]).abs() <= tol);
        }
    }
    assert_eq!(a.1.frame_count(), b.1.frame_count());
    assert_eq!(a.1.channel_count(), b.1.channel_count());
    assert!((a.1.frame_time - b.1.frame_time).abs() <= 1e-8);
    for t in 0..a.1.frame_count() {
        for (p, q) in a.1.frame(t).iter().zip(b.1.frame(t)) {
            assert!((p - q).abs() <= tol, "frame {t}: {p} vs {q}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parse_write_parse_preserves_structure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (text, joints, channels, frames) = random_bvh(&mut rng, 30, 200);
        let first = parse_bvh::<f64>(&text).unwrap();
        prop_assert_eq!(first.0.joints().iter().filter(|j| !j.end_site).count(), joints);
        prop_assert_eq!(first.0.channel_count(), channels);
        prop_assert_eq!(first.1.frame_count(), frames);
        let written = write_bvh(&first.0, &first.1).unwrap();
        let second = parse_bvh::<f64>(&written).unwrap();
        assert_close(&first, &second, 1e-6);
        // once rounded, writing is a fixed point
        prop_assert_eq!(write_bvh(&second.0, &second.1).unwrap(), written);
    }

    #[test]
    fn single_precision_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (text, _, channels, frames) = random_bvh(&mut rng, 8, 20);
        let (skel, clip) = parse_bvh::<f32>(&text).unwrap();
        let (skel2, clip2) = parse_bvh::<f32>(&write_bvh(&skel, &clip).unwrap()).unwrap();
        prop_assert_eq!(skel2.channel_count(), channels);
        prop_assert_eq!(clip2.frame_count(), frames);
        prop_assert_eq!(skel.fingerprint(), skel2.fingerprint());
    }
}

#[test]
fn fingerprint_tracks_structure_not_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (text, ..) = random_bvh(&mut rng, 6, 5);
    let (skel, clip) = parse_bvh::<f64>(&text).unwrap();
    let mut moved = clip.clone();
    moved.frame_mut(0)[0] += 1.0;
    let (skel2, _) = parse_bvh::<f64>(&write_bvh(&skel, &moved).unwrap()).unwrap();
    assert_eq!(skel.fingerprint(), skel2.fingerprint());
    let trimmed = skel.without_channel(skel.root_index(), 0);
    assert_ne!(trimmed.fingerprint(), skel.fingerprint());
}
