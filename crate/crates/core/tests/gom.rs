use gomkit_core::bvh::{Axis, DescriptorId};
use gomkit_core::dexterity::Term;
use gomkit_core::gom::{
    default_sensor_set, fit, fit_equation, predict_open_loop, simulate, ChainSpec, DescriptorFrames, GomError, GomSystem,
    GomTopology, RIDGE,
};
use gomkit_testkit::oracles::ridge_ols_qr;
use gomkit_testkit::synth::{ar1, arx2, gaussian_vec};
use gomkit_testkit::systems::system_with;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ra_ids() -> Vec<DescriptorId> {
    Axis::ALL.map(|a| DescriptorId::new("RA", a)).to_vec()
}

fn ra_topology() -> GomTopology {
    GomTopology::from_chains(&["RA".to_string()], &ChainSpec::default()).unwrap()
}

fn x() -> DescriptorId {
    DescriptorId::new("RA", Axis::X)
}

/// RA.x follows an ARX(2) driven by RA.y and RA.z, which are independent AR(1) inputs.
fn arx_frames(seed: u64, alpha: [f64; 2], betas: [f64; 2], len: usize, sd: f64) -> DescriptorFrames<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u1 = ar1(&mut rng, 0.9, len, 1.0);
    let u2 = ar1(&mut rng, 0.7, len, 1.0);
    let y = arx2(&mut rng, alpha, &betas, &[u1.clone(), u2.clone()], len, sd);
    DescriptorFrames::new(ra_ids(), 1.0 / 90.0, vec![y, u1, u2]).unwrap()
}

#[test]
fn recovers_lag_and_input_coefficients() {
    for seed in 0..5 {
        let frames = arx_frames(seed, [1.5, -0.7], [0.3, -0.2], 2000, 0.1);
        let m = fit_equation(&frames, &ra_topology(), &x()).unwrap();
        assert!((m.alpha[0] - 1.5).abs() < 0.05 && (m.alpha[1] + 0.7).abs() < 0.05, "seed {seed}: {:?}", m.alpha);
        let b = |a| m.betas[&DescriptorId::new("RA", a)];
        assert!((b(Axis::Y) - 0.3).abs() < 0.05 && (b(Axis::Z) + 0.2).abs() < 0.05);
        assert!((m.obs_noise_var - 0.01).abs() < 0.002);
        assert!(m.p_values.alpha.iter().all(|&p| p < 1e-6));
    }
}

#[test]
fn coefficients_equal_ridge_least_squares() {
    for seed in 0..10 {
        let frames = arx_frames(100 + seed, [0.9, -0.2], [0.5, 0.1], 300, 1.0);
        let m = fit_equation(&frames, &ra_topology(), &x()).unwrap();
        let topo = ra_topology();
        let regs: Vec<&DescriptorId> = topo.regressors_of(&x()).iter().map(|(r, _)| r).collect();
        let y = frames.column(&x()).unwrap();
        let design: Vec<Vec<f64>> = (2..y.len())
            .map(|t| {
                let mut row = vec![y[t - 1], y[t - 2]];
                row.extend(regs.iter().map(|r| frames.column(r).unwrap()[t - 1]));
                row
            })
            .collect();
        let oracle = ridge_ols_qr(&design, &y[2..], RIDGE);
        let ours: Vec<f64> = m.alpha.iter().copied().chain(regs.iter().map(|r| m.betas[*r])).collect();
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {ours:?} vs {oracle:?}");
        }
    }
}

#[test]
fn null_coefficient_rejection_rate_is_near_nominal() {
    let mut rejected = 0;
    let trials = 200;
    for seed in 0..trials {
        let frames = arx_frames(1000 + seed, [0.6, 0.2], [0.4, 0.0], 200, 1.0);
        let m = fit_equation(&frames, &ra_topology(), &x()).unwrap();
        if m.p_values.betas[&DescriptorId::new("RA", Axis::Z)] < 0.05 {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / trials as f64;
    assert!((0.01..=0.11).contains(&rate), "rejection rate {rate}");
}

#[test]
fn constant_channel_fails_alone_and_short_reference_is_rejected() {
    let mut frames = arx_frames(5, [1.0, -0.3], [0.2, 0.2], 100, 1.0);
    frames = DescriptorFrames::new(ra_ids(), frames.frame_time, vec![frames.columns()[0].clone(), vec![4.0; 100], frames.columns()[2].clone()]).unwrap();
    match fit(&frames, &ra_topology()) {
        Err(GomError::Fit(failures)) => {
            assert_eq!(failures.len(), 1);
            assert_eq!(failures[0].0, "RA.y");
            assert!(matches!(failures[0].1, GomError::Singular { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
    let short = DescriptorFrames::new(ra_ids(), 0.01, vec![vec![1.0, 2.0, 0.5, 1.5]; 3]).unwrap();
    assert!(matches!(fit(&short, &ra_topology()), Err(GomError::Fit(_))));
}

#[test]
fn full_default_system_fits_and_round_trips() {
    let sensors = default_sensor_set();
    let topo = GomTopology::from_chains(&sensors, &ChainSpec::default()).unwrap();
    assert_eq!(topo.descriptors.len(), 54);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cols: Vec<Vec<f64>> = topo.descriptors.iter().map(|_| ar1(&mut rng, 0.95, 600, 1.0)).collect();
    let frames = DescriptorFrames::new(topo.descriptors.clone(), 1.0 / 90.0, cols).unwrap();
    let system = fit(&frames, &topo).unwrap();
    assert_eq!(system.models.len(), 54);
    for (d, m) in &system.models {
        // every symbol used by an equation is a descriptor of the topology
        assert!(m.betas.keys().all(|r| topo.index_of(r).is_some()));
        assert!(m.obs_noise_var > 0.0 && m.log_likelihood.is_finite(), "{d}");
    }
    let back = GomSystem::<f64>::from_json(&system.to_json()).unwrap();
    assert_eq!(back.topology, system.topology);
    for (d, m) in &system.models {
        let b = &back.models[d];
        assert!((m.alpha[0] - b.alpha[0]).abs() <= 1e-12 * m.alpha[0].abs().max(1.0));
        assert_eq!(m.betas.len(), b.betas.len());
    }
}

#[test]
fn noiseless_random_walk_holds_the_last_seed_frame() {
    let topo = GomTopology::from_chains(&["RA".to_string(), "LA".to_string()], &ChainSpec::default()).unwrap();
    let system = system_with(&topo, |_, t| if *t == Term::Lag(1) { 1.0 } else { 0.0 }, |_, _| 1.0);
    let seed = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![-7.5, 0.25, 3.0, 11.0, -2.0, 0.0]];
    let out = simulate(&system, &seed, 50).unwrap();
    assert_eq!(out.len(), 50);
    assert_eq!(&out[..2], &seed[..]);
    assert!(out[2..].iter().all(|r| r == &seed[1]));
}

#[test]
fn fitted_sinusoid_continues_for_a_period() {
    let period = 45.0;
    let len = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sine = |t: usize| 30.0 * (std::f64::consts::TAU * t as f64 / period + 0.4).sin();
    let cols = vec![
        (0..len).map(sine).collect::<Vec<_>>(),
        gaussian_vec(&mut rng, len, 1.0),
        gaussian_vec(&mut rng, len, 1.0),
    ];
    let frames = DescriptorFrames::new(ra_ids(), 1.0 / 90.0, cols).unwrap();
    let system = fit(&frames, &ra_topology()).unwrap();
    let rows = frames.rows();
    let sim = simulate(&system, &rows[..2], period as usize + 2).unwrap();
    let worst = (0..sim.len()).map(|t| (sim[t][0] - sine(t)).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05 * 30.0, "max deviation {worst}");
}

#[test]
fn simulation_is_deterministic_and_open_loop_tracks_data() {
    let frames = arx_frames(77, [1.3, -0.45], [0.2, -0.1], 500, 0.3);
    let system = fit(&frames, &ra_topology()).unwrap();
    let rows = frames.rows();
    let a = simulate(&system, &rows[..2], 300).unwrap();
    let b = simulate(&system, &rows[..2], 300).unwrap();
    assert_eq!(a, b);
    let pred = predict_open_loop(&system, &rows).unwrap();
    let err: f64 = (2..rows.len()).map(|t| (pred[t][0] - rows[t][0]).powi(2)).sum::<f64>() / (rows.len() - 2) as f64;
    assert!((err - system.models[&x()].obs_noise_var).abs() < 1e-9);
}

#[test]
fn unstable_system_diverges_with_context() {
    let system = system_with(&ra_topology(), |_, t| if *t == Term::Lag(1) { 2.0 } else { 0.0 }, |_, _| 1.0);
    let err = simulate(&system, &[vec![1.0; 3], vec![1.0; 3]], 100).unwrap_err();
    match err {
        GomError::Divergence { step, value, .. } => {
            assert!(value.abs() > 1e4);
            assert_eq!(step, 15);
        }
        other => panic!("unexpected {other:?}"),
    }
}
