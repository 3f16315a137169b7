use gomkit_core::bvh::{Axis, DescriptorId};
use gomkit_core::dexterity::{
    equation_report, report_markdown, select_sensors, significance_counts, DexterityError, SensorRanking, Speed, Term,
};
use gomkit_core::gom::{default_sensor_set, AssumptionTag, ChainSpec, GomTopology};
use gomkit_testkit::systems::system_with;
use proptest::prelude::*;

fn default_topology() -> GomTopology {
    GomTopology::from_chains(&default_sensor_set(), &ChainSpec::default()).unwrap()
}

fn id(s: &str) -> DescriptorId {
    s.parse().unwrap()
}

fn hash_p(d: &DescriptorId, t: &Term, salt: u64) -> f64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    (d, format!("{t:?}"), salt).hash(&mut h);
    (h.finish() % 10_000) as f64 / 10_000.0
}

#[test]
fn worked_equation_speeds_and_flags() {
    let topo = default_topology();
    let ra_y = id("RA.y");
    let system = system_with(
        &topo,
        |d, t| match t {
            Term::Regressor(r) if d == &ra_y && r == &id("LA.y") => -0.2,
            Term::Lag(1) => 1.01,
            _ => 0.05,
        },
        |d, t| match (d == &ra_y, t) {
            (true, Term::Lag(1)) => 0.001,
            (true, Term::Lag(2)) => 0.188,
            (true, Term::Regressor(r)) if r == &id("LA.y") => 0.01,
            (false, Term::Regressor(r)) if d == &id("N.x") && r == &id("H.x") => 0.84,
            _ => 0.5,
        },
    );
    let r = equation_report(&system, &ra_y, 0.05).unwrap();
    assert_eq!(r.speed, Speed::Moderate);
    let la = r.terms.iter().find(|t| t.term == Term::Regressor(id("LA.y"))).unwrap();
    assert!(la.significant && la.coefficient < 0.0 && la.tag == AssumptionTag::H3);
    assert_eq!(r.terms.len(), 2 + topo.regressors_of(&ra_y).len());
    let n = equation_report(&system, &id("N.x"), 0.05).unwrap();
    let h = n.terms.iter().find(|t| t.term == Term::Regressor(id("H.x"))).unwrap();
    assert!(!h.significant && h.tag == AssumptionTag::H4n);
    assert_eq!(n.speed, Speed::Fast);
    assert_eq!(
        equation_report(&system, &DescriptorId::new("XX", Axis::X), 0.05),
        Err(DexterityError::UnknownDescriptor("XX.x".into()))
    );
    let md = report_markdown(&system, 0.05);
    assert!(md.contains("### RA.y (speed: moderate)"));
    assert!(md.contains("| LA.y[t-1] | -0.2000 | 0.0100 | H3 | yes |"));
}

#[test]
fn null_system_has_no_significant_terms() {
    let system = system_with(&default_topology(), |_, _| 0.3, |_, _| 1.0);
    for d in &system.topology.descriptors {
        let r = equation_report(&system, d, 0.05).unwrap();
        assert_eq!(r.speed, Speed::Fast);
        assert!(r.terms.iter().all(|t| !t.significant));
    }
    assert!(significance_counts(&system, 0.05).counts.values().all(|&c| c == 0));
}

#[test]
fn only_rfa_significant_ranks_rfa_first() {
    let topo = default_topology();
    let rfa_term = |d: &DescriptorId, t: &Term| match t {
        Term::Lag(_) => d.sensor == "RFA",
        Term::Regressor(r) => r.sensor == "RFA",
    };
    let system = system_with(&topo, |_, _| 0.1, |d, t| if rfa_term(d, t) { 0.001 } else { 0.9 });
    let ranking = significance_counts(&system, 0.05);
    let order = ranking.ordering();
    assert_eq!(order[0].0, "RFA");
    assert!(order[1..].iter().all(|&(_, c)| c == 0));
    // RFA's own three equations plus every equation that lists an RFA descriptor
    let expected = topo
        .descriptors
        .iter()
        .filter(|d| d.sensor == "RFA" || topo.regressors_of(d).iter().any(|(r, _)| r.sensor == "RFA"))
        .count();
    assert_eq!(order[0].1, expected);
    assert_eq!(select_sensors(&ranking, 1).unwrap(), ["RFA"]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lower_threshold_never_raises_counts(salt in any::<u64>(), lo in 0.0..0.5f64, gap in 0.0..0.5f64) {
        let system = system_with(&default_topology(), |_, _| 0.1, |d, t| hash_p(d, t, salt));
        let strict = significance_counts(&system, lo);
        let loose = significance_counts(&system, lo + gap);
        for (s, c) in &strict.counts {
            prop_assert!(*c <= loose.counts[s]);
            prop_assert!(*c <= system.topology.descriptors.len());
        }
    }

    #[test]
    fn selections_nest_and_merges_add(salt in any::<u64>()) {
        let topo = default_topology();
        let a = significance_counts(&system_with(&topo, |_, _| 0.1, |d, t| hash_p(d, t, salt)), 0.05);
        let b = significance_counts(&system_with(&topo, |_, _| 0.1, |d, t| hash_p(d, t, salt ^ 0xabc)), 0.05);
        let mut merged = a.clone();
        merged.merge(&b);
        for (s, c) in &merged.counts {
            prop_assert_eq!(*c, a.counts[s] + b.counts[s]);
        }
        let n = merged.counts.len();
        for k in 1..n {
            let small = select_sensors(&merged, k).unwrap();
            let large = select_sensors(&merged, k + 1).unwrap();
            prop_assert!(small.iter().all(|s| large.contains(s)));
        }
        prop_assert_eq!(select_sensors(&merged, n).unwrap().len(), n);
        prop_assert!(select_sensors(&merged, n + 1).is_err());
    }
}

#[test]
fn tie_at_the_cut_goes_to_the_smaller_label() {
    let ranking = SensorRanking {
        counts: [("RFA", 9), ("SP1", 4), ("LA", 4), ("H", 1)].into_iter().map(|(s, c)| (s.to_string(), c)).collect(),
    };
    assert_eq!(select_sensors(&ranking, 2).unwrap(), ["RFA", "LA"]);
}
