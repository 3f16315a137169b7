use std::collections::BTreeMap;

use gomkit_core::bvh::DescriptorId;
use gomkit_core::dexterity::Term;
use gomkit_core::gom::{GomModel, GomSystem, GomTopology, TermValues, TrainingMeta};

/// System over `topology` where every coefficient is `coef(descriptor, term)` and
/// every p-value is `p(descriptor, term)`.
pub fn system_with(
    topology: &GomTopology,
    coef: impl Fn(&DescriptorId, &Term) -> f64,
    p: impl Fn(&DescriptorId, &Term) -> f64,
) -> GomSystem<f64> {
    let models = topology
        .descriptors
        .iter()
        .map(|d| {
            let regs = topology.regressors_of(d);
            let lags = [Term::Lag(1), Term::Lag(2)];
            let per = |f: &dyn Fn(&DescriptorId, &Term) -> f64| TermValues {
                alpha: [f(d, &lags[0]), f(d, &lags[1])],
                betas: regs.iter().map(|(r, _)| (r.clone(), f(d, &Term::Regressor(r.clone())))).collect(),
            };
            let c = per(&coef);
            let model = GomModel {
                descriptor: d.clone(),
                alpha: c.alpha,
                betas: c.betas,
                obs_noise_var: 1e-6,
                p_values: per(&p),
                std_errors: per(&|_, _| 0.1),
                log_likelihood: 0.0,
                observations: 100,
            };
            (d.clone(), model)
        })
        .collect::<BTreeMap<_, _>>();
    GomSystem::new(
        topology.clone(),
        models,
        TrainingMeta { source: "synthetic".into(), reference_index: 0, frame_time: 1.0 / 90.0 },
    )
    .expect("consistent synthetic system")
}
