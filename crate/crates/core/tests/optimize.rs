mod common;

use common::*;
use ndarray::Array2;
use symgcp::optimize::lbfgsb::minimize;
use symgcp::optimize::{fit_adam, fit_lbfgsb, initialize_model, AdamConfig, Bounds, LbfgsbConfig, TraceKind};
use symgcp::stochastic::SamplerConfig;
use symgcp::synth::cosine_score;
use symgcp::{LossSpec, ModePartition, Objective, ObjectiveConfig, SymKruskal, TensorData};

#[test]
fn recovers_a_rank_one_symmetric_tensor() {
    let a = Array2::from_shape_vec((5, 1), vec![0.5, -1.0, 0.3, 0.8, 0.1]).unwrap();
    let truth = SymKruskal::new(vec![2.0], vec![a.clone()], ModePartition::full(3)).unwrap();
    let data = TensorData::Dense(truth.reconstruct());
    let cfg = ObjectiveConfig::new(LossSpec::LeastSquares, ModePartition::full(3), 1)
        .with_gamma(0.0)
        .with_fastpath(true);
    let obj = Objective::new(cfg, &data).unwrap();
    let init = initialize_model(&data, &ModePartition::full(3), 1, 4, false).unwrap();
    let out = fit_lbfgsb(&obj, init, &LbfgsbConfig::default()).unwrap();
    assert!(out.objective < 1e-10, "{}", out.objective);
    let fit = out.model.reconstruct();
    for (x, y) in fit.values().iter().zip(data.to_dense().values()) {
        assert!((x - y).abs() < 1e-5);
    }
    let score = cosine_score(&a.mapv(f64::abs), &out.model.factor(0).mapv(f64::abs)).unwrap();
    assert!(score > 0.9999);
}

#[test]
fn trace_is_monotone_for_lbfgsb() {
    let mut rng = rng(8);
    let p = ModePartition::parse("[[1,2],[3]]", 3).unwrap();
    let dims = dims_for(&p, &[4, 3]);
    let data = TensorData::Dense(symmetrize(&random_counts(&mut rng, &dims, 4), &p));
    let obj = Objective::new(ObjectiveConfig::new(LossSpec::from_name("poisson").unwrap(), p.clone(), 2), &data).unwrap();
    let init = initialize_model(&data, &p, 2, 1, true).unwrap();
    let f0 = obj.value(&init).unwrap();
    let out = fit_lbfgsb(&obj, init, &LbfgsbConfig::default()).unwrap();
    let recs = out.trace.records();
    assert!(recs.windows(2).all(|w| w[1].objective <= w[0].objective && w[1].wall_seconds >= w[0].wall_seconds));
    assert!(out.objective < f0);
    assert!(out.model.factors().iter().all(|f| f.iter().all(|v| *v >= 0.0)));
}

#[test]
fn lbfgsb_respects_bounds_on_a_quadratic() {
    // min Σ (x_i − c_i)² over x ≥ 0: solution max(c, 0).
    let c = [1.5, -2.0, 0.25, -0.1, 3.0];
    let bounds = Bounds::lower(c.len(), 0.0);
    let res = minimize(
        &LbfgsbConfig::default(),
        vec![1.0; c.len()],
        &bounds,
        |x: &[f64]| {
            let f = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((f, x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect()))
        },
        |_, _, _| {},
    )
    .unwrap();
    assert!(res.status.converged());
    for (x, b) in res.x.iter().zip(&c) {
        assert!((x - b.max(0.0)).abs() < 1e-8);
    }
}

#[test]
fn adam_reduces_the_objective_and_stays_feasible() {
    let mut rng = rng(12);
    let p = ModePartition::full(3);
    let truth = random_model(&mut rng, &p, &[8], 2, true);
    let x = truth.reconstruct().sparsify(0.0);
    let data = TensorData::Sparse(x);
    let obj = Objective::new(
        ObjectiveConfig::new(LossSpec::from_name("poisson").unwrap(), p.clone(), 2).with_fastpath(true),
        &data,
    )
    .unwrap();
    let init = initialize_model(&data, &p, 2, 3, true).unwrap();
    let f0 = obj.value(&init).unwrap();
    let cfg = AdamConfig {
        max_epochs: 30,
        iters_per_epoch: 50,
        learning_rate: 0.05,
        sampler: SamplerConfig::uniform(64, 5),
        exact_monitor: true,
        ..AdamConfig::default()
    };
    let out = fit_adam(&obj, init.clone(), &cfg).unwrap();
    assert!(out.objective < f0, "{} !< {f0}", out.objective);
    assert!(out.model.factors().iter().all(|f| f.iter().all(|v| *v >= 0.0)));
    assert!(out.trace.of_kind(TraceKind::Exact).count() >= 1);
    // Reruns with the same seed are identical.
    let again = fit_adam(&obj, init, &cfg).unwrap();
    assert_eq!(out.model, again.model);
}
