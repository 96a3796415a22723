mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use symgcp::losses::derivative_tensor;
use symgcp::stochastic::{stochastic_gradient, Sampler, SamplerConfig};
use symgcp::{DenseTensor, LossSpec, ModePartition, SparseTensor, SymKruskal, TensorData};

/// Gradient of `⟨Y, M⟩ + regularizer` for an explicit dense `Y`, by enumeration.
fn dense_gradient_oracle(y: &DenseTensor, m: &SymKruskal, gamma: f64) -> (Vec<f64>, Vec<Array2<f64>>) {
    let mats = expanded_factors(m);
    let r = m.rank();
    let mut d_lambda = vec![0.0; r];
    for idx in all_indices(y.dims()) {
        let v = y.values()[linear(y.dims(), &idx)];
        for (j, d) in d_lambda.iter_mut().enumerate() {
            *d += v * idx.iter().enumerate().map(|(n, &i)| mats[n][[i, j]]).product::<f64>();
        }
    }
    let mut d_factors = Vec::new();
    for (k, cell) in m.partition().cells().iter().enumerate() {
        let mut g = Array2::zeros(m.factor(k).raw_dim());
        for &t in cell {
            g += &naive_mttkrp(y, &mats, t);
        }
        for j in 0..r {
            let col = m.factor(k).column(j);
            let nrm2 = col.dot(&col);
            for i in 0..g.nrows() {
                g[[i, j]] = g[[i, j]] * m.lambda()[j] + 4.0 * gamma * (nrm2 - 1.0) * col[i];
            }
        }
        d_factors.push(g);
    }
    (d_lambda, d_factors)
}

fn random_sparse(rng: &mut rand_chacha::ChaCha8Rng, dims: &[usize], count: usize) -> SparseTensor {
    let total: usize = dims.iter().product();
    let mut entries = Vec::new();
    for _ in 0..count {
        let lin = rng.random_range(0..total);
        let mut idx = vec![0; dims.len()];
        let mut rest = lin;
        for (n, d) in dims.iter().enumerate() {
            idx[n] = rest % d;
            rest /= d;
        }
        entries.push((idx, rng.random_range(-2.0..2.0)));
    }
    SparseTensor::from_entries_summing(dims.to_vec(), entries).unwrap().0
}

fn assert_matches_oracle(y: &SparseTensor, m: &SymKruskal, gamma: f64) {
    let g = stochastic_gradient(y, m, gamma, false).unwrap();
    let (dl, df) = dense_gradient_oracle(&y.densify(), m, gamma);
    for (a, b) in g.d_lambda.iter().zip(&dl) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "λ: {a} vs {b}");
    }
    for (ga, gb) in g.d_factors.iter().zip(&df) {
        for (a, b) in ga.iter().zip(gb.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "factor: {a} vs {b}");
        }
    }
}

#[test]
fn sparse_gradient_equals_dense_gradient_of_densified_estimate() {
    let mut rng = rng(11);
    let cases = [
        (ModePartition::full(3), vec![4]),
        (ModePartition::parse("[[1,3],[2]]", 3).unwrap(), vec![3, 5]),
        (ModePartition::singletons(3), vec![2, 3, 4]),
        (ModePartition::parse("[[1,2],[3,4]]", 4).unwrap(), vec![3, 2]),
    ];
    for case in 0..50 {
        let (p, sizes) = &cases[case % cases.len()];
        let dims = dims_for(p, sizes);
        let m = random_model(&mut rng, p, sizes, 3, false);
        let y = random_sparse(&mut rng, &dims, 1 + case % 7);
        assert_matches_oracle(&y, &m, if case % 2 == 0 { 0.0 } else { 0.1 });
    }
}

#[test]
fn samples_sharing_a_fiber_are_not_double_counted() {
    // (0,1,2) and (3,1,2) lie on the same mode-1 fiber.
    let p = ModePartition::singletons(3);
    let m = random_model(&mut rng(2), &p, &[4, 3, 3], 2, false);
    let y = SparseTensor::new(vec![4, 3, 3], vec![(vec![0, 1, 2], 1.5), (vec![3, 1, 2], -0.5)]).unwrap();
    assert_matches_oracle(&y, &m, 0.0);
}

/// Mean and standard error of `densify(Ỹ)` over `batches` draws, per entry.
fn sample_moments(sampler: &mut Sampler, data: &TensorData, loss: &LossSpec, m: &SymKruskal, batches: usize) -> (Vec<f64>, Vec<f64>) {
    let n = data.num_entries();
    let (mut s1, mut s2) = (vec![0.0; n], vec![0.0; n]);
    let wl = loss.clone().into();
    for _ in 0..batches {
        let y = sampler.sample(data, &wl, m).unwrap().densify();
        for (k, v) in y.values().iter().enumerate() {
            s1[k] += v;
            s2[k] += v * v;
        }
    }
    let b = batches as f64;
    let mean: Vec<f64> = s1.iter().map(|s| s / b).collect();
    let se = s2
        .iter()
        .zip(&mean)
        .map(|(s, mu)| ((s / b - mu * mu).max(0.0) / (b - 1.0)).sqrt())
        .collect();
    (mean, se)
}

#[test]
fn estimators_are_unbiased() {
    let mut rng = rng(4);
    let dims = [3, 3, 3];
    let x = random_sparse(&mut rng, &dims, 6).densify();
    let x = SparseTensor::new(
        dims.to_vec(),
        all_indices(&dims)
            .into_iter()
            .filter_map(|i| {
                let v = x.values()[linear(&dims, &i)];
                (v != 0.0).then(|| (i, v.abs().round() + 1.0))
            })
            .collect(),
    )
    .unwrap();
    let data = TensorData::Sparse(x);
    let m = random_model(&mut rng, &ModePartition::singletons(3), &[3, 3, 3], 2, true);
    let loss = LossSpec::from_name("poisson").unwrap();
    let exact = derivative_tensor(&loss.clone().into(), &data, &m).unwrap();
    for cfg in [SamplerConfig::uniform(10, 1), SamplerConfig::stratified(3, 4, 2)] {
        let mut sampler = Sampler::new(cfg.clone()).unwrap();
        let (mean, se) = sample_moments(&mut sampler, &data, &loss, &m, 20_000);
        for (k, y) in exact.values().iter().enumerate() {
            let z = (mean[k] - y) / se[k];
            assert!(z.abs() < 4.0 || (se[k] == 0.0 && mean[k] == *y), "{:?} entry {k}: z = {z}", cfg.kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampled_gradient_is_linear_in_the_estimate(seed in any::<u64>(), c in -3.0f64..3.0) {
        prop_assume!(c != 0.0);
        let mut rng = rng(seed);
        let p = ModePartition::parse("[[1,2],[3]]", 3).unwrap();
        let m = random_model(&mut rng, &p, &[3, 2], 2, false);
        let y = random_sparse(&mut rng, &[3, 3, 2], 5);
        let scaled = SparseTensor::new(
            y.dims().to_vec(),
            y.entries().map(|(i, v)| (i.to_vec(), c * v)).collect(),
        )
        .unwrap();
        let g = stochastic_gradient(&y, &m, 0.0, false).unwrap();
        let gs = stochastic_gradient(&scaled, &m, 0.0, false).unwrap();
        for (a, b) in g.d_lambda.iter().zip(&gs.d_lambda) {
            prop_assert!((c * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
