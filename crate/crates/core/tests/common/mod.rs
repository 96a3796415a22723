//! Random instances and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use symgcp::{DenseTensor, ModePartition, Objective, ParamLayout, SymKruskal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every multi-index of `dims`, first index fastest.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; dims.len()];
    for _ in 0..total {
        out.push(idx.clone());
        for (n, d) in dims.iter().enumerate() {
            idx[n] += 1;
            if idx[n] < *d {
                break;
            }
            idx[n] = 0;
        }
    }
    out
}

pub fn linear(dims: &[usize], idx: &[usize]) -> usize {
    let mut lin = 0;
    for n in (0..dims.len()).rev() {
        lin = lin * dims[n] + idx[n];
    }
    lin
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every index obtained from `idx` by permuting positions within cells.
pub fn orbit(idx: &[usize], partition: &ModePartition) -> Vec<Vec<usize>> {
    let mut out = vec![idx.to_vec()];
    for cell in partition.cells() {
        let mut next = Vec::new();
        for base in &out {
            for p in permutations(cell.len()) {
                let mut v = base.clone();
                for (slot, &from) in cell.iter().zip(&p) {
                    v[*slot] = base[cell[from]];
                }
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Dims for a partition with the given size per cell.
pub fn dims_for(partition: &ModePartition, cell_sizes: &[usize]) -> Vec<usize> {
    partition.sigma().iter().map(|&k| cell_sizes[k]).collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, partition: &ModePartition, cell_sizes: &[usize], rank: usize, positive: bool) -> SymKruskal {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let draw = |rng: &mut ChaCha8Rng| {
        let v: f64 = normal.sample(rng);
        if positive {
            0.2 + v.abs()
        } else {
            v
        }
    };
    let factors = cell_sizes
        .iter()
        .map(|&n| Array2::from_shape_simple_fn((n, rank), || draw(rng)))
        .collect();
    let lambda = (0..rank).map(|_| draw(rng)).collect();
    SymKruskal::new(lambda, factors, partition.clone()).unwrap()
}

pub fn random_dense(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    let total: usize = dims.iter().product();
    let normal = Normal::new(0.0, 1.0).unwrap();
    DenseTensor::new(dims.to_vec(), (0..total).map(|_| normal.sample(rng)).collect()).unwrap()
}

/// Random nonnegative integers, for count and binary data.
pub fn random_counts(rng: &mut ChaCha8Rng, dims: &[usize], max: u32) -> DenseTensor {
    let total: usize = dims.iter().product();
    DenseTensor::new(dims.to_vec(), (0..total).map(|_| rng.random_range(0..=max) as f64).collect()).unwrap()
}

/// Average over within-cell permutations.
pub fn symmetrize(t: &DenseTensor, partition: &ModePartition) -> DenseTensor {
    let dims = t.dims().to_vec();
    DenseTensor::from_fn(dims.clone(), |i| {
        let o = orbit(i, partition);
        o.iter().map(|j| t.values()[linear(&dims, j)]).sum::<f64>() / o.len() as f64
    })
    .unwrap()
}

/// `Σ_i y_i Π_{n≠mode} A_n[i_n, j]` by enumerating every index.
pub fn naive_mttkrp(y: &DenseTensor, mats: &[Array2<f64>], mode: usize) -> Array2<f64> {
    let r = mats[0].ncols();
    let mut out = Array2::zeros((y.dims()[mode], r));
    for idx in all_indices(y.dims()) {
        let v = y.values()[linear(y.dims(), &idx)];
        for j in 0..r {
            let mut p = v;
            for (n, a) in mats.iter().enumerate() {
                if n != mode {
                    p *= a[[idx[n], j]];
                }
            }
            out[[idx[mode], j]] += p;
        }
    }
    out
}

/// Per-mode factor matrices of a model, expanded through σ.
pub fn expanded_factors(m: &SymKruskal) -> Vec<Array2<f64>> {
    m.partition().sigma().iter().map(|&k| m.factor(k).clone()).collect()
}

/// Central differences of the objective in every flat coordinate.
pub fn finite_difference(obj: &Objective<'_>, m: &SymKruskal, layout: &ParamLayout) -> Vec<f64> {
    let x = layout.flatten(m);
    (0..x.len())
        .map(|c| {
            let h = 1e-6 * x[c].abs().max(1.0);
            let mut xp = x.clone();
            xp[c] += h;
            let mut xm = x.clone();
            xm[c] -= h;
            let fp = obj.value(&layout.unflatten(&xp, m).unwrap()).unwrap();
            let fm = obj.value(&layout.unflatten(&xm, m).unwrap()).unwrap();
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// `max_c |a_c − b_c| / max(|a_c|, |b_c|, 1)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
