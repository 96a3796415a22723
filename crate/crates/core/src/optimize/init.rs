//! Random starting points scaled to the data norm.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kruskal::SymKruskal;
use crate::partition::ModePartition;
use crate::tensor::TensorData;

/// Gaussian factors with `λ = 1`, all factors scaled by `(‖X‖/‖M₀‖)^{1/N}`
/// so that `‖M‖ = ‖X‖`. With `nonnegative`, entries are absolute values of
/// normal draws so the start lies inside a `≥ 0` box. If `X = 0` the factors
/// are left unscaled.
pub fn initialize_model(
    x: &TensorData,
    partition: &ModePartition,
    rank: usize,
    seed: u64,
    nonnegative: bool,
) -> Result<SymKruskal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initialize_with_rng(x, partition, rank, &mut rng, nonnegative)
}

pub fn initialize_with_rng(
    x: &TensorData,
    partition: &ModePartition,
    rank: usize,
    rng: &mut ChaCha8Rng,
    nonnegative: bool,
) -> Result<SymKruskal> {
    if rank == 0 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    let sizes = partition.cell_sizes(x.dims())?;
    let factors: Vec<Array2<f64>> = sizes
        .iter()
        .map(|&rows| {
            Array2::from_shape_simple_fn((rows, rank), || {
                let v: f64 = StandardNormal.sample(rng);
                if nonnegative {
                    v.abs()
                } else {
                    v
                }
            })
        })
        .collect();
    let mut m = SymKruskal::with_unit_weights(factors, partition.clone())?;
    let xn = x.norm();
    let mn = m.norm();
    if xn == 0.0 {
        log::warn!("data tensor is zero; initial factors left unscaled");
    } else if mn > 0.0 {
        m.scale_factors((xn / mn).powf(1.0 / x.order() as f64));
    }
    Ok(m)
}
