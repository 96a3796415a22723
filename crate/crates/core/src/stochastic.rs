//! Sampled, unbiased estimates of the derivative tensor and the stochastic
//! gradients built from them.
//!
//! Uniform sampling draws `s` indices with replacement from the whole index
//! set and scales each by `T/s` (`T = ∏ I_n`). Stratified sampling draws `p`
//! stored nonzeros and `q` zero entries (by rejection) and scales them by
//! `nnz/p` and `(T − nnz)/q`. Repeated draws are collapsed into one entry
//! carrying its multiplicity.

use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{mttkrp_coords, sampled_rows};
use crate::kruskal::SymKruskal;
use crate::losses::WeightedLoss;
use crate::objective::{add_regularizer_gradient, GradientBundle};
use crate::tensor::{linear_index, DenseTensor, SparseTensor, TensorData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform { batch: usize },
    Stratified { nonzeros: usize, zeros: usize },
}

/// Scale applied to sampled zero entries in stratified sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroScale {
    /// `(T − nnz)/q`, which makes the estimator unbiased.
    #[default]
    Unbiased,
    /// `(1 − nnz)/q`, kept only to compare against the unbiased scale.
    OneMinusNnz,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub seed: u64,
    /// Attempts allowed per zero draw before giving up.
    pub max_rejection_iters: usize,
    pub zero_scale: ZeroScale,
}

impl SamplerConfig {
    pub fn uniform(batch: usize, seed: u64) -> Self {
        Self {
            kind: SamplerKind::Uniform { batch },
            seed,
            max_rejection_iters: 1000,
            zero_scale: ZeroScale::Unbiased,
        }
    }

    pub fn stratified(nonzeros: usize, zeros: usize, seed: u64) -> Self {
        Self {
            kind: SamplerKind::Stratified { nonzeros, zeros },
            seed,
            max_rejection_iters: 1000,
            zero_scale: ZeroScale::Unbiased,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SamplerKind::Uniform { batch } if batch == 0 => {
                Err(Error::Config("uniform batch size must be at least 1".into()))
            }
            SamplerKind::Stratified { nonzeros, zeros } if nonzeros + zeros == 0 => {
                Err(Error::Config("stratified sampler needs at least one sample".into()))
            }
            _ if self.max_rejection_iters == 0 => {
                Err(Error::Config("max_rejection_iters must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Same sampler with every batch size multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Self {
        let kind = match self.kind {
            SamplerKind::Uniform { batch } => SamplerKind::Uniform { batch: batch * factor },
            SamplerKind::Stratified { nonzeros, zeros } => SamplerKind::Stratified {
                nonzeros: nonzeros * factor,
                zeros: zeros * factor,
            },
        };
        Self { kind, ..self.clone() }
    }
}

/// Sampled indices with their unbiasing scale (class scale times multiplicity).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dims: Vec<usize>,
    /// `len × N` indices, row-major.
    coords: Vec<usize>,
    linear: Vec<usize>,
    multiplicity: Vec<usize>,
    scale: Vec<f64>,
}

impl SampleSet {
    fn new(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            coords: Vec::new(),
            linear: Vec::new(),
            multiplicity: Vec::new(),
            scale: Vec::new(),
        }
    }

    /// Every entry exactly once with scale one; estimates become exact.
    pub fn exhaustive(dims: &[usize]) -> Self {
        let total: usize = dims.iter().product();
        let mut set = Self::new(dims);
        let mut idx = vec![0; dims.len()];
        for lin in 0..total {
            crate::tensor::multi_index(dims, lin, &mut idx);
            set.coords.extend_from_slice(&idx);
            set.linear.push(lin);
            set.multiplicity.push(1);
            set.scale.push(1.0);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn index(&self, k: usize) -> &[usize] {
        let n = self.dims.len();
        &self.coords[k * n..(k + 1) * n]
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicity
    }

    pub fn scales(&self) -> &[f64] {
        &self.scale
    }

    /// Adds one draw group: collapses `draws` (linear indices) and scales each
    /// distinct index by `unit × multiplicity`.
    fn push_group(&mut self, draws: &[usize], unit: f64) {
        let n = self.dims.len();
        let mut pos: HashMap<usize, usize> = HashMap::with_capacity(draws.len());
        let start = self.linear.len();
        let mut idx = vec![0; n];
        for &lin in draws {
            match pos.get(&lin) {
                Some(&p) => self.multiplicity[p] += 1,
                None => {
                    pos.insert(lin, self.linear.len());
                    crate::tensor::multi_index(&self.dims, lin, &mut idx);
                    self.coords.extend_from_slice(&idx);
                    self.linear.push(lin);
                    self.multiplicity.push(1);
                }
            }
        }
        self.scale
            .extend(self.multiplicity[start..].iter().map(|&c| c as f64 * unit));
    }

    /// `Σ_k scale_k w_k f(x_k, m_k)` with `m_k` read from the model.
    fn weighted_sum(
        &self,
        data: &TensorData,
        loss: &WeightedLoss,
        m: &SymKruskal,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|k| {
                let lin = self.linear[k];
                let w = loss.weight(lin);
                if w == 0.0 {
                    return Ok(0.0);
                }
                let idx = self.index(k);
                let mv = m.entry_unchecked(idx);
                if !loss.base.in_domain(mv) {
                    return Err(Error::Domain {
                        loss: loss.base.name().to_string(),
                        value: mv,
                        index: idx.to_vec(),
                    });
                }
                Ok(self.scale[k] * w * f(data.get_linear(lin), mv))
            })
            .collect()
    }
}

/// A sparse unbiased estimate `Ỹ` of the derivative tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDerivative {
    pub samples: SampleSet,
    /// `ỹ` for each collapsed index.
    pub values: Vec<f64>,
    /// `∏ I_n`.
    pub total_entries: usize,
    pub nnz: usize,
}

impl SampledDerivative {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn densify(&self) -> DenseTensor {
        let mut v = vec![0.0; self.total_entries];
        for (k, &lin) in self.samples.linear.iter().enumerate() {
            v[lin] += self.values[k];
        }
        DenseTensor::new(self.samples.dims.clone(), v).expect("dims from data")
    }

    /// Coordinate form with zero estimates dropped.
    pub fn to_sparse(&self) -> SparseTensor {
        let n = self.samples.dims.len();
        let mut coords = Vec::with_capacity(self.samples.coords.len());
        let mut values = Vec::with_capacity(self.values.len());
        for (k, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                coords.extend_from_slice(&self.samples.coords[k * n..(k + 1) * n]);
                values.push(v);
            }
        }
        SparseTensor::from_parts_unchecked(self.samples.dims.clone(), coords, values)
    }
}

fn uniform_linear(rng: &mut ChaCha8Rng, dims: &[usize]) -> usize {
    // Draw each mode separately so the index is uniform over the product set.
    let mut lin = 0;
    for &d in dims.iter().rev() {
        lin = lin * d + rng.random_range(0..d);
    }
    lin
}

/// Draws `batch` indices uniformly with replacement.
pub fn draw_uniform(rng: &mut ChaCha8Rng, dims: &[usize], batch: usize) -> SampleSet {
    let total: usize = dims.iter().product();
    let draws: Vec<usize> = (0..batch).map(|_| uniform_linear(rng, dims)).collect();
    let mut set = SampleSet::new(dims);
    set.push_group(&draws, total as f64 / batch as f64);
    set
}

/// Draws `nonzeros` stored entries and `zeros` unstored entries, each with replacement.
pub fn draw_stratified(
    rng: &mut ChaCha8Rng,
    data: &SparseTensor,
    nonzeros: usize,
    zeros: usize,
    max_rejection_iters: usize,
    zero_scale: ZeroScale,
) -> Result<SampleSet> {
    let dims = data.dims();
    let total = data.num_entries();
    let nnz = data.nnz();
    let mut set = SampleSet::new(dims);
    if nnz > 0 && nonzeros > 0 {
        let draws: Vec<usize> = (0..nonzeros)
            .map(|_| linear_index(dims, data.index(rng.random_range(0..nnz))))
            .collect();
        set.push_group(&draws, nnz as f64 / nonzeros as f64);
    }
    if zeros > 0 {
        let mut draws = Vec::with_capacity(zeros);
        for _ in 0..zeros {
            let mut found = None;
            for _ in 0..max_rejection_iters {
                let lin = uniform_linear(rng, dims);
                if !data.contains_linear(lin) {
                    found = Some(lin);
                    break;
                }
            }
            draws.push(found.ok_or(Error::RejectionBudget {
                iters: max_rejection_iters,
            })?);
        }
        let unit = match zero_scale {
            ZeroScale::Unbiased => (total - nnz) as f64 / zeros as f64,
            ZeroScale::OneMinusNnz => (1.0 - nnz as f64) / zeros as f64,
        };
        set.push_group(&draws, unit);
    }
    Ok(set)
}

/// Owns the random stream for one fit.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self { cfg, rng })
    }

    /// Sampler on an explicit stream, for deriving independent streams from one seed.
    pub fn with_rng(cfg: SamplerConfig, rng: ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, rng })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn draw(&mut self, data: &TensorData) -> Result<SampleSet> {
        match (self.cfg.kind, data) {
            (SamplerKind::Uniform { batch }, _) => Ok(draw_uniform(&mut self.rng, data.dims(), batch)),
            (SamplerKind::Stratified { nonzeros, zeros }, TensorData::Sparse(x)) => draw_stratified(
                &mut self.rng,
                x,
                nonzeros,
                zeros,
                self.cfg.max_rejection_iters,
                self.cfg.zero_scale,
            ),
            (SamplerKind::Stratified { .. }, TensorData::Dense(_)) => Err(Error::Config(
                "stratified sampling needs sparse (coordinate) data".into(),
            )),
        }
    }

    /// Draws a batch and evaluates `ỹ` on it.
    pub fn sample(&mut self, data: &TensorData, loss: &WeightedLoss, m: &SymKruskal) -> Result<SampledDerivative> {
        let samples = self.draw(data)?;
        sampled_derivative(samples, data, loss, m)
    }
}

/// `ỹ_i = scale_i · w_i · ∂ℓ/∂m(x_i, m_i)` on a drawn sample set.
pub fn sampled_derivative(
    samples: SampleSet,
    data: &TensorData,
    loss: &WeightedLoss,
    m: &SymKruskal,
) -> Result<SampledDerivative> {
    let values = samples.weighted_sum(data, loss, m, |x, mv| loss.base.deriv(x, mv))?;
    Ok(SampledDerivative {
        samples,
        values,
        total_entries: data.num_entries(),
        nnz: data.nnz(),
    })
}

/// Convenience wrapper: one uniform batch.
pub fn sample_uniform(
    cfg: &SamplerConfig,
    data: &TensorData,
    loss: &WeightedLoss,
    m: &SymKruskal,
) -> Result<SampledDerivative> {
    Sampler::new(cfg.clone())?.sample(data, loss, m)
}

/// Convenience wrapper: one stratified batch.
pub fn sample_stratified(
    cfg: &SamplerConfig,
    data: &SparseTensor,
    loss: &WeightedLoss,
    m: &SymKruskal,
) -> Result<SampledDerivative> {
    let data = TensorData::Sparse(data.clone());
    Sampler::new(cfg.clone())?.sample(&data, loss, m)
}

/// Gradient from a sparse derivative estimate, assembled from sampled factor
/// rows: `∂λ = (∗_j Â_{σ_j})ᵀ ŷ` and, per cell, the sum over its modes of the
/// sparse MTTKRPs times `diag(λ)`. The regularizer gradient is added exactly.
pub fn stochastic_gradient(
    y: &SparseTensor,
    m: &SymKruskal,
    gamma: f64,
    lambda_frozen: bool,
) -> Result<GradientBundle> {
    if y.dims() != m.dims().as_slice() {
        return Err(Error::shape(format!(
            "estimate dims {:?} differ from model dims {:?}",
            y.dims(),
            m.dims()
        )));
    }
    let fs = m.factor_sequence();
    let n = y.order();
    let r = m.rank();
    let mut grad = GradientBundle::zeros_like(m, lambda_frozen);

    for (k, cell) in m.partition().cells().iter().enumerate() {
        let g = &mut grad.d_factors[k];
        for &t in cell {
            *g += &mttkrp_coords(y.coords(), y.values(), y.dims(), &fs, t);
        }
        for (mut col, &lam) in g.columns_mut().into_iter().zip(m.lambda()) {
            col *= lam;
        }
    }

    // Hadamard product of the sampled rows of every mode.
    let s = y.nnz();
    let mut hadamard = Array2::<f64>::ones((s, r));
    let mut rows = vec![0usize; s];
    for mode in 0..n {
        for (w, row) in rows.iter_mut().enumerate() {
            *row = y.index(w)[mode];
        }
        hadamard *= &sampled_rows(fs.mode(mode), &rows)?;
    }
    let yhat = ndarray::ArrayView1::from(y.values());
    grad.d_lambda = hadamard.t().dot(&yhat).to_vec();

    add_regularizer_gradient(m, gamma, &mut grad);
    Ok(grad)
}

/// Objective estimate from one sample set drawn at the start of a run, so
/// successive estimates are directly comparable.
#[derive(Debug, Clone)]
pub struct LossEstimator {
    samples: SampleSet,
}

impl LossEstimator {
    pub fn new(samples: SampleSet) -> Self {
        Self { samples }
    }

    /// Draws the fixed set with `sampler`'s strategy.
    pub fn draw(sampler: &mut Sampler, data: &TensorData) -> Result<Self> {
        Ok(Self::new(sampler.draw(data)?))
    }

    pub fn exhaustive(dims: &[usize]) -> Self {
        Self::new(SampleSet::exhaustive(dims))
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    /// Unbiased estimate of `Σ_i w_i ℓ(x_i, m_i)` (no regularizer).
    pub fn estimate_loss(&self, data: &TensorData, loss: &WeightedLoss, m: &SymKruskal) -> Result<f64> {
        let terms = self
            .samples
            .weighted_sum(data, loss, m, |x, mv| loss.base.value(x, mv))?;
        Ok(terms.iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossSpec;
    use crate::partition::ModePartition;
    use ndarray::array;

    fn tiny_model() -> SymKruskal {
        SymKruskal::new(vec![1.0], vec![array![[1.0], [2.0]]], ModePartition::full(4)).unwrap()
    }

    #[test]
    fn uniform_scaling_with_multiplicity() {
        let dims = [2, 2, 2, 2];
        let mut set = SampleSet::new(&dims);
        set.push_group(&[3, 5, 3, 7], 16.0 / 4.0);
        assert_eq!(set.len(), 3);
        assert_eq!(set.multiplicities(), &[2, 1, 1]);
        assert_eq!(set.scales(), &[8.0, 4.0, 4.0]);

        // deriv 0.5 sampled once: 16/4 × 0.5 = 2
        let x = TensorData::Dense(DenseTensor::zeros(dims.to_vec()).unwrap());
        let custom = LossSpec::custom("half", |_, m| 0.5 * m, |_, _| 0.5, None).unwrap();
        let loss = WeightedLoss::unweighted(custom);
        let d = sampled_derivative(set, &x, &loss, &tiny_model()).unwrap();
        assert_eq!(d.values, vec![4.0, 2.0, 2.0]);
    }

    #[test]
    fn stratified_scales() {
        // nnz = 10, p = 5, sampled twice → 2 · 10/5 = 4 per unit derivative
        let entries: Vec<_> = (0..10).map(|i| (vec![i, 0], 1.0)).collect();
        let x = SparseTensor::new(vec![10, 10], entries).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = draw_stratified(&mut rng, &x, 5, 9, 100, ZeroScale::Unbiased).unwrap();
        for k in 0..set.len() {
            let lin = set.linear[k];
            let unit = if x.contains_linear(lin) { 2.0 } else { 10.0 };
            assert_eq!(set.scales()[k], unit * set.multiplicities()[k] as f64);
        }
        assert_eq!(set.multiplicities().iter().sum::<usize>(), 14);
    }

    #[test]
    fn rejection_budget_exhausted() {
        let entries: Vec<_> = (0..4).map(|i| (vec![i / 2, i % 2], 1.0)).collect();
        let full = SparseTensor::new(vec![2, 2], entries).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = draw_stratified(&mut rng, &full, 1, 1, 50, ZeroScale::Unbiased).unwrap_err();
        assert!(matches!(err, Error::RejectionBudget { iters: 50 }));
    }

    #[test]
    fn same_seed_same_sample() {
        let x = TensorData::Dense(tiny_model().reconstruct());
        let loss = WeightedLoss::unweighted(LossSpec::LeastSquares);
        let m = tiny_model();
        let cfg = SamplerConfig::uniform(7, 99);
        let a = sample_uniform(&cfg, &x, &loss, &m).unwrap();
        let b = sample_uniform(&cfg, &x, &loss, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dense_data_rejects_stratified() {
        let x = TensorData::Dense(tiny_model().reconstruct());
        let mut s = Sampler::new(SamplerConfig::stratified(1, 1, 0)).unwrap();
        assert!(s.draw(&x).is_err());
        assert!(SamplerConfig::uniform(0, 0).validate().is_err());
        assert!(SamplerConfig::stratified(0, 0, 0).validate().is_err());
    }

    #[test]
    fn empty_estimate_gives_regularizer_only() {
        let m = SymKruskal::new(vec![2.0], vec![array![[3.0], [0.0]]], ModePartition::full(2)).unwrap();
        let y = SparseTensor::new(vec![2, 2], vec![]).unwrap();
        let g = stochastic_gradient(&y, &m, 0.5, false).unwrap();
        assert_eq!(g.d_lambda, vec![0.0]);
        // 4γ(‖a‖² − 1)a = 2 · 8 · [3, 0]
        assert_eq!(g.d_factors[0], array![[48.0], [0.0]]);
    }

    #[test]
    fn exhaustive_estimate_is_exact() {
        let m = tiny_model();
        let x = TensorData::Dense(DenseTensor::from_fn(vec![2, 2, 2, 2], |i| i.iter().sum::<usize>() as f64).unwrap());
        let loss = WeightedLoss::unweighted(LossSpec::LeastSquares);
        let est = LossEstimator::exhaustive(x.dims()).estimate_loss(&x, &loss, &m).unwrap();
        let exact = crate::losses::total_loss(&loss, &x, &m).unwrap();
        assert!((est - exact).abs() <= 1e-12 * exact.abs());
        let perfect = TensorData::Dense(m.reconstruct());
        assert_eq!(LossEstimator::exhaustive(x.dims()).estimate_loss(&perfect, &loss, &m).unwrap(), 0.0);
    }
}
