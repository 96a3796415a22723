//! Symmetric Kruskal tensors: one factor matrix per cell of a mode partition.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{khatri_rao_range, FactorSequence};
use crate::partition::ModePartition;
use crate::tensor::{check_index, DenseTensor};

/// `⟦λ; I_1 → A_1, …, I_K → A_K⟧ = Σ_j λ_j (A_{σ_1})_{:,j} ∘ ⋯ ∘ (A_{σ_N})_{:,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymKruskal {
    lambda: Vec<f64>,
    factors: Vec<Array2<f64>>,
    partition: ModePartition,
}

impl SymKruskal {
    pub fn new(lambda: Vec<f64>, factors: Vec<Array2<f64>>, partition: ModePartition) -> Result<Self> {
        if factors.len() != partition.num_cells() {
            return Err(Error::shape(format!(
                "{} factors for a partition with {} cells",
                factors.len(),
                partition.num_cells()
            )));
        }
        let r = lambda.len();
        if r == 0 {
            return Err(Error::shape("rank must be at least 1"));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.ncols() != r {
                return Err(Error::shape(format!(
                    "factor {} has {} columns, expected rank {r}",
                    k + 1,
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(Error::shape(format!("factor {} has no rows", k + 1)));
            }
        }
        Ok(Self {
            lambda,
            factors: factors.into_iter().map(|f| f.as_standard_layout().into_owned()).collect(),
            partition,
        })
    }

    /// Model with unit weights.
    pub fn with_unit_weights(factors: Vec<Array2<f64>>, partition: ModePartition) -> Result<Self> {
        let r = factors.first().map_or(0, |f| f.ncols());
        Self::new(vec![1.0; r], factors, partition)
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn order(&self) -> usize {
        self.partition.order()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub fn factor(&self, cell: usize) -> &Array2<f64> {
        &self.factors[cell]
    }

    pub fn partition(&self) -> &ModePartition {
        &self.partition
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<Array2<f64>>, ModePartition) {
        (self.lambda, self.factors, self.partition)
    }

    /// Mode sizes implied by the factors.
    pub fn dims(&self) -> Vec<usize> {
        self.partition
            .sigma()
            .iter()
            .map(|&k| self.factors[k].nrows())
            .collect()
    }

    /// The factors resolved per mode through `sigma`.
    pub fn factor_sequence(&self) -> FactorSequence<'_> {
        let views: Vec<ArrayView2<'_, f64>> = self
            .partition
            .sigma()
            .iter()
            .map(|&k| self.factors[k].view())
            .collect();
        FactorSequence::new(views).expect("factors share the rank")
    }

    /// Single entry without materializing the tensor.
    pub fn entry(&self, index: &[usize]) -> Result<f64> {
        check_index(&self.dims(), index)?;
        Ok(self.entry_unchecked(index))
    }

    pub(crate) fn entry_unchecked(&self, index: &[usize]) -> f64 {
        let sigma = self.partition.sigma();
        let mut sum = 0.0;
        for (j, &lam) in self.lambda.iter().enumerate() {
            let mut p = lam;
            for (n, &i) in index.iter().enumerate() {
                p *= self.factors[sigma[n]][[i, j]];
            }
            sum += p;
        }
        sum
    }

    /// Dense model tensor. Cost is `r · ∏ I_n`.
    pub fn reconstruct(&self) -> DenseTensor {
        let dims = self.dims();
        let fs = self.factor_sequence();
        let values = reconstruct_values(&fs, &self.lambda, &dims);
        DenseTensor::new(dims, values).expect("dims from factors")
    }

    /// Frobenius norm via Gram matrices, without reconstruction.
    pub fn norm(&self) -> f64 {
        let r = self.rank();
        let grams: Vec<Array2<f64>> = self.factors.iter().map(|f| f.t().dot(f)).collect();
        let mut total = 0.0;
        for a in 0..r {
            for b in 0..r {
                let mut p = self.lambda[a] * self.lambda[b];
                for &k in self.partition.sigma() {
                    p *= grams[k][[a, b]];
                }
                total += p;
            }
        }
        total.max(0.0).sqrt()
    }

    /// Same tensor with unit-norm factor columns, the norms moved into λ:
    /// `λ_j ← λ_j ∏_k ‖(A_k)_{:,j}‖^{|I_k|}`. Zero columns are left as they are.
    pub fn normalized(&self) -> SymKruskal {
        let mut lambda = self.lambda.clone();
        let mut factors = self.factors.clone();
        for (k, f) in factors.iter_mut().enumerate() {
            let mult = self.partition.cells()[k].len() as i32;
            for (j, mut col) in f.columns_mut().into_iter().enumerate() {
                let norm = col.dot(&col).sqrt();
                if norm > 0.0 {
                    col /= norm;
                    lambda[j] *= norm.powi(mult);
                }
            }
        }
        SymKruskal {
            lambda,
            factors,
            partition: self.partition.clone(),
        }
    }

    /// Scales every factor matrix by `c`, which scales the tensor by `c^N`.
    pub fn scale_factors(&mut self, c: f64) {
        for f in &mut self.factors {
            f.mapv_inplace(|v| v * c);
        }
    }
}

/// Model values in vectorization order: mode 0 against the Khatri-Rao
/// product of the remaining modes.
pub(crate) fn reconstruct_values(fs: &FactorSequence<'_>, lambda: &[f64], dims: &[usize]) -> Vec<f64> {
    let r = lambda.len();
    let size0 = dims[0];
    let rest = khatri_rao_range(fs, 1..dims.len());
    let rest: Vec<f64> = rest.iter().copied().collect();
    let a0 = fs.mode(0);
    let scaled: Vec<f64> = (0..size0)
        .flat_map(|i| (0..r).map(move |j| (i, j)))
        .map(|(i, j)| a0[[i, j]] * lambda[j])
        .collect();
    let total: usize = dims.iter().product();
    let mut values = vec![0.0; total];
    values
        .par_chunks_mut(size0)
        .zip(rest.par_chunks(r))
        .for_each(|(out, krow)| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = scaled[i * r..(i + 1) * r]
                    .iter()
                    .zip(krow)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        });
    values
}
