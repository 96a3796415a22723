//! Dense and sparse N-way tensor containers.
//!
//! Dense values are stored first-index-fastest, so the flat value array is
//! exactly the vectorization of the tensor and
//! `vec(a_1 ∘ ⋯ ∘ a_N) = a_N ⊗ ⋯ ⊗ a_1`. All indices in this API are 0-based;
//! the text formats in [`crate::io`] are 1-based.

use std::collections::HashMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::partition::ModePartition;

/// Strides of a first-index-fastest layout.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len());
    let mut acc = 1;
    for &d in dims {
        out.push(acc);
        acc *= d;
    }
    out
}

/// Linear position of a multi-index. The caller guarantees the index is in range.
pub fn linear_index(dims: &[usize], index: &[usize]) -> usize {
    let mut lin = 0;
    for (&i, &d) in index.iter().zip(dims).rev() {
        lin = lin * d + i;
    }
    lin
}

/// Inverse of [`linear_index`], written into `out`.
pub fn multi_index(dims: &[usize], mut lin: usize, out: &mut [usize]) {
    for (o, &d) in out.iter_mut().zip(dims) {
        *o = lin % d;
        lin /= d;
    }
}

pub(crate) fn check_index(dims: &[usize], index: &[usize]) -> Result<()> {
    if index.len() != dims.len() || index.iter().zip(dims).any(|(&i, &d)| i >= d) {
        return Err(Error::IndexOutOfRange {
            index: index.to_vec(),
            dims: dims.to_vec(),
        });
    }
    Ok(())
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::shape("a tensor needs at least one mode"));
    }
    if dims.contains(&0) {
        return Err(Error::shape(format!("mode sizes must be positive, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::shape(format!("tensor with dims {dims:?} is too large")))
}

/// Dense N-way tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from its vectorization. This is also the inverse of
    /// [`DenseTensor::vectorize`].
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let total = check_dims(&dims)?;
        if values.len() != total {
            return Err(Error::shape(format!(
                "dims {dims:?} need {total} values, got {}",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let total = check_dims(&dims)?;
        Ok(Self {
            dims,
            values: vec![0.0; total],
        })
    }

    /// Fills a tensor by calling `f` on every multi-index in vectorization order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let total = check_dims(&dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut values = Vec::with_capacity(total);
        for lin in 0..total {
            multi_index(&dims, lin, &mut idx);
            values.push(f(&idx));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        check_index(&self.dims, index)?;
        Ok(self.values[linear_index(&self.dims, index)])
    }

    pub fn vectorize(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mode-`mode` matricization: an `I_mode × ∏_{j≠mode} I_j` matrix whose
    /// columns are the mode fibers, remaining indices first-fastest.
    pub fn matricize(&self, mode: usize) -> Result<Array2<f64>> {
        let n = self.order();
        if mode >= n {
            return Err(Error::ModeOutOfRange { mode, order: n });
        }
        let rows = self.dims[mode];
        let cols = self.values.len() / rows;
        let left: usize = self.dims[..mode].iter().product();
        let mut out = Array2::zeros((rows, cols));
        for (lin, &v) in self.values.iter().enumerate() {
            let l = lin % left;
            let i = (lin / left) % rows;
            let r = lin / (left * rows);
            out[[i, l + left * r]] = v;
        }
        Ok(out)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn unmatricize(mat: &Array2<f64>, dims: Vec<usize>, mode: usize) -> Result<Self> {
        let total = check_dims(&dims)?;
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let rows = dims[mode];
        if mat.nrows() != rows || mat.ncols() * rows != total {
            return Err(Error::shape(format!(
                "{}x{} matrix cannot be the mode-{mode} unfolding of {dims:?}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let left: usize = dims[..mode].iter().product();
        let mut values = vec![0.0; total];
        for (lin, v) in values.iter_mut().enumerate() {
            let l = lin % left;
            let i = (lin / left) % rows;
            let r = lin / (left * rows);
            *v = mat[[i, l + left * r]];
        }
        Ok(Self { dims, values })
    }

    /// Permutes the modes: output mode `n` is input mode `perm[n]`, so the
    /// output entry at `(i_{perm[0]}, …, i_{perm[N-1]})` is the input entry at `i`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        let out_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let in_strides = strides(&self.dims);
        let gather: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut idx = vec![0usize; n];
        let mut values = Vec::with_capacity(self.values.len());
        for lin in 0..self.values.len() {
            multi_index(&out_dims, lin, &mut idx);
            let src: usize = idx.iter().zip(&gather).map(|(i, s)| i * s).sum();
            values.push(self.values[src]);
        }
        Ok(Self {
            dims: out_dims,
            values,
        })
    }

    /// Largest `|x_{π(i)} − x_i|` over the adjacent transpositions inside each
    /// cell; these generate every permutation the partition allows.
    pub fn max_symmetry_deviation(&self, partition: &ModePartition) -> Result<f64> {
        partition.check_dims(&self.dims)?;
        let st = strides(&self.dims);
        let mut worst = 0.0f64;
        for cell in partition.cells() {
            for pair in cell.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let size = self.dims[a];
                for (lin, &v) in self.values.iter().enumerate() {
                    let ia = (lin / st[a]) % size;
                    let ib = (lin / st[b]) % size;
                    if ia >= ib {
                        continue;
                    }
                    let swapped = lin + ib * st[a] + ia * st[b] - ia * st[a] - ib * st[b];
                    worst = worst.max((self.values[swapped] - v).abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn is_symmetric(&self, partition: &ModePartition, tol: f64) -> Result<bool> {
        Ok(self.max_symmetry_deviation(partition)? <= tol)
    }

    /// Keeps entries with `|v| > threshold`.
    pub fn sparsify(&self, threshold: f64) -> SparseTensor {
        let n = self.order();
        let mut coords = Vec::new();
        let mut values = Vec::new();
        let mut idx = vec![0usize; n];
        for (lin, &v) in self.values.iter().enumerate() {
            if v.abs() > threshold {
                multi_index(&self.dims, lin, &mut idx);
                coords.extend_from_slice(&idx);
                values.push(v);
            }
        }
        SparseTensor::from_parts_unchecked(self.dims.clone(), coords, values)
    }
}

/// Sparse tensor in coordinate format. Stored values are nonzero and every
/// multi-index appears at most once.
#[derive(Debug, Clone)]
pub struct SparseTensor {
    dims: Vec<usize>,
    /// `nnz × N` indices, row-major.
    coords: Vec<usize>,
    values: Vec<f64>,
    /// Linear index → position in `values`.
    lookup: HashMap<usize, usize>,
}

impl PartialEq for SparseTensor {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.coords == other.coords && self.values == other.values
    }
}

impl SparseTensor {
    /// Strict constructor: duplicate indices are an error, explicit zeros are dropped.
    pub fn new(dims: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        check_dims(&dims)?;
        let mut seen = HashMap::with_capacity(entries.len());
        let mut coords = Vec::with_capacity(entries.len() * dims.len());
        let mut values = Vec::with_capacity(entries.len());
        for (idx, v) in entries {
            check_index(&dims, &idx)?;
            if seen.insert(linear_index(&dims, &idx), ()).is_some() {
                return Err(Error::DuplicateIndex(idx));
            }
            if v != 0.0 {
                coords.extend_from_slice(&idx);
                values.push(v);
            }
        }
        Ok(Self::from_parts_unchecked(dims, coords, values))
    }

    /// Like [`SparseTensor::new`] but sums duplicate indices. Returns the
    /// tensor and the number of duplicates that were merged.
    pub fn from_entries_summing(
        dims: Vec<usize>,
        entries: Vec<(Vec<usize>, f64)>,
    ) -> Result<(Self, usize)> {
        check_dims(&dims)?;
        let mut pos: HashMap<usize, usize> = HashMap::with_capacity(entries.len());
        let mut merged: Vec<(Vec<usize>, f64)> = Vec::with_capacity(entries.len());
        let mut duplicates = 0;
        for (idx, v) in entries {
            check_index(&dims, &idx)?;
            let lin = linear_index(&dims, &idx);
            match pos.get(&lin) {
                Some(&p) => {
                    merged[p].1 += v;
                    duplicates += 1;
                }
                None => {
                    pos.insert(lin, merged.len());
                    merged.push((idx, v));
                }
            }
        }
        let n = dims.len();
        let mut coords = Vec::with_capacity(merged.len() * n);
        let mut values = Vec::with_capacity(merged.len());
        for (idx, v) in merged {
            if v != 0.0 {
                coords.extend_from_slice(&idx);
                values.push(v);
            }
        }
        Ok((Self::from_parts_unchecked(dims, coords, values), duplicates))
    }

    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, coords: Vec<usize>, values: Vec<f64>) -> Self {
        let n = dims.len();
        let lookup = coords
            .chunks_exact(n)
            .enumerate()
            .map(|(p, idx)| (linear_index(&dims, idx), p))
            .collect();
        Self {
            dims,
            coords,
            values,
            lookup,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of entries of the full tensor, `∏ I_n`.
    pub fn num_entries(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, k: usize) -> &[usize] {
        let n = self.order();
        &self.coords[k * n..(k + 1) * n]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.coords
            .chunks_exact(self.order())
            .zip(self.values.iter().copied())
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        check_index(&self.dims, index)?;
        Ok(self.get_linear(linear_index(&self.dims, index)))
    }

    pub fn get_linear(&self, lin: usize) -> f64 {
        self.lookup.get(&lin).map_or(0.0, |&p| self.values[p])
    }

    pub fn contains_linear(&self, lin: usize) -> bool {
        self.lookup.contains_key(&lin)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn densify(&self) -> DenseTensor {
        let mut out = DenseTensor::zeros(self.dims.clone()).expect("dims validated");
        for (idx, v) in self.entries() {
            let lin = linear_index(&self.dims, idx);
            out.values[lin] = v;
        }
        out
    }

    pub fn max_symmetry_deviation(&self, partition: &ModePartition) -> Result<f64> {
        partition.check_dims(&self.dims)?;
        let mut worst = 0.0f64;
        let mut swapped = vec![0usize; self.order()];
        for (idx, v) in self.entries() {
            for cell in partition.cells() {
                for pair in cell.windows(2) {
                    swapped.copy_from_slice(idx);
                    swapped.swap(pair[0], pair[1]);
                    let other = self.get_linear(linear_index(&self.dims, &swapped));
                    worst = worst.max((other - v).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Observed data, either dense or sparse. Sparse data is a tensor whose
/// unstored entries are zero; losses are summed over the full index set.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Dense(DenseTensor),
    Sparse(SparseTensor),
}

impl TensorData {
    pub fn dims(&self) -> &[usize] {
        match self {
            TensorData::Dense(t) => t.dims(),
            TensorData::Sparse(t) => t.dims(),
        }
    }

    pub fn order(&self) -> usize {
        self.dims().len()
    }

    pub fn num_entries(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn norm(&self) -> f64 {
        match self {
            TensorData::Dense(t) => t.norm(),
            TensorData::Sparse(t) => t.norm(),
        }
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        match self {
            TensorData::Dense(t) => t.values().iter().filter(|v| **v != 0.0).count(),
            TensorData::Sparse(t) => t.nnz(),
        }
    }

    pub fn get_linear(&self, lin: usize) -> f64 {
        match self {
            TensorData::Dense(t) => t.values()[lin],
            TensorData::Sparse(t) => t.get_linear(lin),
        }
    }

    pub fn to_dense(&self) -> DenseTensor {
        match self {
            TensorData::Dense(t) => t.clone(),
            TensorData::Sparse(t) => t.densify(),
        }
    }

    pub fn max_symmetry_deviation(&self, partition: &ModePartition) -> Result<f64> {
        match self {
            TensorData::Dense(t) => t.max_symmetry_deviation(partition),
            TensorData::Sparse(t) => t.max_symmetry_deviation(partition),
        }
    }

    pub fn is_symmetric(&self, partition: &ModePartition, tol: f64) -> Result<bool> {
        Ok(self.max_symmetry_deviation(partition)? <= tol)
    }
}

impl From<DenseTensor> for TensorData {
    fn from(t: DenseTensor) -> Self {
        TensorData::Dense(t)
    }
}

impl From<SparseTensor> for TensorData {
    fn from(t: SparseTensor) -> Self {
        TensorData::Sparse(t)
    }
}
