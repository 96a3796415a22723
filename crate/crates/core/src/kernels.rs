//! Khatri-Rao products and MTTKRP kernels.
//!
//! Khatri-Rao products always run in descending mode order,
//! `A_N ⊙ ⋯ ⊙ A_1`, so their row index matches the first-index-fastest
//! layout of [`DenseTensor`]. The MTTKRPs never form a matricization: the
//! dense kernel walks the tensor once and the sparse kernel walks the stored
//! nonzeros. Parallel reductions use fixed chunk boundaries merged in order,
//! so results do not depend on the thread count.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, SparseTensor};

/// Entries per parallel work unit.
const CHUNK_ENTRIES: usize = 1 << 15;

/// Factor matrices resolved per mode, `A_{σ_1}, …, A_{σ_N}`.
#[derive(Debug, Clone)]
pub struct FactorSequence<'a> {
    mats: Vec<ArrayView2<'a, f64>>,
    rank: usize,
}

impl<'a> FactorSequence<'a> {
    pub fn new(mats: Vec<ArrayView2<'a, f64>>) -> Result<Self> {
        let rank = mats
            .first()
            .map(|m| m.ncols())
            .ok_or_else(|| Error::shape("empty factor sequence"))?;
        if let Some(bad) = mats.iter().find(|m| m.ncols() != rank) {
            return Err(Error::shape(format!(
                "factor has {} columns, expected {rank}",
                bad.ncols()
            )));
        }
        Ok(Self { mats, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn mode(&self, n: usize) -> &ArrayView2<'a, f64> {
        &self.mats[n]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.mats.iter().map(|m| m.nrows()).collect()
    }

    pub fn modes(&self) -> &[ArrayView2<'a, f64>] {
        &self.mats
    }

    fn check_against(&self, dims: &[usize], mode: usize) -> Result<()> {
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        if self.dims() != dims {
            return Err(Error::shape(format!(
                "factor rows {:?} do not match tensor dims {dims:?}",
                self.dims()
            )));
        }
        Ok(())
    }
}

/// Khatri-Rao product of `mats` (ordered by mode) in descending mode order,
/// optionally skipping mode `skip`. With nothing left to multiply the result
/// is a single row of ones.
pub fn khatri_rao(mats: &[ArrayView2<'_, f64>], skip: Option<usize>) -> Result<Array2<f64>> {
    let rank = match mats.first() {
        Some(m) => m.ncols(),
        None => return Err(Error::shape("khatri_rao of no matrices")),
    };
    if mats.iter().any(|m| m.ncols() != rank) {
        return Err(Error::shape("khatri_rao operands need equal column counts"));
    }
    let chosen: Vec<&ArrayView2<'_, f64>> = mats
        .iter()
        .enumerate()
        .filter(|(n, _)| Some(*n) != skip)
        .map(|(_, m)| m)
        .collect();
    Ok(khatri_rao_refs(&chosen, rank))
}

/// Row `i_first + I_first·(…)` of the product holds `∏_n A_n[i_n, :]`.
fn khatri_rao_refs(mats: &[&ArrayView2<'_, f64>], rank: usize) -> Array2<f64> {
    let rows: usize = mats.iter().map(|m| m.nrows()).product();
    let mut data = vec![1.0; rank];
    let mut cur_rows = 1;
    for m in mats {
        let mut next = Vec::with_capacity(cur_rows * m.nrows() * rank);
        for i in 0..m.nrows() {
            let a = m.row(i);
            for prev in data.chunks_exact(rank) {
                next.extend(prev.iter().zip(a.iter()).map(|(p, x)| p * x));
            }
        }
        data = next;
        cur_rows *= m.nrows();
    }
    debug_assert_eq!(cur_rows, rows);
    Array2::from_shape_vec((rows, rank), data).expect("shape computed above")
}

/// Khatri-Rao product of the modes in `range`, descending order.
pub(crate) fn khatri_rao_range(fs: &FactorSequence<'_>, range: std::ops::Range<usize>) -> Array2<f64> {
    let refs: Vec<&ArrayView2<'_, f64>> = fs.mats[range].iter().collect();
    khatri_rao_refs(&refs, fs.rank)
}

fn to_row_major(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// `Y_(t) (⊙_{n≠t} A_{σ_n})`, an `I_t × r` matrix.
pub fn mttkrp_dense(y: &DenseTensor, fs: &FactorSequence<'_>, mode: usize) -> Result<Array2<f64>> {
    fs.check_against(y.dims(), mode)?;
    let dims = y.dims();
    let r = fs.rank;
    let left: usize = dims[..mode].iter().product();
    let size = dims[mode];
    let right: usize = dims[mode + 1..].iter().product();
    let kl = to_row_major(&khatri_rao_range(fs, 0..mode));
    let kr = to_row_major(&khatri_rao_range(fs, mode + 1..dims.len()));
    let values = y.values();

    let slab = left * size;
    let per_chunk = (CHUNK_ENTRIES / slab).max(1);
    let partials: Vec<Vec<f64>> = (0..right.div_ceil(per_chunk))
        .into_par_iter()
        .map(|c| {
            let mut out = vec![0.0; size * r];
            let mut tmp = vec![0.0; r];
            for rr in c * per_chunk..((c + 1) * per_chunk).min(right) {
                let krow = &kr[rr * r..(rr + 1) * r];
                for i in 0..size {
                    let base = left * (i + size * rr);
                    let fiber = &values[base..base + left];
                    if left == 1 {
                        let v = fiber[0];
                        if v == 0.0 {
                            continue;
                        }
                        for (o, k) in out[i * r..(i + 1) * r].iter_mut().zip(krow) {
                            *o += v * k;
                        }
                        continue;
                    }
                    tmp.iter_mut().for_each(|t| *t = 0.0);
                    for (l, &v) in fiber.iter().enumerate() {
                        if v != 0.0 {
                            for (t, a) in tmp.iter_mut().zip(&kl[l * r..(l + 1) * r]) {
                                *t += v * a;
                            }
                        }
                    }
                    for ((o, t), k) in out[i * r..(i + 1) * r].iter_mut().zip(&tmp).zip(krow) {
                        *o += t * k;
                    }
                }
            }
            out
        })
        .collect();
    Ok(sum_partials(partials, size, r))
}

fn sum_partials(partials: Vec<Vec<f64>>, rows: usize, r: usize) -> Array2<f64> {
    let mut total = vec![0.0; rows * r];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Array2::from_shape_vec((rows, r), total).expect("rows × r")
}

/// Sparse MTTKRP in `O(r · nnz · N)`.
pub fn mttkrp_sparse(y: &SparseTensor, fs: &FactorSequence<'_>, mode: usize) -> Result<Array2<f64>> {
    fs.check_against(y.dims(), mode)?;
    Ok(mttkrp_coords(y.coords(), y.values(), y.dims(), fs, mode))
}

/// MTTKRP over an explicit coordinate list (`values.len() × N` indices).
pub(crate) fn mttkrp_coords(
    coords: &[usize],
    values: &[f64],
    dims: &[usize],
    fs: &FactorSequence<'_>,
    mode: usize,
) -> Array2<f64> {
    let n = dims.len();
    let r = fs.rank;
    let size = dims[mode];
    let per_chunk = (CHUNK_ENTRIES / (n * r).max(1)).max(1);
    let partials: Vec<Vec<f64>> = values
        .par_chunks(per_chunk)
        .zip(coords.par_chunks(per_chunk * n))
        .map(|(vals, idx)| {
            let mut out = vec![0.0; size * r];
            let mut prod = vec![0.0; r];
            for (&v, index) in vals.iter().zip(idx.chunks_exact(n)) {
                prod.iter_mut().for_each(|p| *p = v);
                for (j, &i) in index.iter().enumerate() {
                    if j == mode {
                        continue;
                    }
                    let row = fs.mats[j].row(i);
                    for (p, a) in prod.iter_mut().zip(row.iter()) {
                        *p *= a;
                    }
                }
                let it = index[mode];
                for (o, p) in out[it * r..(it + 1) * r].iter_mut().zip(&prod) {
                    *o += p;
                }
            }
            out
        })
        .collect();
    sum_partials(partials, size, r)
}

/// Gathers `rows` of `mat` (repeats allowed) into an `s × r` matrix.
pub fn sampled_rows(mat: &ArrayView2<'_, f64>, rows: &[usize]) -> Result<Array2<f64>> {
    if let Some(&bad) = rows.iter().find(|&&i| i >= mat.nrows()) {
        return Err(Error::IndexOutOfRange {
            index: vec![bad],
            dims: vec![mat.nrows()],
        });
    }
    Ok(mat.select(ndarray::Axis(0), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    /// Column-wise Kronecker product `b ⊗ a` of single columns.
    fn kron(b: &[f64], a: &[f64]) -> Vec<f64> {
        b.iter().flat_map(|bv| a.iter().map(move |av| av * bv)).collect()
    }

    #[test]
    fn two_column_vectors() {
        let a = array![[1.0], [2.0]];
        let b = array![[3.0], [4.0]];
        let kr = khatri_rao(&[a.view(), b.view()], None).unwrap();
        assert_eq!(kr.column(0).to_vec(), vec![3.0, 6.0, 4.0, 8.0]);
    }

    #[test]
    fn skip_leaving_one_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_mat(3, 2, &mut rng);
        let b = random_mat(4, 2, &mut rng);
        let kr = khatri_rao(&[a.view(), b.view()], Some(1)).unwrap();
        assert_eq!(kr, a);
    }

    #[test]
    fn matches_columnwise_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mats: Vec<_> = (0..3).map(|_| random_mat(3, 2, &mut rng)).collect();
        let views: Vec<_> = mats.iter().map(|m| m.view()).collect();
        let kr = khatri_rao(&views, None).unwrap();
        for j in 0..2 {
            let c0 = mats[0].column(j).to_vec();
            let c1 = mats[1].column(j).to_vec();
            let c2 = mats[2].column(j).to_vec();
            assert_eq!(kr.column(j).to_vec(), kron(&c2, &kron(&c1, &c0)));
        }
    }

    #[test]
    fn all_ones_stay_ones() {
        let a = Array2::ones((2, 3));
        let b = Array2::ones((4, 3));
        let kr = khatri_rao(&[a.view(), b.view()], None).unwrap();
        assert_eq!(kr, Array2::ones((8, 3)));
    }

    #[test]
    fn column_mismatch() {
        let a = Array2::<f64>::ones((2, 3));
        let b = Array2::<f64>::ones((2, 2));
        assert!(khatri_rao(&[a.view(), b.view()], None).is_err());
    }

    #[test]
    fn mttkrp_identity_case() {
        let y = DenseTensor::from_fn(vec![2, 2], |i| [[1.0, 2.0], [3.0, 4.0]][i[0]][i[1]]).unwrap();
        let a = array![[5.0, 6.0], [7.0, 8.0]];
        let eye = Array2::eye(2);
        let fs = FactorSequence::new(vec![a.view(), eye.view()]).unwrap();
        let m = mttkrp_dense(&y, &fs, 0).unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.0, 4.0]]);
        let zero = DenseTensor::zeros(vec![2, 2]).unwrap();
        assert_eq!(mttkrp_dense(&zero, &fs, 1).unwrap(), Array2::zeros((2, 2)));
    }

    #[test]
    fn single_nonzero_is_row_hadamard() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mats: Vec<_> = [3, 4, 2].iter().map(|&d| random_mat(d, 3, &mut rng)).collect();
        let fs = FactorSequence::new(mats.iter().map(|m| m.view()).collect()).unwrap();
        let y = SparseTensor::new(vec![3, 4, 2], vec![(vec![2, 1, 0], 1.5)]).unwrap();
        let out = mttkrp_sparse(&y, &fs, 1).unwrap();
        for j in 0..3 {
            assert_eq!(out[[1, j]], 1.5 * mats[0][[2, j]] * mats[2][[0, j]]);
            assert_eq!(out[[0, j]], 0.0);
        }
        let empty = SparseTensor::new(vec![3, 4, 2], vec![]).unwrap();
        assert_eq!(mttkrp_sparse(&empty, &fs, 0).unwrap(), Array2::zeros((3, 3)));
    }

    #[test]
    fn sampled_rows_cases() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(sampled_rows(&a.view(), &[0, 1, 2]).unwrap(), a);
        let rep = sampled_rows(&a.view(), &[2, 2, 0]).unwrap();
        assert_eq!(rep, array![[5.0, 6.0], [5.0, 6.0], [1.0, 2.0]]);
        assert!(sampled_rows(&a.view(), &[3]).is_err());
    }

    #[test]
    fn shape_mismatch_detected() {
        let a = Array2::<f64>::ones((2, 2));
        let fs = FactorSequence::new(vec![a.view(), a.view()]).unwrap();
        let y = DenseTensor::zeros(vec![2, 3]).unwrap();
        assert!(mttkrp_dense(&y, &fs, 0).is_err());
        let y = DenseTensor::zeros(vec![2, 2]).unwrap();
        assert!(mttkrp_dense(&y, &fs, 2).is_err());
    }
}
