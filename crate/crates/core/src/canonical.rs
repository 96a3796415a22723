//! Objective and gradient over canonical indices of symmetric data.
//!
//! When the data (and weights) are symmetric with respect to the partition,
//! each orbit of indices under within-cell permutations contributes the same
//! loss term. Summing over one representative per orbit (indices
//! nondecreasing inside every cell), weighted by the orbit size, gives the
//! full sum. The cell gradient `Σ_{t∈I_k} Y_(t)(⊙_{n≠t} A_{σ_n}) diag(λ)`
//! becomes a scatter of the orbit-weighted derivative into every position of
//! the cell.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kruskal::SymKruskal;
use crate::losses::{LossSpec, WeightedLoss};
use crate::partition::ModePartition;
use crate::tensor::{linear_index, TensorData};

const CHUNK: usize = 1 << 12;

/// Next nondecreasing tuple over `0..n`; false after the last.
pub(crate) fn next_sorted(idx: &mut [usize], n: usize) -> bool {
    let mut k = idx.len();
    while k > 0 {
        k -= 1;
        if idx[k] + 1 < n {
            let v = idx[k] + 1;
            for slot in &mut idx[k..] {
                *slot = v;
            }
            return true;
        }
    }
    false
}

/// Number of distinct permutations of a sorted tuple.
fn orbit_size(sorted: &[usize]) -> f64 {
    let mut size = 1.0;
    let mut run = 0;
    for (p, v) in sorted.iter().enumerate() {
        run = if p > 0 && sorted[p - 1] == *v { run + 1 } else { 1 };
        size *= (p + 1) as f64 / run as f64;
    }
    size
}

/// Canonical index list with orbit sizes, weights and data values.
#[derive(Debug, Clone)]
pub(crate) struct CanonicalSet {
    order: usize,
    /// `len × N`, row-major.
    coords: Vec<u32>,
    /// Orbit size times the entry weight.
    weight: Vec<f64>,
    x: Vec<f64>,
}

impl CanonicalSet {
    /// Builds the set, or returns `None` when it would not be clearly smaller
    /// than the full index set.
    pub(crate) fn build(data: &TensorData, loss: &WeightedLoss, partition: &ModePartition) -> Result<Option<Self>> {
        let dims = data.dims();
        let total = data.num_entries();
        let cell_sizes = partition.cell_sizes(dims)?;
        let mut orbits = 1.0;
        for (cell, &n) in partition.cells().iter().zip(&cell_sizes) {
            // Multisets of size m from n values: C(n + m − 1, m).
            let mut c = 1.0;
            for i in 0..cell.len() {
                c *= (n + i) as f64 / (i + 1) as f64;
            }
            orbits *= c.round();
        }
        if orbits > 0.75 * total as f64 || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Ok(None);
        }

        // Per cell: every sorted tuple and its orbit size.
        let per_cell: Vec<(Vec<usize>, Vec<f64>)> = partition
            .cells()
            .iter()
            .zip(&cell_sizes)
            .map(|(cell, &n)| {
                let m = cell.len();
                let mut t = vec![0usize; m];
                let mut tuples = Vec::new();
                let mut sizes = Vec::new();
                loop {
                    tuples.extend_from_slice(&t);
                    sizes.push(orbit_size(&t));
                    if !next_sorted(&mut t, n) {
                        break;
                    }
                }
                (tuples, sizes)
            })
            .collect();

        let order = dims.len();
        let cells = partition.cells();
        let counts: Vec<usize> = per_cell.iter().map(|(_, s)| s.len()).collect();
        let mut pick = vec![0usize; cells.len()];
        let mut idx = vec![0usize; order];
        let mut set = CanonicalSet {
            order,
            coords: Vec::new(),
            weight: Vec::new(),
            x: Vec::new(),
        };
        'outer: loop {
            let mut orbit = 1.0;
            for (k, cell) in cells.iter().enumerate() {
                let m = cell.len();
                let tuple = &per_cell[k].0[pick[k] * m..(pick[k] + 1) * m];
                for (&mode, &v) in cell.iter().zip(tuple) {
                    idx[mode] = v;
                }
                orbit *= per_cell[k].1[pick[k]];
            }
            let lin = linear_index(dims, &idx);
            let w = loss.weight(lin);
            if w != 0.0 {
                set.coords.extend(idx.iter().map(|&i| i as u32));
                set.weight.push(orbit * w);
                set.x.push(data.get_linear(lin));
            }
            for k in (0..cells.len()).rev() {
                pick[k] += 1;
                if pick[k] < counts[k] {
                    continue 'outer;
                }
                pick[k] = 0;
            }
            break;
        }
        Ok(Some(set))
    }

    pub(crate) fn len(&self) -> usize {
        self.weight.len()
    }

    /// Loss and, optionally, the loss part of the gradient (`d_lambda`, `d_factors`).
    pub(crate) fn evaluate(
        &self,
        spec: &LossSpec,
        m: &SymKruskal,
        with_grad: bool,
    ) -> Result<(f64, Option<(Vec<f64>, Vec<Array2<f64>>)>)> {
        let order = self.order;
        let r = m.rank();
        let sigma = m.partition().sigma();
        let lambda = m.lambda();
        let factors: Vec<&[f64]> = m
            .factors()
            .iter()
            .map(|f| f.as_slice().expect("models store factors row-major"))
            .collect();
        let rows: Vec<usize> = m.factors().iter().map(|f| f.nrows()).collect();

        let partials: Vec<std::result::Result<(f64, Vec<f64>, Vec<Vec<f64>>), usize>> = (0..self.len().div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(self.len());
                let mut acc = 0.0;
                let mut dl = vec![0.0; if with_grad { r } else { 0 }];
                let mut dfs: Vec<Vec<f64>> = if with_grad {
                    rows.iter().map(|&n| vec![0.0; n * r]).collect()
                } else {
                    Vec::new()
                };
                // prefix[n] = ∏_{q<n} rows, (order + 1) × r
                let mut prefix = vec![1.0; (order + 1) * r];
                let mut suf = vec![0.0; r];
                for e in lo..hi {
                    let idx = &self.coords[e * order..(e + 1) * order];
                    for n in 0..order {
                        let i = idx[n] as usize;
                        let row = &factors[sigma[n]][i * r..(i + 1) * r];
                        let (head, tail) = prefix.split_at_mut((n + 1) * r);
                        let prev = &head[n * r..];
                        for ((t, p), a) in tail[..r].iter_mut().zip(prev).zip(row) {
                            *t = p * a;
                        }
                    }
                    let full = &prefix[order * r..];
                    let mv: f64 = full.iter().zip(lambda).map(|(p, l)| p * l).sum();
                    if !spec.in_domain(mv) {
                        return Err(e);
                    }
                    let w = self.weight[e];
                    let x = self.x[e];
                    acc += w * spec.value(x, mv);
                    if !with_grad {
                        continue;
                    }
                    let y = w * spec.deriv(x, mv);
                    if y == 0.0 {
                        continue;
                    }
                    for (d, p) in dl.iter_mut().zip(full) {
                        *d += y * p;
                    }
                    for (s, l) in suf.iter_mut().zip(lambda) {
                        *s = y * l;
                    }
                    for n in (0..order).rev() {
                        let i = idx[n] as usize;
                        let k = sigma[n];
                        let out = &mut dfs[k][i * r..(i + 1) * r];
                        let pre = &prefix[n * r..(n + 1) * r];
                        for ((o, p), s) in out.iter_mut().zip(pre).zip(&suf) {
                            *o += p * s;
                        }
                        let row = &factors[k][i * r..(i + 1) * r];
                        for (s, a) in suf.iter_mut().zip(row) {
                            *s *= a;
                        }
                    }
                }
                Ok((acc, dl, dfs))
            })
            .collect();

        let mut total = 0.0;
        let mut dl = vec![0.0; r];
        let mut dfs: Vec<Vec<f64>> = rows.iter().map(|&n| vec![0.0; n * r]).collect();
        for p in partials {
            match p {
                Ok((acc, pl, pf)) => {
                    total += acc;
                    if with_grad {
                        for (a, b) in dl.iter_mut().zip(&pl) {
                            *a += b;
                        }
                        for (a, b) in dfs.iter_mut().zip(&pf) {
                            for (x, y) in a.iter_mut().zip(b) {
                                *x += y;
                            }
                        }
                    }
                }
                Err(e) => {
                    let idx: Vec<usize> = self.coords[e * order..(e + 1) * order]
                        .iter()
                        .map(|&i| i as usize)
                        .collect();
                    return Err(Error::Domain {
                        loss: spec.name().to_string(),
                        value: m.entry_unchecked(&idx),
                        index: idx,
                    });
                }
            }
        }
        if !with_grad {
            return Ok((total, None));
        }
        let factors = dfs
            .into_iter()
            .zip(&rows)
            .map(|(v, &n)| Array2::from_shape_vec((n, r), v).expect("n × r"))
            .collect();
        Ok((total, Some((dl, factors))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_sizes() {
        assert_eq!(orbit_size(&[0, 0, 0, 0]), 1.0);
        assert_eq!(orbit_size(&[0, 1, 2, 3]), 24.0);
        assert_eq!(orbit_size(&[0, 0, 1, 1]), 6.0);
        assert_eq!(orbit_size(&[2, 5, 5]), 3.0);
        assert_eq!(orbit_size(&[]), 1.0);
    }

    #[test]
    fn orbit_sizes_cover_every_index() {
        // Σ over sorted 3-tuples of 0..4 of orbit sizes = 4³.
        let mut t = vec![0; 3];
        let mut total = 0.0;
        loop {
            total += orbit_size(&t);
            if !next_sorted(&mut t, 4) {
                break;
            }
        }
        assert_eq!(total, 64.0);
    }
}
