//! Synthetic fully symmetric binary tensors with planted structure, and the
//! permutation-matched cosine score used to compare recovered factors.

use ndarray::{Array2, ArrayView1};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::canonical::next_sorted;
use crate::error::{Error, Result};
use crate::kruskal::SymKruskal;
use crate::partition::ModePartition;
use crate::tensor::SparseTensor;

/// Parameters of the planted binary model. Columns `0..r-1` are signal
/// components, the last column is a constant noise component.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGenConfig {
    /// Number of modes.
    pub m: usize,
    /// Size of every mode.
    pub n: usize,
    pub r: usize,
    /// Fraction of rows that are nonzero in a signal column.
    pub delta: f64,
    /// Probability of a one where a signal component is active.
    pub rho_high: f64,
    /// Probability of a one from the noise component alone.
    pub rho_low: f64,
    pub seed: u64,
}

impl Default for BinaryGenConfig {
    fn default() -> Self {
        Self {
            m: 4,
            n: 50,
            r: 5,
            delta: 0.15,
            rho_high: 0.9,
            rho_low: 0.002,
            seed: 0,
        }
    }
}

impl BinaryGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 || self.n == 0 {
            return bad("m and n must be positive".into());
        }
        if self.r < 2 {
            return bad(format!("r must be at least 2 (signal plus noise), got {}", self.r));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(0.0 < self.rho_low && self.rho_low < self.rho_high && self.rho_high < 1.0) {
            return bad(format!(
                "need 0 < rho_low < rho_high < 1, got rho_low = {}, rho_high = {}",
                self.rho_low, self.rho_high
            ));
        }
        Ok(())
    }

    /// Rows set in each signal column.
    pub fn signal_rows(&self) -> usize {
        ((self.delta * self.n as f64).round() as usize).clamp(1, self.n)
    }

    /// Mean of the nonzero signal entries, `(ρ_high/(1−ρ_high))^{1/m}`.
    pub fn signal_mean(&self) -> f64 {
        (self.rho_high / (1.0 - self.rho_high)).powf(1.0 / self.m as f64)
    }

    /// Value of every noise-column entry, `(ρ_low/(1−ρ_low))^{1/m}`.
    pub fn noise_value(&self) -> f64 {
        (self.rho_low / (1.0 - self.rho_low)).powf(1.0 / self.m as f64)
    }
}

pub const SIGNAL_SD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub a_star: Array2<f64>,
    /// `λ = 1`, one cell holding every mode.
    pub m_star: SymKruskal,
    pub x: SparseTensor,
    /// Entries of `M*` that were negative and clamped to 0 before sampling.
    pub clamped: usize,
}

/// Next lexicographic permutation in place; false once the last is reached.
fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}


/// Draws the planted factor and a symmetric binary tensor with
/// `P(x_i = 1) = m*_i / (1 + m*_i)`. One draw is made per sorted index and
/// copied to all of its permutations, so `X` is exactly symmetric.
pub fn generate_binary(cfg: &BinaryGenConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (m, n, r) = (cfg.m, cfg.n, cfg.r);
    let mut a = Array2::<f64>::zeros((n, r));
    let normal = Normal::new(cfg.signal_mean(), SIGNAL_SD).expect("positive sd");
    let rows = cfg.signal_rows();
    for j in 0..r - 1 {
        let mut chosen = sample(&mut rng, n, rows).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            a[[i, j]] = normal.sample(&mut rng);
        }
    }
    a.column_mut(r - 1).fill(cfg.noise_value());

    let m_star = SymKruskal::with_unit_weights(vec![a.clone()], ModePartition::full(m))?;
    let mut coords = Vec::new();
    let mut clamped = 0;
    let mut idx = vec![0usize; m];
    loop {
        let mut v = m_star.entry_unchecked(&idx);
        let mut copies = 0;
        let mut perm = idx.clone();
        let mut first = true;
        while first || next_permutation(&mut perm) {
            first = false;
            copies += 1;
        }
        if v < 0.0 {
            clamped += copies;
            v = 0.0;
        }
        let p = v / (1.0 + v);
        if rng.random::<f64>() < p {
            perm.copy_from_slice(&idx);
            loop {
                coords.extend_from_slice(&perm);
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
        if !next_sorted(&mut idx, n) {
            break;
        }
    }
    let nnz = coords.len() / m;
    let x = SparseTensor::from_parts_unchecked(vec![n; m], coords, vec![1.0; nnz]);
    if clamped > 0 {
        log::info!("clamped {clamped} negative model entries to zero");
    }
    Ok(GroundTruth {
        a_star: a,
        m_star,
        x,
        clamped,
    })
}

fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        a.dot(&b) / (na * nb)
    }
}

/// `C[j, l] = cos(A_{:,j}, B_{:,l})`, zero where either column is zero.
pub fn cosine_matrix(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.ncols(), b.ncols()), |(j, l)| cosine(a.column(j), b.column(l)))
}

/// Largest value of `Σ_j c[j, π(j)]` over permutations, with the maximizing `π`.
/// Exhaustive for `r ≤ 8`, Hungarian algorithm above that.
pub fn best_assignment(c: &Array2<f64>) -> (Vec<usize>, f64) {
    if c.nrows() <= 8 {
        assignment_exhaustive(c)
    } else {
        assignment_hungarian(c)
    }
}

pub fn assignment_exhaustive(c: &Array2<f64>) -> (Vec<usize>, f64) {
    let r = c.nrows();
    let mut perm: Vec<usize> = (0..r).collect();
    let mut best = (perm.clone(), f64::NEG_INFINITY);
    loop {
        let s: f64 = perm.iter().enumerate().map(|(j, &l)| c[[j, l]]).sum();
        if s > best.1 {
            best = (perm.clone(), s);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best
}

/// Maximum-weight perfect matching by the O(r³) shortest-augmenting-path
/// form of the Hungarian algorithm.
pub fn assignment_hungarian(c: &Array2<f64>) -> (Vec<usize>, f64) {
    let r = c.nrows();
    // Minimize −c. Rows and columns are 1-based inside, 0 is the sentinel.
    let cost = |i: usize, j: usize| -c[[i - 1, j - 1]];
    let mut u = vec![0.0; r + 1];
    let mut v = vec![0.0; r + 1];
    let mut owner = vec![0usize; r + 1];
    let mut way = vec![0usize; r + 1];
    for i in 1..=r {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; r + 1];
        let mut used = vec![false; r + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=r {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=r {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; r];
    for j in 1..=r {
        perm[owner[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(j, &l)| c[[j, l]]).sum();
    (perm, total)
}

/// `(1/r) max_π Σ_j cos(A*_{:,j}, Â_{:,π(j)})`.
pub fn cosine_score(a_star: &Array2<f64>, a_hat: &Array2<f64>) -> Result<f64> {
    if a_star.dim() != a_hat.dim() {
        return Err(Error::shape(format!(
            "cannot score a {:?} estimate against a {:?} reference",
            a_hat.dim(),
            a_star.dim()
        )));
    }
    if a_star.ncols() == 0 {
        return Err(Error::shape("no columns to score"));
    }
    let c = cosine_matrix(a_star, a_hat);
    Ok(best_assignment(&c).1 / a_star.ncols() as f64)
}

/// Flips each column of `a_hat` whose best-matching column of `reference`
/// (by absolute cosine) has negative cosine. When the factor is used an odd
/// number of times (`multiplicity`), `λ_j` is negated too, so the model
/// tensor never changes.
pub fn negate_fix(
    a_hat: &Array2<f64>,
    lambda: &[f64],
    reference: &Array2<f64>,
    multiplicity: usize,
) -> Result<(Array2<f64>, Vec<f64>)> {
    if a_hat.nrows() != reference.nrows() {
        return Err(Error::shape(format!(
            "estimate has {} rows, reference has {}",
            a_hat.nrows(),
            reference.nrows()
        )));
    }
    if lambda.len() != a_hat.ncols() {
        return Err(Error::shape(format!(
            "{} weights for {} columns",
            lambda.len(),
            a_hat.ncols()
        )));
    }
    let mut a = a_hat.clone();
    let mut lam = lambda.to_vec();
    for j in 0..a.ncols() {
        let best = reference
            .columns()
            .into_iter()
            .map(|rc| cosine(a.column(j), rc))
            .fold(0.0f64, |acc, c| if c.abs() > acc.abs() { c } else { acc });
        if best < 0.0 {
            a.column_mut(j).mapv_inplace(|v| -v);
            if multiplicity % 2 == 1 {
                lam[j] = -lam[j];
            }
        }
    }
    Ok((a, lam))
}
