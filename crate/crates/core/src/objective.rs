//! The symmetric GCP objective, its exact gradients, and the flat parameter
//! layout used by the optimizers.
//!
//! The objective is `F(λ, A_1..A_K) = Σ_i w_i ℓ(x_i, m_i) + γ Σ_k Σ_j (‖(A_k)_{:,j}‖² − 1)²`.
//! Its gradients are
//!
//! ```text
//! ∂F/∂λ   = (A_{σ_N} ⊙ ⋯ ⊙ A_{σ_1})ᵀ vec(Y)
//! ∂F/∂A_k = Σ_{t ∈ I_k} Y_(t) (⊙_{n≠t} A_{σ_n}) diag(λ) + 4γ (‖a_j‖² − 1) a_j
//! ```
//!
//! with `Y` the derivative tensor. When the data (and weights) are symmetric
//! the MTTKRPs within a cell coincide, so one per cell scaled by `|I_k|` suffices.

use ndarray::{Array2, ShapeBuilder};

use crate::canonical::CanonicalSet;
use crate::error::{Error, Result};
use crate::kernels::{mttkrp_dense, FactorSequence};
use crate::kruskal::{reconstruct_values, SymKruskal};
use crate::losses::{sweep, DataSweep, WeightedLoss};
use crate::partition::ModePartition;
use crate::tensor::{DenseTensor, TensorData};

/// Regularization strength used unless configured otherwise.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Relative tolerance of the one-time symmetry check guarding the fast path.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ObjectiveConfig {
    pub loss: WeightedLoss,
    pub partition: ModePartition,
    pub rank: usize,
    /// Strength of the column-norm penalty, `γ ≥ 0`.
    pub gamma: f64,
    pub optimize_lambda: bool,
    /// Use one MTTKRP per cell. Only valid for symmetric data and weights.
    pub symmetric_data_fastpath: bool,
    /// Verify the fast-path precondition once when the objective is built.
    pub check_symmetry: bool,
}

impl ObjectiveConfig {
    pub fn new(loss: impl Into<WeightedLoss>, partition: ModePartition, rank: usize) -> Self {
        Self {
            loss: loss.into(),
            partition,
            rank,
            gamma: DEFAULT_GAMMA,
            optimize_lambda: true,
            symmetric_data_fastpath: false,
            check_symmetry: true,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_fastpath(mut self, on: bool) -> Self {
        self.symmetric_data_fastpath = on;
        self
    }

    pub fn with_optimize_lambda(mut self, on: bool) -> Self {
        self.optimize_lambda = on;
        self
    }
}

/// Gradient with the same shapes as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_lambda: Vec<f64>,
    pub d_factors: Vec<Array2<f64>>,
    /// λ is held fixed by the optimizer; `d_lambda` is informational.
    pub lambda_frozen: bool,
}

impl GradientBundle {
    pub fn zeros_like(m: &SymKruskal, lambda_frozen: bool) -> Self {
        Self {
            d_lambda: vec![0.0; m.rank()],
            d_factors: m.factors().iter().map(|f| Array2::zeros(f.raw_dim())).collect(),
            lambda_frozen,
        }
    }

    /// Largest absolute difference to `other`, over every coordinate.
    pub fn max_abs_diff(&self, other: &GradientBundle) -> f64 {
        let l = self
            .d_lambda
            .iter()
            .zip(&other.d_lambda)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.d_factors
            .iter()
            .zip(&other.d_factors)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(l, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.d_lambda
            .iter()
            .chain(self.d_factors.iter().flat_map(|f| f.iter()))
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Which mode stands in for its cell on the fast path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellRepresentative {
    #[default]
    Smallest,
    Largest,
}

/// `γ Σ_k Σ_j (‖(A_k)_{:,j}‖² − 1)²`.
pub fn regularizer(m: &SymKruskal, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for f in m.factors() {
        for col in f.columns() {
            let dev = col.dot(&col) - 1.0;
            total += dev * dev;
        }
    }
    gamma * total
}

/// Adds `4γ(‖a_j‖² − 1) a_j` to every factor column gradient.
pub fn add_regularizer_gradient(m: &SymKruskal, gamma: f64, grad: &mut GradientBundle) {
    if gamma == 0.0 {
        return;
    }
    for (f, g) in m.factors().iter().zip(grad.d_factors.iter_mut()) {
        for (col, mut gcol) in f.columns().into_iter().zip(g.columns_mut()) {
            let scale = 4.0 * gamma * (col.dot(&col) - 1.0);
            gcol.scaled_add(scale, &col);
        }
    }
}

/// The objective bound to one data tensor.
pub struct Objective<'a> {
    cfg: ObjectiveConfig,
    data: &'a TensorData,
    sweep: DataSweep<'a>,
    cell_sizes: Vec<usize>,
    canonical: Option<CanonicalSet>,
}

impl<'a> Objective<'a> {
    pub fn new(cfg: ObjectiveConfig, data: &'a TensorData) -> Result<Self> {
        let cell_sizes = cfg.partition.cell_sizes(data.dims())?;
        cfg.loss.check_dims(data.dims())?;
        if !(cfg.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be nonnegative, got {}", cfg.gamma)));
        }
        if cfg.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if cfg.symmetric_data_fastpath && cfg.check_symmetry {
            let scale = match data {
                TensorData::Dense(t) => t.values().iter().fold(1.0f64, |a, v| a.max(v.abs())),
                TensorData::Sparse(t) => t.values().iter().fold(1.0f64, |a, v| a.max(v.abs())),
            };
            let dev = data.max_symmetry_deviation(&cfg.partition)?;
            if dev > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { deviation: dev });
            }
            if let Some(w) = &cfg.loss.weights {
                let wdev = w.tensor().max_symmetry_deviation(&cfg.partition)?;
                if wdev > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { deviation: wdev });
                }
            }
        }
        let canonical = if cfg.symmetric_data_fastpath {
            CanonicalSet::build(data, &cfg.loss, &cfg.partition)?
        } else {
            None
        };
        Ok(Self {
            canonical,
            sweep: DataSweep::new(data),
            cfg,
            data,
            cell_sizes,
        })
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    pub fn data(&self) -> &TensorData {
        self.data
    }

    /// Sizes of the factor matrices, one per cell.
    pub fn cell_sizes(&self) -> &[usize] {
        &self.cell_sizes
    }

    fn check_model(&self, m: &SymKruskal) -> Result<()> {
        if m.partition() != &self.cfg.partition {
            return Err(Error::shape(format!(
                "model partition {} differs from objective partition {}",
                m.partition(),
                self.cfg.partition
            )));
        }
        if m.rank() != self.cfg.rank {
            return Err(Error::shape(format!(
                "model rank {} differs from configured rank {}",
                m.rank(),
                self.cfg.rank
            )));
        }
        if m.dims() != self.data.dims() {
            return Err(Error::shape(format!(
                "model dims {:?} differ from data dims {:?}",
                m.dims(),
                self.data.dims()
            )));
        }
        Ok(())
    }

    /// Loss term only, without the regularizer.
    pub fn loss(&self, m: &SymKruskal) -> Result<f64> {
        self.check_model(m)?;
        if let Some(c) = &self.canonical {
            return Ok(c.evaluate(&self.cfg.loss.base, m, false)?.0);
        }
        let dims = self.data.dims();
        let model = reconstruct_values(&m.factor_sequence(), m.lambda(), dims);
        sweep(&self.cfg.loss, &self.sweep, dims, &model, None)
    }

    pub fn value(&self, m: &SymKruskal) -> Result<f64> {
        Ok(self.loss(m)? + regularizer(m, self.cfg.gamma))
    }

    fn derivative(&self, m: &SymKruskal) -> Result<(f64, DenseTensor)> {
        self.check_model(m)?;
        let dims = self.data.dims();
        let model = reconstruct_values(&m.factor_sequence(), m.lambda(), dims);
        let mut y = vec![0.0; model.len()];
        let loss = sweep(&self.cfg.loss, &self.sweep, dims, &model, Some(&mut y))?;
        Ok((loss, DenseTensor::new(dims.to_vec(), y)?))
    }

    /// Gradient summing the MTTKRPs of every mode in each cell. Valid for any data.
    pub fn gradient(&self, m: &SymKruskal) -> Result<GradientBundle> {
        let (_, y) = self.derivative(m)?;
        let modes: Vec<(Vec<usize>, f64)> = self
            .cfg
            .partition
            .cells()
            .iter()
            .map(|c| (c.clone(), 1.0))
            .collect();
        self.assemble(m, &y, &modes)
    }

    /// Gradient using one MTTKRP per cell (smallest mode), scaled by the cell size.
    pub fn gradient_fastpath(&self, m: &SymKruskal) -> Result<GradientBundle> {
        self.gradient_fastpath_with(m, CellRepresentative::Smallest)
    }

    pub fn gradient_fastpath_with(&self, m: &SymKruskal, rep: CellRepresentative) -> Result<GradientBundle> {
        let (_, y) = self.derivative(m)?;
        self.assemble(m, &y, &self.fastpath_modes(rep))
    }

    fn fastpath_modes(&self, rep: CellRepresentative) -> Vec<(Vec<usize>, f64)> {
        self.cfg
            .partition
            .cells()
            .iter()
            .map(|c| {
                let pick = match rep {
                    CellRepresentative::Smallest => c[0],
                    CellRepresentative::Largest => c[c.len() - 1],
                };
                (vec![pick], c.len() as f64)
            })
            .collect()
    }

    /// Objective value and gradient sharing one model evaluation. Uses the
    /// fast path when configured.
    pub fn value_and_gradient(&self, m: &SymKruskal) -> Result<(f64, GradientBundle)> {
        if self.canonical.is_some() {
            let (loss, grad) = self.gradient_canonical(m)?;
            return Ok((loss + regularizer(m, self.cfg.gamma), grad));
        }
        let (loss, y) = self.derivative(m)?;
        let modes = if self.cfg.symmetric_data_fastpath {
            self.fastpath_modes(CellRepresentative::Smallest)
        } else {
            self.cfg
                .partition
                .cells()
                .iter()
                .map(|c| (c.clone(), 1.0))
                .collect()
        };
        let grad = self.assemble(m, &y, &modes)?;
        Ok((loss + regularizer(m, self.cfg.gamma), grad))
    }

    /// Number of canonical indices swept on the fast path, if that sweep is in use.
    pub fn canonical_len(&self) -> Option<usize> {
        self.canonical.as_ref().map(CanonicalSet::len)
    }

    /// Loss and gradient from one representative per within-cell permutation
    /// orbit. Requires the fast path; errors otherwise.
    pub fn gradient_canonical(&self, m: &SymKruskal) -> Result<(f64, GradientBundle)> {
        self.check_model(m)?;
        let c = self.canonical.as_ref().ok_or_else(|| {
            Error::Config("canonical sweep needs the fast path and a partition with a repeated cell".into())
        })?;
        let (loss, parts) = c.evaluate(&self.cfg.loss.base, m, true)?;
        let (d_lambda, d_factors) = parts.expect("gradient requested");
        let mut grad = GradientBundle {
            d_lambda,
            d_factors,
            lambda_frozen: !self.cfg.optimize_lambda,
        };
        add_regularizer_gradient(m, self.cfg.gamma, &mut grad);
        Ok((loss, grad))
    }

    /// `modes[k]` lists the modes whose MTTKRPs are summed for cell `k`, and
    /// the multiplier applied to that sum.
    fn assemble(&self, m: &SymKruskal, y: &DenseTensor, modes: &[(Vec<usize>, f64)]) -> Result<GradientBundle> {
        let fs = m.factor_sequence();
        let mut grad = GradientBundle::zeros_like(m, !self.cfg.optimize_lambda);
        let mut mode0: Option<Array2<f64>> = None;
        for (k, (list, mult)) in modes.iter().enumerate() {
            let g = &mut grad.d_factors[k];
            for &t in list {
                let mt = mttkrp_dense(y, &fs, t)?;
                g.scaled_add(*mult, &mt);
                if t == 0 {
                    mode0 = Some(mt);
                }
            }
            for (mut col, &lam) in g.columns_mut().into_iter().zip(m.lambda()) {
                col *= lam;
            }
        }
        let g0 = match mode0 {
            Some(g0) => g0,
            None => mttkrp_dense(y, &fs, 0)?,
        };
        grad.d_lambda = lambda_gradient(&fs, &g0);
        add_regularizer_gradient(m, self.cfg.gamma, &mut grad);
        Ok(grad)
    }
}

/// `(⊙_n A_{σ_n})ᵀ vec(Y)` from the mode-0 MTTKRP:
/// `Σ_i (A_{σ_0})_{i,j} [Y_(0) (⊙_{n≠0} A_{σ_n})]_{i,j}`.
pub(crate) fn lambda_gradient(fs: &FactorSequence<'_>, mttkrp0: &Array2<f64>) -> Vec<f64> {
    let a0 = fs.mode(0);
    (0..fs.rank())
        .map(|j| a0.column(j).dot(&mttkrp0.column(j)))
        .collect()
}

/// Bijection between a model and a flat parameter vector: λ first (unless
/// frozen), then each cell's factor in column-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    rank: usize,
    rows: Vec<usize>,
    include_lambda: bool,
}

impl ParamLayout {
    pub fn for_model(m: &SymKruskal, include_lambda: bool) -> Self {
        Self {
            rank: m.rank(),
            rows: m.factors().iter().map(|f| f.nrows()).collect(),
            include_lambda,
        }
    }

    pub fn len(&self) -> usize {
        let factors: usize = self.rows.iter().map(|r| r * self.rank).sum();
        factors + if self.include_lambda { self.rank } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn includes_lambda(&self) -> bool {
        self.include_lambda
    }

    fn push_parts(&self, lambda: &[f64], factors: &[Array2<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        if self.include_lambda {
            out.extend_from_slice(lambda);
        }
        for f in factors {
            for col in f.columns() {
                out.extend(col.iter());
            }
        }
        out
    }

    pub fn flatten(&self, m: &SymKruskal) -> Vec<f64> {
        self.push_parts(m.lambda(), m.factors())
    }

    pub fn flatten_gradient(&self, g: &GradientBundle) -> Vec<f64> {
        self.push_parts(&g.d_lambda, &g.d_factors)
    }

    /// Rebuilds a model; a frozen λ is taken from `template`.
    pub fn unflatten(&self, v: &[f64], template: &SymKruskal) -> Result<SymKruskal> {
        if v.len() != self.len() {
            return Err(Error::ParamLength {
                got: v.len(),
                expected: self.len(),
            });
        }
        let mut pos = 0;
        let lambda = if self.include_lambda {
            pos = self.rank;
            v[..self.rank].to_vec()
        } else {
            template.lambda().to_vec()
        };
        let mut factors = Vec::with_capacity(self.rows.len());
        for &rows in &self.rows {
            let n = rows * self.rank;
            let f = Array2::from_shape_vec((rows, self.rank).f(), v[pos..pos + n].to_vec())
                .expect("length checked");
            factors.push(f);
            pos += n;
        }
        SymKruskal::new(lambda, factors, template.partition().clone())
    }
}



#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossSpec;
    use ndarray::array;

    #[test]
    fn regularizer_direct_formula() {
        let m = SymKruskal::new(vec![1.0], vec![array![[2.0], [0.0]]], ModePartition::full(2)).unwrap();
        assert_eq!(regularizer(&m, 1.0), 9.0);
        assert_eq!(regularizer(&m, 0.0), 0.0);
    }

    #[test]
    fn perfect_fit_is_zero() {
        let m = SymKruskal::new(vec![1.5], vec![array![[1.0], [2.0]]], ModePartition::full(2)).unwrap();
        let data = TensorData::Dense(m.reconstruct());
        let cfg = ObjectiveConfig::new(LossSpec::LeastSquares, ModePartition::full(2), 1).with_gamma(0.0);
        let obj = Objective::new(cfg, &data).unwrap();
        assert_eq!(obj.value(&m).unwrap(), 0.0);
        let g = obj.gradient(&m).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn unit_columns_have_no_regularizer_gradient() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = SymKruskal::new(vec![1.0, 1.0], vec![array![[s, 1.0], [s, 0.0]]], ModePartition::full(2)).unwrap();
        let mut g = GradientBundle::zeros_like(&m, false);
        add_regularizer_gradient(&m, 0.7, &mut g);
        assert!(g.max_abs() < 1e-15);
    }

    #[test]
    fn layout_sizes() {
        let m = SymKruskal::new(vec![1.0], vec![array![[1.0], [2.0]]], ModePartition::full(2)).unwrap();
        let layout = ParamLayout::for_model(&m, true);
        assert_eq!(layout.len(), 3);
        assert_eq!(layout.flatten(&m), vec![1.0, 1.0, 2.0]);
        let frozen = ParamLayout::for_model(&m, false);
        assert_eq!(frozen.flatten(&m), vec![1.0, 2.0]);
        assert!(matches!(frozen.unflatten(&[1.0], &m), Err(Error::ParamLength { .. })));
    }

    #[test]
    fn fastpath_rejects_nonsymmetric_data() {
        let x = DenseTensor::from_fn(vec![2, 2], |i| (i[0] * 2 + i[1]) as f64).unwrap();
        let data = TensorData::Dense(x);
        let cfg = ObjectiveConfig::new(LossSpec::LeastSquares, ModePartition::full(2), 1).with_fastpath(true);
        assert!(matches!(Objective::new(cfg.clone(), &data), Err(Error::NotSymmetric { .. })));
        let mut unchecked = cfg;
        unchecked.check_symmetry = false;
        assert!(Objective::new(unchecked, &data).is_ok());
    }

    fn positive_model(partition: ModePartition, rows: &[usize], rank: usize) -> SymKruskal {
        let factors = rows
            .iter()
            .enumerate()
            .map(|(k, &n)| Array2::from_shape_fn((n, rank), |(i, j)| 0.3 + ((i * 5 + j * 3 + k) % 7) as f64 / 9.0))
            .collect();
        let lambda = (0..rank).map(|j| 0.8 + 0.3 * j as f64).collect();
        SymKruskal::new(lambda, factors, partition).unwrap()
    }

    fn check_canonical(loss: LossSpec, partition: ModePartition, dims: Vec<usize>, rows: &[usize]) {
        let cells = partition.cells().to_vec();
        let x = DenseTensor::from_fn(dims, |i| {
            // Symmetric within cells: a function of each cell's sorted tuple.
            let mut h = 0usize;
            for c in &cells {
                let mut t: Vec<usize> = c.iter().map(|&n| i[n]).collect();
                t.sort_unstable();
                for v in t {
                    h = h * 31 + v + 1;
                }
            }
            (h % 3) as f64 * 0.5
        })
        .unwrap();
        let data = TensorData::Dense(x);
        let m = positive_model(partition.clone(), rows, 2);
        let cfg = ObjectiveConfig::new(loss, partition, 2).with_gamma(0.3).with_fastpath(true);
        let obj = Objective::new(cfg.clone(), &data).unwrap();
        assert!(obj.canonical_len().is_some());
        let (loss_c, g_c) = obj.gradient_canonical(&m).unwrap();
        let direct = crate::losses::total_loss(&cfg.loss, &data, &m).unwrap();
        assert!((loss_c - direct).abs() <= 1e-12 * direct.abs().max(1.0), "{loss_c} vs {direct}");
        let g = obj.gradient(&m).unwrap();
        let scale = g.max_abs().max(1.0);
        assert!(g.max_abs_diff(&g_c) <= 1e-12 * scale, "diff {}", g.max_abs_diff(&g_c));
        let (v, g_vg) = obj.value_and_gradient(&m).unwrap();
        assert_eq!(g_vg, g_c);
        assert!((v - obj.value(&m).unwrap()).abs() <= 1e-12 * v.abs());
    }

    #[test]
    fn canonical_sweep_matches_full_sweep() {
        check_canonical(LossSpec::LeastSquares, ModePartition::full(3), vec![5, 5, 5], &[5]);
        check_canonical(
            LossSpec::Poisson { epsilon: 1e-10 },
            ModePartition::new(vec![vec![0, 1], vec![2]], 3).unwrap(),
            vec![4, 4, 3],
            &[4, 3],
        );
        check_canonical(
            LossSpec::BernoulliOdds { epsilon: 1e-10 },
            ModePartition::new(vec![vec![0, 2], vec![1, 3]], 4).unwrap(),
            vec![3, 4, 3, 4],
            &[3, 4],
        );
    }

    #[test]
    fn canonical_sweep_skipped_without_repeats() {
        let data = TensorData::Dense(DenseTensor::zeros(vec![3, 4]).unwrap());
        let p = ModePartition::new(vec![vec![0], vec![1]], 2).unwrap();
        let cfg = ObjectiveConfig::new(LossSpec::LeastSquares, p, 1).with_fastpath(true);
        let obj = Objective::new(cfg, &data).unwrap();
        assert_eq!(obj.canonical_len(), None);
        assert!(obj.gradient_canonical(&SymKruskal::new(vec![1.0], vec![Array2::ones((3, 1)), Array2::ones((4, 1))], obj.config().partition.clone()).unwrap()).is_err());
    }
}
