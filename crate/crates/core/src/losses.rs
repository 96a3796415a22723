//! Entrywise losses `ℓ(x, m)` and their derivatives with respect to the model value.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kruskal::SymKruskal;
use crate::partition::ModePartition;
use crate::tensor::{multi_index, DenseTensor, TensorData};

/// Shift inside the logarithms of the count and binary losses.
pub const DEFAULT_EPSILON: f64 = 1e-10;

const CHUNK: usize = 1 << 15;

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A user-supplied loss. Build it with [`LossSpec::custom`], which checks the
/// derivative against finite differences before accepting it.
#[derive(Clone)]
pub struct CustomLoss {
    name: String,
    value: ScalarFn,
    deriv: ScalarFn,
    lower_bound: Option<f64>,
}

/// An entrywise loss function.
#[derive(Clone)]
pub enum LossSpec {
    /// `(x − m)²`
    LeastSquares,
    /// Least squares with factors and weights bounded below by zero.
    NonnegLeastSquares,
    /// Bernoulli with odds link: `log(1 + m) − x log(m + ε)`.
    BernoulliOdds { epsilon: f64 },
    /// Poisson with identity link: `m − x log(m + ε)`.
    Poisson { epsilon: f64 },
    Custom(CustomLoss),
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::BernoulliOdds { epsilon } | LossSpec::Poisson { epsilon } => {
                write!(f, "{}(ε={epsilon:e})", self.name())
            }
            _ => write!(f, "{}", self.name()),
        }
    }
}

impl LossSpec {
    pub const NAMES: [&'static str; 4] = [
        "least-squares",
        "nonneg-least-squares",
        "bernoulli-odds",
        "poisson",
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "least-squares" => Ok(LossSpec::LeastSquares),
            "nonneg-least-squares" => Ok(LossSpec::NonnegLeastSquares),
            "bernoulli-odds" => Ok(LossSpec::BernoulliOdds {
                epsilon: DEFAULT_EPSILON,
            }),
            "poisson" => Ok(LossSpec::Poisson {
                epsilon: DEFAULT_EPSILON,
            }),
            other => Err(Error::Config(format!(
                "unknown loss `{other}` (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Registers a custom loss after checking `deriv` against central
    /// differences of `value` on a fixed grid inside the domain.
    pub fn custom<V, D>(name: &str, value: V, deriv: D, lower_bound: Option<f64>) -> Result<Self>
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let spec = LossSpec::Custom(CustomLoss {
            name: name.to_string(),
            value: Arc::new(value),
            deriv: Arc::new(deriv),
            lower_bound,
        });
        let lo = lower_bound.unwrap_or(-3.0);
        let mut points = Vec::new();
        for xi in 0..6 {
            for mi in 0..8 {
                points.push((xi as f64 * 0.7, lo + 0.05 + mi as f64 * 0.4));
            }
        }
        check_derivative(&spec, &points, 1e-6)?;
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        match self {
            LossSpec::LeastSquares => "least-squares",
            LossSpec::NonnegLeastSquares => "nonneg-least-squares",
            LossSpec::BernoulliOdds { .. } => "bernoulli-odds",
            LossSpec::Poisson { .. } => "poisson",
            LossSpec::Custom(c) => &c.name,
        }
    }

    /// Lower bound imposed on the factors and weights when fitting.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            LossSpec::LeastSquares => None,
            LossSpec::NonnegLeastSquares | LossSpec::BernoulliOdds { .. } | LossSpec::Poisson { .. } => {
                Some(0.0)
            }
            LossSpec::Custom(c) => c.lower_bound,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            LossSpec::BernoulliOdds { epsilon } | LossSpec::Poisson { epsilon } => *epsilon,
            _ => 0.0,
        }
    }

    /// Whether `ℓ(·, m)` is defined.
    #[inline]
    pub fn in_domain(&self, m: f64) -> bool {
        match self {
            LossSpec::BernoulliOdds { epsilon } | LossSpec::Poisson { epsilon } => m > -epsilon,
            _ => m.is_finite(),
        }
    }

    #[inline]
    pub fn value(&self, x: f64, m: f64) -> f64 {
        match self {
            LossSpec::LeastSquares | LossSpec::NonnegLeastSquares => (x - m) * (x - m),
            LossSpec::BernoulliOdds { epsilon } => {
                let base = m.ln_1p();
                if x == 0.0 {
                    base
                } else {
                    base - x * (m + epsilon).ln()
                }
            }
            LossSpec::Poisson { epsilon } => {
                if x == 0.0 {
                    m
                } else {
                    m - x * (m + epsilon).ln()
                }
            }
            LossSpec::Custom(c) => (c.value)(x, m),
        }
    }

    /// `∂ℓ/∂m`.
    #[inline]
    pub fn deriv(&self, x: f64, m: f64) -> f64 {
        match self {
            LossSpec::LeastSquares | LossSpec::NonnegLeastSquares => 2.0 * (m - x),
            LossSpec::BernoulliOdds { epsilon } => {
                let base = 1.0 / (1.0 + m);
                if x == 0.0 {
                    base
                } else {
                    base - x / (m + epsilon)
                }
            }
            LossSpec::Poisson { epsilon } => {
                if x == 0.0 {
                    1.0
                } else {
                    1.0 - x / (m + epsilon)
                }
            }
            LossSpec::Custom(c) => (c.deriv)(x, m),
        }
    }

    pub fn checked_value(&self, x: f64, m: f64) -> Result<f64> {
        self.domain_check(m, &[])?;
        Ok(self.value(x, m))
    }

    pub fn checked_deriv(&self, x: f64, m: f64) -> Result<f64> {
        self.domain_check(m, &[])?;
        Ok(self.deriv(x, m))
    }

    fn domain_check(&self, m: f64, index: &[usize]) -> Result<()> {
        if self.in_domain(m) {
            Ok(())
        } else {
            Err(Error::Domain {
                loss: self.name().to_string(),
                value: m,
                index: index.to_vec(),
            })
        }
    }
}

/// Compares `deriv` with central differences of `value` at every `(x, m)` in
/// `points`; the error is relative to `max(1, |deriv|)`.
pub fn check_derivative(spec: &LossSpec, points: &[(f64, f64)], tol: f64) -> Result<()> {
    for &(x, m) in points {
        let h = 1e-6 * m.abs().max(1.0);
        let numeric = (spec.value(x, m + h) - spec.value(x, m - h)) / (2.0 * h);
        let analytic = spec.deriv(x, m);
        let err = (numeric - analytic).abs() / analytic.abs().max(1.0);
        if !err.is_finite() || err > tol {
            return Err(Error::InconsistentLoss {
                name: spec.name().to_string(),
                x,
                m,
                analytic,
                numeric,
            });
        }
    }
    Ok(())
}

/// Nonnegative entrywise weights with the shape of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor(DenseTensor);

impl WeightTensor {
    pub fn new(weights: DenseTensor) -> Result<Self> {
        if let Some(bad) = weights.values().iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidWeights(format!("weight {bad} is not a finite nonnegative number")));
        }
        Ok(Self(weights))
    }

    /// Weight one on indices that are sorted within every cell, zero elsewhere,
    /// so each distinct entry of a symmetric tensor is counted once.
    pub fn symmetry_dedup(dims: &[usize], partition: &ModePartition) -> Result<Self> {
        partition.check_dims(dims)?;
        let t = DenseTensor::from_fn(dims.to_vec(), |idx| {
            let canonical = partition
                .cells()
                .iter()
                .all(|cell| cell.windows(2).all(|w| idx[w[0]] <= idx[w[1]]));
            if canonical {
                1.0
            } else {
                0.0
            }
        })?;
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }
}

/// A loss with optional entrywise weights, `Σ_i w_i ℓ(x_i, m_i)`.
#[derive(Debug, Clone)]
pub struct WeightedLoss {
    pub base: LossSpec,
    pub weights: Option<WeightTensor>,
}

impl WeightedLoss {
    pub fn unweighted(base: LossSpec) -> Self {
        Self { base, weights: None }
    }

    pub fn weighted(base: LossSpec, weights: WeightTensor) -> Self {
        Self {
            base,
            weights: Some(weights),
        }
    }

    #[inline]
    pub(crate) fn weight(&self, lin: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w.values()[lin])
    }

    pub(crate) fn check_dims(&self, dims: &[usize]) -> Result<()> {
        match &self.weights {
            Some(w) if w.dims() != dims => Err(Error::shape(format!(
                "weights have dims {:?}, data has {dims:?}",
                w.dims()
            ))),
            _ => Ok(()),
        }
    }
}

impl From<LossSpec> for WeightedLoss {
    fn from(base: LossSpec) -> Self {
        Self::unweighted(base)
    }
}

/// Data values laid out for a sequential sweep over all linear indices.
pub(crate) enum DataSweep<'a> {
    Dense(&'a [f64]),
    /// Nonzeros sorted by linear index.
    Sparse(Vec<(usize, f64)>),
}

impl<'a> DataSweep<'a> {
    pub(crate) fn new(data: &'a TensorData) -> Self {
        match data {
            TensorData::Dense(t) => DataSweep::Dense(t.values()),
            TensorData::Sparse(t) => {
                let dims = t.dims();
                let mut nz: Vec<(usize, f64)> = t
                    .entries()
                    .map(|(idx, v)| (crate::tensor::linear_index(dims, idx), v))
                    .collect();
                nz.sort_unstable_by_key(|e| e.0);
                DataSweep::Sparse(nz)
            }
        }
    }
}

/// Sums `w_i ℓ(x_i, m_i)` over every entry and, when `out_deriv` is given,
/// writes `w_i ∂ℓ/∂m(x_i, m_i)` into it. `model` holds the model values in
/// vectorization order.
pub(crate) fn sweep(
    loss: &WeightedLoss,
    data: &DataSweep<'_>,
    dims: &[usize],
    model: &[f64],
    out_deriv: Option<&mut [f64]>,
) -> Result<f64> {
    let spec = &loss.base;
    let run = |start: usize, ms: &[f64], mut ys: Option<&mut [f64]>| -> std::result::Result<f64, usize> {
        let mut acc = 0.0;
        let mut nz = match data {
            DataSweep::Sparse(nz) => nz.partition_point(|e| e.0 < start),
            DataSweep::Dense(_) => 0,
        };
        for (off, &m) in ms.iter().enumerate() {
            let lin = start + off;
            let x = match data {
                DataSweep::Dense(v) => v[lin],
                DataSweep::Sparse(list) => {
                    if nz < list.len() && list[nz].0 == lin {
                        nz += 1;
                        list[nz - 1].1
                    } else {
                        0.0
                    }
                }
            };
            let w = loss.weight(lin);
            if w == 0.0 {
                if let Some(y) = ys.as_deref_mut() {
                    y[off] = 0.0;
                }
                continue;
            }
            if !spec.in_domain(m) {
                return Err(lin);
            }
            acc += w * spec.value(x, m);
            if let Some(y) = ys.as_deref_mut() {
                y[off] = w * spec.deriv(x, m);
            }
        }
        Ok(acc)
    };

    let partials: Vec<std::result::Result<f64, usize>> = match out_deriv {
        Some(y) => model
            .par_chunks(CHUNK)
            .zip(y.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(c, (ms, ys))| run(c * CHUNK, ms, Some(ys)))
            .collect(),
        None => model
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, ms)| run(c * CHUNK, ms, None))
            .collect(),
    };
    let mut total = 0.0;
    for p in partials {
        match p {
            Ok(v) => total += v,
            Err(lin) => {
                let mut idx = vec![0; dims.len()];
                multi_index(dims, lin, &mut idx);
                return Err(Error::Domain {
                    loss: spec.name().to_string(),
                    value: model[lin],
                    index: idx,
                });
            }
        }
    }
    Ok(total)
}

fn check_shapes(loss: &WeightedLoss, x: &TensorData, m: &SymKruskal) -> Result<()> {
    if x.dims() != m.dims().as_slice() {
        return Err(Error::shape(format!(
            "data dims {:?} differ from model dims {:?}",
            x.dims(),
            m.dims()
        )));
    }
    loss.check_dims(x.dims())
}

/// `Σ_i w_i ℓ(x_i, m_i)` over the full index set (unstored sparse entries are zeros).
pub fn total_loss(loss: &WeightedLoss, x: &TensorData, m: &SymKruskal) -> Result<f64> {
    check_shapes(loss, x, m)?;
    let model = m.reconstruct();
    sweep(loss, &DataSweep::new(x), x.dims(), model.values(), None)
}

/// The derivative tensor `y_i = w_i ∂ℓ/∂m(x_i, m_i)`.
pub fn derivative_tensor(loss: &WeightedLoss, x: &TensorData, m: &SymKruskal) -> Result<DenseTensor> {
    check_shapes(loss, x, m)?;
    let model = m.reconstruct();
    let mut y = vec![0.0; model.len()];
    sweep(loss, &DataSweep::new(x), x.dims(), model.values(), Some(&mut y))?;
    DenseTensor::new(x.dims().to_vec(), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shipped() -> Vec<LossSpec> {
        LossSpec::NAMES.iter().map(|n| LossSpec::from_name(n).unwrap()).collect()
    }

    #[test]
    fn scalar_examples() {
        let ls = LossSpec::LeastSquares;
        assert_eq!(ls.value(1.0, 0.5), 0.25);
        assert_eq!(ls.deriv(1.0, 0.5), -1.0);

        let b = LossSpec::from_name("bernoulli-odds").unwrap();
        assert!((b.value(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((b.deriv(0.0, 1.0) - 0.5).abs() < 1e-15);

        let p = LossSpec::from_name("poisson").unwrap();
        let eps = DEFAULT_EPSILON;
        assert!((p.value(2.0, 1.0) - (1.0 - 2.0 * (1.0 + eps).ln())).abs() < 1e-15);
        assert!((p.value(2.0, 1.0) - 1.0).abs() < 1e-9);
        assert!((p.deriv(2.0, 1.0) - (1.0 - 2.0 / (1.0 + eps))).abs() < 1e-15);
        assert!((p.deriv(2.0, 1.0) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn domain_violations() {
        let p = LossSpec::from_name("poisson").unwrap();
        assert!(matches!(p.checked_value(1.0, -0.5), Err(Error::Domain { .. })));
        assert!(p.checked_value(1.0, 0.0).is_ok());
        let b = LossSpec::from_name("bernoulli-odds").unwrap();
        assert!(b.checked_deriv(0.0, -1e-9).is_err());
        assert!(LossSpec::LeastSquares.checked_value(0.0, -5.0).is_ok());
        assert!(LossSpec::from_name("huber").is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in shipped() {
            let points: Vec<(f64, f64)> = (0..1000)
                .map(|_| {
                    let x = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..5.0) };
                    let m = match spec.lower_bound() {
                        Some(lo) => lo + rng.random_range(0.01..5.0),
                        None => rng.random_range(-5.0..5.0),
                    };
                    (x, m)
                })
                .collect();
            check_derivative(&spec, &points, 1e-6).unwrap();
        }
    }

    #[test]
    fn custom_loss_registration() {
        let huber = LossSpec::custom("log-cosh", |x, m| (m - x).cosh().ln(), |x, m| (m - x).tanh(), None);
        assert!(huber.is_ok());
        let wrong = LossSpec::custom("broken", |x, m| (m - x).powi(2), |x, m| m - x, None);
        assert!(matches!(wrong, Err(Error::InconsistentLoss { .. })));
    }

    #[test]
    fn weights_must_be_nonnegative() {
        let t = DenseTensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        assert!(WeightTensor::new(t).is_err());
        let t = DenseTensor::new(vec![2], vec![1.0, f64::NAN]).unwrap();
        assert!(WeightTensor::new(t).is_err());
    }

    #[test]
    fn dedup_weights_mark_canonical_indices() {
        let p = ModePartition::parse("[[1,2],[3]]", 3).unwrap();
        let w = WeightTensor::symmetry_dedup(&[3, 3, 2], &p).unwrap();
        let ones = w.values().iter().filter(|v| **v == 1.0).count();
        assert_eq!(ones, 6 * 2);
        assert_eq!(w.tensor().get(&[0, 2, 1]).unwrap(), 1.0);
        assert_eq!(w.tensor().get(&[2, 0, 1]).unwrap(), 0.0);
    }
}
