//! Adam organized in epochs with checkpoint rollback.
//!
//! After each epoch the objective is estimated. An epoch whose estimate does
//! not improve on the last accepted one by the factor `κ` is a bad epoch: the
//! parameters, both moment estimates and the step counter are restored to the
//! checkpoint and the learning rate is decayed.

use crate::error::{Error, Result};
use crate::optimize::lbfgsb::Bounds;
use crate::stochastic::SamplerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iters_per_epoch: usize,
    pub max_epochs: usize,
    /// An epoch must bring the estimate below `κ` times the previous one.
    pub kappa: f64,
    /// Stop after this many bad epochs in a row.
    pub max_bad_epochs: usize,
    /// Learning-rate multiplier applied on each bad epoch; 1 disables decay.
    pub bad_epoch_decay: f64,
    /// Clamp parameters into the bounds after every step.
    pub project_to_bounds: bool,
    pub sampler: SamplerConfig,
    /// Size of the fixed estimation set relative to a gradient batch.
    pub estimator_factor: usize,
    /// Also record the exact objective after every accepted epoch. Its cost is
    /// left out of the reported wall-clock times.
    pub exact_monitor: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iters_per_epoch: 100,
            max_epochs: 500,
            kappa: 0.99,
            max_bad_epochs: 5,
            bad_epoch_decay: 0.5,
            project_to_bounds: true,
            sampler: SamplerConfig::stratified(500, 500, 0),
            estimator_factor: 10,
            exact_monitor: false,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("Adam learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad("kappa must lie in (0, 1)");
        }
        if self.iters_per_epoch == 0 || self.max_epochs == 0 || self.max_bad_epochs == 0 {
            return bad("iters_per_epoch, max_epochs and max_bad_epochs must be positive");
        }
        if !(self.bad_epoch_decay > 0.0 && self.bad_epoch_decay <= 1.0) {
            return bad("bad_epoch_decay must lie in (0, 1]");
        }
        if self.estimator_factor == 0 {
            return bad("estimator_factor must be positive");
        }
        self.sampler.validate()
    }
}

/// Everything a rollback restores.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub params: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub iteration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpochOutcome {
    Accepted { estimate: f64 },
    Rejected { estimate: f64 },
}

/// Whether `new` is a sufficient improvement on `old`. Written as a decrease
/// of `(1 − κ)|old|` so that negative objectives are handled the same way.
pub fn sufficient_decrease(new: f64, old: f64, kappa: f64) -> bool {
    new.is_finite() && new < old - (1.0 - kappa) * old.abs()
}

#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    bounds: Bounds,
    state: AdamState,
    checkpoint: AdamState,
    checkpoint_estimate: f64,
    epoch: usize,
    consecutive_bad: usize,
}

impl Adam {
    /// Starts from `x0` (projected into the bounds when projection is on);
    /// `estimate` is the objective estimate at that point.
    pub fn new(cfg: AdamConfig, mut x0: Vec<f64>, bounds: Bounds, estimate: f64) -> Result<Self> {
        cfg.validate()?;
        if bounds.len() != x0.len() {
            return Err(Error::ParamLength {
                got: bounds.len(),
                expected: x0.len(),
            });
        }
        if cfg.project_to_bounds {
            bounds.project(&mut x0);
        }
        let n = x0.len();
        let state = AdamState {
            params: x0,
            m1: vec![0.0; n],
            m2: vec![0.0; n],
            iteration: 0,
        };
        Ok(Self {
            lr: cfg.learning_rate,
            cfg,
            bounds,
            checkpoint: state.clone(),
            state,
            checkpoint_estimate: estimate,
            epoch: 0,
            consecutive_bad: 0,
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn checkpoint(&self) -> &AdamState {
        &self.checkpoint
    }

    pub fn checkpoint_estimate(&self) -> f64 {
        self.checkpoint_estimate
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn consecutive_bad(&self) -> usize {
        self.consecutive_bad
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.cfg.max_epochs || self.consecutive_bad >= self.cfg.max_bad_epochs
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, grad: &[f64]) -> Result<()> {
        if grad.len() != self.state.params.len() {
            return Err(Error::ParamLength {
                got: grad.len(),
                expected: self.state.params.len(),
            });
        }
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let s = &mut self.state;
        s.iteration += 1;
        let t = s.iteration as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for i in 0..grad.len() {
            let g = grad[i];
            s.m1[i] = b1 * s.m1[i] + (1.0 - b1) * g;
            s.m2[i] = b2 * s.m2[i] + (1.0 - b2) * g * g;
            let mhat = s.m1[i] / c1;
            let vhat = s.m2[i] / c2;
            s.params[i] -= self.lr * mhat / (vhat.sqrt() + self.cfg.epsilon);
        }
        if self.cfg.project_to_bounds {
            self.bounds.project(&mut s.params);
        }
        Ok(())
    }

    /// Closes an epoch given the estimate at the current parameters: either
    /// makes the current state the checkpoint or restores the checkpoint.
    pub fn end_epoch(&mut self, estimate: f64) -> EpochOutcome {
        self.epoch += 1;
        if sufficient_decrease(estimate, self.checkpoint_estimate, self.cfg.kappa) {
            self.checkpoint = self.state.clone();
            self.checkpoint_estimate = estimate;
            self.consecutive_bad = 0;
            EpochOutcome::Accepted { estimate }
        } else {
            self.state = self.checkpoint.clone();
            self.lr *= self.cfg.bad_epoch_decay;
            self.consecutive_bad += 1;
            EpochOutcome::Rejected { estimate }
        }
    }

    /// Runs `iters_per_epoch` steps with gradients from `grad` and closes the
    /// epoch with the estimate from `estimate`.
    pub fn run_epoch<G, E>(&mut self, mut grad: G, mut estimate: E) -> Result<EpochOutcome>
    where
        G: FnMut(&[f64]) -> Result<Vec<f64>>,
        E: FnMut(&[f64]) -> Result<f64>,
    {
        for _ in 0..self.cfg.iters_per_epoch {
            let g = grad(&self.state.params)?;
            self.step(&g)?;
        }
        let est = estimate(&self.state.params)?;
        Ok(self.end_epoch(est))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AdamConfig {
        AdamConfig {
            iters_per_epoch: 10,
            max_epochs: 50,
            ..AdamConfig::default()
        }
    }

    fn quad(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 3.0).powi(2)).sum()
    }

    #[test]
    fn zero_gradient_stops_on_bad_epochs() {
        let x0 = vec![1.0, 2.0];
        let mut a = Adam::new(cfg(), x0.clone(), Bounds::unbounded(2), quad(&x0)).unwrap();
        while !a.finished() {
            let out = a.run_epoch(|x| Ok(vec![0.0; x.len()]), |x| Ok(quad(x))).unwrap();
            assert!(matches!(out, EpochOutcome::Rejected { .. }));
        }
        assert_eq!(a.epoch(), cfg().max_bad_epochs);
        assert_eq!(a.state().params, x0);
    }

    #[test]
    fn rollback_restores_checkpoint_exactly() {
        let x0 = vec![0.0, 0.5, -1.0];
        let mut a = Adam::new(cfg(), x0.clone(), Bounds::unbounded(3), quad(&x0)).unwrap();
        let grad = |x: &[f64]| Ok(x.iter().map(|v| 2.0 * (v - 3.0)).collect());
        assert!(matches!(a.run_epoch(grad, |x| Ok(quad(x))).unwrap(), EpochOutcome::Accepted { .. }));
        let saved = a.state().clone();
        assert_eq!(&saved, a.checkpoint());
        let lr = a.learning_rate();
        // Gradient pointing away from the minimum.
        let out = a
            .run_epoch(|x| Ok(x.iter().map(|v| -2.0 * (v - 3.0)).collect()), |x| Ok(quad(x)))
            .unwrap();
        assert!(matches!(out, EpochOutcome::Rejected { .. }));
        assert_eq!(a.state().params, saved.params);
        assert_eq!(a.state().m1, saved.m1);
        assert_eq!(a.state().m2, saved.m2);
        assert_eq!(a.state().iteration, saved.iteration);
        assert_eq!(a.learning_rate(), lr * 0.5);
    }

    #[test]
    fn projection_keeps_bounds() {
        let x0 = vec![0.1, 0.2];
        let mut a = Adam::new(cfg(), x0, Bounds::lower(2, 0.0), 1.0).unwrap();
        for _ in 0..100 {
            a.step(&[1.0, 1.0]).unwrap();
            assert!(a.state().params.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn decrease_rule() {
        assert!(sufficient_decrease(0.98, 1.0, 0.99));
        assert!(!sufficient_decrease(0.995, 1.0, 0.99));
        assert!(sufficient_decrease(-1.02, -1.0, 0.99));
        assert!(!sufficient_decrease(-1.005, -1.0, 0.99));
        assert!(!sufficient_decrease(f64::NAN, 1.0, 0.99));
    }

    #[test]
    fn validates() {
        assert!(AdamConfig { kappa: 1.0, ..cfg() }.validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}
