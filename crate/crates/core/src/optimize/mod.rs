//! Fitting drivers: L-BFGS-B on exact gradients and Adam on sampled ones.

pub mod adam;
pub mod init;
pub mod lbfgsb;
pub mod trace;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{Adam, AdamConfig, AdamState, EpochOutcome};
pub use init::initialize_model;
pub use lbfgsb::{Bounds, LbfgsbConfig, LbfgsbStatus};
pub use trace::{FitTrace, TraceKind, TraceRecord};

use crate::error::{Error, Result};
use crate::kruskal::SymKruskal;
use crate::objective::{regularizer, Objective, ParamLayout};
use crate::stochastic::{stochastic_gradient, LossEstimator, Sampler};

/// Result of one fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: SymKruskal,
    pub trace: FitTrace,
    /// Exact objective of `model`.
    pub objective: f64,
    /// L-BFGS-B iterations or Adam epochs.
    pub iterations: usize,
    /// Short reason for stopping.
    pub status: String,
}

/// Box implied by the loss: every parameter above its lower bound, if any.
pub fn bounds_for(objective: &Objective<'_>, layout: &ParamLayout) -> Bounds {
    match objective.config().loss.base.lower_bound() {
        Some(lo) => Bounds::lower(layout.len(), lo),
        None => Bounds::unbounded(layout.len()),
    }
}

fn layout_for(objective: &Objective<'_>, init: &SymKruskal) -> ParamLayout {
    ParamLayout::for_model(init, objective.config().optimize_lambda)
}

/// Fits with L-BFGS-B from `init`. Every iterate satisfies the loss bounds;
/// trial points outside the loss domain count as infinite objective.
pub fn fit_lbfgsb(objective: &Objective<'_>, init: SymKruskal, cfg: &LbfgsbConfig) -> Result<FitOutcome> {
    let layout = layout_for(objective, &init);
    let bounds = bounds_for(objective, &layout);
    let start = Instant::now();
    let mut trace = FitTrace::new();
    let mut first = true;
    let fun = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
        let m = layout.unflatten(v, &init)?;
        match objective.value_and_gradient(&m) {
            Ok((f, g)) => {
                first = false;
                Ok((f, layout.flatten_gradient(&g)))
            }
            Err(Error::Domain { .. }) if !first => Ok((f64::INFINITY, vec![0.0; v.len()])),
            Err(e) => Err(e),
        }
    };
    let res = lbfgsb::minimize(cfg, layout.flatten(&init), &bounds, fun, |it, f, _| {
        trace.push(it, start.elapsed().as_secs_f64(), f, TraceKind::Exact)
    })?;
    let model = layout.unflatten(&res.x, &init)?;
    Ok(FitOutcome {
        model,
        trace,
        objective: res.f,
        iterations: res.iterations,
        status: res.status.as_str().to_string(),
    })
}

/// Fits with epoch-based Adam and sampled gradients from `init`. The sampler
/// seed in `cfg` drives both the gradient batches and, on a separate stream,
/// the fixed estimation set.
pub fn fit_adam(objective: &Objective<'_>, init: SymKruskal, cfg: &AdamConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let layout = layout_for(objective, &init);
    let bounds = bounds_for(objective, &layout);
    let data = objective.data();
    let loss = &objective.config().loss;
    let gamma = objective.config().gamma;
    let frozen = !objective.config().optimize_lambda;

    let mut sampler = Sampler::new(cfg.sampler.clone())?;
    let mut est_rng = ChaCha8Rng::seed_from_u64(cfg.sampler.seed);
    est_rng.set_stream(1);
    let mut est_sampler = Sampler::with_rng(cfg.sampler.scaled(cfg.estimator_factor), est_rng)?;
    let estimator = LossEstimator::draw(&mut est_sampler, data)?;

    let start = Instant::now();
    let mut excluded = Duration::ZERO;
    let mut trace = FitTrace::new();
    let estimate = |v: &[f64]| -> Result<f64> {
        let m = layout.unflatten(v, &init)?;
        Ok(estimator.estimate_loss(data, loss, &m)? + regularizer(&m, gamma))
    };
    let elapsed = |excluded: Duration| (start.elapsed().saturating_sub(excluded)).as_secs_f64();
    let monitor = |v: &[f64], index: usize, trace: &mut FitTrace, excluded: &mut Duration| -> Result<()> {
        if cfg.exact_monitor {
            let t = Instant::now();
            let now = elapsed(*excluded);
            let value = objective.value(&layout.unflatten(v, &init)?)?;
            trace.push(index, now, value, TraceKind::Exact);
            *excluded += t.elapsed();
        }
        Ok(())
    };

    let mut x0 = layout.flatten(&init);
    if cfg.project_to_bounds {
        bounds.project(&mut x0);
    }
    let est0 = estimate(&x0)?;
    let mut adam = Adam::new(cfg.clone(), x0, bounds, est0)?;
    trace.push(0, elapsed(excluded), est0, TraceKind::Estimated);
    monitor(&adam.state().params, 0, &mut trace, &mut excluded)?;

    while !adam.finished() {
        let grad = |v: &[f64]| -> Result<Vec<f64>> {
            let m = layout.unflatten(v, &init)?;
            let y = sampler.sample(data, loss, &m)?.to_sparse();
            Ok(layout.flatten_gradient(&stochastic_gradient(&y, &m, gamma, frozen)?))
        };
        let outcome = adam.run_epoch(grad, estimate)?;
        let epoch = adam.epoch();
        match outcome {
            EpochOutcome::Accepted { estimate } => {
                trace.push(epoch, elapsed(excluded), estimate, TraceKind::Estimated);
                monitor(&adam.state().params, epoch, &mut trace, &mut excluded)?;
            }
            EpochOutcome::Rejected { estimate } => {
                log::debug!("epoch {epoch}: bad epoch (estimate {estimate:.6e}), lr now {:.3e}", adam.learning_rate());
                trace.push(epoch, elapsed(excluded), estimate, TraceKind::BadEpoch);
            }
        }
    }

    let status = if adam.consecutive_bad() >= cfg.max_bad_epochs {
        "max-bad-epochs"
    } else {
        "max-epochs"
    };
    let model = layout.unflatten(&adam.state().params, &init)?;
    let value = objective.value(&model)?;
    Ok(FitOutcome {
        model,
        trace,
        objective: value,
        iterations: adam.epoch(),
        status: status.to_string(),
    })
}
