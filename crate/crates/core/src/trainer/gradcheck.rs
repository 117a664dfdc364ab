use std::sync::Arc;

use crate::data::FrameTensor;
use crate::error::{Error, Result};
use crate::network::{mse_loss, Mode, Network, ParamId};
use crate::neuron::SpikeFn;

/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    /// Largest relative error over coordinates whose routing did not flip.
    pub max_rel_err: f64,
    pub worst_coordinate: Option<ParamId>,
    /// Fraction of coordinates where `+-h` changed a spike piece or a
    /// max-pool winner.
    pub flip_fraction: f64,
    pub checked: usize,
    pub flipped: usize,
    /// Non-flipped coordinates with relative error above the threshold.
    pub over_threshold: usize,
    pub threshold: f64,
}

impl GradcheckReport {
    pub fn passed(&self, max_flip_fraction: f64) -> bool {
        self.over_threshold == 0 && self.flip_fraction <= max_flip_fraction
    }
}

/// `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Loss and routing signature with the smooth spike function.
fn probe(net: &Network, sample: &FrameTensor) -> Result<(f64, u64)> {
    let weights = Arc::new(net.effective_weights(Mode::TrainSoft));
    let out = net.run(&weights, sample, SpikeFn::SurrogatePrimitive, true)?;
    let tape = out.tape.expect("recorded");
    let loss = mse_loss(&out.voted, sample.label, net.n_classes())?;
    Ok((loss, tape.routing_signature(net)))
}

/// Central differences on every trainable scalar.
pub fn gradcheck(
    net: &Network,
    sample: &FrameTensor,
    h: f64,
    threshold: f64,
) -> Result<GradcheckReport> {
    gradcheck_params(net, sample, h, threshold, &net.param_ids())
}

/// Central differences on the listed scalars against BPTT.
///
/// The forward pass emits the surrogate's antiderivative instead of a hard
/// spike, so the loss is piecewise smooth and its true gradient is exactly
/// what the backward pass computes. Coordinates whose perturbation crosses a
/// piece boundary are counted as flips and left out of the error maximum.
pub fn gradcheck_params(
    net: &Network,
    sample: &FrameTensor,
    h: f64,
    threshold: f64,
    ids: &[ParamId],
) -> Result<GradcheckReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "step h must be positive, got {h}"
        )));
    }
    if ids.is_empty() {
        return Err(Error::InvalidParam("no parameters to check".into()));
    }
    let weights = Arc::new(net.effective_weights(Mode::TrainSoft));
    let out = net.run(&weights, sample, SpikeFn::SurrogatePrimitive, true)?;
    let tape = out.tape.expect("recorded");
    let base_sig = tape.routing_signature(net);
    let grads = net.backward(&tape, sample.label)?;

    let mut work = net.clone();
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        worst_coordinate: None,
        flip_fraction: 0.0,
        checked: ids.len(),
        flipped: 0,
        over_threshold: 0,
        threshold,
    };
    for &id in ids {
        let x = net
            .param(id)
            .ok_or_else(|| Error::InvalidParam(format!("no parameter {id}")))?;
        work.set_param(id, x + h)?;
        let (lp, sp) = probe(&work, sample)?;
        work.set_param(id, x - h)?;
        let (lm, sm) = probe(&work, sample)?;
        work.set_param(id, x)?;
        if sp != base_sig || sm != base_sig {
            report.flipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * h);
        let analytic = Network::grad_of(&grads, id).expect("gradient for every parameter");
        let rel = relative_error(analytic, numeric);
        if rel > threshold {
            report.over_threshold += 1;
        }
        if rel > report.max_rel_err || report.worst_coordinate.is_none() {
            report.max_rel_err = rel;
            report.worst_coordinate = Some(id);
        }
    }
    report.flip_fraction = report.flipped as f64 / ids.len() as f64;
    Ok(report)
}
