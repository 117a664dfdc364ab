//! Quantized spiking network: synaptic layers, LIF neurons, max pooling and
//! a voting head, unrolled over time, with manual BPTT.

mod kernels;
pub mod presets;
mod spec;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) use spec::synaptic_weight_count;
pub use spec::{LayerSpec, NetworkSpec, Shape};

use crate::data::FrameTensor;
use crate::error::{Error, Result};
use crate::neuron::{lif_backward, lif_sequence_with, LifTape, SpikeFn};
use crate::quantizer::{
    derive_spec, init_scales, level_index, quantize_soft_full, quantize_step, uniform_levels,
    LayerQuantState, Precision, QuantSpec,
};
use kernels::ConvGeom;

/// Rounds through `f32`; stored parameters are kept 32-bit representable.
#[inline]
pub(crate) fn snap(x: f64) -> f64 {
    x as f32 as f64
}

/// Quantizer attached to a synaptic layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerQuantizer {
    pub spec: QuantSpec,
    pub state: LayerQuantState,
}

impl LayerQuantizer {
    pub fn bits(&self) -> u32 {
        match self.spec.levels().len() {
            2 => 1,
            3 => 2,
            n => usize::BITS - (n - 1).leading_zeros(),
        }
    }
}

/// Full-precision weights of one synaptic layer and its optional quantizer.
#[derive(Clone, Debug, PartialEq)]
pub struct Synapse {
    pub weights: Vec<f64>,
    pub quant: Option<LayerQuantizer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Sigmoid quantizer; records a tape for BPTT.
    TrainSoft,
    /// Step quantizer; no tape.
    InferHard,
}

/// Partial derivatives of the soft-quantized weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantPartials {
    pub d_w: Vec<f64>,
    pub d_alpha: Vec<f64>,
    pub d_beta: Vec<f64>,
}

/// Weights as seen by the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveWeights {
    pub values: Vec<f64>,
    /// Present for soft-quantized layers.
    pub partials: Option<QuantPartials>,
}

/// Per-layer effective weights (`None` for weightless layers).
pub type WeightSet = Vec<Option<EffectiveWeights>>;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerTape {
    Synaptic { inputs: Vec<Vec<f64>> },
    Lif(LifTape),
    MaxPool { argmax: Vec<Vec<u32>> },
    Voting,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ActivationTape {
    pub weights: Arc<WeightSet>,
    pub layers: Vec<LayerTape>,
    /// Voting-head output per timestep, `T x N`.
    pub voted: Vec<Vec<f64>>,
    pub spike_fn: SpikeFn,
}

impl ActivationTape {
    /// Hash of every discrete decision the forward pass made: spike
    /// outcomes (or surrogate pieces in smooth mode) and max-pool winners.
    pub fn routing_signature(&self, net: &Network) -> u64 {
        let mut h = DefaultHasher::new();
        let sp = &net.spec.surrogate;
        let th = net.spec.neuron.v_threshold;
        for layer in &self.layers {
            match layer {
                LayerTape::Lif(t) => {
                    for step in &t.h {
                        for &v in step {
                            let key = match self.spike_fn {
                                SpikeFn::Heaviside => u8::from(v >= th),
                                SpikeFn::SurrogatePrimitive => sp.piece(v - th),
                            };
                            key.hash(&mut h);
                        }
                    }
                }
                LayerTape::MaxPool { argmax } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    /// Mean voted output over time, one rate per class.
    pub out_rates: Vec<f64>,
    pub voted: Vec<Vec<f64>>,
    pub tape: Option<ActivationTape>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

/// Gradients indexed by layer; `None` for weightless layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerGrad>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .synapses
                .iter()
                .map(|s| {
                    s.as_ref().map(|s| LayerGrad {
                        weights: vec![0.0; s.weights.len()],
                        alpha: 0.0,
                        beta: 0.0,
                    })
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                    *x += y;
                }
                a.alpha += b.alpha;
                a.beta += b.beta;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.layers.iter_mut().flatten() {
            g.weights.iter_mut().for_each(|w| *w *= k);
            g.alpha *= k;
            g.beta *= k;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Weight(usize),
    Alpha,
    Beta,
}

/// Address of one trainable scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId {
    pub layer: usize,
    pub kind: ParamKind,
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            ParamKind::Weight(i) => write!(f, "layer {} weight {}", self.layer, i),
            ParamKind::Alpha => write!(f, "layer {} alpha", self.layer),
            ParamKind::Beta => write!(f, "layer {} beta", self.layer),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Shape>,
    synapses: Vec<Option<Synapse>>,
}

/// Allocates a network with seeded uniform `+-1/sqrt(fan_in)` weights and,
/// for low-bit precision, a quantizer on every synaptic layer.
pub fn build_network(spec: NetworkSpec, seed: u64) -> Result<Network> {
    let shapes = spec.shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut synapses = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        if !layer.is_synaptic() {
            synapses.push(None);
            continue;
        }
        let input = shapes[i];
        let count = spec::synaptic_weight_count(layer, &input);
        let fan_in = match *layer {
            LayerSpec::Conv2d { kernel, .. } => input.channels * kernel * kernel,
            _ => input.len(),
        };
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights: Vec<f64> = (0..count)
            .map(|_| snap(rng.gen_range(-bound..bound)))
            .collect();
        let quant = match spec.precision {
            Precision::Full => None,
            Precision::Bits(b) => {
                let levels = uniform_levels(b as u32)?;
                let (alpha, beta) = init_scales(&weights, &levels)?;
                Some(LayerQuantizer {
                    spec: derive_spec(levels)?,
                    state: LayerQuantState::new(snap(alpha), snap(beta), 1.0)?,
                })
            }
        };
        synapses.push(Some(Synapse { weights, quant }));
    }
    Ok(Network {
        spec,
        shapes,
        synapses,
    })
}

impl Network {
    /// Assembles a network from explicit synapses, validating sizes.
    pub fn from_parts(spec: NetworkSpec, synapses: Vec<Option<Synapse>>) -> Result<Self> {
        let shapes = spec.shapes()?;
        if synapses.len() != spec.layers.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} synapse slots for {} layers",
                synapses.len(),
                spec.layers.len()
            )));
        }
        for (i, (layer, syn)) in spec.layers.iter().zip(&synapses).enumerate() {
            let expect = spec::synaptic_weight_count(layer, &shapes[i]);
            match (layer.is_synaptic(), syn) {
                (true, Some(s)) if s.weights.len() == expect => {
                    if let Some(q) = &s.quant {
                        q.state.validate()?;
                    }
                }
                (false, None) => {}
                _ => {
                    return Err(Error::InvalidNetwork {
                        layer: i,
                        reason: format!("expected {expect} weights"),
                    })
                }
            }
        }
        Ok(Network {
            spec,
            shapes,
            synapses,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn n_classes(&self) -> usize {
        self.shapes.last().map(Shape::len).unwrap_or(0)
    }

    pub fn timesteps(&self) -> usize {
        self.spec.timesteps
    }

    pub fn parameter_count(&self) -> usize {
        self.synapses
            .iter()
            .flatten()
            .map(|s| s.weights.len())
            .sum()
    }

    pub fn synapse(&self, layer: usize) -> Option<&Synapse> {
        self.synapses.get(layer).and_then(Option::as_ref)
    }

    pub fn synapse_mut(&mut self, layer: usize) -> Option<&mut Synapse> {
        self.synapses.get_mut(layer).and_then(Option::as_mut)
    }

    pub fn synapses(&self) -> &[Option<Synapse>] {
        &self.synapses
    }

    /// Indices of the synaptic layers.
    pub fn synaptic_layers(&self) -> Vec<usize> {
        (0..self.synapses.len())
            .filter(|&i| self.synapses[i].is_some())
            .collect()
    }

    /// Multiplies a layer's effective weights by `gain`: weights and alpha
    /// scale up, beta scales down, so hard level indices are unchanged.
    pub fn scale_synapse(&mut self, layer: usize, gain: f64) -> Result<()> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "gain must be positive, got {gain}"
            )));
        }
        let s = self
            .synapse_mut(layer)
            .ok_or_else(|| Error::InvalidParam(format!("layer {layer} has no weights")))?;
        s.weights.iter_mut().for_each(|w| *w = snap(*w * gain));
        if let Some(q) = s.quant.as_mut() {
            q.state.alpha = snap(q.state.alpha * gain);
            q.state.beta = snap(q.state.beta / gain);
        }
        Ok(())
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<()> {
        for s in self.synapses.iter_mut().flatten() {
            if let Some(q) = s.quant.as_mut() {
                let st = LayerQuantState {
                    temperature,
                    ..q.state
                };
                st.validate()?;
                q.state = st;
            }
        }
        Ok(())
    }

    /// Every trainable scalar, in a stable order.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for (layer, s) in self.synapses.iter().enumerate() {
            let Some(s) = s else { continue };
            ids.extend((0..s.weights.len()).map(|i| ParamId {
                layer,
                kind: ParamKind::Weight(i),
            }));
            if s.quant.is_some() {
                ids.push(ParamId {
                    layer,
                    kind: ParamKind::Alpha,
                });
                ids.push(ParamId {
                    layer,
                    kind: ParamKind::Beta,
                });
            }
        }
        ids
    }

    fn param_slot(&mut self, id: ParamId) -> Option<&mut f64> {
        let s = self.synapse_mut(id.layer)?;
        match id.kind {
            ParamKind::Weight(i) => s.weights.get_mut(i),
            ParamKind::Alpha => s.quant.as_mut().map(|q| &mut q.state.alpha),
            ParamKind::Beta => s.quant.as_mut().map(|q| &mut q.state.beta),
        }
    }

    pub fn param(&self, id: ParamId) -> Option<f64> {
        let s = self.synapse(id.layer)?;
        match id.kind {
            ParamKind::Weight(i) => s.weights.get(i).copied(),
            ParamKind::Alpha => s.quant.as_ref().map(|q| q.state.alpha),
            ParamKind::Beta => s.quant.as_ref().map(|q| q.state.beta),
        }
    }

    pub fn set_param(&mut self, id: ParamId, value: f64) -> Result<()> {
        let slot = self
            .param_slot(id)
            .ok_or_else(|| Error::InvalidParam(format!("no parameter {id}")))?;
        *slot = value;
        Ok(())
    }

    pub fn grad_of(grads: &Gradients, id: ParamId) -> Option<f64> {
        let g = grads.layers.get(id.layer)?.as_ref()?;
        match id.kind {
            ParamKind::Weight(i) => g.weights.get(i).copied(),
            ParamKind::Alpha => Some(g.alpha),
            ParamKind::Beta => Some(g.beta),
        }
    }

    /// Quantizes every synaptic layer once for the given mode.
    pub fn effective_weights(&self, mode: Mode) -> WeightSet {
        self.synapses
            .iter()
            .map(|s| {
                let s = s.as_ref()?;
                let Some(q) = &s.quant else {
                    return Some(EffectiveWeights {
                        values: s.weights.clone(),
                        partials: None,
                    });
                };
                Some(match mode {
                    Mode::InferHard => EffectiveWeights {
                        values: s
                            .weights
                            .iter()
                            .map(|&w| quantize_step(w, &q.spec, &q.state))
                            .collect(),
                        partials: None,
                    },
                    Mode::TrainSoft => {
                        let n = s.weights.len();
                        let mut values = Vec::with_capacity(n);
                        let mut p = QuantPartials {
                            d_w: Vec::with_capacity(n),
                            d_alpha: Vec::with_capacity(n),
                            d_beta: Vec::with_capacity(n),
                        };
                        for &w in &s.weights {
                            let r = quantize_soft_full(w, &q.spec, &q.state);
                            values.push(r.value);
                            p.d_w.push(r.d_w);
                            p.d_alpha.push(r.d_alpha);
                            p.d_beta.push(r.d_beta);
                        }
                        EffectiveWeights {
                            values,
                            partials: Some(p),
                        }
                    }
                })
            })
            .collect()
    }

    /// Hard level index of every weight in a quantized layer.
    pub fn level_indices(&self, layer: usize) -> Option<Vec<usize>> {
        let s = self.synapse(layer)?;
        let q = s.quant.as_ref()?;
        Some(
            s.weights
                .iter()
                .map(|&w| level_index(w, &q.spec, &q.state))
                .collect(),
        )
    }

    fn conv_geom(&self, layer: usize) -> ConvGeom {
        let LayerSpec::Conv2d {
            kernel,
            same_padding,
            ..
        } = self.spec.layers[layer]
        else {
            unreachable!("conv_geom on non-conv layer")
        };
        ConvGeom {
            input: self.shapes[layer],
            output: self.shapes[layer + 1],
            kernel,
            pad: if same_padding { kernel / 2 } else { 0 },
        }
    }

    pub fn forward(
        &self,
        frames: &FrameTensor,
        mode: Mode,
    ) -> Result<(Vec<f64>, Option<ActivationTape>)> {
        let weights = Arc::new(self.effective_weights(mode));
        let out = self.run(
            &weights,
            frames,
            SpikeFn::Heaviside,
            mode == Mode::TrainSoft,
        )?;
        Ok((out.out_rates, out.tape))
    }

    /// Forward pass against precomputed effective weights.
    pub fn run(
        &self,
        weights: &Arc<WeightSet>,
        frames: &FrameTensor,
        spike_fn: SpikeFn,
        record: bool,
    ) -> Result<ForwardOutput> {
        if frames.shape() != self.spec.input || frames.timesteps() != self.spec.timesteps {
            return Err(Error::ShapeMismatch(format!(
                "frames {}x{:?} do not match network input {}x{:?}",
                frames.timesteps(),
                frames.shape(),
                self.spec.timesteps,
                self.spec.input
            )));
        }
        if weights.len() != self.synapses.len() {
            return Err(Error::ShapeMismatch(
                "weight set does not match network".into(),
            ));
        }
        let steps = self.spec.timesteps;
        let mut acts: Vec<Vec<f64>> = (0..steps).map(|t| frames.timestep(t).to_vec()).collect();
        let mut tapes = Vec::with_capacity(if record { self.spec.layers.len() } else { 0 });

        for (i, layer) in self.spec.layers.iter().enumerate() {
            let next: Vec<Vec<f64>> = match *layer {
                LayerSpec::Conv2d { .. } => {
                    let g = self.conv_geom(i);
                    let w = &effective(weights, i)?.values;
                    acts.iter()
                        .map(|a| kernels::conv_forward(&g, w, a))
                        .collect()
                }
                LayerSpec::Dense { .. } => {
                    let n_in = self.shapes[i].len();
                    let w = &effective(weights, i)?.values;
                    acts.iter()
                        .map(|a| kernels::dense_forward(w, n_in, a))
                        .collect()
                }
                LayerSpec::MaxPool2 => {
                    let shape = self.shapes[i];
                    let (out, arg): (Vec<_>, Vec<_>) = acts
                        .iter()
                        .map(|a| kernels::maxpool2_forward(&shape, a))
                        .unzip();
                    if record {
                        tapes.push(LayerTape::MaxPool { argmax: arg });
                    }
                    out
                }
                LayerSpec::Lif => {
                    let (s, tape) = lif_sequence_with(
                        &acts,
                        &self.spec.neuron,
                        &self.spec.surrogate,
                        spike_fn,
                        None,
                    )?;
                    if record {
                        tapes.push(LayerTape::Lif(tape));
                    }
                    s
                }
                LayerSpec::VotingAvgPool { window } => {
                    if record {
                        tapes.push(LayerTape::Voting);
                    }
                    acts.iter()
                        .map(|a| kernels::vote_forward(a, window))
                        .collect()
                }
            };
            if layer.is_synaptic() && record {
                tapes.push(LayerTape::Synaptic {
                    inputs: std::mem::take(&mut acts),
                });
            }
            acts = next;
        }

        let n = self.n_classes();
        let mut out_rates = vec![0.0; n];
        for step in &acts {
            for (r, v) in out_rates.iter_mut().zip(step) {
                *r += v;
            }
        }
        out_rates.iter_mut().for_each(|r| *r /= steps as f64);
        let tape = record.then(|| ActivationTape {
            weights: Arc::clone(weights),
            layers: tapes,
            voted: acts.clone(),
            spike_fn,
        });
        Ok(ForwardOutput {
            out_rates,
            voted: acts,
            tape,
        })
    }

    /// `dL/dW_Q` for every synaptic layer, from a recorded tape.
    pub fn backward_quantized(
        &self,
        tape: &ActivationTape,
        label: usize,
    ) -> Result<Vec<Option<Vec<f64>>>> {
        let n_layers = self.spec.layers.len();
        if tape.layers.len() != n_layers || tape.weights.len() != n_layers {
            return Err(Error::ShapeMismatch(format!(
                "tape has {} layers, network has {n_layers}",
                tape.layers.len()
            )));
        }
        let n = self.n_classes();
        let steps = tape.voted.len();
        if label >= n {
            return Err(Error::LabelOutOfRange {
                label,
                n_classes: n,
            });
        }
        let norm = 2.0 / (steps as f64 * n as f64);
        let mut grad: Vec<Vec<f64>> = tape
            .voted
            .iter()
            .map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(k, &s)| norm * (s - if k == label { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        let first_synaptic = self.synaptic_layers().first().copied().unwrap_or(0);
        let mut out = vec![None; n_layers];

        for i in (0..n_layers).rev() {
            let want_input = i > first_synaptic;
            grad = match (&self.spec.layers[i], &tape.layers[i]) {
                (LayerSpec::VotingAvgPool { window }, LayerTape::Voting) => grad
                    .iter()
                    .map(|g| kernels::vote_backward(g, *window))
                    .collect(),
                (LayerSpec::Lif, LayerTape::Lif(lt)) => {
                    lif_backward(lt, &grad, &self.spec.neuron, &self.spec.surrogate)?
                }
                (LayerSpec::MaxPool2, LayerTape::MaxPool { argmax }) => {
                    let len = self.shapes[i].len();
                    grad.iter()
                        .zip(argmax)
                        .map(|(g, a)| kernels::maxpool2_backward(len, a, g))
                        .collect()
                }
                (LayerSpec::Conv2d { .. }, LayerTape::Synaptic { inputs }) => {
                    let g = self.conv_geom(i);
                    let w = &effective(&tape.weights, i)?.values;
                    let mut gw = vec![0.0; w.len()];
                    let gi: Vec<Vec<f64>> = inputs
                        .iter()
                        .zip(&grad)
                        .map(|(x, go)| {
                            kernels::conv_backward(&g, w, x, go, &mut gw, want_input)
                                .unwrap_or_default()
                        })
                        .collect();
                    out[i] = Some(gw);
                    gi
                }
                (LayerSpec::Dense { .. }, LayerTape::Synaptic { inputs }) => {
                    let n_in = self.shapes[i].len();
                    let w = &effective(&tape.weights, i)?.values;
                    let mut gw = vec![0.0; w.len()];
                    let gi: Vec<Vec<f64>> = inputs
                        .iter()
                        .zip(&grad)
                        .map(|(x, go)| {
                            kernels::dense_backward(w, n_in, x, go, &mut gw, want_input)
                                .unwrap_or_default()
                        })
                        .collect();
                    out[i] = Some(gw);
                    gi
                }
                _ => {
                    return Err(Error::ShapeMismatch(format!(
                        "tape entry for layer {i} does not match its kind"
                    )))
                }
            };
            if i <= first_synaptic && self.spec.layers[i].is_synaptic() {
                break;
            }
        }
        Ok(out)
    }

    /// Chains `dL/dW_Q` through the quantizer to get gradients for the
    /// full-precision weights and the scale factors.
    pub fn chain_quantizer(
        &self,
        weights: &WeightSet,
        grad_wq: &[Option<Vec<f64>>],
    ) -> Result<Gradients> {
        let mut layers = Vec::with_capacity(self.synapses.len());
        for (i, syn) in self.synapses.iter().enumerate() {
            let Some(syn) = syn else {
                layers.push(None);
                continue;
            };
            let g = grad_wq
                .get(i)
                .and_then(Option::as_ref)
                .ok_or_else(|| Error::ShapeMismatch(format!("missing gradient for layer {i}")))?;
            let lg = match (&syn.quant, effective(weights, i)?.partials.as_ref()) {
                (None, _) => LayerGrad {
                    weights: g.clone(),
                    alpha: 0.0,
                    beta: 0.0,
                },
                (Some(_), Some(p)) => {
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut dw = Vec::with_capacity(g.len());
                    for j in 0..g.len() {
                        dw.push(g[j] * p.d_w[j]);
                        alpha += g[j] * p.d_alpha[j];
                        beta += g[j] * p.d_beta[j];
                    }
                    LayerGrad {
                        weights: dw,
                        alpha,
                        beta,
                    }
                }
                (Some(_), None) => {
                    return Err(Error::InvalidParam(format!(
                        "layer {i}: tape was recorded with hard quantization"
                    )))
                }
            };
            layers.push(Some(lg));
        }
        Ok(Gradients { layers })
    }

    /// BPTT gradients for weights, alpha and beta.
    pub fn backward(&self, tape: &ActivationTape, label: usize) -> Result<Gradients> {
        let gq = self.backward_quantized(tape, label)?;
        self.chain_quantizer(&tape.weights, &gq)
    }

    /// Class with the highest hard-mode rate; ties go to the lowest index.
    pub fn predict(&self, frames: &FrameTensor) -> Result<usize> {
        let (rates, _) = self.forward(frames, Mode::InferHard)?;
        Ok(argmax_lowest(&rates))
    }

    /// Predicts with precomputed (hard) weights.
    pub fn predict_with(&self, weights: &Arc<WeightSet>, frames: &FrameTensor) -> Result<usize> {
        let out = self.run(weights, frames, SpikeFn::Heaviside, false)?;
        Ok(argmax_lowest(&out.out_rates))
    }
}

fn effective(weights: &WeightSet, layer: usize) -> Result<&EffectiveWeights> {
    weights
        .get(layer)
        .and_then(Option::as_ref)
        .ok_or_else(|| Error::ShapeMismatch(format!("no effective weights for layer {layer}")))
}

/// Index of the largest value; the first one wins ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean squared error against a one-hot label held constant over time.
pub fn mse_loss(voted: &[Vec<f64>], label: usize, n_classes: usize) -> Result<f64> {
    if label >= n_classes {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    if voted.is_empty() {
        return Err(Error::ShapeMismatch("no timesteps".into()));
    }
    let mut total = 0.0;
    for (t, step) in voted.iter().enumerate() {
        if step.len() != n_classes {
            return Err(Error::ShapeMismatch(format!(
                "timestep {t} has {} outputs, expected {n_classes}",
                step.len()
            )));
        }
        let sq: f64 = step
            .iter()
            .enumerate()
            .map(|(n, &s)| {
                let y = if n == label { 1.0 } else { 0.0 };
                (s - y) * (s - y)
            })
            .sum();
        total += sq / n_classes as f64;
    }
    Ok(total / voted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let one_hot = vec![vec![0.0, 1.0, 0.0]; 4];
        assert_eq!(mse_loss(&one_hot, 1, 3).unwrap(), 0.0);
        assert_eq!(mse_loss(&vec![vec![0.0, 0.0]; 10], 0, 2).unwrap(), 0.5);
        assert_eq!(mse_loss(&vec![vec![1.0, 1.0]; 10], 0, 2).unwrap(), 0.5);
        assert!(matches!(
            mse_loss(&one_hot, 3, 3),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn argmax_ties_to_lowest() {
        assert_eq!(argmax_lowest(&[0.1, 0.9]), 1);
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn quantizer_bit_width_from_levels() {
        for bits in [1u8, 2, 4, 8] {
            let spec = NetworkSpec::new(
                Shape::new(3, 1, 1),
                vec![
                    LayerSpec::Dense { out_features: 2 },
                    LayerSpec::Lif,
                    LayerSpec::VotingAvgPool { window: 1 },
                ],
            )
            .with_precision(Precision::Bits(bits));
            let net = build_network(spec, 0).unwrap();
            assert_eq!(
                net.synapse(0).unwrap().quant.as_ref().unwrap().bits(),
                bits as u32
            );
        }
    }
}
