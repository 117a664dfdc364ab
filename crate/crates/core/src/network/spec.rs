use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{LifParams, SurrogateParams};
use crate::quantizer::Precision;

/// One stage of the network, in forward order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Stride-1, bias-free `k x k` convolution.
    Conv2d {
        out_channels: usize,
        kernel: usize,
        same_padding: bool,
    },
    /// Bias-free fully connected layer; flattens its input.
    Dense { out_features: usize },
    /// 2x2 max pooling, stride 2, floor on odd sizes.
    MaxPool2,
    /// Leaky integrate-and-fire neurons, one per input element.
    Lif,
    /// Averages consecutive groups of `window` outputs into class rates.
    VotingAvgPool { window: usize },
}

impl LayerSpec {
    pub fn is_synaptic(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            LayerSpec::Conv2d { .. } => 1,
            LayerSpec::Dense { .. } => 2,
            LayerSpec::MaxPool2 => 3,
            LayerSpec::Lif => 4,
            LayerSpec::VotingAvgPool { .. } => 5,
        }
    }
}

/// Channels-first activation shape. Dense outputs are `(n, 1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Input shape; channel 0 and 1 are the OFF/ON polarities.
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
    pub timesteps: usize,
    pub precision: Precision,
    pub neuron: LifParams,
    pub surrogate: SurrogateParams,
}

impl NetworkSpec {
    pub fn new(input: Shape, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec {
            input,
            layers,
            timesteps: 10,
            precision: Precision::Full,
            neuron: LifParams::default(),
            surrogate: SurrogateParams::default(),
        }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_timesteps(mut self, timesteps: usize) -> Self {
        self.timesteps = timesteps;
        self
    }

    /// Validates the topology and returns the input shape of every layer
    /// followed by the output shape of the last one.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        if self.timesteps == 0 {
            return Err(Error::InvalidParam("timesteps must be >= 1".into()));
        }
        if self.input.is_empty() {
            return Err(Error::InvalidParam(
                "input shape has a zero dimension".into(),
            ));
        }
        self.neuron.validate()?;
        self.surrogate.validate()?;

        let n = self.layers.len();
        match self.layers.last() {
            Some(LayerSpec::VotingAvgPool { .. }) => {}
            _ => {
                return Err(Error::InvalidNetwork {
                    layer: n.saturating_sub(1),
                    reason: "network must end with a voting average-pool layer".into(),
                })
            }
        }
        if !self.layers.iter().any(LayerSpec::is_synaptic) {
            return Err(Error::InvalidNetwork {
                layer: 0,
                reason: "network has no synaptic layer".into(),
            });
        }

        let mut shapes = Vec::with_capacity(n + 1);
        let mut cur = self.input;
        // a synaptic layer whose output has not yet passed through neurons
        let mut pending: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            shapes.push(cur);
            let err = |reason: String| Error::InvalidNetwork { layer: i, reason };
            cur = match *layer {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    same_padding,
                } => {
                    if let Some(j) = pending {
                        return Err(err(format!(
                            "synaptic layer {j} is not followed by a lif layer"
                        )));
                    }
                    if cur.channels == 0 || out_channels == 0 || kernel == 0 {
                        return Err(err("convolution with zero channels or kernel".into()));
                    }
                    if same_padding && kernel % 2 == 0 {
                        return Err(err("same padding needs an odd kernel".into()));
                    }
                    pending = Some(i);
                    if same_padding {
                        Shape::new(out_channels, cur.height, cur.width)
                    } else {
                        if cur.height < kernel || cur.width < kernel {
                            return Err(err(format!(
                                "kernel {kernel} larger than {}x{} input",
                                cur.height, cur.width
                            )));
                        }
                        Shape::new(
                            out_channels,
                            cur.height - kernel + 1,
                            cur.width - kernel + 1,
                        )
                    }
                }
                LayerSpec::Dense { out_features } => {
                    if let Some(j) = pending {
                        return Err(err(format!(
                            "synaptic layer {j} is not followed by a lif layer"
                        )));
                    }
                    if out_features == 0 {
                        return Err(err("dense layer with zero outputs".into()));
                    }
                    pending = Some(i);
                    Shape::new(out_features, 1, 1)
                }
                LayerSpec::MaxPool2 => {
                    let next = Shape::new(cur.channels, cur.height / 2, cur.width / 2);
                    if next.is_empty() {
                        return Err(err(format!(
                            "max-pool reduces {}x{} to zero spatial size",
                            cur.height, cur.width
                        )));
                    }
                    next
                }
                LayerSpec::Lif => {
                    pending = None;
                    cur
                }
                LayerSpec::VotingAvgPool { window } => {
                    if let Some(j) = pending {
                        return Err(err(format!(
                            "synaptic layer {j} is not followed by a lif layer"
                        )));
                    }
                    if i != n - 1 {
                        return Err(err("voting layer must be last".into()));
                    }
                    if window == 0 || !cur.len().is_multiple_of(window) {
                        return Err(err(format!(
                            "voting window {window} does not divide {} outputs",
                            cur.len()
                        )));
                    }
                    Shape::new(cur.len() / window, 1, 1)
                }
            };
        }
        shapes.push(cur);
        Ok(shapes)
    }

    /// Synaptic weight count (bias-free).
    pub fn parameter_count(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .map(|(layer, s)| synaptic_weight_count(layer, s))
            .sum())
    }

    pub fn n_classes(&self) -> Result<usize> {
        Ok(self.shapes()?.last().map(Shape::len).unwrap_or(0))
    }
}

pub(crate) fn synaptic_weight_count(layer: &LayerSpec, input: &Shape) -> usize {
    match *layer {
        LayerSpec::Conv2d {
            out_channels,
            kernel,
            ..
        } => out_channels * input.channels * kernel * kernel,
        LayerSpec::Dense { out_features } => out_features * input.len(),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_net(inputs: usize, outputs: usize) -> NetworkSpec {
        NetworkSpec::new(
            Shape::new(inputs, 1, 1),
            vec![
                LayerSpec::Dense {
                    out_features: outputs,
                },
                LayerSpec::Lif,
                LayerSpec::VotingAvgPool { window: 1 },
            ],
        )
    }

    #[test]
    fn dense_count() {
        assert_eq!(dense_net(10, 5).parameter_count().unwrap(), 50);
        assert_eq!(dense_net(10, 5).n_classes().unwrap(), 5);
    }

    #[test]
    fn rejects_missing_voting_head() {
        let mut s = dense_net(4, 2);
        s.layers.pop();
        assert!(matches!(s.shapes(), Err(Error::InvalidNetwork { .. })));
    }

    #[test]
    fn rejects_synapse_without_neurons() {
        let s = NetworkSpec::new(
            Shape::new(4, 1, 1),
            vec![
                LayerSpec::Dense { out_features: 4 },
                LayerSpec::Dense { out_features: 2 },
                LayerSpec::Lif,
                LayerSpec::VotingAvgPool { window: 1 },
            ],
        );
        match s.shapes() {
            Err(Error::InvalidNetwork { layer: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pooling_to_zero_names_layer() {
        let s = NetworkSpec::new(
            Shape::new(2, 2, 2),
            vec![
                LayerSpec::Conv2d {
                    out_channels: 2,
                    kernel: 3,
                    same_padding: true,
                },
                LayerSpec::Lif,
                LayerSpec::MaxPool2,
                LayerSpec::MaxPool2,
                LayerSpec::Dense { out_features: 2 },
                LayerSpec::Lif,
                LayerSpec::VotingAvgPool { window: 1 },
            ],
        );
        match s.shapes() {
            Err(Error::InvalidNetwork { layer: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn voting_window_must_divide() {
        let mut s = dense_net(4, 5);
        s.layers[2] = LayerSpec::VotingAvgPool { window: 2 };
        assert!(s.shapes().is_err());
    }

    #[test]
    fn spec_serializes() {
        let s = dense_net(3, 2);
        let text = serde_json::to_string(&s).unwrap();
        let back: NetworkSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
