//! Named topologies.
//!
//! The `table*` presets describe the full-size event-vision networks and are
//! used for parameter and model-size accounting. `desk-tiny` and
//! `gradcheck-mini` are small enough to train and check on a CPU.

use super::spec::{LayerSpec, NetworkSpec, Shape};
use crate::error::{Error, Result};

pub const PRESET_NAMES: &[&str] = &[
    "table1-cifar10dvs",
    "table1-dvs128",
    "table1-ncaltech101",
    "table1-nmnist",
    "table2-nmnist",
    "desk-tiny",
    "gradcheck-mini",
];

fn conv(out_channels: usize, kernel: usize, same_padding: bool) -> LayerSpec {
    LayerSpec::Conv2d {
        out_channels,
        kernel,
        same_padding,
    }
}

fn dense(out_features: usize) -> LayerSpec {
    LayerSpec::Dense { out_features }
}

/// Five `conv3 -> lif -> maxpool` encoder stages, then
/// `dense(hidden) -> lif -> dense(outputs) -> lif -> vote(10)`.
pub fn encoder_classifier(
    input: Shape,
    stages: usize,
    channels: usize,
    hidden: usize,
    outputs: usize,
) -> NetworkSpec {
    let mut layers = Vec::new();
    for _ in 0..stages {
        layers.extend([conv(channels, 3, true), LayerSpec::Lif, LayerSpec::MaxPool2]);
    }
    layers.extend([
        dense(hidden),
        LayerSpec::Lif,
        dense(outputs),
        LayerSpec::Lif,
        LayerSpec::VotingAvgPool { window: 10 },
    ]);
    NetworkSpec::new(input, layers)
}

pub fn preset(name: &str) -> Result<NetworkSpec> {
    let spec = match name {
        "table1-cifar10dvs" => encoder_classifier(Shape::new(2, 128, 128), 5, 128, 512, 100),
        "table1-dvs128" => encoder_classifier(Shape::new(2, 128, 128), 5, 128, 512, 110),
        "table1-ncaltech101" => encoder_classifier(Shape::new(2, 180, 240), 5, 128, 512, 1010),
        "table1-nmnist" => encoder_classifier(Shape::new(2, 34, 34), 5, 128, 512, 100),
        "table2-nmnist" => NetworkSpec::new(
            Shape::new(2, 34, 34),
            vec![
                conv(64, 7, false),
                LayerSpec::Lif,
                LayerSpec::MaxPool2,
                conv(128, 7, false),
                LayerSpec::Lif,
                conv(128, 7, false),
                LayerSpec::Lif,
                LayerSpec::MaxPool2,
                dense(11),
                LayerSpec::Lif,
                LayerSpec::VotingAvgPool { window: 1 },
            ],
        ),
        "desk-tiny" => encoder_classifier(Shape::new(2, 16, 16), 2, 8, 64, 30),
        "gradcheck-mini" => NetworkSpec::new(
            Shape::new(2, 6, 6),
            vec![
                conv(4, 3, true),
                LayerSpec::Lif,
                LayerSpec::MaxPool2,
                dense(12),
                LayerSpec::Lif,
                dense(6),
                LayerSpec::Lif,
                LayerSpec::VotingAvgPool { window: 3 },
            ],
        )
        .with_timesteps(4),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; known presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            spec.shapes().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn cifar10dvs_parameter_count() {
        let spec = preset("table1-cifar10dvs").unwrap();
        assert_eq!(spec.parameter_count().unwrap(), 1_691_904);
        assert_eq!(spec.n_classes().unwrap(), 10);
    }

    #[test]
    fn nmnist_encoder_reaches_one_pixel() {
        let spec = preset("table1-nmnist").unwrap();
        let shapes = spec.shapes().unwrap();
        let first_dense = spec
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Dense { .. }))
            .unwrap();
        assert_eq!(shapes[first_dense], Shape::new(128, 1, 1));
    }

    #[test]
    fn small_presets() {
        let tiny = preset("desk-tiny").unwrap();
        assert_eq!(
            tiny.parameter_count().unwrap(),
            144 + 576 + 128 * 64 + 64 * 30
        );
        assert_eq!(tiny.n_classes().unwrap(), 3);
        let mini = preset("gradcheck-mini").unwrap();
        assert!(mini.parameter_count().unwrap() <= 2_000);
        assert_eq!(mini.timesteps, 4);
        assert_eq!(
            preset("table2-nmnist").unwrap().parameter_count().unwrap(),
            1_211_904
        );
    }
}
