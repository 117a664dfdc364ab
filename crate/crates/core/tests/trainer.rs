use snnq::data::{gen_synthetic, to_frames, FrameTensor, SyntheticSpec};
use snnq::network::presets::preset;
use snnq::network::{LayerSpec, Shape};
use snnq::trainer::{
    adam_step, cosine_lr, evaluate, train, train_with, AdamState, TrainConfig, SCALE_FLOOR,
};
use snnq::{build_network, Error, Network, NetworkSpec, Precision};

fn tiny_task(samples_per_class: usize) -> Vec<FrameTensor> {
    let streams = gen_synthetic(&SyntheticSpec::moving_bars(3, samples_per_class), 1).unwrap();
    to_frames(&streams, 4).unwrap()
}

fn tiny_net(bits: u32) -> Network {
    let spec = preset("desk-tiny")
        .unwrap()
        .with_timesteps(4)
        .with_precision(Precision::from_bits(bits).unwrap());
    build_network(spec, 3).unwrap()
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_weights_alone() {
    let data = tiny_task(4);
    let mut net = tiny_net(32);
    let before = net.clone();
    let c = TrainConfig { lr0: 0.0, ..cfg(1) };
    let h = train(&mut net, &data, &data, &c).unwrap();
    assert_eq!(h.records.len(), 1);
    assert_eq!(h.records[0].lr, 0.0);
    assert_eq!(net, before);
}

#[test]
fn history_follows_schedules() {
    let data = tiny_task(4);
    let mut net = tiny_net(1);
    let c = TrainConfig { t_max: 3, ..cfg(5) };
    let mut seen = 0;
    let h = train_with(&mut net, &data, &data, &c, |_| seen += 1).unwrap();
    assert_eq!(seen, 5);
    let mut prev_t = 0.0;
    for (e, r) in h.records.iter().enumerate() {
        assert_eq!(r.epoch, e);
        assert_eq!(r.lr, cosine_lr(e, c.lr0, c.t_max));
        assert_eq!(r.temperature, 1.0 + 2.0 * e as f64);
        assert!(r.temperature >= prev_t);
        prev_t = r.temperature;
        assert!(r.train_loss.is_finite() && r.train_loss >= 0.0);
        assert!((0.0..=1.0).contains(&r.train_acc) && (0.0..=1.0).contains(&r.test_acc));
    }
    assert_eq!(h.records[4].lr, 0.0);
}

#[test]
fn scales_stay_positive() {
    let data = tiny_task(4);
    for bits in [1, 2, 8] {
        let mut net = tiny_net(bits);
        let c = TrainConfig { lr0: 0.5, ..cfg(3) };
        train(&mut net, &data, &data, &c).unwrap();
        for l in net.synaptic_layers() {
            let q = net.synapse(l).unwrap().quant.clone().unwrap();
            assert!(q.state.alpha >= SCALE_FLOOR && q.state.beta >= SCALE_FLOOR);
            assert!(q.state.alpha.is_finite() && q.state.beta.is_finite());
        }
    }
}

#[test]
fn training_is_reproducible() {
    let data = tiny_task(4);
    let run = || {
        let mut net = tiny_net(2);
        let h = train(&mut net, &data, &data, &cfg(2)).unwrap();
        (net, h.to_csv())
    };
    assert_eq!(run(), run());
}

#[test]
fn short_training_reduces_loss() {
    let streams = gen_synthetic(&SyntheticSpec::moving_bars(3, 10), 1).unwrap();
    let data = to_frames(&streams, 10).unwrap();
    let mut net = build_network(preset("desk-tiny").unwrap(), 3).unwrap();
    let c = TrainConfig {
        lr0: 1e-2,
        batch_size: 1,
        ..cfg(8)
    };
    let h = train(&mut net, &data, &data, &c).unwrap();
    assert!(h.last().unwrap().train_loss < h.records[0].train_loss);
}

#[test]
fn adam_skips_non_finite_gradients() {
    let data = tiny_task(2);
    let net = tiny_net(4);
    let refs: Vec<&FrameTensor> = data.iter().collect();
    let (_, mut grads) = snnq::trainer::batch_gradients(&net, &refs).unwrap();
    let first = net.synaptic_layers()[0];
    grads.layers[first].as_mut().unwrap().weights[0] = f64::INFINITY;
    let mut work = net.clone();
    let mut adam = AdamState::for_network(&work);
    let err = adam_step(&mut work, &grads, &mut adam, 1e-3).unwrap_err();
    assert!(matches!(err, Error::NonFiniteGradient { layer } if layer == first));
    assert_eq!(work, net);
}

#[test]
fn evaluate_examples() {
    let spec = NetworkSpec::new(
        Shape::new(2, 2, 2),
        vec![
            LayerSpec::Dense { out_features: 10 },
            LayerSpec::Lif,
            LayerSpec::VotingAvgPool { window: 1 },
        ],
    )
    .with_timesteps(2);
    let net = build_network(spec.clone(), 0).unwrap();
    let balanced: Vec<FrameTensor> = (0..10)
        .map(|label| FrameTensor::zeros(2, spec.input, label))
        .collect();
    assert_eq!(evaluate(&net, &balanced).unwrap(), 0.1);

    let one = vec![FrameTensor::zeros(2, spec.input, 0)];
    assert_eq!(evaluate(&net, &one).unwrap(), 1.0);
    let doubled: Vec<FrameTensor> = balanced.iter().chain(&balanced).cloned().collect();
    assert_eq!(evaluate(&net, &doubled).unwrap(), 0.1);

    assert!(matches!(evaluate(&net, &[]), Err(Error::EmptyDataset)));
    let bad = vec![FrameTensor::zeros(2, spec.input, 10)];
    assert!(matches!(
        evaluate(&net, &bad),
        Err(Error::LabelOutOfRange { .. })
    ));
}

#[test]
fn invalid_configs_rejected() {
    let data = tiny_task(2);
    let mut net = tiny_net(32);
    for c in [
        TrainConfig {
            epochs: 0,
            ..cfg(1)
        },
        TrainConfig {
            lr0: -1.0,
            ..cfg(1)
        },
        TrainConfig {
            lr0: f64::NAN,
            ..cfg(1)
        },
        TrainConfig {
            batch_size: 0,
            ..cfg(1)
        },
        TrainConfig {
            t0: 0.0,
            rate: 0.0,
            ..cfg(1)
        },
    ] {
        assert!(
            matches!(train(&mut net, &data, &data, &c), Err(Error::Config(_))),
            "{c:?}"
        );
    }
}
