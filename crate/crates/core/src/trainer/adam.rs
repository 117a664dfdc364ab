use crate::error::{Error, Result};
use crate::network::{snap, Gradients, Network};

/// Lower bound applied to `alpha` and `beta` after every update.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Bias-corrected Adam moments for every trainable tensor of a network.
///
/// Tensors are laid out per synaptic layer: the weights, then `[alpha, beta]`
/// when the layer is quantized.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_network(net: &Network) -> Self {
        let mut sizes = Vec::new();
        for s in net.synapses().iter().flatten() {
            sizes.push(s.weights.len());
            if s.quant.is_some() {
                sizes.push(2);
            }
        }
        Self::new(&sizes)
    }

    /// One update over all tensors. Every gradient is checked for
    /// finiteness before anything is modified.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::ShapeMismatch(format!("tensor {k} changed size")));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient { layer: k });
            }
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to weights, `alpha` and `beta`, keeping the stored
/// values 32-bit representable and the scales positive.
pub fn adam_step(
    net: &mut Network,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let layers = net.synaptic_layers();
    let mut tensors: Vec<Vec<f64>> = Vec::new();
    let mut scale_grads: Vec<Vec<f64>> = Vec::new();
    for &l in &layers {
        let g = grads
            .layers
            .get(l)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::ShapeMismatch(format!("missing gradient for layer {l}")))?;
        if g.weights.iter().any(|x| !x.is_finite()) || !g.alpha.is_finite() || !g.beta.is_finite() {
            return Err(Error::NonFiniteGradient { layer: l });
        }
        let s = net.synapse(l).expect("synaptic layer");
        tensors.push(s.weights.clone());
        if let Some(q) = &s.quant {
            tensors.push(vec![q.state.alpha, q.state.beta]);
            scale_grads.push(vec![g.alpha, g.beta]);
        }
    }
    let mut gs: Vec<&[f64]> = Vec::with_capacity(tensors.len());
    let mut sg = scale_grads.iter();
    for &l in &layers {
        gs.push(&grads.layers[l].as_ref().expect("checked").weights);
        if net.synapse(l).is_some_and(|s| s.quant.is_some()) {
            gs.push(sg.next().expect("scale grad"));
        }
    }
    let mut params: Vec<&mut [f64]> = tensors.iter_mut().map(Vec::as_mut_slice).collect();
    state.update(&mut params, &gs, lr)?;

    let mut it = tensors.into_iter();
    for &l in &layers {
        let s = net.synapse_mut(l).expect("synaptic layer");
        s.weights = it.next().expect("weights").into_iter().map(snap).collect();
        if let Some(q) = s.quant.as_mut() {
            let ab = it.next().expect("scales");
            q.state.alpha = snap(ab[0].max(SCALE_FLOOR)).max(SCALE_FLOOR);
            q.state.beta = snap(ab[1].max(SCALE_FLOOR)).max(SCALE_FLOOR);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut st = AdamState::new(&[1]);
        let mut p = vec![0.5];
        st.update(&mut [p.as_mut_slice()], &[&[1.0]], 1e-3).unwrap();
        let expect = 0.5 - 1e-3 / (1.0 + 1e-8);
        assert!((p[0] - expect).abs() < 1e-15);
        assert!(((0.5 - p[0]) - 9.99999e-4).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut st = AdamState::new(&[3]);
        let mut p = vec![0.1, -0.2, 0.3];
        st.update(&mut [p.as_mut_slice()], &[&[0.0; 3]], 1e-2)
            .unwrap();
        assert_eq!(p, vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn parameters_update_independently() {
        let mut joint = AdamState::new(&[2]);
        let mut p = vec![1.0, 1.0];
        let mut a = AdamState::new(&[1]);
        let mut b = AdamState::new(&[1]);
        let (mut pa, mut pb) = (vec![1.0], vec![1.0]);
        for g in [[0.3, -2.0], [0.1, 5.0], [-0.7, 0.0]] {
            joint.update(&mut [p.as_mut_slice()], &[&g], 0.01).unwrap();
            a.update(&mut [pa.as_mut_slice()], &[&g[..1]], 0.01)
                .unwrap();
            b.update(&mut [pb.as_mut_slice()], &[&g[1..]], 0.01)
                .unwrap();
        }
        assert_eq!(p, vec![pa[0], pb[0]]);
    }

    #[test]
    fn non_finite_gradient_rejected_untouched() {
        let mut st = AdamState::new(&[1, 2]);
        let mut p0 = vec![1.0];
        let mut p1 = vec![1.0, 2.0];
        let err = st
            .update(
                &mut [p0.as_mut_slice(), p1.as_mut_slice()],
                &[&[0.1], &[f64::NAN, 0.0]],
                0.1,
            )
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { layer: 1 }));
        assert_eq!(p0, vec![1.0]);
        assert_eq!(st.step, 0);
    }
}
