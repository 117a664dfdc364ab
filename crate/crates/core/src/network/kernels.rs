//! Dense loops for the synaptic and pooling layers.
//!
//! Inputs to all but the first layer are binary spikes, so the forward and
//! weight-gradient loops scatter from nonzero inputs only.

use super::spec::Shape;

/// Geometry of a stride-1 convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub input: Shape,
    pub output: Shape,
    pub kernel: usize,
    pub pad: usize,
}

impl ConvGeom {
    #[inline]
    fn weight_index(&self, co: usize, ci: usize, ky: usize, kx: usize) -> usize {
        ((co * self.input.channels + ci) * self.kernel + ky) * self.kernel + kx
    }

    /// Output coordinate fed by input `i` through kernel tap `k`, if any.
    #[inline]
    fn out_coord(&self, i: usize, k: usize, limit: usize) -> Option<usize> {
        let o = i as isize + self.pad as isize - k as isize;
        (o >= 0 && (o as usize) < limit).then_some(o as usize)
    }
}

pub(crate) fn conv_forward(g: &ConvGeom, weights: &[f64], input: &[f64]) -> Vec<f64> {
    let (ih, iw) = (g.input.height, g.input.width);
    let (oh, ow) = (g.output.height, g.output.width);
    let mut out = vec![0.0; g.output.len()];
    for ci in 0..g.input.channels {
        for iy in 0..ih {
            for ix in 0..iw {
                let v = input[(ci * ih + iy) * iw + ix];
                if v == 0.0 {
                    continue;
                }
                for ky in 0..g.kernel {
                    let Some(oy) = g.out_coord(iy, ky, oh) else {
                        continue;
                    };
                    for kx in 0..g.kernel {
                        let Some(ox) = g.out_coord(ix, kx, ow) else {
                            continue;
                        };
                        for co in 0..g.output.channels {
                            out[(co * oh + oy) * ow + ox] +=
                                weights[g.weight_index(co, ci, ky, kx)] * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates `dL/dW` into `grad_w` and, when requested, returns `dL/dInput`.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    weights: &[f64],
    input: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let (ih, iw) = (g.input.height, g.input.width);
    let (oh, ow) = (g.output.height, g.output.width);
    let mut grad_in = want_input_grad.then(|| vec![0.0; g.input.len()]);
    for ci in 0..g.input.channels {
        for iy in 0..ih {
            for ix in 0..iw {
                let idx = (ci * ih + iy) * iw + ix;
                let v = input[idx];
                if v == 0.0 && grad_in.is_none() {
                    continue;
                }
                let mut acc = 0.0;
                for ky in 0..g.kernel {
                    let Some(oy) = g.out_coord(iy, ky, oh) else {
                        continue;
                    };
                    for kx in 0..g.kernel {
                        let Some(ox) = g.out_coord(ix, kx, ow) else {
                            continue;
                        };
                        for co in 0..g.output.channels {
                            let go = grad_out[(co * oh + oy) * ow + ox];
                            let wi = g.weight_index(co, ci, ky, kx);
                            if v != 0.0 {
                                grad_w[wi] += go * v;
                            }
                            acc += weights[wi] * go;
                        }
                    }
                }
                if let Some(gi) = grad_in.as_mut() {
                    gi[idx] = acc;
                }
            }
        }
    }
    grad_in
}

/// `out[o] = sum_i W[o, i] * input[i]`, row-major `W`.
pub(crate) fn dense_forward(weights: &[f64], n_in: usize, input: &[f64]) -> Vec<f64> {
    let active: Vec<(usize, f64)> = input
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, v)| v != 0.0)
        .collect();
    weights
        .chunks_exact(n_in)
        .map(|row| active.iter().map(|&(i, v)| row[i] * v).sum())
        .collect()
}

pub(crate) fn dense_backward(
    weights: &[f64],
    n_in: usize,
    input: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let active: Vec<(usize, f64)> = input
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, v)| v != 0.0)
        .collect();
    for (o, &go) in grad_out.iter().enumerate() {
        let row = &mut grad_w[o * n_in..(o + 1) * n_in];
        for &(i, v) in &active {
            row[i] += go * v;
        }
    }
    want_input_grad.then(|| {
        let mut gi = vec![0.0; n_in];
        for (row, &go) in weights.chunks_exact(n_in).zip(grad_out) {
            for (g, &w) in gi.iter_mut().zip(row) {
                *g += w * go;
            }
        }
        gi
    })
}

/// 2x2 max pool; ties resolve to the first position in row-major window
/// order. Returns the pooled values and the flat input index of each winner.
pub(crate) fn maxpool2_forward(input_shape: &Shape, input: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let (h, w) = (input_shape.height, input_shape.width);
    let (oh, ow) = (h / 2, w / 2);
    let n = input_shape.channels * oh * ow;
    let mut out = Vec::with_capacity(n);
    let mut arg = Vec::with_capacity(n);
    for c in 0..input_shape.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = (c * h + 2 * oy) * w + 2 * ox;
                let mut best = input[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = (c * h + 2 * oy + dy) * w + 2 * ox + dx;
                    if input[idx] > best {
                        best = input[idx];
                        best_idx = idx;
                    }
                }
                out.push(best);
                arg.push(best_idx as u32);
            }
        }
    }
    (out, arg)
}

pub(crate) fn maxpool2_backward(input_len: usize, argmax: &[u32], grad_out: &[f64]) -> Vec<f64> {
    let mut gi = vec![0.0; input_len];
    for (&a, &g) in argmax.iter().zip(grad_out) {
        gi[a as usize] += g;
    }
    gi
}

pub(crate) fn vote_forward(input: &[f64], window: usize) -> Vec<f64> {
    input
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect()
}

pub(crate) fn vote_backward(grad_out: &[f64], window: usize) -> Vec<f64> {
    grad_out
        .iter()
        .flat_map(|&g| std::iter::repeat_n(g / window as f64, window))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct gather-form convolution used as the reference.
    fn conv_gather(g: &ConvGeom, w: &[f64], x: &[f64]) -> Vec<f64> {
        let (ih, iw) = (g.input.height as isize, g.input.width as isize);
        let mut out = vec![0.0; g.output.len()];
        for co in 0..g.output.channels {
            for oy in 0..g.output.height {
                for ox in 0..g.output.width {
                    let mut acc = 0.0;
                    for ci in 0..g.input.channels {
                        for ky in 0..g.kernel {
                            for kx in 0..g.kernel {
                                let iy = (oy + ky) as isize - g.pad as isize;
                                let ix = (ox + kx) as isize - g.pad as isize;
                                if iy < 0 || ix < 0 || iy >= ih || ix >= iw {
                                    continue;
                                }
                                acc += w[g.weight_index(co, ci, ky, kx)]
                                    * x[(ci * g.input.height + iy as usize) * g.input.width
                                        + ix as usize];
                            }
                        }
                    }
                    out[(co * g.output.height + oy) * g.output.width + ox] = acc;
                }
            }
        }
        out
    }

    fn geom(same: bool) -> ConvGeom {
        let input = Shape::new(2, 5, 4);
        let k = 3;
        let output = if same {
            Shape::new(3, 5, 4)
        } else {
            Shape::new(3, 3, 2)
        };
        ConvGeom {
            input,
            output,
            kernel: k,
            pad: if same { 1 } else { 0 },
        }
    }

    fn ramp(n: usize, scale: f64) -> Vec<f64> {
        (0..n)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) * scale)
            .collect()
    }

    #[test]
    fn scatter_conv_matches_gather() {
        for same in [true, false] {
            let g = geom(same);
            let w = ramp(3 * 2 * 9, 0.1);
            let mut x = ramp(g.input.len(), 0.3);
            x[3] = 0.0;
            let a = conv_forward(&g, &w, &x);
            let b = conv_gather(&g, &w, &x);
            for (a, b) in a.iter().zip(&b) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <grad_out, conv(W, x)> is bilinear: its gradients are conv_backward.
        let g = geom(true);
        let w = ramp(3 * 2 * 9, 0.1);
        let x = ramp(g.input.len(), 0.3);
        let go = ramp(g.output.len(), 0.07);
        let mut gw = vec![0.0; w.len()];
        let gx = conv_backward(&g, &w, &x, &go, &mut gw, true).unwrap();
        let dot = |w: &[f64], x: &[f64]| -> f64 {
            conv_gather(&g, w, x)
                .iter()
                .zip(&go)
                .map(|(a, b)| a * b)
                .sum()
        };
        for i in 0..w.len() {
            let mut e = vec![0.0; w.len()];
            e[i] = 1.0;
            assert!((dot(&e, &x) - gw[i]).abs() < 1e-12);
        }
        for i in 0..x.len() {
            let mut e = vec![0.0; x.len()];
            e[i] = 1.0;
            assert!((dot(&w, &e) - gx[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_roundtrip_gradients() {
        let w = ramp(12, 0.2);
        let x = vec![1.0, 0.0, 2.0, -1.0];
        let y = dense_forward(&w, 4, &x);
        assert_eq!(y.len(), 3);
        assert!((y[0] - (w[0] + 2.0 * w[2] - w[3])).abs() < 1e-15);
        let go = vec![1.0, -2.0, 0.5];
        let mut gw = vec![0.0; 12];
        let gx = dense_backward(&w, 4, &x, &go, &mut gw, true).unwrap();
        assert_eq!(gw[4 + 2], -4.0);
        assert_eq!(gw[1], 0.0);
        let expect = w[0] - 2.0 * w[4] + 0.5 * w[8];
        assert!((gx[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn maxpool_first_index_wins_ties() {
        let s = Shape::new(1, 2, 2);
        let (o, a) = maxpool2_forward(&s, &[1.0, 1.0, 1.0, 0.0]);
        assert_eq!(o, vec![1.0]);
        assert_eq!(a, vec![0]);
        let (o, a) = maxpool2_forward(&s, &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!((o, a), (vec![1.0], vec![3]));
        let g = maxpool2_backward(4, &[3], &[2.5]);
        assert_eq!(g, vec![0.0, 0.0, 0.0, 2.5]);
    }

    #[test]
    fn maxpool_odd_sizes_floor() {
        let s = Shape::new(1, 3, 3);
        let x: Vec<f64> = (0..9).map(f64::from).collect();
        let (o, a) = maxpool2_forward(&s, &x);
        assert_eq!(o, vec![4.0]);
        assert_eq!(a, vec![4]);
    }

    #[test]
    fn voting_means_groups() {
        assert_eq!(vote_forward(&[1.0, 0.0, 1.0, 1.0], 2), vec![0.5, 1.0]);
        assert_eq!(vote_backward(&[1.0, 2.0], 2), vec![0.5, 0.5, 1.0, 1.0]);
    }
}
