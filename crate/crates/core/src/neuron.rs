//! Leaky integrate-and-fire dynamics and the surrogate spike derivative.
//!
//! Per timestep a neuron charges, fires and hard-resets:
//!
//! ```text
//! H(t) = V(t-1) + (X(t) - (V(t-1) - V_reset)) / tau
//! S(t) = step(H(t) - V_threshold)
//! V(t) = H(t) * (1 - S(t)) + V_reset * S(t)
//! ```
//!
//! The backward pass replaces the derivative of the step with a piecewise
//! leaky-ReLU shaped surrogate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::heaviside;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub tau: f64,
    pub v_threshold: f64,
    pub v_reset: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau: 2.0,
            v_threshold: 1.0,
            v_reset: 0.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 1.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParam(format!(
                "tau must be >= 1, got {}",
                self.tau
            )));
        }
        if !(self.v_threshold > self.v_reset) {
            return Err(Error::InvalidParam(format!(
                "v_threshold ({}) must exceed v_reset ({})",
                self.v_threshold, self.v_reset
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn charge(&self, v_prev: f64, x: f64) -> f64 {
        v_prev + (x - (v_prev - self.v_reset)) / self.tau
    }

    #[inline]
    pub fn reset(&self, h: f64, s: f64) -> f64 {
        h * (1.0 - s) + self.v_reset * s
    }

    /// `dH(t)/dX(t)`.
    #[inline]
    pub fn dh_dx(&self) -> f64 {
        1.0 / self.tau
    }

    /// `dH(t)/dV(t-1)`.
    #[inline]
    pub fn dh_dv(&self) -> f64 {
        1.0 - 1.0 / self.tau
    }
}

/// Shape of the piecewise leaky-ReLU surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub half_width: f64,
    pub leak: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            half_width: 1.0,
            leak: 0.01,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidParam(format!(
                "surrogate half_width must be positive, got {}",
                self.half_width
            )));
        }
        if !(self.leak >= 0.0 && self.leak < 1.0 / (2.0 * self.half_width)) {
            return Err(Error::InvalidParam(format!(
                "surrogate leak must lie in [0, 1/(2*half_width)), got {}",
                self.leak
            )));
        }
        Ok(())
    }

    /// Surrogate for `dS/dH` at `u = H - V_threshold`.
    #[inline]
    pub fn grad(&self, u: f64) -> f64 {
        if u.abs() <= self.half_width {
            0.5 / self.half_width
        } else {
            self.leak
        }
    }

    /// Antiderivative of [`grad`](Self::grad), anchored so that it rises
    /// from 0 to 1 across the window.
    #[inline]
    pub fn primitive(&self, u: f64) -> f64 {
        let w = self.half_width;
        if u < -w {
            self.leak * (u + w)
        } else if u > w {
            1.0 + self.leak * (u - w)
        } else {
            (u + w) / (2.0 * w)
        }
    }

    /// Which linear piece of the surrogate `u` falls in.
    #[inline]
    pub fn piece(&self, u: f64) -> u8 {
        if u < -self.half_width {
            0
        } else if u > self.half_width {
            2
        } else {
            1
        }
    }
}

/// Forward spike nonlinearity.
///
/// `Heaviside` is the real neuron. `SurrogatePrimitive` emits the
/// antiderivative of the surrogate instead, making the forward pass the
/// exact integral of what the backward pass differentiates; gradient checks
/// run in this mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SpikeFn {
    #[default]
    Heaviside,
    SurrogatePrimitive,
}

impl SpikeFn {
    #[inline]
    pub fn apply(self, u: f64, sp: &SurrogateParams) -> f64 {
        match self {
            SpikeFn::Heaviside => heaviside(u),
            SpikeFn::SurrogatePrimitive => sp.primitive(u),
        }
    }
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Membrane charge for a whole grid.
pub fn lif_charge(v_prev: &[f64], x: &[f64], p: &LifParams) -> Result<Vec<f64>> {
    check_len(v_prev.len(), x.len(), "potential vs input")?;
    Ok(v_prev
        .iter()
        .zip(x)
        .map(|(&v, &x)| p.charge(v, x))
        .collect())
}

pub fn fire(h: &[f64], p: &LifParams) -> Vec<f64> {
    h.iter().map(|&h| heaviside(h - p.v_threshold)).collect()
}

pub fn reset(h: &[f64], s: &[f64], p: &LifParams) -> Result<Vec<f64>> {
    check_len(h.len(), s.len(), "potential vs spikes")?;
    Ok(h.iter().zip(s).map(|(&h, &s)| p.reset(h, s)).collect())
}

pub fn surrogate_grad(u: &[f64], sp: &SurrogateParams) -> Vec<f64> {
    u.iter().map(|&u| sp.grad(u)).collect()
}

/// Recorded per-timestep state of one neuron layer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LifTape {
    /// Pre-spike potential `H(t)`.
    pub h: Vec<Vec<f64>>,
    /// Spike output `S(t)`.
    pub s: Vec<Vec<f64>>,
    /// Post-reset potential `V(t)`.
    pub v: Vec<Vec<f64>>,
}

impl LifTape {
    pub fn timesteps(&self) -> usize {
        self.h.len()
    }
}

/// Runs a layer of neurons over an input sequence with Heaviside spikes.
///
/// `v0` defaults to `v_reset` everywhere.
pub fn lif_sequence(
    x_seq: &[Vec<f64>],
    p: &LifParams,
    v0: Option<&[f64]>,
) -> Result<(Vec<Vec<f64>>, LifTape)> {
    lif_sequence_with(
        x_seq,
        p,
        &SurrogateParams::default(),
        SpikeFn::Heaviside,
        v0,
    )
}

pub fn lif_sequence_with(
    x_seq: &[Vec<f64>],
    p: &LifParams,
    sp: &SurrogateParams,
    spike: SpikeFn,
    v0: Option<&[f64]>,
) -> Result<(Vec<Vec<f64>>, LifTape)> {
    let first = x_seq
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty input sequence".into()))?;
    let n = first.len();
    let mut v = match v0 {
        Some(v0) => {
            check_len(v0.len(), n, "initial potential vs input")?;
            v0.to_vec()
        }
        None => vec![p.v_reset; n],
    };
    let mut tape = LifTape {
        h: Vec::with_capacity(x_seq.len()),
        s: Vec::with_capacity(x_seq.len()),
        v: Vec::with_capacity(x_seq.len()),
    };
    for (t, x) in x_seq.iter().enumerate() {
        if x.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "timestep {t} has {} inputs, expected {n}",
                x.len()
            )));
        }
        let mut h = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for i in 0..n {
            let hi = p.charge(v[i], x[i]);
            let si = spike.apply(hi - p.v_threshold, sp);
            v[i] = p.reset(hi, si);
            h.push(hi);
            s.push(si);
        }
        tape.h.push(h);
        tape.s.push(s);
        tape.v.push(v.clone());
    }
    Ok((tape.s.clone(), tape))
}

/// Backpropagates through a recorded neuron layer.
///
/// `grad_s[t]` is `dL/dS(t)` from downstream. Credit flows back through the
/// membrane recursion, including the reset path
/// `dV/dH = (1 - S) + (V_reset - H) * dS/dH`. Returns `dL/dX(t)`.
pub fn lif_backward(
    tape: &LifTape,
    grad_s: &[Vec<f64>],
    p: &LifParams,
    sp: &SurrogateParams,
) -> Result<Vec<Vec<f64>>> {
    check_len(grad_s.len(), tape.timesteps(), "gradient vs tape timesteps")?;
    let steps = tape.timesteps();
    if steps == 0 {
        return Ok(Vec::new());
    }
    let n = tape.h[0].len();
    let mut grad_v = vec![0.0; n];
    let mut grad_x = vec![Vec::new(); steps];
    let gain = p.dh_dx();
    let carry = p.dh_dv();
    for t in (0..steps).rev() {
        check_len(grad_s[t].len(), n, "gradient grid")?;
        let (h, s) = (&tape.h[t], &tape.s[t]);
        let mut gx = Vec::with_capacity(n);
        for i in 0..n {
            let ds_dh = sp.grad(h[i] - p.v_threshold);
            let dv_dh = (1.0 - s[i]) + (p.v_reset - h[i]) * ds_dh;
            let gh = grad_s[t][i] * ds_dh + grad_v[i] * dv_dh;
            gx.push(gh * gain);
            grad_v[i] = gh * carry;
        }
        grad_x[t] = gx;
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> LifParams {
        LifParams::default()
    }

    #[test]
    fn charge_examples() {
        assert_eq!(lif_charge(&[0.0], &[0.0], &p()).unwrap(), vec![0.0]);
        assert_eq!(lif_charge(&[0.0], &[1.0], &p()).unwrap(), vec![0.5]);
        assert_eq!(lif_charge(&[1.0], &[0.0], &p()).unwrap(), vec![0.5]);
        assert!(lif_charge(&[0.0, 1.0], &[0.0], &p()).is_err());
    }

    #[test]
    fn fire_examples() {
        assert_eq!(fire(&[0.5, 1.0, 1.3], &p()), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn reset_examples() {
        let p0 = p();
        assert_eq!(reset(&[1.3], &[1.0], &p0).unwrap(), vec![0.0]);
        assert_eq!(reset(&[0.5], &[0.0], &p0).unwrap(), vec![0.5]);
        let p1 = LifParams {
            v_reset: -0.1,
            ..p0
        };
        assert_eq!(reset(&[2.0], &[1.0], &p1).unwrap(), vec![-0.1]);
    }

    #[test]
    fn surrogate_examples() {
        let sp = SurrogateParams::default();
        assert_eq!(surrogate_grad(&[0.0, 2.0, -0.5], &sp), vec![0.5, 0.01, 0.5]);
    }

    #[test]
    fn primitive_differentiates_to_surrogate() {
        let sp = SurrogateParams::default();
        let h = 1e-6;
        for &u in &[-3.0, -1.5, -0.7, 0.0, 0.3, 0.99, 1.7, 4.0] {
            let fd = (sp.primitive(u + h) - sp.primitive(u - h)) / (2.0 * h);
            assert!((fd - sp.grad(u)).abs() < 1e-8, "u={u}");
        }
        assert_eq!(sp.primitive(-1.0), 0.0);
        assert_eq!(sp.primitive(1.0), 1.0);
    }

    #[test]
    fn surrogate_window_has_unit_area_without_leak() {
        let sp = SurrogateParams {
            half_width: 0.8,
            leak: 0.0,
        };
        let n = 10_000;
        let du = 2.0 * sp.half_width / n as f64;
        let area: f64 = (0..n)
            .map(|i| sp.grad(-sp.half_width + (i as f64 + 0.5) * du) * du)
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn param_validation() {
        assert!(LifParams { tau: 0.5, ..p() }.validate().is_err());
        assert!(LifParams {
            v_reset: 1.0,
            ..p()
        }
        .validate()
        .is_err());
        assert!(SurrogateParams {
            half_width: 1.0,
            leak: 0.5
        }
        .validate()
        .is_err());
        assert!(SurrogateParams::default().validate().is_ok());
    }

    #[test]
    fn silent_neuron() {
        let x = vec![vec![0.0; 3]; 10];
        let (s, tape) = lif_sequence(&x, &p(), None).unwrap();
        assert!(s.iter().flatten().all(|&v| v == 0.0));
        assert!(tape.v.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn subthreshold_geometric_approach() {
        let x = vec![vec![1.0]; 10];
        let (s, tape) = lif_sequence(&x, &p(), None).unwrap();
        let mut expect = 0.0;
        for t in 0..10 {
            expect += (1.0 - expect) / 2.0;
            assert_eq!(tape.h[t][0], expect);
            assert_eq!(s[t][0], 0.0);
        }
        assert_eq!(tape.h[0][0], 0.5);
        assert_eq!(tape.h[3][0], 0.9375);
    }

    #[test]
    fn periodic_spiking() {
        let x = vec![vec![3.0]; 10];
        let (s, tape) = lif_sequence(&x, &p(), None).unwrap();
        for t in 0..10 {
            assert_eq!(tape.h[t][0], 1.5);
            assert_eq!(s[t][0], 1.0);
            assert_eq!(tape.v[t][0], 0.0);
        }
    }

    #[test]
    fn no_input_decay() {
        let x = vec![vec![0.0]; 6];
        let params = LifParams {
            tau: 4.0,
            v_threshold: 1.0,
            v_reset: -0.25,
        };
        let (_, tape) = lif_sequence(&x, &params, Some(&[0.75])).unwrap();
        let mut gap = 1.0;
        for t in 0..6 {
            gap *= 0.75;
            assert!((tape.v[t][0] - params.v_reset - gap).abs() < 1e-15);
        }
    }

    #[test]
    fn ragged_sequence_rejected() {
        let x = vec![vec![0.0; 2], vec![0.0; 3]];
        assert!(lif_sequence(&x, &p(), None).is_err());
        assert!(lif_sequence(&[], &p(), None).is_err());
    }

    #[test]
    fn backward_matches_finite_differences_in_smooth_mode() {
        let params = p();
        let sp = SurrogateParams::default();
        let x: Vec<Vec<f64>> = (0..5)
            .map(|t| vec![0.3 + 0.4 * t as f64, 2.2 - 0.3 * t as f64])
            .collect();
        let weights = [0.7, -1.3];
        let loss = |x: &[Vec<f64>]| -> f64 {
            let (s, _) =
                lif_sequence_with(x, &params, &sp, SpikeFn::SurrogatePrimitive, None).unwrap();
            s.iter()
                .map(|st| st.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>())
                .sum()
        };
        let (_, tape) =
            lif_sequence_with(&x, &params, &sp, SpikeFn::SurrogatePrimitive, None).unwrap();
        let gs: Vec<Vec<f64>> = (0..5).map(|_| weights.to_vec()).collect();
        let gx = lif_backward(&tape, &gs, &params, &sp).unwrap();
        let h = 1e-6;
        for t in 0..5 {
            for i in 0..2 {
                let mut xp = x.clone();
                xp[t][i] += h;
                let mut xm = x.clone();
                xm[t][i] -= h;
                let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
                assert!(
                    (fd - gx[t][i]).abs() < 1e-7,
                    "t={t} i={i} fd={fd} an={}",
                    gx[t][i]
                );
            }
        }
    }
}
