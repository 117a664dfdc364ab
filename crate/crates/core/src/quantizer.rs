//! Differentiable weight quantizer built from a sum of shifted unit steps.
//!
//! Inference uses hard steps:
//!
//! ```text
//! W_Q = alpha * (sum_i s_i * step(beta * W - b_i) - o)
//! ```
//!
//! Training replaces every step with a temperature sigmoid `sigma(T * x)`,
//! which keeps the map differentiable in `W`, `alpha` and `beta`. As the
//! temperature grows the soft map converges to the hard one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arguments beyond this magnitude saturate the sigmoid to exactly 0 or 1.
const SIGMOID_SATURATION: f64 = 500.0;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z > SIGMOID_SATURATION {
        1.0
    } else if z < -SIGMOID_SATURATION {
        0.0
    } else if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Unit step with the `step(0) = 1` convention.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Weight precision of a synaptic layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    /// 32-bit baseline; the quantizer is bypassed.
    Full,
    /// Low-bit uniform levels; one of 1, 2, 4, 8.
    Bits(u8),
}

impl Precision {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            32 => Ok(Precision::Full),
            1 | 2 | 4 | 8 => Ok(Precision::Bits(bits as u8)),
            other => Err(Error::UnsupportedBits(other)),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            Precision::Full => 32,
            Precision::Bits(b) => b as u32,
        }
    }
}

/// Strictly increasing, zero-symmetric set of quantization targets.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantLevels {
    values: Vec<f64>,
}

impl QuantLevels {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidLevels(format!(
                "need at least 2 levels, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLevels("levels must be finite".into()));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLevels(format!(
                "levels not strictly increasing at index {}",
                i + 1
            )));
        }
        let n = values.len() - 1;
        for i in 0..=n {
            if values[i] != -values[n - i] {
                return Err(Error::InvalidLevels(format!(
                    "levels not symmetric about zero: q[{i}] = {} but q[{}] = {}",
                    values[i],
                    n - i,
                    values[n - i]
                )));
            }
        }
        Ok(QuantLevels { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

/// Centered uniform level set for a supported bit width.
///
/// 1 bit gives `{-1, 1}`, 2 bits the ternary `{-1, 0, 1}`, and `b >= 4` bits
/// the integers in `[-(2^(b-1) - 1), 2^(b-1) - 1]`.
pub fn uniform_levels(bits: u32) -> Result<QuantLevels> {
    let values = match bits {
        1 => vec![-1.0, 1.0],
        2 => vec![-1.0, 0.0, 1.0],
        4 | 8 => {
            let top = (1i32 << (bits - 1)) - 1;
            (-top..=top).map(f64::from).collect()
        }
        other => return Err(Error::UnsupportedBits(other)),
    };
    QuantLevels::new(values)
}

/// Step sizes, borders and centering offset derived from a level set.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantSpec {
    levels: QuantLevels,
    steps: Vec<f64>,
    borders: Vec<f64>,
    offset: f64,
}

impl QuantSpec {
    /// Builds a spec with explicit borders; `borders[i]` must lie strictly
    /// between `q[i]` and `q[i + 1]`.
    pub fn with_borders(levels: QuantLevels, borders: Vec<f64>) -> Result<Self> {
        let q = levels.values();
        if borders.len() != q.len() - 1 {
            return Err(Error::InvalidLevels(format!(
                "expected {} borders, got {}",
                q.len() - 1,
                borders.len()
            )));
        }
        for (i, &b) in borders.iter().enumerate() {
            if !(b > q[i] && b < q[i + 1]) {
                return Err(Error::InvalidLevels(format!(
                    "border {b} not strictly between levels {} and {}",
                    q[i],
                    q[i + 1]
                )));
            }
        }
        let steps: Vec<f64> = q.windows(2).map(|w| w[1] - w[0]).collect();
        let offset = 0.5 * steps.iter().sum::<f64>();
        Ok(QuantSpec {
            levels,
            steps,
            borders,
            offset,
        })
    }

    pub fn levels(&self) -> &QuantLevels {
        &self.levels
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn borders(&self) -> &[f64] {
        &self.borders
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Number of step terms `n` (one fewer than the number of levels).
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Midpoint borders for `levels`.
pub fn derive_spec(levels: QuantLevels) -> Result<QuantSpec> {
    let borders = levels
        .values()
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    QuantSpec::with_borders(levels, borders)
}

/// Learned output/input scales and the current sigmoid temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerQuantState {
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
}

impl LayerQuantState {
    pub fn new(alpha: f64, beta: f64, temperature: f64) -> Result<Self> {
        let st = LayerQuantState {
            alpha,
            beta,
            temperature,
        };
        st.validate()?;
        Ok(st)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.temperature > 0.0) {
            return Err(Error::InvalidParam(format!(
                "alpha, beta and temperature must be positive (got {}, {}, {})",
                self.alpha, self.beta, self.temperature
            )));
        }
        Ok(())
    }
}

/// Index of the level selected by the hard quantizer: the number of borders
/// with `beta * w >= b_i`.
#[inline]
pub fn level_index(w: f64, spec: &QuantSpec, st: &LayerQuantState) -> usize {
    let x = st.beta * w;
    spec.borders.partition_point(|&b| x - b >= 0.0)
}

/// Hard (inference) quantizer.
///
/// Locates the level by binary search over the sorted borders, then sums the
/// fired steps in order. Skipping the unfired terms only drops `+ 0.0`
/// additions, so the result is bit-identical to the full summation.
pub fn quantize_step(w: f64, spec: &QuantSpec, st: &LayerQuantState) -> f64 {
    dequantize(level_index(w, spec, st), spec, st.alpha)
}

/// Value of level `index` scaled by `alpha`, computed exactly as the hard
/// quantizer computes it.
pub fn dequantize(index: usize, spec: &QuantSpec, alpha: f64) -> f64 {
    let mut acc = 0.0;
    for &s in &spec.steps[..index] {
        acc += s;
    }
    alpha * (acc - spec.offset)
}

/// Literal summation form of the hard quantizer, kept as the reference the
/// fast path is checked against.
pub fn quantize_step_summed(w: f64, spec: &QuantSpec, st: &LayerQuantState) -> f64 {
    let x = st.beta * w;
    let mut acc = 0.0;
    for (&s, &b) in spec.steps.iter().zip(&spec.borders) {
        acc += s * heaviside(x - b);
    }
    st.alpha * (acc - spec.offset)
}

/// Soft (training) quantizer with temperature sigmoids.
pub fn quantize_soft(w: f64, spec: &QuantSpec, st: &LayerQuantState) -> f64 {
    let x = st.beta * w;
    let t = st.temperature;
    let mut acc = 0.0;
    for (&s, &b) in spec.steps.iter().zip(&spec.borders) {
        acc += s * sigmoid(t * (x - b));
    }
    st.alpha * (acc - spec.offset)
}

/// Soft quantizer output together with its partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftQuant {
    pub value: f64,
    pub d_w: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

/// Soft quantizer and its exact partials in one pass over the step terms.
pub fn quantize_soft_full(w: f64, spec: &QuantSpec, st: &LayerQuantState) -> SoftQuant {
    let x = st.beta * w;
    let t = st.temperature;
    let mut acc = 0.0;
    let mut slope = 0.0;
    for (&s, &b) in spec.steps.iter().zip(&spec.borders) {
        let g = sigmoid(t * (x - b));
        acc += s * g;
        slope += s * g * (1.0 - g);
    }
    let inner = acc - spec.offset;
    let scaled_slope = st.alpha * t * slope;
    SoftQuant {
        value: st.alpha * inner,
        d_w: scaled_slope * st.beta,
        d_alpha: inner,
        d_beta: scaled_slope * w,
    }
}

/// Partial derivatives of [`quantize_soft`] with respect to `w`, `alpha`
/// and `beta`.
pub fn quantize_soft_grads(w: f64, spec: &QuantSpec, st: &LayerQuantState) -> (f64, f64, f64) {
    let q = quantize_soft_full(w, spec, st);
    (q.d_w, q.d_alpha, q.d_beta)
}

/// Linear temperature schedule `t0 + rate * epoch`.
///
/// A zero `t0` selects the pure `rate * epoch` schedule; its epoch-0 value
/// is clamped up to `rate` so the soft quantizer stays defined.
pub fn temperature_at(epoch: usize, t0: f64, rate: f64) -> Result<f64> {
    if !(rate >= 0.0) || !t0.is_finite() {
        return Err(Error::InvalidParam(format!(
            "temperature schedule needs finite t0 and rate >= 0 (got t0={t0}, rate={rate})"
        )));
    }
    let mut t = t0 + rate * epoch as f64;
    if t0 == 0.0 && t < rate {
        t = rate;
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParam(format!(
            "temperature at epoch {epoch} is {t}; must be positive"
        )));
    }
    Ok(t)
}

/// Initial `(alpha, beta)` mapping the weight range onto the level range so
/// that `W_Q` starts close to `W`.
pub fn init_scales(weights: &[f64], levels: &QuantLevels) -> Result<(f64, f64)> {
    if weights.is_empty() {
        return Err(Error::InvalidParam(
            "cannot initialize scales from an empty weight collection".into(),
        ));
    }
    let max_abs = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max_abs == 0.0 {
        return Ok((1.0, 1.0));
    }
    let beta = levels.max() / max_abs;
    Ok((1.0 / beta, beta))
}
