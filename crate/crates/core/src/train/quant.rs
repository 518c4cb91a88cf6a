use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DelayWeights, NetworkModel};

/// Deployment precision of the synaptic weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum QuantSpec {
    /// Reference precision; weights are stored as plain `f64`.
    #[default]
    Float64,
    /// 1 sign, 8 exponent and 7 mantissa bits.
    BFloat16,
    /// Symmetric per-tensor integer grid with `N` bits, `2 <= N <= 8`.
    Int(u8),
}

impl QuantSpec {
    pub fn validate(self) -> Result<()> {
        match self {
            QuantSpec::Int(n) if !(2..=8).contains(&n) => Err(Error::InvalidParam(format!(
                "integer quantization supports 2..=8 bits, got {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// Bits per stored weight.
    pub fn weight_bits(self) -> u32 {
        match self {
            QuantSpec::Float64 => 64,
            QuantSpec::BFloat16 => 16,
            QuantSpec::Int(n) => u32::from(n),
        }
    }

    /// Largest integer code, `2^(N-1) - 1`.
    pub fn int_max(self) -> Option<i32> {
        match self {
            QuantSpec::Int(n) => Some((1 << (n - 1)) - 1),
            _ => None,
        }
    }
}

impl fmt::Display for QuantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantSpec::Float64 => f.write_str("float64"),
            QuantSpec::BFloat16 => f.write_str("bf16"),
            QuantSpec::Int(n) => write!(f, "int{n}"),
        }
    }
}

impl FromStr for QuantSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s {
            "float64" | "f64" => QuantSpec::Float64,
            "bf16" | "bfloat16" => QuantSpec::BFloat16,
            _ => {
                let bits = s
                    .strip_prefix("int")
                    .and_then(|n| n.parse::<u8>().ok())
                    .ok_or_else(|| {
                        Error::InvalidParam(format!(
                            "unknown quantization scheme `{s}` (expected float64, bf16 or int2..int8)"
                        ))
                    })?;
                QuantSpec::Int(bits)
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for QuantSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QuantSpec> for String {
    fn from(q: QuantSpec) -> Self {
        q.to_string()
    }
}

/// Rounds to the nearest bfloat16 value, ties to even. Values beyond the
/// bfloat16 range become infinite; NaN stays NaN.
pub fn round_bf16(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let biased = ((x.to_bits() >> 52) & 0x7ff) as i32;
    // f64 subnormals sit far below the bfloat16 range
    let exp = (biased - 1023).max(-126);
    let ulp = 2f64.powi(exp - 7);
    let q = (x / ulp).round_ties_even() * ulp;
    const BF16_MAX: f64 = 3.3895313892515355e38; // (2 - 2^-7) * 2^127
    if q.abs() > BF16_MAX {
        f64::INFINITY.copysign(x)
    } else {
        q
    }
}

/// Bit pattern of a value already on the bfloat16 grid.
pub fn bf16_bits(x: f64) -> u16 {
    ((x as f32).to_bits() >> 16) as u16
}

pub fn bf16_from_bits(bits: u16) -> f64 {
    f64::from(f32::from_bits(u32::from(bits) << 16))
}

/// Per-tensor symmetric scale `max|w| / (2^(N-1) - 1)`, or 1 for an all-zero
/// tensor.
pub fn int_scale(weights: &[f64], qmax: i32) -> f64 {
    let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max == 0.0 {
        1.0
    } else {
        max / f64::from(qmax)
    }
}

/// Integer code of `w`, clamped to `[-qmax, qmax]`.
pub fn int_code(w: f64, scale: f64, qmax: i32) -> i32 {
    let q = (w / scale).round();
    q.clamp(-f64::from(qmax), f64::from(qmax)) as i32
}

fn dequantize(q: i32, scale: f64) -> f64 {
    // +0.0 for zero codes so masked and unmasked zeros agree
    if q == 0 {
        0.0
    } else {
        f64::from(q) * scale
    }
}

fn quantize_tensor(w: &mut DelayWeights, spec: QuantSpec) -> f64 {
    match spec {
        QuantSpec::Float64 => 1.0,
        QuantSpec::BFloat16 => {
            w.update_live(|_, v| if v == 0.0 { 0.0 } else { round_bf16(v) });
            1.0
        }
        QuantSpec::Int(_) => {
            let qmax = spec.int_max().expect("integer scheme");
            let scale = int_scale(w.weights(), qmax);
            w.update_live(|_, v| dequantize(int_code(v, scale, qmax), scale));
            scale
        }
    }
}

/// Maps every weight onto the grid of `spec` and records the scheme and
/// per-connection scales on the model. Weights stay `f64` holding the
/// dequantized values, so every executor runs the quantized model unchanged.
///
/// Quantizing a model that already carries `spec` returns it unchanged, which
/// makes the operation idempotent.
pub fn quantize(model: &NetworkModel, spec: QuantSpec) -> Result<NetworkModel> {
    spec.validate()?;
    let mut out = model.clone();
    if model.quant() == spec {
        return Ok(out);
    }
    let scales = out
        .connections_mut()
        .iter_mut()
        .map(|w| quantize_tensor(w, spec))
        .collect();
    out.set_quantization(spec, scales);
    Ok(out)
}
