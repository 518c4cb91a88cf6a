//! Binary model container.
//!
//! ```text
//! magic    8 bytes   "SDELAYM\0"
//! hlen     u32 LE    length of the JSON header
//! header   hlen bytes
//! blob     per connection: weights, then the mask as an LSB-first bitset
//! ```
//!
//! Weights are row-major `[level][pre][post]`, little-endian: `f64` for the
//! reference scheme, raw bfloat16 bits (`u16`) for bf16, and one signed byte
//! per code for integer schemes, whose per-tensor scale lives in the header.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DelaySet, DelayWeights, NetworkModel, NeuronParams, Readout};
use crate::train::{bf16_bits, bf16_from_bits, int_code, QuantSpec};

pub const MODEL_MAGIC: &[u8; 8] = b"SDELAYM\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ConnectionHeader {
    delays: DelaySet,
    scale: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    widths: Vec<usize>,
    timesteps: usize,
    readout: Readout,
    neurons: Vec<NeuronParams>,
    quant: QuantSpec,
    max_delay: Option<usize>,
    seed: u64,
    connections: Vec<ConnectionHeader>,
}

fn weight_bytes(quant: QuantSpec) -> usize {
    match quant {
        QuantSpec::Float64 => 8,
        QuantSpec::BFloat16 => 2,
        QuantSpec::Int(_) => 1,
    }
}

fn encode_weights(w: &DelayWeights, quant: QuantSpec, scale: f64, out: &mut Vec<u8>) -> Result<()> {
    let off_grid = |v: f64| Error::Format(format!("weight {v} is not representable in {quant}"));
    for &v in w.weights() {
        match quant {
            QuantSpec::Float64 => out.extend_from_slice(&v.to_le_bytes()),
            QuantSpec::BFloat16 => {
                let bits = bf16_bits(v);
                if bf16_from_bits(bits).to_bits() != v.to_bits() {
                    return Err(off_grid(v));
                }
                out.extend_from_slice(&bits.to_le_bytes());
            }
            QuantSpec::Int(_) => {
                let q = int_code(v, scale, quant.int_max().expect("integer scheme"));
                if decode_int(q as i8, scale).to_bits() != v.to_bits() {
                    return Err(off_grid(v));
                }
                out.push(q as i8 as u8);
            }
        }
    }
    let mut bits = vec![0u8; w.len().div_ceil(8)];
    for (idx, _) in w.mask().iter().enumerate().filter(|(_, &m)| m) {
        bits[idx / 8] |= 1 << (idx % 8);
    }
    out.extend_from_slice(&bits);
    Ok(())
}

fn decode_int(q: i8, scale: f64) -> f64 {
    if q == 0 {
        0.0
    } else {
        f64::from(q) * scale
    }
}

/// Serializes `model` into the container format.
pub fn encode_model(model: &NetworkModel) -> Result<Vec<u8>> {
    let quant = model.quant();
    let header = Header {
        version: MODEL_VERSION,
        widths: model.widths().to_vec(),
        timesteps: model.timesteps(),
        readout: model.readout(),
        neurons: model.neurons().to_vec(),
        quant,
        max_delay: model.max_delay(),
        seed: model.seed(),
        connections: model
            .connections()
            .iter()
            .zip(model.scales())
            .map(|(w, &scale)| ConnectionHeader {
                delays: w.delays().clone(),
                scale,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len());
    out.extend_from_slice(MODEL_MAGIC);
    let hlen = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    out.extend_from_slice(&hlen.to_le_bytes());
    out.extend_from_slice(&json);
    for (w, &scale) in model.connections().iter().zip(model.scales()) {
        encode_weights(w, quant, scale, &mut out)?;
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated model file: {what} needs {n} bytes at offset {}, {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }
}

/// Parses a container produced by [`encode_model`].
pub fn decode_model(bytes: &[u8]) -> Result<NetworkModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let hlen = u32::from_le_bytes(r.take(4, "header length")?.try_into().expect("4 bytes"));
    let header: Header = serde_json::from_slice(r.take(hlen as usize, "header")?)?;
    if header.version != MODEL_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: MODEL_VERSION,
        });
    }
    header.quant.validate()?;
    if header.widths.len() != header.connections.len() + 1 {
        return Err(Error::Dimension {
            what: "connections in header",
            expected: header.widths.len().saturating_sub(1),
            found: header.connections.len(),
        });
    }
    let wb = weight_bytes(header.quant);
    let mut connections = Vec::with_capacity(header.connections.len());
    let mut scales = Vec::with_capacity(header.connections.len());
    for (c, ch) in header.connections.iter().enumerate() {
        let (pre, post) = (header.widths[c], header.widths[c + 1]);
        let n = ch
            .delays
            .len()
            .checked_mul(pre)
            .and_then(|x| x.checked_mul(post))
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let raw = r.take(n.saturating_mul(wb), "weights")?;
        let weights: Vec<f64> = match header.quant {
            QuantSpec::Float64 => raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect(),
            QuantSpec::BFloat16 => raw
                .chunks_exact(2)
                .map(|b| bf16_from_bits(u16::from_le_bytes([b[0], b[1]])))
                .collect(),
            QuantSpec::Int(_) => raw.iter().map(|&b| decode_int(b as i8, ch.scale)).collect(),
        };
        let bits = r.take(n.div_ceil(8), "mask")?;
        let mask = (0..n)
            .map(|idx| bits[idx / 8] >> (idx % 8) & 1 == 1)
            .collect();
        connections.push(DelayWeights::from_parts(
            ch.delays.clone(),
            pre,
            post,
            weights,
            mask,
        )?);
        scales.push(ch.scale);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last connection",
            bytes.len() - r.pos
        )));
    }
    let mut model = NetworkModel::new(
        header.widths,
        connections,
        header.neurons,
        header.timesteps,
        header.readout,
    )?;
    model.set_max_delay(header.max_delay)?;
    model.set_seed(header.seed);
    model.set_quantization(header.quant, scales);
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &NetworkModel) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    decode_model(&fs::read(path)?)
}
