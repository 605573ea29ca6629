//! Decoder weight files.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! b"FSDW" | u32 version = 1 | u32 depth | u32 latent_dim | u32 hidden_dim
//! | u8 output_activation (0 = none, 1 = tanh)
//! | depth x { u32 rows | u32 cols | rows*cols f32 row-major weights | rows f32 biases }
//! ```
//!
//! The JSON form carries the same header fields and one
//! `{"weights": [[..], ..], "bias": [..]}` object per layer.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::decoder::{Layer, MlpSdfDecoder, OutputActivation};
use crate::error::{FsdError, Result};

pub const MAGIC: &[u8; 4] = b"FSDW";
pub const VERSION: u32 = 1;

pub fn save_weights<W: Write>(decoder: &MlpSdfDecoder, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    for v in [
        VERSION,
        decoder.depth() as u32,
        decoder.latent_dim() as u32,
        decoder.hidden_dim() as u32,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&[decoder.output_activation().code()])?;
    for layer in decoder.layers() {
        out.write_all(&(layer.rows() as u32).to_le_bytes())?;
        out.write_all(&(layer.cols() as u32).to_le_bytes())?;
        for &w in layer.weights().iter().chain(layer.bias()) {
            out.write_all(&(w as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn weights_to_bytes(decoder: &MlpSdfDecoder) -> Vec<u8> {
    let mut buf = Vec::new();
    save_weights(decoder, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(FsdError::format(field, "stream truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize, field: &str) -> Result<Vec<f32>> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| FsdError::format(field, "size overflow"))?;
        let b = self.take(bytes, field)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn weights_from_bytes(bytes: &[u8]) -> Result<MlpSdfDecoder> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(FsdError::format("magic", "expected FSDW"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FsdError::format(
            "version",
            format!("unsupported version {version}"),
        ));
    }
    let depth = r.u32("depth")? as usize;
    let latent_dim = r.u32("latent_dim")? as usize;
    let hidden_dim = r.u32("hidden_dim")? as usize;
    if depth == 0 {
        return Err(FsdError::format("depth", "must be at least 1"));
    }
    let act = r.take(1, "output_activation")?[0];
    let output_activation = OutputActivation::from_code(act)
        .ok_or_else(|| FsdError::format("output_activation", format!("unknown code {act}")))?;

    let mut layers = Vec::with_capacity(depth);
    for i in 0..depth {
        let rows = r.u32(&format!("layers[{i}].rows"))? as usize;
        let cols = r.u32(&format!("layers[{i}].cols"))? as usize;
        let want_cols = if i == 0 { latent_dim + 3 } else { hidden_dim };
        let want_rows = if i + 1 == depth { 1 } else { hidden_dim };
        if rows != want_rows {
            return Err(FsdError::format(
                format!("layers[{i}].rows"),
                format!("{rows} inconsistent with header (expected {want_rows})"),
            ));
        }
        if cols != want_cols {
            return Err(FsdError::format(
                format!("layers[{i}].cols"),
                format!("{cols} inconsistent with header (expected {want_cols})"),
            ));
        }
        let weights = r.f32s(rows * cols, &format!("layers[{i}].weights"))?;
        let bias = r.f32s(rows, &format!("layers[{i}].bias"))?;
        layers.push(
            Layer::new(rows, cols, weights, bias)
                .map_err(|e| FsdError::format(format!("layers[{i}]"), e.to_string()))?,
        );
    }
    if r.pos != bytes.len() {
        return Err(FsdError::format(
            "layers",
            "trailing bytes after last layer",
        ));
    }
    MlpSdfDecoder::new(latent_dim, hidden_dim, output_activation, layers)
        .map_err(|e| FsdError::format("layers", e.to_string()))
}

pub fn load_weights<R: Read>(mut source: R) -> Result<MlpSdfDecoder> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    weights_from_bytes(&bytes)
}

#[derive(Serialize, Deserialize)]
struct JsonLayer {
    weights: Vec<Vec<f32>>,
    bias: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct JsonDecoder {
    #[serde(default = "default_version")]
    version: u32,
    depth: usize,
    latent_dim: usize,
    hidden_dim: usize,
    output_activation: u8,
    layers: Vec<JsonLayer>,
}

fn default_version() -> u32 {
    VERSION
}

/// Parses the JSON weight form. Values are rounded to `f32`.
pub fn weights_from_json(text: &str) -> Result<MlpSdfDecoder> {
    let doc: JsonDecoder =
        serde_json::from_str(text).map_err(|e| FsdError::format("json", e.to_string()))?;
    if doc.version != VERSION {
        return Err(FsdError::format(
            "version",
            format!("unsupported version {}", doc.version),
        ));
    }
    if doc.layers.len() != doc.depth {
        return Err(FsdError::format(
            "depth",
            format!(
                "header says {} layers, found {}",
                doc.depth,
                doc.layers.len()
            ),
        ));
    }
    let output_activation =
        OutputActivation::from_code(doc.output_activation).ok_or_else(|| {
            FsdError::format(
                "output_activation",
                format!("unknown code {}", doc.output_activation),
            )
        })?;
    let mut layers = Vec::with_capacity(doc.depth);
    for (i, l) in doc.layers.into_iter().enumerate() {
        let rows = l.weights.len();
        let cols = l.weights.first().map_or(0, Vec::len);
        if l.weights.iter().any(|row| row.len() != cols) {
            return Err(FsdError::format(
                format!("layers[{i}].weights"),
                "ragged rows",
            ));
        }
        let flat = l.weights.into_iter().flatten().collect();
        layers.push(
            Layer::new(rows, cols, flat, l.bias)
                .map_err(|e| FsdError::format(format!("layers[{i}]"), e.to_string()))?,
        );
    }
    MlpSdfDecoder::new(doc.latent_dim, doc.hidden_dim, output_activation, layers)
        .map_err(|e| FsdError::format("layers", e.to_string()))
}

pub fn weights_to_json(decoder: &MlpSdfDecoder) -> String {
    let doc = JsonDecoder {
        version: VERSION,
        depth: decoder.depth(),
        latent_dim: decoder.latent_dim(),
        hidden_dim: decoder.hidden_dim(),
        output_activation: decoder.output_activation().code(),
        layers: decoder
            .layers()
            .iter()
            .map(|l| JsonLayer {
                weights: l
                    .weights()
                    .chunks(l.cols())
                    .map(|row| row.iter().map(|&v| v as f32).collect())
                    .collect(),
                bias: l.bias().iter().map(|&v| v as f32).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("decoder serializes")
}

/// Loads either format, detected by the leading magic bytes.
pub fn load_weights_any(bytes: &[u8]) -> Result<MlpSdfDecoder> {
    if bytes.starts_with(MAGIC) {
        weights_from_bytes(bytes)
    } else if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        let text =
            std::str::from_utf8(bytes).map_err(|e| FsdError::format("json", e.to_string()))?;
        weights_from_json(text)
    } else {
        Err(FsdError::format("magic", "expected FSDW or a JSON object"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::decoder::{gen_random_decoder, LatentCode};
    use crate::Vec3;

    #[test]
    fn binary_round_trip_is_exact() {
        let dec = gen_random_decoder(9, 6, 10, 4);
        let bytes = weights_to_bytes(&dec);
        assert_eq!(&bytes[..4], b"FSDW");
        let back = weights_from_bytes(&bytes).unwrap();
        assert_eq!(dec, back);
        assert_eq!(weights_to_bytes(&back), bytes);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dec = gen_random_decoder(4, 3, 5, 3);
        let back = weights_from_json(&weights_to_json(&dec)).unwrap();
        assert_eq!(dec, back);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = weights_to_bytes(&gen_random_decoder(1, 2, 3, 2));
        bytes[0] = b'X';
        let err = weights_from_bytes(&bytes).unwrap_err();
        assert!(
            matches!(err, FsdError::Format { ref field, .. } if field == "magic"),
            "{err}"
        );
    }

    #[test]
    fn truncated_stream_names_field() {
        let bytes = weights_to_bytes(&gen_random_decoder(1, 2, 3, 2));
        let err = weights_from_bytes(&bytes[..bytes.len() - 2]).unwrap_err();
        assert!(
            matches!(err, FsdError::Format { ref field, .. } if field == "layers[1].bias"),
            "{err}"
        );
        let err = weights_from_bytes(&bytes[..10]).unwrap_err();
        assert!(
            matches!(err, FsdError::Format { ref field, .. } if field == "depth"),
            "{err}"
        );
    }

    #[test]
    fn inconsistent_dimensions() {
        let mut bytes = weights_to_bytes(&gen_random_decoder(1, 2, 3, 2));
        // hidden_dim lives at offset 16
        bytes[16..20].copy_from_slice(&4u32.to_le_bytes());
        let err = weights_from_bytes(&bytes).unwrap_err();
        assert!(
            matches!(err, FsdError::Format { ref field, .. } if field == "layers[0].rows"),
            "{err}"
        );
    }

    #[test]
    fn hand_written_two_layer_net() {
        // latent dim 1, hidden 2:
        //   h = relu(W0 [z, x, y, z] + b0), f = W1 h + b1 (no output activation)
        let text = r#"{
            "depth": 2, "latent_dim": 1, "hidden_dim": 2, "output_activation": 0,
            "layers": [
                {"weights": [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 2.0]], "bias": [0.5, -0.25]},
                {"weights": [[2.0, -1.0]], "bias": [0.125]}
            ]
        }"#;
        let dec = weights_from_json(text).unwrap();
        let z = LatentCode::new(vec![0.5]).unwrap();
        let p = Vec3::new(0.25, -0.5, 0.75);
        // h0 = relu(0.5 + 0.25 + 0.5) = 1.25
        // h1 = relu(0.5 + 1.5 - 0.25) = 1.75
        // f = 2*1.25 - 1.75 + 0.125 = 0.875
        let v = dec.eval(&z, &[p]).unwrap()[0];
        assert!((v - 0.875).abs() < 1e-12);
        let g = dec.eval_gradient(&z, &[p]).unwrap()[0];
        // df/dq = 2*(1,0,0) - (0,-1,2)
        assert_eq!(g, Vec3::new(2.0, 1.0, -2.0));
    }

    #[test]
    fn json_depth_mismatch() {
        let text = r#"{"depth": 3, "latent_dim": 1, "hidden_dim": 1, "output_activation": 1,
            "layers": [{"weights": [[1,1,1,1]], "bias": [0]}]}"#;
        assert!(matches!(
            weights_from_json(text).unwrap_err(),
            FsdError::Format { ref field, .. } if field == "depth"
        ));
    }
}
