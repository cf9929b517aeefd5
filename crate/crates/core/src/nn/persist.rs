//! Weight persistence: a JSON manifest plus a flat little-endian parameter
//! file in manifest order (per layer: weights row-major, then bias).

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Activation, DenseNet, Layer, NnError};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    F32,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub version: u32,
    pub dtype: Dtype,
    pub layers: Vec<LayerShape>,
    pub param_count: usize,
    /// Lowercase hex SHA-256 of the parameter file.
    pub checksum: String,
    pub data_file: String,
}

fn encode(params: &[f64], dtype: Dtype) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(params.len() * dtype.width());
    for &p in params {
        match dtype {
            Dtype::F64 => bytes.extend_from_slice(&p.to_le_bytes()),
            Dtype::F32 => bytes.extend_from_slice(&(p as f32).to_le_bytes()),
        }
    }
    bytes
}

fn decode(bytes: &[u8], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect(),
    }
}

pub fn manifest_for(net: &DenseNet, dtype: Dtype, data_file: &str) -> (WeightManifest, Vec<u8>) {
    let bytes = encode(&net.params_to_vec(), dtype);
    let checksum = hex::encode(Sha256::digest(&bytes));
    let manifest = WeightManifest {
        version: MANIFEST_VERSION,
        dtype,
        layers: net
            .layers()
            .iter()
            .map(|l| LayerShape {
                input: l.in_dim(),
                output: l.out_dim(),
                activation: l.activation,
            })
            .collect(),
        param_count: net.param_count(),
        checksum,
        data_file: data_file.to_string(),
    };
    (manifest, bytes)
}

/// Write `<dir>/<name>.json` and `<dir>/<name>.bin`.
pub fn save_net(net: &DenseNet, dir: &Path, name: &str, dtype: Dtype) -> Result<WeightManifest, NnError> {
    fs::create_dir_all(dir)?;
    let data_file = format!("{name}.bin");
    let (manifest, bytes) = manifest_for(net, dtype, &data_file);
    fs::write(dir.join(&data_file), bytes)?;
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_net(dir: &Path, name: &str) -> Result<DenseNet, NnError> {
    let manifest: WeightManifest = serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json")))?)?;
    let bytes = fs::read(dir.join(&manifest.data_file))?;
    net_from_parts(&manifest, &bytes)
}

pub fn net_from_parts(manifest: &WeightManifest, bytes: &[u8]) -> Result<DenseNet, NnError> {
    if manifest.version != MANIFEST_VERSION {
        return Err(NnError::Manifest(format!("unsupported manifest version {}", manifest.version)));
    }
    let checksum = hex::encode(Sha256::digest(bytes));
    if checksum != manifest.checksum {
        return Err(NnError::Manifest(format!(
            "checksum mismatch: manifest {} data {}",
            manifest.checksum, checksum
        )));
    }
    if bytes.len() != manifest.param_count * manifest.dtype.width() {
        return Err(NnError::Manifest(format!(
            "data holds {} bytes, manifest expects {} parameters",
            bytes.len(),
            manifest.param_count
        )));
    }
    let layers = manifest
        .layers
        .iter()
        .map(|s| Layer {
            weight: Array2::zeros((s.output, s.input)),
            bias: Array1::zeros(s.output),
            activation: s.activation,
        })
        .collect();
    let mut net = DenseNet::from_layers(layers)?;
    net.set_params_from_slice(&decode(bytes, manifest.dtype))?;
    Ok(net)
}
