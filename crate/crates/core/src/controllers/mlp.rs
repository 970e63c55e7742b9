//! Feed-forward network inference from a JSON weights file.
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "layers": [
//!     { "weights": [[0.5, -1.0], [1.0, 1.0]], "bias": [0.0, 0.1], "activation": "tanh" },
//!     { "weights": [[1.0, -2.0]], "bias": [0.0], "activation": "linear" }
//!   ]
//! }
//! ```
//!
//! `weights` is row-major with one row per output unit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("layer {layer}: {message}")]
    Malformed { layer: usize, message: String },
    #[error("model has no layers")]
    Empty,
    #[error("reading weights: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing weights: {0}")]
    Json(#[from] serde_json::Error),
}

/// Validated network, stored flat for inference.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    layers: Vec<FlatLayer>,
}

#[derive(Debug, Clone, PartialEq)]
struct FlatLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MlpFile {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl MlpModel {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self, MlpError> {
        if layers.is_empty() {
            return Err(MlpError::Empty);
        }
        let mut cols = input_dim;
        let mut flat = Vec::with_capacity(layers.len());
        for (li, layer) in layers.into_iter().enumerate() {
            let malformed = |message: String| MlpError::Malformed { layer: li, message };
            let rows = layer.weights.len();
            if rows == 0 {
                return Err(malformed("no output units".into()));
            }
            if layer.bias.len() != rows {
                return Err(malformed(format!("{} bias entries for {rows} rows", layer.bias.len())));
            }
            if let Some(r) = layer.weights.iter().position(|row| row.len() != cols) {
                return Err(malformed(format!("row {r} has {} columns, expected {cols}", layer.weights[r].len())));
            }
            let weights: Vec<f64> = layer.weights.into_iter().flatten().collect();
            if weights.iter().chain(&layer.bias).any(|w| !w.is_finite()) {
                return Err(malformed("non-finite parameter".into()));
            }
            flat.push(FlatLayer { rows, cols, weights, bias: layer.bias, activation: layer.activation });
            cols = rows;
        }
        Ok(MlpModel { input_dim, layers: flat })
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        let file: MlpFile = serde_json::from_str(text)?;
        MlpModel::new(file.input_dim, file.layers)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        MlpModel::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: l.weights.chunks(l.cols).map(<[f64]>::to_vec).collect(),
                bias: l.bias.clone(),
                activation: l.activation,
            })
            .collect();
        serde_json::to_string(&MlpFile { input_dim: self.input_dim, layers }).expect("serializable")
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Layer-by-layer evaluation.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if x.len() != self.input_dim {
            return Err(MlpError::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            next.clear();
            next.extend(l.weights.chunks_exact(l.cols).zip(&l.bias).map(|(row, b)| {
                let z: f64 = row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>() + b;
                l.activation.apply(z)
            }));
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// A steering network whose output is close to
    /// `tanh(gain * (Σ right − Σ left) / (half * max_range))` over a scan of
    /// `rays` readings, with readings normalised by `max_range` on input.
    ///
    /// Every hidden unit sees the same clearance difference through a
    /// different small scale, so the hidden tanh layers stay near-linear and
    /// the output matches the geometric controller to within a few percent.
    pub fn clearance_steering(rays: usize, hidden: usize, gain: f64) -> MlpModel {
        assert!(rays >= 3 && rays % 2 == 1 && hidden >= 1);
        let center = rays / 2;
        let half = center as f64;
        let side = |i: usize| match i.cmp(&center) {
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => 1.0,
        };
        // Hidden scales alternate in sign and vary in size; the products of
        // matched scales are normalised so the linearised network has unit
        // gain on the clearance difference.
        let scale = |j: usize| {
            let s = 0.05 + 0.1 * (j % 7) as f64 / 7.0;
            if j.is_multiple_of(2) {
                s
            } else {
                -s
            }
        };
        let first: Vec<Vec<f64>> = (0..hidden).map(|j| (0..rays).map(|i| scale(j) * side(i) / half).collect()).collect();
        // Second layer: unit k reads unit k of the first layer rescaled to
        // 0.1, plus a faint coupling to every other unit (about 1% of the
        // signal) so that no weight is zero.
        let second: Vec<Vec<f64>> = (0..hidden)
            .map(|k| {
                (0..hidden)
                    .map(|j| {
                        let own = if j == k { 0.1 / scale(k) } else { 0.0 };
                        let coupling = 1e-4 * if (j + k) % 2 == 0 { 1.0 } else { -1.0 } * (j as f64 - k as f64).signum();
                        own + coupling
                    })
                    .collect()
            })
            .collect();
        let out = vec![(0..hidden).map(|_| gain / (0.1 * hidden as f64)).collect::<Vec<_>>()];
        let layers = vec![
            Layer { weights: first, bias: vec![0.0; hidden], activation: Activation::Tanh },
            Layer { weights: second, bias: vec![0.0; hidden], activation: Activation::Tanh },
            Layer { weights: out, bias: vec![0.0], activation: Activation::Tanh },
        ];
        MlpModel::new(rays, layers).expect("constructed dimensions chain")
    }
}
