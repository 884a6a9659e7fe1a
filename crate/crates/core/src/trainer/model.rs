//! Multi-layer perceptron with a sigmoid multi-label head.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// `b"CTMD"` read as a little-endian `u32`.
pub const MODEL_MAGIC: u32 = u32::from_le_bytes(*b"CTMD");
pub const MODEL_VERSION: u32 = 1;

/// Probability floor and ceiling offset used by the training loss.
pub const BCE_EPS: f64 = 1e-7;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Affine layer `y = W x + b` with its Adam moments. `weights` is row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub m_weights: Vec<f64>,
    pub v_weights: Vec<f64>,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            m_weights: vec![0.0; in_dim * out_dim],
            v_weights: vec![0.0; in_dim * out_dim],
            m_bias: vec![0.0; out_dim],
            v_bias: vec![0.0; out_dim],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b
        }));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub layers: Vec<Layer>,
    /// Number of optimizer steps applied so far.
    pub step: u64,
}

/// Per-hidden-layer multipliers: 0 for dropped units, `1 / (1 - p)` for kept ones.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<Vec<f64>>);

impl DropoutMask {
    pub fn sample(model: &ModelState, rate: f64, rng: &mut SplitMix64) -> Self {
        let keep = 1.0 / (1.0 - rate);
        let hidden = &model.layers[..model.layers.len() - 1];
        Self(
            hidden
                .iter()
                .map(|l| {
                    (0..l.out_dim)
                        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
                        .collect()
                })
                .collect(),
        )
    }
}

/// Gradients with the same layout as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelState) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.bias)
            .all(|g| g.iter().all(|v| v.is_finite()))
    }

    pub fn clear(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

impl ModelState {
    /// Layers `input -> hidden_dims... -> outputs`. Hidden weights are drawn
    /// from a seeded He-scaled normal; the sigmoid head starts at zero, so an
    /// untrained model predicts 0.5 everywhere.
    pub fn init(input_dim: usize, hidden_dims: &[usize], outputs: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || outputs == 0 || hidden_dims.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut rng = SplitMix64::derived(seed, "init");
        let dims: Vec<usize> = std::iter::once(input_dim)
            .chain(hidden_dims.iter().copied())
            .chain(std::iter::once(outputs))
            .collect();
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let mut layer = Layer::zeros(w[0], w[1]);
                if i != last {
                    let std = (2.0 / w[0] as f64).sqrt();
                    layer.weights.iter_mut().for_each(|v| *v = std * rng.normal());
                }
                layer
            })
            .collect();
        Ok(Self { layers, step: 0 })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.out_dim).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters and moments are all finite.
    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            [&l.weights, &l.bias, &l.m_weights, &l.v_weights, &l.m_bias, &l.v_bias]
                .iter()
                .all(|t| t.iter().all(|v| v.is_finite()))
        })
    }

    /// Output logits, keeping every layer's post-activation values for backprop.
    fn forward_trace(&self, x: &[f64], mask: Option<&DropoutMask>) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.apply(&acts[i], &mut out);
            if i < last {
                // NaN must survive the ReLU so bad inputs surface as non-finite gradients
                out.iter_mut().filter(|v| **v < 0.0).for_each(|v| *v = 0.0);
                if let Some(mask) = mask {
                    out.iter_mut().zip(&mask.0[i]).for_each(|(v, k)| *v *= k);
                }
            }
            acts.push(out);
        }
        acts
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: features.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.forward_trace(features, mask).pop().unwrap())
    }

    /// Sigmoid probabilities; pass a mask only during training.
    pub fn forward(&self, features: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        let mut z = self.logits(features, mask)?;
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(z)
    }

    /// Adds the gradient of `bce_multilabel(forward(x), target)` into `grads`
    /// and returns the example's loss.
    pub fn accumulate_gradient(
        &self,
        features: &[f64],
        target: &[f64],
        mask: Option<&DropoutMask>,
        grads: &mut Gradients,
    ) -> Result<f64> {
        self.check_input(features)?;
        if target.len() != self.output_dim() {
            return Err(Error::LengthMismatch {
                expected: self.output_dim(),
                found: target.len(),
            });
        }
        let acts = self.forward_trace(features, mask);
        let probs: Vec<f64> = acts[acts.len() - 1].iter().map(|&z| sigmoid(z)).collect();
        let loss = bce_multilabel(&probs, target)?;

        // sigmoid + binary cross-entropy: dL/dz = p - t
        let mut delta: Vec<f64> = probs.iter().zip(target).map(|(p, t)| p - t).collect();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            let gw = &mut grads.weights[i];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                gw[o * layer.in_dim..(o + 1) * layer.in_dim]
                    .iter_mut()
                    .zip(input)
                    .for_each(|(g, x)| *g += d * x);
            }
            grads.bias[i].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
            if i == 0 {
                break;
            }
            // back through the previous hidden layer: mask scaling and ReLU gate
            let mut prev = vec![0.0; layer.in_dim];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            for (j, p) in prev.iter_mut().enumerate() {
                // acts[i] is post-ReLU and post-mask; zero means the unit was gated off
                if input[j] <= 0.0 {
                    *p = 0.0;
                } else if let Some(mask) = mask {
                    *p *= mask.0[i - 1][j];
                }
            }
            delta = prev;
        }
        Ok(loss)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = u32::try_from(self.layers.len()).expect("layer count fits in u32");
        for v in [MODEL_MAGIC, MODEL_VERSION, n, 0] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.step.to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.in_dim as u32).to_le_bytes())?;
            w.write_all(&(l.out_dim as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.parameter_count() * 3 * 8);
        for l in &self.layers {
            for t in [&l.weights, &l.bias, &l.m_weights, &l.v_weights, &l.m_bias, &l.v_bias] {
                for v in t.iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: String| Error::ModelFormat(msg);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| bad(e.to_string()))?;
        let mut cursor = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(Error::ModelFormat("truncated model file".into()));
            }
            let (head, tail) = cursor.split_at(n);
            cursor = tail;
            Ok(head)
        };
        let mut u32_at = || -> Result<u32> { Ok(u32::from_le_bytes(take(4)?.try_into().unwrap())) };
        let magic = u32_at()?;
        if magic != MODEL_MAGIC {
            return Err(bad(format!("bad magic {magic:#010x}")));
        }
        let version = u32_at()?;
        if version != MODEL_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let n_layers = u32_at()? as usize;
        let _reserved = u32_at()?;
        if n_layers == 0 {
            return Err(bad("model has no layers".into()));
        }
        let step = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let i = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let o = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            if i == 0 || o == 0 {
                return Err(bad("zero-width layer".into()));
            }
            if let Some(&(_, prev_out)) = shapes.last() {
                if prev_out != i {
                    return Err(bad(format!("layer input {i} does not match previous output {prev_out}")));
                }
            }
            shapes.push((i, o));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (i, o) in shapes {
            let mut read_vec = |len: usize| -> Result<Vec<f64>> {
                Ok(take(len * 8)?
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            };
            layers.push(Layer {
                in_dim: i,
                out_dim: o,
                weights: read_vec(i * o)?,
                bias: read_vec(o)?,
                m_weights: read_vec(i * o)?,
                v_weights: read_vec(i * o)?,
                m_bias: read_vec(o)?,
                v_bias: read_vec(o)?,
            });
        }
        if !cursor.is_empty() {
            return Err(bad("trailing bytes after parameters".into()));
        }
        Ok(Self { layers, step })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Sum over categories of the binary cross-entropy, predictions clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_multilabel(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            found: pred.len(),
        });
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum())
}
