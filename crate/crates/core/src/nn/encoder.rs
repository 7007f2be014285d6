//! The spectral encoder: three conv → batch-norm → ReLU stages with kernel
//! sizes 7, 5, 3 and 32, 64, 128 channels, global average pooling to a
//! 128-wide latent, and a linear projection head to a 16-wide embedding.
//!
//! Checkpoint layout (`ENCM`), little-endian:
//!
//! ```text
//! "ENCM" | version: u32 = 1 | bands: u32 |
//! f64 × N in this order:
//!   conv1.weight (32·1·7), conv1.bias (32), bn1.gamma (32), bn1.beta (32),
//!   conv2.weight (64·32·5), conv2.bias (64), bn2.gamma (64), bn2.beta (64),
//!   conv3.weight (128·64·3), conv3.bias (128), bn3.gamma (128), bn3.beta (128),
//!   head.weight (16·128), head.bias (16),
//!   bn1.running_mean, bn1.running_var, bn2.running_mean, bn2.running_var,
//!   bn3.running_mean, bn3.running_var
//! ```
//!
//! Weights are row-major: conv as `(out, in, kernel)`, head as `(out, in)`.

use super::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, BatchNorm1d, BatchNormCache,
    BatchNormGrads, Conv1d, ConvCache, ConvGrads, Dense, DenseGrads, Matrix, Mode, Tensor3,
};
use crate::rng::{self, domain};
use crate::{Error, Result};

pub const KERNELS: [usize; 3] = [7, 5, 3];
pub const CHANNELS: [usize; 3] = [32, 64, 128];
pub const LATENT_DIM: usize = 128;
pub const EMBEDDING_DIM: usize = 16;

const MAGIC: &[u8; 4] = b"ENCM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub bands: usize,
    pub conv: [Conv1d; 3],
    pub bn: [BatchNorm1d; 3],
    pub head: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `batch × 128`
    pub latent: Matrix,
    /// `batch × 16`
    pub embedding: Matrix,
}

/// Activations kept by a training-mode forward pass.
///
/// A backward pass needs one of these, so calling backward without a
/// forward pass is ruled out by the signature.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    conv: Vec<ConvCache>,
    bn: Vec<BatchNormCache>,
    pre_relu: Vec<Tensor3>,
    latent: Matrix,
    length: usize,
}

impl EncoderCache {
    pub fn latent(&self) -> &Matrix {
        &self.latent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub conv: Vec<ConvGrads>,
    pub bn: Vec<BatchNormGrads>,
    pub head: DenseGrads,
}

impl EncoderGrads {
    /// Gradient slices in checkpoint parameter order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(14);
        for (c, b) in self.conv.iter().zip(&self.bn) {
            out.extend([&c.weight[..], &c.bias[..], &b.gamma[..], &b.beta[..]]);
        }
        out.extend([&self.head.weight[..], &self.head.bias[..]]);
        out
    }

    pub fn add_assign(&mut self, other: &EncoderGrads) {
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        for (a, b) in self.conv.iter_mut().zip(&other.conv) {
            add(&mut a.weight, &b.weight);
            add(&mut a.bias, &b.bias);
        }
        for (a, b) in self.bn.iter_mut().zip(&other.bn) {
            add(&mut a.gamma, &b.gamma);
            add(&mut a.beta, &b.beta);
        }
        add(&mut self.head.weight, &other.head.weight);
        add(&mut self.head.bias, &other.head.bias);
    }
}

impl EncoderModel {
    /// He-initialised encoder for spectra of `bands` values.
    pub fn new(bands: usize, seed: u64) -> Result<Self> {
        if bands == 0 {
            return Err(Error::Invalid("encoder needs at least one band".into()));
        }
        let mut rng = rng::substream(seed, domain::INIT, 0);
        let mut in_c = 1;
        let conv = std::array::from_fn(|i| {
            let c = Conv1d::new(in_c, CHANNELS[i], KERNELS[i], &mut rng);
            in_c = CHANNELS[i];
            c
        });
        let bn = std::array::from_fn(|i| BatchNorm1d::new(CHANNELS[i]));
        let head = Dense::new(LATENT_DIM, EMBEDDING_DIM, &mut rng);
        Ok(EncoderModel {
            bands,
            conv,
            bn,
            head,
        })
    }

    fn check_input(&self, x: &Tensor3) -> Result<()> {
        if x.channels != 1 || x.length != self.bands {
            return Err(Error::Shape(format!(
                "encoder expects (batch, 1, {}), got ({}, {}, {})",
                self.bands, x.batch, x.channels, x.length
            )));
        }
        if x.batch == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor3, mode: Mode) -> Result<EncoderOutput> {
        match mode {
            Mode::Eval => self.forward_eval(x),
            Mode::Train => Ok(self.forward_train(x)?.0),
        }
    }

    /// Inference with running batch-norm statistics; never mutates the model.
    pub fn forward_eval(&self, x: &Tensor3) -> Result<EncoderOutput> {
        let latent = self.latent_eval(x)?;
        let embedding = self.head.forward(&latent)?;
        Ok(EncoderOutput { latent, embedding })
    }

    pub fn latent_eval(&self, x: &Tensor3) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (conv, bn) in self.conv.iter().zip(&self.bn) {
            h = relu(&bn.forward_eval(&conv.forward_eval(&h)?)?);
        }
        Ok(global_avg_pool(&h))
    }

    /// Forward pass with batch statistics. Running statistics are left
    /// alone; apply them with [`EncoderModel::update_running_stats`].
    pub fn forward_train(&self, x: &Tensor3) -> Result<(EncoderOutput, EncoderCache)> {
        self.check_input(x)?;
        let mut conv_caches = Vec::with_capacity(3);
        let mut bn_caches = Vec::with_capacity(3);
        let mut pre = Vec::with_capacity(3);
        let mut h = x.clone();
        for (conv, bn) in self.conv.iter().zip(&self.bn) {
            let (c, cc) = conv.forward_train(&h)?;
            let (b, bc) = bn.forward_train(&c)?;
            h = relu(&b);
            conv_caches.push(cc);
            bn_caches.push(bc);
            pre.push(b);
        }
        let latent = global_avg_pool(&h);
        let embedding = self.head.forward(&latent)?;
        Ok((
            EncoderOutput {
                latent: latent.clone(),
                embedding,
            },
            EncoderCache {
                conv: conv_caches,
                bn: bn_caches,
                pre_relu: pre,
                latent,
                length: x.length,
            },
        ))
    }

    pub fn update_running_stats(&mut self, cache: &EncoderCache) {
        for (bn, c) in self.bn.iter_mut().zip(&cache.bn) {
            bn.update_running_stats(c);
        }
    }

    /// Backpropagates a loss gradient with respect to the embeddings.
    pub fn backward(&self, cache: &EncoderCache, grad_embedding: &Matrix) -> Result<EncoderGrads> {
        if grad_embedding.rows != cache.latent.rows || grad_embedding.cols != EMBEDDING_DIM {
            return Err(Error::Shape("embedding gradient does not match forward pass".into()));
        }
        let (head, dlatent) = self.head.backward(&cache.latent, grad_embedding)?;
        let mut g = global_avg_pool_backward(&dlatent, cache.length)?;
        let mut conv_grads = Vec::with_capacity(3);
        let mut bn_grads = Vec::with_capacity(3);
        for i in (0..3).rev() {
            let g_bn = relu_backward(&cache.pre_relu[i], &g);
            let (bg, g_conv) = self.bn[i].backward(&cache.bn[i], &g_bn)?;
            let (cg, dx) = self.conv[i].backward(&cache.conv[i], &g_conv, i > 0)?;
            conv_grads.push(cg);
            bn_grads.push(bg);
            if let Some(dx) = dx {
                g = dx;
            }
        }
        conv_grads.reverse();
        bn_grads.reverse();
        Ok(EncoderGrads {
            conv: conv_grads,
            bn: bn_grads,
            head,
        })
    }

    /// Trainable tensors in checkpoint order.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(14);
        for (c, b) in self.conv.iter().zip(&self.bn) {
            out.extend([&c.weight[..], &c.bias[..], &b.gamma[..], &b.beta[..]]);
        }
        out.extend([&self.head.weight[..], &self.head.bias[..]]);
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(14);
        for (c, b) in self.conv.iter_mut().zip(self.bn.iter_mut()) {
            out.push(&mut c.weight[..]);
            out.push(&mut c.bias[..]);
            out.push(&mut b.gamma[..]);
            out.push(&mut b.beta[..]);
        }
        out.push(&mut self.head.weight[..]);
        out.push(&mut self.head.bias[..]);
        out
    }

    fn buffers(&self) -> Vec<&[f64]> {
        self.bn
            .iter()
            .flat_map(|b| [&b.running_mean[..], &b.running_var[..]])
            .collect()
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        self.bn
            .iter_mut()
            .flat_map(|b| [&mut b.running_mean[..], &mut b.running_var[..]])
            .collect()
    }

    /// Conv and batch-norm state (everything except the head), used to
    /// verify that fine-tuning leaves the encoder untouched.
    pub fn frozen_part(&self) -> (&[Conv1d; 3], &[BatchNorm1d; 3]) {
        (&self.conv, &self.bn)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.bands as u32).to_le_bytes());
        for t in self.parameters().into_iter().chain(self.buffers()) {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad encoder checkpoint magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported encoder checkpoint version {version}")));
        }
        let bands = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let mut model = EncoderModel::new(bands, 0)?;
        let expected: usize = model.parameters().iter().chain(&model.buffers()).map(|t| t.len()).sum();
        let body = &bytes[12..];
        if body.len() != expected * 8 {
            return Err(Error::Format(format!(
                "encoder checkpoint has {} payload bytes, expected {}",
                body.len(),
                expected * 8
            )));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for t in model.parameters_mut() {
            t.iter_mut().for_each(|v| *v = values.next().expect("length checked"));
        }
        for t in model.buffers_mut() {
            t.iter_mut().for_each(|v| *v = values.next().expect("length checked"));
        }
        if model.parameters().iter().chain(&model.buffers()).flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Format("encoder checkpoint contains non-finite values".into()));
        }
        if model.bn.iter().flat_map(|b| &b.running_var).any(|&v| v <= 0.0) {
            return Err(Error::Format("running variance must be positive".into()));
        }
        Ok(model)
    }
}
