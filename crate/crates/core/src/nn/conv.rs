use super::{gemm, he_normal, Tensor3};
use crate::rng::Rng;
use crate::{Error, Result};

/// Stride-1 convolution over the band axis with zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `(out, in, kernel)` row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    batch: usize,
    length: usize,
    /// One `(in * kernel, length)` unfolded input per sample.
    cols: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut Rng) -> Self {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        Conv1d {
            in_channels,
            out_channels,
            kernel,
            weight: he_normal(rng, in_channels * kernel, out_channels * in_channels * kernel),
            bias: vec![0.0; out_channels],
        }
    }

    fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    fn unfold(&self, x: &[f64], length: usize, col: &mut [f64]) {
        let k = self.kernel;
        let pad = self.pad() as isize;
        for c in 0..self.in_channels {
            let src = &x[c * length..(c + 1) * length];
            for t in 0..k {
                let row = &mut col[(c * k + t) * length..(c * k + t + 1) * length];
                let shift = t as isize - pad;
                for (l, out) in row.iter_mut().enumerate() {
                    let i = l as isize + shift;
                    *out = if i >= 0 && (i as usize) < length {
                        src[i as usize]
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    fn check(&self, x: &Tensor3) -> Result<()> {
        if x.channels != self.in_channels {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_channels, x.channels
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor3, keep: bool) -> Result<(Tensor3, Option<ConvCache>)> {
        self.check(x)?;
        let (len, rows) = (x.length, self.in_channels * self.kernel);
        let mut out = Tensor3::zeros(x.batch, self.out_channels, len);
        let mut cols = vec![0.0; if keep { x.batch } else { 1 } * rows * len];
        for b in 0..x.batch {
            let col = if keep {
                &mut cols[b * rows * len..(b + 1) * rows * len]
            } else {
                &mut cols[..]
            };
            self.unfold(x.sample(b), len, col);
            let y = out.sample_mut(b);
            for (o, chunk) in y.chunks_exact_mut(len).enumerate() {
                chunk.fill(self.bias[o]);
            }
            gemm(
                self.out_channels,
                rows,
                len,
                1.0,
                &self.weight,
                (rows as isize, 1),
                col,
                (len as isize, 1),
                1.0,
                y,
            );
        }
        let cache = keep.then_some(ConvCache {
            batch: x.batch,
            length: len,
            cols,
        });
        Ok((out, cache))
    }

    pub fn forward_train(&self, x: &Tensor3) -> Result<(Tensor3, ConvCache)> {
        let (y, cache) = self.run(x, true)?;
        Ok((y, cache.expect("cache requested")))
    }

    pub fn forward_eval(&self, x: &Tensor3) -> Result<Tensor3> {
        Ok(self.run(x, false)?.0)
    }

    /// Returns parameter gradients and, if asked, the input gradient.
    pub fn backward(
        &self,
        cache: &ConvCache,
        grad_out: &Tensor3,
        input_grad: bool,
    ) -> Result<(ConvGrads, Option<Tensor3>)> {
        let (len, rows, k) = (cache.length, self.in_channels * self.kernel, self.kernel);
        if grad_out.batch != cache.batch || grad_out.length != len || grad_out.channels != self.out_channels {
            return Err(Error::Shape("conv upstream gradient does not match forward pass".into()));
        }
        let mut grads = ConvGrads {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.out_channels],
        };
        let mut dx = input_grad.then(|| Tensor3::zeros(cache.batch, self.in_channels, len));
        let mut dcol = vec![0.0; rows * len];
        let pad = self.pad() as isize;
        for b in 0..cache.batch {
            let col = &cache.cols[b * rows * len..(b + 1) * rows * len];
            let dy = grad_out.sample(b);
            for (o, chunk) in dy.chunks_exact(len).enumerate() {
                grads.bias[o] += chunk.iter().sum::<f64>();
            }
            gemm(
                self.out_channels,
                len,
                rows,
                1.0,
                dy,
                (len as isize, 1),
                col,
                (1, len as isize),
                1.0,
                &mut grads.weight,
            );
            if let Some(dx) = dx.as_mut() {
                gemm(
                    rows,
                    self.out_channels,
                    len,
                    1.0,
                    &self.weight,
                    (1, rows as isize),
                    dy,
                    (len as isize, 1),
                    0.0,
                    &mut dcol,
                );
                let dxs = dx.sample_mut(b);
                for c in 0..self.in_channels {
                    for t in 0..k {
                        let row = &dcol[(c * k + t) * len..(c * k + t + 1) * len];
                        let shift = t as isize - pad;
                        let dst = &mut dxs[c * len..(c + 1) * len];
                        for (l, g) in row.iter().enumerate() {
                            let i = l as isize + shift;
                            if i >= 0 && (i as usize) < len {
                                dst[i as usize] += g;
                            }
                        }
                    }
                }
            }
        }
        Ok((grads, dx))
    }
}
