use super::{Matrix, Tensor3};
use crate::{Error, Result};

pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut y = x.clone();
    y.data.iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient through ReLU given its pre-activation input.
pub fn relu_backward(pre: &Tensor3, grad_out: &Tensor3) -> Tensor3 {
    let mut g = grad_out.clone();
    for (g, &x) in g.data.iter_mut().zip(&pre.data) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    g
}

/// Mean over the length axis: `(batch, channels, length)` to `batch × channels`.
pub fn global_avg_pool(x: &Tensor3) -> Matrix {
    let mut out = Matrix::zeros(x.batch, x.channels);
    for b in 0..x.batch {
        for (c, chunk) in x.sample(b).chunks_exact(x.length).enumerate() {
            out.data[b * x.channels + c] = chunk.iter().sum::<f64>() / x.length as f64;
        }
    }
    out
}

pub fn global_avg_pool_backward(grad_out: &Matrix, length: usize) -> Result<Tensor3> {
    if length == 0 {
        return Err(Error::Shape("pooling over an empty axis".into()));
    }
    let mut dx = Tensor3::zeros(grad_out.rows, grad_out.cols, length);
    for b in 0..grad_out.rows {
        for (c, chunk) in dx.sample_mut(b).chunks_exact_mut(length).enumerate() {
            chunk.fill(grad_out.data[b * grad_out.cols + c] / length as f64);
        }
    }
    Ok(dx)
}
