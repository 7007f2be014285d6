use super::{gemm, he_normal, Matrix};
use crate::rng::Rng;
use crate::{Error, Result};

/// Affine map `y = x Wᵀ + b` applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `(outputs, inputs)` row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Dense {
            inputs,
            outputs,
            weight: he_normal(rng, inputs, inputs * outputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn identity(width: usize) -> Self {
        let mut weight = vec![0.0; width * width];
        for i in 0..width {
            weight[i * width + i] = 1.0;
        }
        Dense {
            inputs: width,
            outputs: width,
            weight,
            bias: vec![0.0; width],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols != self.inputs {
            return Err(Error::Shape(format!(
                "dense layer expects {} inputs, got {}",
                self.inputs, x.cols
            )));
        }
        let mut y = Matrix::zeros(x.rows, self.outputs);
        for r in 0..x.rows {
            y.row_mut(r).copy_from_slice(&self.bias);
        }
        gemm(
            x.rows,
            self.inputs,
            self.outputs,
            1.0,
            &x.data,
            (self.inputs as isize, 1),
            &self.weight,
            (1, self.inputs as isize),
            1.0,
            &mut y.data,
        );
        Ok(y)
    }

    pub fn backward(&self, input: &Matrix, grad_out: &Matrix) -> Result<(DenseGrads, Matrix)> {
        if grad_out.cols != self.outputs || grad_out.rows != input.rows || input.cols != self.inputs {
            return Err(Error::Shape("dense upstream gradient does not match forward pass".into()));
        }
        let mut grads = DenseGrads {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.outputs],
        };
        for r in 0..grad_out.rows {
            for (b, g) in grads.bias.iter_mut().zip(grad_out.row(r)) {
                *b += g;
            }
        }
        gemm(
            self.outputs,
            input.rows,
            self.inputs,
            1.0,
            &grad_out.data,
            (1, self.outputs as isize),
            &input.data,
            (self.inputs as isize, 1),
            0.0,
            &mut grads.weight,
        );
        let mut dx = Matrix::zeros(input.rows, self.inputs);
        gemm(
            input.rows,
            self.outputs,
            self.inputs,
            1.0,
            &grad_out.data,
            (self.outputs as isize, 1),
            &self.weight,
            (self.inputs as isize, 1),
            0.0,
            &mut dx.data,
        );
        Ok((grads, dx))
    }
}
