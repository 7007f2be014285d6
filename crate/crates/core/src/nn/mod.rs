//! Minimal 64-bit neural-network engine with hand-written backpropagation:
//! just enough to train the spectral encoder and its projection head.

mod batchnorm;
mod conv;
mod dense;
mod encoder;
mod ops;
mod optim;
mod tensor;

pub use batchnorm::{BatchNorm1d, BatchNormCache, BatchNormGrads, BN_EPSILON, BN_MOMENTUM};
pub use conv::{Conv1d, ConvCache, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use encoder::{
    EncoderCache, EncoderGrads, EncoderModel, EncoderOutput, CHANNELS, EMBEDDING_DIM, KERNELS,
    LATENT_DIM,
};
pub use ops::{global_avg_pool, global_avg_pool_backward, relu, relu_backward};
pub use optim::{AdamW, AdamWConfig};
pub use tensor::{Matrix, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// He-normal initialisation: zero mean, std `sqrt(2 / fan_in)`.
pub(crate) fn he_normal(rng: &mut crate::rng::Rng, fan_in: usize, len: usize) -> Vec<f64> {
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// C = alpha * A(m×k) · B(k×n) + beta * C, all row-major unless strides say otherwise.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(c.len() >= m * n, "gemm output too small");
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: isize, cs: isize| {
        (rows.saturating_sub(1) as isize * rs + cols.saturating_sub(1) as isize * cs) as usize
    };
    assert!(k == 0 || a.len() > last(m, k, rsa, csa), "gemm lhs out of bounds");
    assert!(k == 0 || b.len() > last(k, n, rsb, csb), "gemm rhs out of bounds");
    // SAFETY: bounds of every operand were checked against the strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
