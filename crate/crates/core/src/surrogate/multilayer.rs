//! The multilayer model: free intermediate features `H^1..H^L` with a
//! transport penalty `Σ_l ‖H^{l+1} − H^l‖²` anchored at `H^0 = X`.
//!
//! For fixed endpoints the penalty is minimized by equally spaced collinear
//! layers, where it equals `(1/L)‖H^L − X‖²`. The multilayer problem with
//! coefficient `λ` therefore coincides with the single-layer MUFM problem with
//! coefficient `λ/L`.

use nalgebra::DMatrix;

use super::{loss_and_logit_grad, ModelKind, SolveProblem};
use crate::error::{PfcError, Result};
use crate::rng;

/// Equally spaced layers `H^l = X + (l/L)(H_last − X)` for `l = 0..=L`, and the
/// transport penalty they attain.
pub fn collapse_multilayer(
    x: &DMatrix<f64>,
    h_last: &DMatrix<f64>,
    num_blocks: usize,
) -> Result<(Vec<DMatrix<f64>>, f64)> {
    if num_blocks == 0 {
        return Err(PfcError::Validation("need at least one block".into()));
    }
    if x.shape() != h_last.shape() {
        return Err(PfcError::Dimension(format!(
            "X is {:?} but H_last is {:?}",
            x.shape(),
            h_last.shape()
        )));
    }
    let delta = h_last - x;
    let l = num_blocks as f64;
    let layers = (0..=num_blocks)
        .map(|i| {
            if i == num_blocks {
                h_last.clone()
            } else {
                x + &delta * (i as f64 / l)
            }
        })
        .collect();
    Ok((layers, delta.norm_squared() / l))
}

/// `Σ_l ‖H^{l+1} − H^l‖²` over consecutive layers.
pub fn transport_penalty(layers: &[DMatrix<f64>]) -> f64 {
    layers.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum()
}

/// Minimizes the transport penalty over the free layers `H^1..H^{L-1}` by
/// gradient descent with both ends fixed, starting from Gaussian layers
/// drawn under `seed`. Returns all `L + 1` layers.
pub fn descend_intermediates(
    x: &DMatrix<f64>,
    h_last: &DMatrix<f64>,
    num_blocks: usize,
    seed: u64,
    lr: f64,
    steps: usize,
) -> Result<Vec<DMatrix<f64>>> {
    collapse_multilayer(x, h_last, num_blocks)?;
    let mut r = rng::stream(seed, rng::STREAM_PATH);
    let mut layers: Vec<DMatrix<f64>> = (0..=num_blocks)
        .map(|i| match i {
            0 => x.clone(),
            i if i == num_blocks => h_last.clone(),
            _ => rng::gaussian_matrix(&mut r, x.nrows(), x.ncols(), 1.0),
        })
        .collect();
    for _ in 0..steps {
        let grads: Vec<DMatrix<f64>> = (1..num_blocks)
            .map(|i| (&layers[i] * 2.0 - &layers[i - 1] - &layers[i + 1]) * 2.0)
            .collect();
        for (i, g) in grads.into_iter().enumerate() {
            layers[i + 1] -= g * lr;
        }
    }
    Ok(layers)
}

/// Objective of the multilayer model for a MUFM problem `p`. `hidden` holds
/// `H^1..H^L`; `H^0` is the problem's data matrix.
pub fn multilayer_objective(p: &SolveProblem, w: &DMatrix<f64>, hidden: &[DMatrix<f64>]) -> Result<f64> {
    let x = match (p.kind(), p.data()) {
        (ModelKind::Mufm, Some(x)) => x,
        _ => return Err(PfcError::Validation("the multilayer objective needs a MUFM problem".into())),
    };
    let last = hidden
        .last()
        .ok_or_else(|| PfcError::Validation("need at least one hidden layer".into()))?;
    p.check_shapes(w, last)?;
    if let Some(bad) = hidden.iter().find(|h| h.shape() != x.shape()) {
        return Err(PfcError::Dimension(format!(
            "hidden layer is {:?}, expected {:?}",
            bad.shape(),
            x.shape()
        )));
    }
    let (loss, _) = loss_and_logit_grad(p.loss(), &(w * last), p.labels());
    let n = p.num_samples() as f64;
    let k = p.num_classes() as f64;
    let mut penalty = (&hidden[0] - x).norm_squared();
    penalty += transport_penalty(hidden);
    Ok(loss + p.lambda_w() / (2.0 * k) * w.norm_squared() + p.lambda() / (2.0 * n) * penalty)
}
