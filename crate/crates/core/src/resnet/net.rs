//! Parameters, forward pass and backpropagation.
//!
//! Samples are columns. With `σ = relu`:
//!
//! ```text
//! x⁰      = σ(W_in x + b_in)
//! x^{l+1} = x^l + σ(W_l x^l + b_l)                 single-layer blocks
//! x^{l+1} = x^l + V_l σ(W_l x^l + b_l) + c_l       two-layer blocks
//! logits  = W_out x^L + b_out
//! ```

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{PfcError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockForm {
    SingleLayerRelu,
    TwoLayerRelu,
}

impl BlockForm {
    pub fn name(self) -> &'static str {
        match self {
            BlockForm::SingleLayerRelu => "single-layer-relu",
            BlockForm::TwoLayerRelu => "two-layer-relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "single-layer-relu" => Some(BlockForm::SingleLayerRelu),
            "two-layer-relu" => Some(BlockForm::TwoLayerRelu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Output projection and bias, present for two-layer blocks.
    pub v: Option<DMatrix<f64>>,
    pub c: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub blocks: Vec<Block>,
    pub w_out: DMatrix<f64>,
    pub b_out: DVector<f64>,
}

/// Read-only view of one parameter tensor.
pub struct Tensor<'a> {
    pub is_bias: bool,
    pub values: &'a [f64],
}

pub struct TensorMut<'a> {
    pub is_bias: bool,
    pub values: &'a mut [f64],
}

fn kaiming<R: Rng>(rng: &mut R, rows: usize, cols: usize, gain: f64) -> DMatrix<f64> {
    rng::gaussian_matrix(rng, rows, cols, gain * (2.0 / cols as f64).sqrt())
}

impl Params {
    /// All-zero parameters of the given shape.
    pub fn zeros(input_dim: usize, width: usize, num_classes: usize, num_blocks: usize, form: BlockForm) -> Self {
        let two = form == BlockForm::TwoLayerRelu;
        Self {
            w_in: DMatrix::zeros(width, input_dim),
            b_in: DVector::zeros(width),
            blocks: (0..num_blocks)
                .map(|_| Block {
                    w: DMatrix::zeros(width, width),
                    b: DVector::zeros(width),
                    v: two.then(|| DMatrix::zeros(width, width)),
                    c: two.then(|| DVector::zeros(width)),
                })
                .collect(),
            w_out: DMatrix::zeros(num_classes, width),
            b_out: DVector::zeros(num_classes),
        }
    }

    /// Kaiming-normal weights (std `sqrt(2/fan_in)`), zero biases. Residual
    /// branch weights are further multiplied by `branch_scale`. Draw order:
    /// `W_in`, then `W_l` and `V_l` per block, then `W_out`.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        input_dim: usize,
        width: usize,
        num_classes: usize,
        num_blocks: usize,
        form: BlockForm,
        branch_scale: f64,
        seed: u64,
    ) -> Self {
        let mut rng = rng::stream(seed, rng::STREAM_INIT);
        let mut p = Self::zeros(input_dim, width, num_classes, num_blocks, form);
        p.w_in = kaiming(&mut rng, width, input_dim, 1.0);
        for block in &mut p.blocks {
            block.w = kaiming(&mut rng, width, width, branch_scale);
            if let Some(v) = &mut block.v {
                *v = kaiming(&mut rng, width, width, branch_scale);
            }
        }
        p.w_out = kaiming(&mut rng, num_classes, width, 1.0);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn width(&self) -> usize {
        self.w_in.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = vec![
            Tensor { is_bias: false, values: self.w_in.as_slice() },
            Tensor { is_bias: true, values: self.b_in.as_slice() },
        ];
        for b in &self.blocks {
            out.push(Tensor { is_bias: false, values: b.w.as_slice() });
            out.push(Tensor { is_bias: true, values: b.b.as_slice() });
            if let Some(v) = &b.v {
                out.push(Tensor { is_bias: false, values: v.as_slice() });
            }
            if let Some(c) = &b.c {
                out.push(Tensor { is_bias: true, values: c.as_slice() });
            }
        }
        out.push(Tensor { is_bias: false, values: self.w_out.as_slice() });
        out.push(Tensor { is_bias: true, values: self.b_out.as_slice() });
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = vec![
            TensorMut { is_bias: false, values: self.w_in.as_mut_slice() },
            TensorMut { is_bias: true, values: self.b_in.as_mut_slice() },
        ];
        for b in &mut self.blocks {
            out.push(TensorMut { is_bias: false, values: b.w.as_mut_slice() });
            out.push(TensorMut { is_bias: true, values: b.b.as_mut_slice() });
            if let Some(v) = &mut b.v {
                out.push(TensorMut { is_bias: false, values: v.as_mut_slice() });
            }
            if let Some(c) = &mut b.c {
                out.push(TensorMut { is_bias: true, values: c.as_mut_slice() });
            }
        }
        out.push(TensorMut { is_bias: false, values: self.w_out.as_mut_slice() });
        out.push(TensorMut { is_bias: true, values: self.b_out.as_mut_slice() });
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.values.len()).sum()
    }

    /// Zero parameters with the same shapes.
    pub fn zeros_like(&self) -> Self {
        let form = match self.blocks.first() {
            Some(Block { v: Some(_), .. }) => BlockForm::TwoLayerRelu,
            _ => BlockForm::SingleLayerRelu,
        };
        Self::zeros(self.input_dim(), self.width(), self.num_classes(), self.num_blocks(), form)
    }
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardState {
    pub input: DMatrix<f64>,
    pub embed_pre: DMatrix<f64>,
    /// `x⁰..x^L`, each `width × batch`.
    pub features: Vec<DMatrix<f64>>,
    /// Pre-activation `W_l x^l + b_l` and activation of each block's branch.
    pub branch_pre: Vec<DMatrix<f64>>,
    pub branch_act: Vec<DMatrix<f64>>,
    pub logits: DMatrix<f64>,
}

fn affine(w: &DMatrix<f64>, b: &DVector<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = w * x;
    for mut col in z.column_iter_mut() {
        col += b;
    }
    z
}

fn relu(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| v.max(0.0))
}

/// One residual block applied to a batch.
pub fn block_forward(block: &Block, x: &DMatrix<f64>) -> DMatrix<f64> {
    let a = relu(&affine(&block.w, &block.b, x));
    match (&block.v, &block.c) {
        (Some(v), Some(c)) => x + affine(v, c, &a),
        _ => x + a,
    }
}

/// Zeroes `g` where the pre-activation is not positive.
fn relu_backward(g: &mut DMatrix<f64>, pre: &DMatrix<f64>) {
    g.zip_apply(pre, |gv, zv| {
        if zv <= 0.0 {
            *gv = 0.0
        }
    });
}

pub fn forward_state(params: &Params, batch: &DMatrix<f64>) -> Result<ForwardState> {
    if batch.nrows() != params.input_dim() {
        return Err(PfcError::Dimension(format!(
            "batch rows {} != input dimension {}",
            batch.nrows(),
            params.input_dim()
        )));
    }
    let embed_pre = affine(&params.w_in, &params.b_in, batch);
    let mut x = relu(&embed_pre);
    let mut features = Vec::with_capacity(params.num_blocks() + 1);
    let mut branch_pre = Vec::with_capacity(params.num_blocks());
    let mut branch_act = Vec::with_capacity(params.num_blocks());
    for block in &params.blocks {
        let z = affine(&block.w, &block.b, &x);
        let a = relu(&z);
        let next = match (&block.v, &block.c) {
            (Some(v), Some(c)) => &x + affine(v, c, &a),
            _ => &x + &a,
        };
        features.push(std::mem::replace(&mut x, next));
        branch_pre.push(z);
        branch_act.push(a);
    }
    let logits = affine(&params.w_out, &params.b_out, &x);
    features.push(x);
    Ok(ForwardState {
        input: batch.clone(),
        embed_pre,
        features,
        branch_pre,
        branch_act,
        logits,
    })
}

/// Logits and the features `x⁰..x^L` for a batch of column samples.
pub fn resnet_forward(params: &Params, batch: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let s = forward_state(params, batch)?;
    Ok((s.logits, s.features))
}

/// Mean cross-entropy over the batch and its gradient with respect to the
/// logits.
pub fn cross_entropy(logits: &DMatrix<f64>, labels: &[usize]) -> (f64, DMatrix<f64>) {
    let b = logits.ncols() as f64;
    let mut grad = logits.clone();
    let mut total = 0.0;
    for (j, mut col) in grad.column_iter_mut().enumerate() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let sum = col.sum();
        total += max + sum.ln() - logits[(labels[j], j)];
        col /= sum;
        col[labels[j]] -= 1.0;
        col /= b;
    }
    (total / b, grad)
}

/// Gradients of the mean cross-entropy from a completed forward pass.
pub fn backward_state(params: &Params, state: &ForwardState, labels: &[usize]) -> Result<(f64, Params)> {
    let batch = state.logits.ncols();
    if labels.len() != batch {
        return Err(PfcError::Dimension(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= params.num_classes()) {
        return Err(PfcError::Validation(format!("label {bad} out of range")));
    }
    let mut grads = params.zeros_like();
    let (loss, dlogits) = cross_entropy(&state.logits, labels);
    let last = state.features.last().expect("forward state holds x⁰");
    grads.w_out = &dlogits * last.transpose();
    grads.b_out = dlogits.column_sum();
    let mut dx = params.w_out.tr_mul(&dlogits);

    for (l, block) in params.blocks.iter().enumerate().rev() {
        let g = &mut grads.blocks[l];
        let x = &state.features[l];
        let mut dz = match &block.v {
            Some(v) => {
                g.v = Some(&dx * state.branch_act[l].transpose());
                g.c = Some(dx.column_sum());
                v.tr_mul(&dx)
            }
            None => dx.clone(),
        };
        relu_backward(&mut dz, &state.branch_pre[l]);
        g.w = &dz * x.transpose();
        g.b = dz.column_sum();
        dx += block.w.tr_mul(&dz);
    }

    relu_backward(&mut dx, &state.embed_pre);
    grads.w_in = &dx * state.input.transpose();
    grads.b_in = dx.column_sum();
    Ok((loss, grads))
}

/// Batch-mean cross-entropy and its gradient with respect to every parameter.
pub fn resnet_backward(params: &Params, batch: &DMatrix<f64>, labels: &[usize]) -> Result<(f64, Params)> {
    let state = forward_state(params, batch)?;
    backward_state(params, &state, labels)
}

/// Predicted class per column, ties to the smallest index.
pub fn argmax_columns(logits: &DMatrix<f64>) -> Vec<usize> {
    logits
        .column_iter()
        .map(|c| {
            let mut best = 0;
            for i in 1..c.len() {
                if c[i] > c[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
