//! Unconstrained feature models.
//!
//! Both models treat the last-layer features `H` (`d × K·n`) and the linear
//! classifier `W` (`K × d`) as free variables. With `N = K·n`:
//!
//! * UFM: `loss(W, H) + (λ_W/2)‖W‖² + (λ_H/2)‖H‖²`
//! * MUFM: `loss(W, H) + (λ_W/2K)‖W‖² + (λ/2N)‖H − X‖²`, which ties the
//!   features to the input data `X` instead of shrinking them toward zero.
//!
//! The loss is either `(1/2N)‖WH − Y‖²` or the mean cross-entropy of the
//! columns of `WH`, with `Y = I_K ⊗ 1_nᵀ`.

mod multilayer;
mod solve;
mod sweep;

pub use multilayer::{collapse_multilayer, descend_intermediates, multilayer_objective, transport_penalty};
pub use solve::{initial_point, solve, solve_observed, SolveOptions, SolveResult};
pub use sweep::{sweep_lambda, SweepRow};

use nalgebra::DMatrix;

use crate::error::{PfcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Ufm,
    Mufm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Mse,
    CrossEntropy,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Mse => "mse",
            Loss::CrossEntropy => "ce",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mse" => Some(Loss::Mse),
            "ce" => Some(Loss::CrossEntropy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveProblem {
    kind: ModelKind,
    loss: Loss,
    num_classes: usize,
    dim: usize,
    per_class: usize,
    data: Option<DMatrix<f64>>,
    lambda_w: f64,
    lambda: f64,
    labels: DMatrix<f64>,
    pub seed: u64,
}

/// `I_K ⊗ 1_nᵀ`: column `j` is the one-hot vector of class `j / n`.
pub fn label_matrix(num_classes: usize, per_class: usize) -> DMatrix<f64> {
    DMatrix::from_fn(num_classes, num_classes * per_class, |r, c| {
        if c / per_class == r {
            1.0
        } else {
            0.0
        }
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PfcError::Validation(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SolveProblem {
    pub fn ufm(
        loss: Loss,
        num_classes: usize,
        dim: usize,
        per_class: usize,
        lambda_w: f64,
        lambda_h: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_classes < 2 || dim == 0 || per_class == 0 {
            return Err(PfcError::Validation(format!(
                "need K >= 2, d >= 1, n >= 1 (got K = {num_classes}, d = {dim}, n = {per_class})"
            )));
        }
        check_positive("lambda_W", lambda_w)?;
        check_positive("lambda_H", lambda_h)?;
        Ok(Self {
            kind: ModelKind::Ufm,
            loss,
            num_classes,
            dim,
            per_class,
            data: None,
            lambda_w,
            lambda: lambda_h,
            labels: label_matrix(num_classes, per_class),
            seed,
        })
    }

    /// `data` is the `d × K·n` input matrix in class-contiguous order.
    pub fn mufm(
        loss: Loss,
        data: DMatrix<f64>,
        num_classes: usize,
        per_class: usize,
        lambda_w: f64,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_classes < 2 || per_class == 0 || data.nrows() == 0 {
            return Err(PfcError::Validation("need K >= 2, n >= 1 and non-empty data".into()));
        }
        if data.ncols() != num_classes * per_class {
            return Err(PfcError::Dimension(format!(
                "data has {} columns, expected K·n = {}",
                data.ncols(),
                num_classes * per_class
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PfcError::Validation("data contains non-finite values".into()));
        }
        check_positive("lambda_W", lambda_w)?;
        check_positive("lambda", lambda)?;
        Ok(Self {
            kind: ModelKind::Mufm,
            loss,
            num_classes,
            dim: data.nrows(),
            per_class,
            data: Some(data),
            lambda_w,
            lambda,
            labels: label_matrix(num_classes, per_class),
            seed,
        })
    }

    /// Same problem with the feature regularizer coefficient replaced.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(Self { lambda, ..self.clone() })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    pub fn num_samples(&self) -> usize {
        self.num_classes * self.per_class
    }

    pub fn data(&self) -> Option<&DMatrix<f64>> {
        self.data.as_ref()
    }

    pub fn lambda_w(&self) -> f64 {
        self.lambda_w
    }

    /// `λ` for MUFM, `λ_H` for UFM.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn labels(&self) -> &DMatrix<f64> {
        &self.labels
    }

    /// Multipliers `(c_W, c_H)` such that the penalties are
    /// `(c_W/2)‖W‖²` and `(c_H/2)‖H − X‖²` (`X = 0` for UFM).
    fn penalty_weights(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::Ufm => (self.lambda_w, self.lambda),
            ModelKind::Mufm => (
                self.lambda_w / self.num_classes as f64,
                self.lambda / self.num_samples() as f64,
            ),
        }
    }

    fn check_shapes(&self, w: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<()> {
        let (k, d, n) = (self.num_classes, self.dim, self.num_samples());
        if w.shape() != (k, d) || h.shape() != (d, n) {
            return Err(PfcError::Dimension(format!(
                "expected W {k}x{d} and H {d}x{n}, got W {:?} and H {:?}",
                w.shape(),
                h.shape()
            )));
        }
        Ok(())
    }

    /// `H − X` for MUFM, `H` for UFM.
    fn feature_offset(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.data {
            Some(x) => h - x,
            None => h.clone(),
        }
    }
}

/// The three additive parts of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub loss: f64,
    pub w_penalty: f64,
    pub h_penalty: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.loss + self.w_penalty + self.h_penalty
    }
}

/// Loss value and its gradient with respect to the logits `Z = WH`.
pub(crate) fn loss_and_logit_grad(loss: Loss, z: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let n = z.ncols() as f64;
    match loss {
        Loss::Mse => {
            let r = z - y;
            (r.norm_squared() / (2.0 * n), r / n)
        }
        Loss::CrossEntropy => {
            let mut grad = z.clone();
            let mut total = 0.0;
            for ((mut g, zc), t) in grad.column_iter_mut().zip(z.column_iter()).zip(y.column_iter()) {
                let max = zc.max();
                g.apply(|v| *v = (*v - max).exp());
                let sum = g.sum();
                let lse = max + sum.ln();
                total += zc.iter().zip(t.iter()).map(|(&zv, &tv)| tv * (lse - zv)).sum::<f64>();
                g /= sum;
                g -= &t;
                g /= n;
            }
            (total / n, grad)
        }
    }
}

pub fn objective_terms(p: &SolveProblem, w: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<ObjectiveTerms> {
    p.check_shapes(w, h)?;
    let (cw, ch) = p.penalty_weights();
    let (loss, _) = loss_and_logit_grad(p.loss, &(w * h), &p.labels);
    Ok(ObjectiveTerms {
        loss,
        w_penalty: 0.5 * cw * w.norm_squared(),
        h_penalty: 0.5 * ch * p.feature_offset(h).norm_squared(),
    })
}

pub fn objective(p: &SolveProblem, w: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    objective_terms(p, w, h).map(|t| t.total())
}

/// Analytic `(∂f/∂W, ∂f/∂H)`.
pub fn gradients(p: &SolveProblem, w: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    p.check_shapes(w, h)?;
    Ok(value_and_gradients(p, w, h).1)
}

pub(crate) fn value_and_gradients(
    p: &SolveProblem,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> (f64, (DMatrix<f64>, DMatrix<f64>)) {
    let (cw, ch) = p.penalty_weights();
    let (loss, dz) = loss_and_logit_grad(p.loss, &(w * h), &p.labels);
    let offset = p.feature_offset(h);
    let value = loss + 0.5 * cw * w.norm_squared() + 0.5 * ch * offset.norm_squared();
    let dw = &dz * h.transpose() + w * cw;
    let dh = w.tr_mul(&dz) + offset * ch;
    (value, (dw, dh))
}

/// `W* = Y Hᵀ (H Hᵀ + n·λ_W·I_d)⁻¹`, the minimizer over `W` of the MUFM
/// objective with squared loss for fixed `H`.
pub fn closed_form_w(h: &DMatrix<f64>, y: &DMatrix<f64>, lambda_w: f64, per_class: usize) -> Result<DMatrix<f64>> {
    check_positive("lambda_W", lambda_w)?;
    if h.ncols() != y.ncols() {
        return Err(PfcError::Dimension(format!(
            "H has {} columns but Y has {}",
            h.ncols(),
            y.ncols()
        )));
    }
    let d = h.nrows();
    let a = h * h.transpose() + DMatrix::identity(d, d) * (per_class as f64 * lambda_w);
    let rhs = h * y.transpose();
    let chol = a
        .cholesky()
        .ok_or_else(|| PfcError::Degenerate("regularized Gram matrix is not positive definite".into()))?;
    Ok(chol.solve(&rhs).transpose())
}

/// Exact minimizer over `W` of `p`'s objective for fixed `H`, available for
/// the squared loss only.
pub fn optimal_classifier(p: &SolveProblem, h: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    if p.loss != Loss::Mse {
        return Ok(None);
    }
    // UFM's penalty (λ_W/2)‖W‖² equals MUFM's with λ_W scaled by K.
    let lw = match p.kind {
        ModelKind::Ufm => p.lambda_w * p.num_classes as f64,
        ModelKind::Mufm => p.lambda_w,
    };
    closed_form_w(h, &p.labels, lw, p.per_class).map(Some)
}
