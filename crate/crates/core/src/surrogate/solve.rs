use nalgebra::DMatrix;

use super::{value_and_gradients, SolveProblem};
use crate::error::{PfcError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub lr: f64,
    pub epochs: usize,
    /// Standard deviation of the Gaussian initialization of `W` and `H`.
    pub init_scale: f64,
    /// Record the objective every this many epochs (and always at the end).
    pub trace_stride: usize,
    /// Stop early once `sqrt(‖∂W‖² + ‖∂H‖²)` falls below this.
    pub grad_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 50_000,
            init_scale: 1.0,
            trace_stride: 100,
            grad_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `(epoch, objective)` with epoch 0 the initialization.
    pub objective_trace: Vec<(usize, f64)>,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    pub epochs_run: usize,
}

/// Seeded Gaussian `(W, H)`, `W` drawn first.
pub fn initial_point(p: &SolveProblem, init_scale: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = rng::stream(p.seed, rng::STREAM_INIT);
    let w = rng::gaussian_matrix(&mut rng, p.num_classes(), p.dim(), init_scale);
    let h = rng::gaussian_matrix(&mut rng, p.dim(), p.num_samples(), init_scale);
    (w, h)
}

/// Full-batch gradient descent on `(W, H)` jointly.
pub fn solve(p: &SolveProblem, opts: &SolveOptions) -> Result<SolveResult> {
    solve_observed(p, opts, |_, _, _, _| Ok(()))
}

/// [`solve`] that also hands `(epoch, W, H, objective)` to `observe` at
/// every recorded trace point.
pub fn solve_observed<F>(p: &SolveProblem, opts: &SolveOptions, mut observe: F) -> Result<SolveResult>
where
    F: FnMut(usize, &DMatrix<f64>, &DMatrix<f64>, f64) -> Result<()>,
{
    if !(opts.lr >= 0.0 && opts.lr.is_finite()) {
        return Err(PfcError::Validation(format!("learning rate must be >= 0, got {}", opts.lr)));
    }
    if opts.epochs == 0 || opts.trace_stride == 0 {
        return Err(PfcError::Validation("epochs and trace stride must be at least 1".into()));
    }
    if !(opts.init_scale >= 0.0 && opts.init_scale.is_finite()) {
        return Err(PfcError::Validation(format!("init scale must be >= 0, got {}", opts.init_scale)));
    }
    let (mut w, mut h) = initial_point(p, opts.init_scale);
    let mut trace = Vec::with_capacity(opts.epochs / opts.trace_stride + 2);
    let mut epoch = 0;
    loop {
        let (value, (dw, dh)) = value_and_gradients(p, &w, &h);
        if !value.is_finite() {
            return Err(PfcError::Divergence { epoch, value });
        }
        let grad_norm = (dw.norm_squared() + dh.norm_squared()).sqrt();
        let converged = opts.grad_tol.is_some_and(|tol| grad_norm < tol);
        if epoch == opts.epochs || converged {
            trace.push((epoch, value));
            observe(epoch, &w, &h, value)?;
            return Ok(SolveResult {
                w,
                h,
                objective_trace: trace,
                final_objective: value,
                final_grad_norm: grad_norm,
                epochs_run: epoch,
            });
        }
        if epoch % opts.trace_stride == 0 {
            trace.push((epoch, value));
            observe(epoch, &w, &h, value)?;
        }
        w.zip_apply(&dw, |a, g| *a -= opts.lr * g);
        h.zip_apply(&dh, |a, g| *a -= opts.lr * g);
        epoch += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resnet::data::GaussianMixture;
    use crate::surrogate::{gradients, objective, optimal_classifier, Loss};

    fn small(seed: u64, loss: Loss) -> SolveProblem {
        let x = GaussianMixture::new(3, 6, 5, 1.0).generate(seed).unwrap().features.into_features();
        SolveProblem::mufm(loss, x, 3, 5, 0.05, 0.1, seed).unwrap()
    }

    #[test]
    fn zero_lr_returns_initialization() {
        let p = small(3, Loss::Mse);
        let opts = SolveOptions { lr: 0.0, epochs: 1, ..Default::default() };
        let r = solve(&p, &opts).unwrap();
        let (w0, h0) = initial_point(&p, 1.0);
        assert_eq!(r.w, w0);
        assert_eq!(r.h, h0);
        assert_eq!(r.epochs_run, 1);
        assert_eq!(r.objective_trace.len(), 2);
        assert_eq!(r.objective_trace[0].1, r.objective_trace[1].1);
    }

    #[test]
    fn objective_decreases_and_is_deterministic() {
        for loss in [Loss::Mse, Loss::CrossEntropy] {
            let p = small(1, loss);
            let opts = SolveOptions { epochs: 2000, trace_stride: 1, ..Default::default() };
            let a = solve(&p, &opts).unwrap();
            for pair in a.objective_trace.windows(2) {
                assert!(pair[1].1 <= pair[0].1 + 1e-9 * pair[0].1.abs(), "{loss:?}");
            }
            let b = solve(&p, &opts).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.final_objective, objective(&p, &a.w, &a.h).unwrap());
        }
    }

    #[test]
    fn trace_records_stride_and_end() {
        let p = small(0, Loss::Mse);
        let r = solve(&p, &SolveOptions { epochs: 25, trace_stride: 10, ..Default::default() }).unwrap();
        let epochs: Vec<usize> = r.objective_trace.iter().map(|t| t.0).collect();
        assert_eq!(epochs, vec![0, 10, 20, 25]);
    }

    #[test]
    fn observer_sees_trace_points() {
        let p = small(0, Loss::Mse);
        let mut seen = Vec::new();
        let r = solve_observed(&p, &SolveOptions { epochs: 25, trace_stride: 10, ..Default::default() }, |e, _, h, v| {
            seen.push((e, v, h.clone()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.iter().map(|s| (s.0, s.1)).collect::<Vec<_>>(), r.objective_trace);
        assert_eq!(seen.last().unwrap().2, r.h);
    }

    #[test]
    fn reaches_stationary_point() {
        let p = small(2, Loss::Mse);
        let opts = SolveOptions {
            lr: 0.5,
            epochs: 400_000,
            init_scale: 0.1,
            trace_stride: 10_000,
            grad_tol: Some(1e-11),
        };
        let r = solve(&p, &opts).unwrap();
        assert!(r.final_grad_norm < 1e-11);
        assert!(r.epochs_run < opts.epochs);
        let (dw, dh) = gradients(&p, &r.w, &r.h).unwrap();
        assert!(dw.norm() < 1e-8 && dh.norm() < 1e-8);
        // At a stationary point W must be the ridge solution for the final H.
        let w_star = optimal_classifier(&p, &r.h).unwrap().unwrap();
        assert!((&w_star - &r.w).amax() < 1e-8);
    }

    #[test]
    fn divergence_reports_epoch() {
        let p = small(0, Loss::Mse);
        let err = solve(&p, &SolveOptions { lr: 1e6, epochs: 1000, ..Default::default() }).unwrap_err();
        assert!(matches!(err, PfcError::Divergence { epoch, .. } if epoch > 0));
        assert!(err.is_numeric());
    }

    #[test]
    fn rejects_bad_options() {
        let p = small(0, Loss::Mse);
        for opts in [
            SolveOptions { lr: -1.0, ..Default::default() },
            SolveOptions { epochs: 0, ..Default::default() },
            SolveOptions { trace_stride: 0, ..Default::default() },
            SolveOptions { init_scale: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(solve(&p, &opts), Err(PfcError::Validation(_))));
        }
    }
}
