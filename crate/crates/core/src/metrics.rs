//! Layer-wise collapse metrics.
//!
//! * `pfc1`: within-class over between-class variance, `Tr(Σ_W) / Tr(Σ_B)`.
//! * `pfc2`: Frobenius distance between the normalized Gram matrix of the
//!   centered class means and the simplex-ETF target Gram.
//! * `pfc3`: nearest-class-center accuracy.
//!
//! Zero denominators are reported as [`PfcError::Degenerate`] instead of
//! returning infinities.

use nalgebra::DMatrix;

use crate::error::{PfcError, Result};
use crate::etf::EtfFrame;
use crate::features::{class_means, class_stats, centered_class_mean_matrix, FeatureSet, LayerStack};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfcReport {
    pub pfc1: f64,
    pub pfc2: f64,
    pub pfc3: f64,
}

pub fn pfc1(fs: &FeatureSet) -> Result<f64> {
    let s = class_stats(fs);
    if s.tr_between <= 0.0 {
        return Err(PfcError::Degenerate(
            "between-class variance is zero (all class means coincide)".into(),
        ));
    }
    Ok(s.tr_within / s.tr_between)
}

pub fn pfc2(fs: &FeatureSet, target: &EtfFrame) -> Result<f64> {
    if target.num_classes != fs.num_classes() {
        return Err(PfcError::Dimension(format!(
            "ETF target has K = {}, features have K = {}",
            target.num_classes,
            fs.num_classes()
        )));
    }
    let centered = centered_class_mean_matrix(fs);
    let gram = centered.transpose() * &centered;
    let norm = gram.norm();
    if norm <= 0.0 {
        return Err(PfcError::Degenerate("centered class-mean Gram matrix is zero".into()));
    }
    Ok((gram / norm - &target.gram_target).norm())
}

/// Fraction of samples whose nearest class mean is their own. Equidistant
/// means resolve to the smallest class index.
pub fn pfc3(fs: &FeatureSet) -> f64 {
    let means = class_means(fs);
    let x = fs.features();
    let mut correct = 0usize;
    for j in 0..fs.num_samples() {
        let h = x.column(j);
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (c, mean) in means.column_iter().enumerate() {
            let dist = h.iter().zip(mean.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            if dist < best_dist {
                best_dist = dist;
                best = c;
            }
        }
        if best == fs.label(j) {
            correct += 1;
        }
    }
    correct as f64 / fs.num_samples() as f64
}

pub fn pfc_report(fs: &FeatureSet, target: &EtfFrame) -> Result<PfcReport> {
    Ok(PfcReport {
        pfc1: pfc1(fs)?,
        pfc2: pfc2(fs, target)?,
        pfc3: pfc3(fs),
    })
}

/// `‖H/‖H‖_F − X/‖X‖_F‖_F`.
pub fn alignment(h: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    if h.shape() != x.shape() {
        return Err(PfcError::Dimension(format!(
            "alignment operands differ in shape: {:?} vs {:?}",
            h.shape(),
            x.shape()
        )));
    }
    let (nh, nx) = (h.norm(), x.norm());
    if nh <= 0.0 || nx <= 0.0 {
        return Err(PfcError::Degenerate("alignment of a zero matrix".into()));
    }
    Ok((h / nh - x / nx).norm())
}

/// Smallest layer index whose NCC error rate `1 − pfc3` is at most `epsilon`.
/// Layer 0 is the first stored layer.
pub fn effective_depth(stack: &LayerStack, epsilon: f64) -> Option<usize> {
    stack.layers().iter().position(|fs| 1.0 - pfc3(fs) <= epsilon)
}
