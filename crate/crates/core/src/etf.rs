//! Simplex equiangular tight frames.

use nalgebra::DMatrix;

use crate::error::{PfcError, Result};
use crate::rng;

/// Seed used when no orthonormal basis is supplied to [`build_etf`].
pub const DEFAULT_ETF_SEED: u64 = 0x5eed_e7f0;

const BASIS_TOL: f64 = 1e-10;

/// `K` unit vectors in `R^d` with pairwise inner products `-1/(K-1)`, plus
/// the unit-Frobenius target Gram matrix used by the ETF distance metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EtfFrame {
    pub frame: DMatrix<f64>,
    pub gram_target: DMatrix<f64>,
    pub num_classes: usize,
    pub dim: usize,
}

/// `(I_K - 11ᵀ/K) / sqrt(K-1)`.
pub fn gram_target(num_classes: usize) -> DMatrix<f64> {
    let k = num_classes as f64;
    centering(num_classes) / (k - 1.0).sqrt()
}

fn centering(k: usize) -> DMatrix<f64> {
    DMatrix::identity(k, k) - DMatrix::from_element(k, k, 1.0 / k as f64)
}

/// `M = sqrt(K/(K-1)) · U · (I_K - 11ᵀ/K)` for a partial orthogonal `U`.
///
/// Without a basis, `U` is the orthonormalized Q factor of a Gaussian matrix
/// drawn under [`DEFAULT_ETF_SEED`].
pub fn build_etf(num_classes: usize, dim: usize, basis: Option<&DMatrix<f64>>) -> Result<EtfFrame> {
    check_dims(num_classes, dim)?;
    match basis {
        Some(u) => {
            check_basis(u, num_classes, dim)?;
            Ok(assemble(u, num_classes, dim))
        }
        None => build_etf_seeded(num_classes, dim, DEFAULT_ETF_SEED),
    }
}

pub fn build_etf_seeded(num_classes: usize, dim: usize, seed: u64) -> Result<EtfFrame> {
    check_dims(num_classes, dim)?;
    let g = rng::gaussian_matrix(&mut rng::stream(seed, rng::STREAM_ETF), dim, num_classes, 1.0);
    let q = g.qr().q();
    Ok(assemble(&q, num_classes, dim))
}

impl EtfFrame {
    /// Frame with `U = I_K`, for callers that only need the target Gram.
    pub fn canonical(num_classes: usize) -> Result<Self> {
        build_etf(num_classes, num_classes, Some(&DMatrix::identity(num_classes, num_classes)))
    }
}

fn check_dims(k: usize, d: usize) -> Result<()> {
    if k < 2 {
        return Err(PfcError::Dimension(format!("need K >= 2, got {k}")));
    }
    if d < k {
        return Err(PfcError::Dimension(format!("need d >= K, got d = {d} < K = {k}")));
    }
    Ok(())
}

fn check_basis(u: &DMatrix<f64>, k: usize, d: usize) -> Result<()> {
    if u.shape() != (d, k) {
        return Err(PfcError::Dimension(format!(
            "basis must be {d}x{k}, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let err = (u.transpose() * u - DMatrix::identity(k, k)).amax();
    if !(err <= BASIS_TOL) {
        return Err(PfcError::Validation(format!(
            "basis columns are not orthonormal (max |UᵀU - I| = {err:e})"
        )));
    }
    Ok(())
}

fn assemble(u: &DMatrix<f64>, k: usize, d: usize) -> EtfFrame {
    let kf = k as f64;
    let frame = (kf / (kf - 1.0)).sqrt() * u * centering(k);
    EtfFrame {
        frame,
        gram_target: gram_target(k),
        num_classes: k,
        dim: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2_gram_target() {
        let e = gram_target(2);
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((e - expected).amax() < 1e-15);
    }

    #[test]
    fn k3_identity_basis() {
        let f = build_etf(3, 3, Some(&DMatrix::identity(3, 3))).unwrap();
        let c0 = f.frame.column(0);
        let expected = [0.816_496_580_927_726, -0.408_248_290_463_863, -0.408_248_290_463_863];
        for (a, b) in c0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let g = f.frame.transpose() * &f.frame;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!((g[(i, j)] + 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gram_is_scaled_target() {
        // MᵀM = K/(K-1)·(I - 11ᵀ/K) = (K/sqrt(K-1))·E.
        for k in 2..=8 {
            let f = build_etf(k, k + 2, None).unwrap();
            let g = f.frame.transpose() * &f.frame;
            let expected = &f.gram_target * (k as f64 / ((k - 1) as f64).sqrt());
            assert!((g - expected).amax() < 1e-12, "K = {k}");
        }
    }

    #[test]
    fn target_properties() {
        for k in 2..=10 {
            let e = gram_target(k);
            assert!((e.norm() - 1.0).abs() < 1e-12);
            assert!((&e - e.transpose()).amax() == 0.0);
            assert!(e.row_sum().amax() < 1e-12);
        }
    }

    #[test]
    fn rank_is_k_minus_one() {
        for k in 2..=10 {
            let f = build_etf(k, k + 3, None).unwrap();
            let mut sv: Vec<f64> = f.frame.clone().svd(false, false).singular_values.iter().copied().collect();
            sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert!(sv[k - 2] > 1e-8);
            assert!(sv[k - 1] < 1e-10);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(build_etf(4, 3, None), Err(PfcError::Dimension(_))));
        assert!(matches!(build_etf(1, 3, None), Err(PfcError::Dimension(_))));
        let bad = DMatrix::from_element(3, 2, 1.0);
        assert!(matches!(build_etf(2, 3, Some(&bad)), Err(PfcError::Validation(_))));
        let wrong_shape = DMatrix::identity(3, 3);
        assert!(matches!(build_etf(2, 3, Some(&wrong_shape)), Err(PfcError::Dimension(_))));
    }

    #[test]
    fn seeded_default_is_deterministic() {
        assert_eq!(build_etf(4, 9, None).unwrap(), build_etf(4, 9, None).unwrap());
        assert_ne!(build_etf_seeded(4, 9, 1).unwrap(), build_etf_seeded(4, 9, 2).unwrap());
    }
}
