//! Synthetic Gaussian-mixture data: class means uniform on a sphere of
//! radius `mean_scale`, samples drawn from `N(μ_k, σ²I)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PfcError, Result};
use crate::features::FeatureSet;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub mean_scale: f64,
    /// Standard deviation of the isotropic noise; 0 places every sample on
    /// its class mean.
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub features: FeatureSet,
    /// `dim × K`, column `k` is the population mean of class `k`.
    pub means: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl GaussianMixture {
    pub fn new(num_classes: usize, dim: usize, per_class: usize, mean_scale: f64) -> Self {
        Self {
            num_classes,
            dim,
            per_class,
            mean_scale,
            noise_std: 1.0,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<MixtureSample> {
        if self.num_classes < 2 || self.per_class == 0 || self.dim == 0 {
            return Err(PfcError::Validation(format!(
                "mixture needs K >= 2, n >= 1, d >= 1 (got K = {}, n = {}, d = {})",
                self.num_classes, self.per_class, self.dim
            )));
        }
        if !(self.mean_scale >= 0.0 && self.noise_std >= 0.0) {
            return Err(PfcError::Validation("mean scale and noise must be nonnegative".into()));
        }
        let mut rng = rng::stream(seed, rng::STREAM_DATA);
        let (k, d, n) = (self.num_classes, self.dim, self.per_class);
        let mut means = DMatrix::zeros(d, k);
        for c in 0..k {
            let dir = rng::unit_sphere(&mut rng, d);
            for (r, v) in dir.into_iter().enumerate() {
                means[(r, c)] = self.mean_scale * v;
            }
        }
        let mut x = DMatrix::zeros(d, k * n);
        for j in 0..k * n {
            let c = j / n;
            for r in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                x[(r, j)] = means[(r, c)] + self.noise_std * z;
            }
        }
        Ok(MixtureSample {
            features: FeatureSet::new(x, k, n)?,
            means,
            labels: (0..k * n).map(|j| j / n).collect(),
        })
    }
}

pub fn gen_gaussian_mixture(
    num_classes: usize,
    dim: usize,
    per_class: usize,
    mean_scale: f64,
    seed: u64,
) -> Result<(FeatureSet, Vec<usize>)> {
    let s = GaussianMixture::new(num_classes, dim, per_class, mean_scale).generate(seed)?;
    Ok((s.features, s.labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::class_stats;
    use crate::metrics::{pfc1, pfc3};

    #[test]
    fn zero_scale_gives_chance_level_ncc() {
        let (fs, _) = gen_gaussian_mixture(4, 8, 1000, 0.0, 3).unwrap();
        let acc = pfc3(&fs);
        assert!((acc - 0.25).abs() < 0.1, "pfc3 = {acc}");
    }

    #[test]
    fn noiseless_samples_sit_on_means() {
        let mut g = GaussianMixture::new(3, 5, 1, 2.0);
        g.noise_std = 0.0;
        let s = g.generate(9).unwrap();
        assert_eq!(s.features.features(), &s.means);
        assert_eq!(pfc1(&s.features).unwrap(), 0.0);
        assert_eq!(pfc3(&s.features), 1.0);
    }

    #[test]
    fn empirical_means_converge() {
        let (d, n) = (6, 400);
        let s = GaussianMixture::new(3, d, n, 1.0).generate(5).unwrap();
        let stats = class_stats(&s.features);
        for c in 0..3 {
            let dist = (stats.class_means.column(c) - s.means.column(c)).norm();
            assert!(dist < 3.0 * (d as f64 / n as f64).sqrt(), "class {c}: {dist}");
        }
        for c in 0..3 {
            assert!((s.means.column(c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_labelled() {
        let a = gen_gaussian_mixture(3, 4, 5, 1.0, 1).unwrap();
        let b = gen_gaussian_mixture(3, 4, 5, 1.0, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1[..6], [0, 0, 0, 0, 0, 1]);
        assert!(gen_gaussian_mixture(1, 4, 5, 1.0, 1).is_err());
    }
}
