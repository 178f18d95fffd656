//! Balanced class-structured feature matrices and their first/second moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{PfcError, Result};

/// Features of one layer for a balanced dataset of `K` classes with `n`
/// samples each.
///
/// Stored as a `d × (K·n)` matrix; columns `[k·n, (k+1)·n)` belong to class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: DMatrix<f64>,
    num_classes: usize,
    per_class: usize,
}

impl FeatureSet {
    pub fn new(features: DMatrix<f64>, num_classes: usize, per_class: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(PfcError::Validation(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if per_class == 0 {
            return Err(PfcError::Validation("per-class sample count must be positive".into()));
        }
        if features.nrows() == 0 {
            return Err(PfcError::Dimension("feature dimension must be positive".into()));
        }
        if features.ncols() != num_classes * per_class {
            return Err(PfcError::Dimension(format!(
                "expected {} columns for K = {num_classes}, n = {per_class}, got {}",
                num_classes * per_class,
                features.ncols()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(PfcError::Validation(format!(
                "non-finite feature value at flat index {pos}"
            )));
        }
        Ok(Self {
            features,
            num_classes,
            per_class,
        })
    }

    /// Builds a feature set from per-class lists of column vectors.
    pub fn from_classes(classes: &[Vec<Vec<f64>>]) -> Result<Self> {
        let k = classes.len();
        let n = classes.first().map_or(0, Vec::len);
        let d = classes.first().and_then(|c| c.first()).map_or(0, Vec::len);
        if classes.iter().any(|c| c.len() != n) {
            return Err(PfcError::Validation("classes must have equal sample counts".into()));
        }
        let mut m = DMatrix::zeros(d, k * n);
        for (ci, class) in classes.iter().enumerate() {
            for (i, h) in class.iter().enumerate() {
                if h.len() != d {
                    return Err(PfcError::Dimension(format!(
                        "sample ({ci}, {i}) has dimension {}, expected {d}",
                        h.len()
                    )));
                }
                m.column_mut(ci * n + i).copy_from_slice(h);
            }
        }
        Self::new(m, k, n)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn into_features(self) -> DMatrix<f64> {
        self.features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn per_class(&self) -> usize {
        self.per_class
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.features.ncols()
    }

    /// Class label of column `j`.
    pub fn label(&self, j: usize) -> usize {
        j / self.per_class
    }

    pub fn same_shape(&self, other: &FeatureSet) -> bool {
        self.num_classes == other.num_classes
            && self.per_class == other.per_class
            && self.dim() == other.dim()
    }

    pub(crate) fn check_same_shape(&self, other: &FeatureSet) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(PfcError::Dimension(format!(
                "feature sets differ in shape: (K={}, n={}, d={}) vs (K={}, n={}, d={})",
                self.num_classes,
                self.per_class,
                self.dim(),
                other.num_classes,
                other.per_class,
                other.dim()
            )))
        }
    }
}

/// Class means, global mean and the traces of the within- and between-class
/// covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub class_means: DMatrix<f64>,
    pub global_mean: DVector<f64>,
    pub tr_within: f64,
    pub tr_between: f64,
}

pub fn class_means(fs: &FeatureSet) -> DMatrix<f64> {
    let n = fs.per_class();
    let mut means = DMatrix::zeros(fs.dim(), fs.num_classes());
    for k in 0..fs.num_classes() {
        let block = fs.features().columns(k * n, n);
        let mut col = means.column_mut(k);
        for c in block.column_iter() {
            col += c;
        }
        col /= n as f64;
    }
    means
}

pub fn class_stats(fs: &FeatureSet) -> ClassStats {
    let n = fs.per_class();
    let k = fs.num_classes();
    let class_means = class_means(fs);
    let global_mean = class_means.column_mean();

    let mut within = 0.0;
    for j in 0..fs.num_samples() {
        within += (fs.features().column(j) - class_means.column(fs.label(j))).norm_squared();
    }
    let mut between = 0.0;
    for c in class_means.column_iter() {
        between += (c - &global_mean).norm_squared();
    }

    ClassStats {
        class_means,
        global_mean,
        tr_within: within / (n * k) as f64,
        tr_between: between / k as f64,
    }
}

/// `d × K` matrix whose column `k` is the class mean minus the global mean.
pub fn centered_class_mean_matrix(fs: &FeatureSet) -> DMatrix<f64> {
    let mut means = class_means(fs);
    let global = means.column_mean();
    for mut c in means.column_iter_mut() {
        c -= &global;
    }
    means
}

/// Features of every recorded layer of one network at one point in training.
/// Index 0 holds the input features of the first block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<FeatureSet>,
    pub epoch: Option<usize>,
}

impl LayerStack {
    pub fn new(layers: Vec<FeatureSet>, epoch: Option<usize>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| PfcError::Validation("layer stack is empty".into()))?;
        for (l, layer) in layers.iter().enumerate().skip(1) {
            first.check_same_shape(layer).map_err(|e| {
                PfcError::Dimension(format!("layer {l} does not match layer 0: {e}"))
            })?;
        }
        Ok(Self { layers, epoch })
    }

    pub fn layers(&self) -> &[FeatureSet] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Index of the last layer (`L`).
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }
}
