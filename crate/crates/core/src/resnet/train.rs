//! Mini-batch SGD with heavy-ball momentum, L2 weight decay and a step-decay
//! learning-rate schedule.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::net::{argmax_columns, backward_state, cross_entropy, forward_state, resnet_forward, BlockForm, Params};
use crate::error::{PfcError, Result};
use crate::etf::EtfFrame;
use crate::features::{FeatureSet, LayerStack};
use crate::metrics::{pfc_report, PfcReport};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_blocks: usize,
    pub width: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    pub per_class: usize,
    pub block_form: BlockForm,
    pub lr: f64,
    pub decay_factor: f64,
    /// 1-based epochs from which the learning rate is multiplied by
    /// `decay_factor` once more.
    pub decay_epochs: Vec<usize>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay_biases: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs between feature snapshots; the final epoch is always recorded.
    pub record_stride: usize,
    /// Extra factor on the initial residual-branch weights.
    pub branch_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_blocks: 6,
            width: 64,
            input_dim: 16,
            num_classes: 4,
            per_class: 256,
            block_form: BlockForm::TwoLayerRelu,
            lr: 0.05,
            decay_factor: 0.1,
            decay_epochs: vec![100, 200],
            momentum: 0.9,
            weight_decay: 5e-3,
            decay_biases: true,
            batch_size: 128,
            epochs: 300,
            seed: 0,
            record_stride: 10,
            branch_init_scale: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(PfcError::Validation(msg));
        let counts = [
            ("num_blocks", self.num_blocks),
            ("width", self.width),
            ("input_dim", self.input_dim),
            ("per_class", self.per_class),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("record_stride", self.record_stride),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return invalid(format!("{name} must be positive"));
        }
        if self.num_classes < 2 {
            return invalid(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return invalid(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return invalid(format!("learning rate must be >= 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return invalid(format!("weight decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor.is_finite()) {
            return invalid(format!("decay factor must be positive, got {}", self.decay_factor));
        }
        if !(self.branch_init_scale >= 0.0 && self.branch_init_scale.is_finite()) {
            return invalid(format!("branch init scale must be >= 0, got {}", self.branch_init_scale));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("decay epochs must be strictly increasing".into());
        }
        if self.decay_epochs.iter().any(|&e| e == 0 || e >= self.epochs) {
            return invalid(format!("decay epochs must lie in 1..{}", self.epochs));
        }
        Ok(())
    }

    /// Learning rate used during 1-based epoch `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = self.decay_epochs.iter().filter(|&&m| m <= epoch).count();
        self.lr * self.decay_factor.powi(decays as i32)
    }
}

/// Full-training-set loss and accuracy after an epoch; epoch 0 is the
/// initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub stack: LayerStack,
    /// Metrics of layers `0..=L`; `None` where a metric is undefined
    /// (coincident class means).
    pub reports: Vec<Option<PfcReport>>,
}

impl Snapshot {
    pub fn epoch(&self) -> usize {
        self.stack.epoch.unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    pub snapshots: Vec<Snapshot>,
    pub params: Params,
}

impl TrainTrace {
    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("trace holds the initial record")
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("the final epoch is always recorded")
    }
}

fn gather(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |r, c| x[(r, cols[c])])
}

fn evaluate(params: &Params, data: &FeatureSet, labels: &[usize], epoch: usize) -> Result<EpochRecord> {
    let (logits, _) = resnet_forward(params, data.features())?;
    let (loss, _) = cross_entropy(&logits, labels);
    if !loss.is_finite() {
        return Err(PfcError::Divergence { epoch, value: loss });
    }
    let correct = argmax_columns(&logits).iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(EpochRecord {
        epoch,
        loss,
        accuracy: correct as f64 / labels.len() as f64,
    })
}

/// Features of every layer for the whole training set, with their metrics.
pub fn snapshot(params: &Params, data: &FeatureSet, epoch: usize) -> Result<Snapshot> {
    let (_, feats) = resnet_forward(params, data.features())?;
    let (k, n) = (data.num_classes(), data.per_class());
    let layers = feats
        .into_iter()
        .map(|f| FeatureSet::new(f, k, n))
        .collect::<Result<Vec<_>>>()?;
    let target = EtfFrame::canonical(k)?;
    let reports = layers.iter().map(|fs| pfc_report(fs, &target).ok()).collect();
    Ok(Snapshot {
        stack: LayerStack::new(layers, Some(epoch))?,
        reports,
    })
}

fn sgd_step(params: &mut Params, velocity: &mut Params, grads: &Params, cfg: &TrainConfig, lr: f64) {
    let mut vel = velocity.tensors_mut();
    let grads = grads.tensors();
    for ((p, v), g) in params.tensors_mut().into_iter().zip(vel.iter_mut()).zip(grads.iter()) {
        let wd = if p.is_bias && !cfg.decay_biases { 0.0 } else { cfg.weight_decay };
        for ((theta, vel), &grad) in p.values.iter_mut().zip(v.values.iter_mut()).zip(g.values) {
            *vel = cfg.momentum * *vel + grad + wd * *theta;
            *theta -= lr * *vel;
        }
    }
}

/// Trains on `data`, whose columns are the inputs (`input_dim` rows) in
/// class-contiguous order.
pub fn train(cfg: &TrainConfig, data: &FeatureSet) -> Result<TrainTrace> {
    cfg.validate()?;
    if (data.dim(), data.num_classes(), data.per_class()) != (cfg.input_dim, cfg.num_classes, cfg.per_class) {
        return Err(PfcError::Dimension(format!(
            "data is D = {}, K = {}, n = {} but the config expects D = {}, K = {}, n = {}",
            data.dim(),
            data.num_classes(),
            data.per_class(),
            cfg.input_dim,
            cfg.num_classes,
            cfg.per_class
        )));
    }
    let labels: Vec<usize> = (0..data.num_samples()).map(|j| data.label(j)).collect();
    let mut params = Params::init(
        cfg.input_dim,
        cfg.width,
        cfg.num_classes,
        cfg.num_blocks,
        cfg.block_form,
        cfg.branch_init_scale,
        cfg.seed,
    );
    let mut velocity = params.zeros_like();
    let mut records = vec![evaluate(&params, data, &labels, 0)?];
    let mut snapshots = Vec::new();
    let mut order: Vec<usize> = (0..data.num_samples()).collect();

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, rng::STREAM_SHUFFLE + epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            let batch = gather(data.features(), chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&j| labels[j]).collect();
            let state = forward_state(&params, &batch)?;
            let (_, grads) = backward_state(&params, &state, &batch_labels)?;
            sgd_step(&mut params, &mut velocity, &grads, cfg, lr);
        }
        records.push(evaluate(&params, data, &labels, epoch)?);
        if epoch % cfg.record_stride == 0 || epoch == cfg.epochs {
            snapshots.push(snapshot(&params, data, epoch)?);
        }
    }
    Ok(TrainTrace { records, snapshots, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resnet::data::GaussianMixture;
    use crate::resnet::net::resnet_backward;

    fn small_config() -> TrainConfig {
        TrainConfig {
            num_blocks: 2,
            width: 8,
            input_dim: 4,
            num_classes: 3,
            per_class: 10,
            batch_size: 8,
            epochs: 20,
            decay_epochs: vec![10, 15],
            record_stride: 5,
            ..Default::default()
        }
    }

    fn small_data(cfg: &TrainConfig) -> FeatureSet {
        GaussianMixture::new(cfg.num_classes, cfg.input_dim, cfg.per_class, 3.0)
            .generate(cfg.seed)
            .unwrap()
            .features
    }

    #[test]
    fn zero_lr_leaves_parameters() {
        let cfg = TrainConfig { lr: 0.0, epochs: 1, decay_epochs: vec![], ..small_config() };
        let trace = train(&cfg, &small_data(&cfg)).unwrap();
        let init = Params::init(4, 8, 3, 2, cfg.block_form, cfg.branch_init_scale, cfg.seed);
        assert_eq!(trace.params, init);
        assert!(trace.records.iter().all(|r| r.loss == trace.records[0].loss));
        assert_eq!(trace.snapshots.len(), 1);
        assert_eq!(trace.final_snapshot().epoch(), 1);
    }

    #[test]
    fn single_step_is_lr_times_gradient() {
        let cfg = TrainConfig {
            momentum: 0.0,
            weight_decay: 0.0,
            lr: 0.01,
            ..small_config()
        };
        let data = small_data(&cfg);
        let mut params = Params::init(4, 8, 3, 2, cfg.block_form, 1.0, 3);
        let before = params.clone();
        let labels: Vec<usize> = (0..30).map(|j| j / 10).collect();
        let (_, grads) = resnet_backward(&params, data.features(), &labels).unwrap();
        let mut vel = params.zeros_like();
        sgd_step(&mut params, &mut vel, &grads, &cfg, cfg.lr);
        for ((a, b), g) in params.tensors().iter().zip(before.tensors().iter()).zip(grads.tensors().iter()) {
            for i in 0..a.values.len() {
                assert_eq!(a.values[i], b.values[i] - cfg.lr * g.values[i]);
            }
        }
    }

    #[test]
    fn weight_decay_enters_before_momentum() {
        let cfg = TrainConfig {
            momentum: 0.5,
            weight_decay: 0.1,
            decay_biases: false,
            ..small_config()
        };
        let mut params = Params::init(4, 8, 3, 2, cfg.block_form, 1.0, 3);
        params.b_out.fill(1.0);
        let zero = params.zeros_like();
        let mut vel = params.zeros_like();
        let w0 = params.w_out[(0, 0)];
        sgd_step(&mut params, &mut vel, &zero, &cfg, 1.0);
        sgd_step(&mut params, &mut vel, &zero, &cfg, 1.0);
        // v₁ = 0.1·w0, w₁ = 0.9·w0; v₂ = 0.5·v₁ + 0.1·w₁.
        let w1 = 0.9 * w0;
        let expected = w1 - (0.5 * 0.1 * w0 + 0.1 * w1);
        assert!((params.w_out[(0, 0)] - expected).abs() < 1e-15);
        assert_eq!(params.b_out[0], 1.0);
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(1), 0.05);
        assert_eq!(cfg.lr_at(99), 0.05);
        assert!((cfg.lr_at(100) - 0.005).abs() < 1e-15);
        assert!((cfg.lr_at(300) - 0.0005).abs() < 1e-15);
    }

    #[test]
    fn learns_and_is_deterministic() {
        let cfg = small_config();
        let data = small_data(&cfg);
        let a = train(&cfg, &data).unwrap();
        assert!(a.final_record().loss < a.records[0].loss);
        assert_eq!(a.records.len(), 21);
        let epochs: Vec<usize> = a.snapshots.iter().map(Snapshot::epoch).collect();
        assert_eq!(epochs, vec![5, 10, 15, 20]);
        assert_eq!(a.final_snapshot().stack.len(), 3);
        assert_eq!(a, train(&cfg, &data).unwrap());
    }

    #[test]
    fn divergence_reports_epoch() {
        let cfg = TrainConfig { lr: 1e8, momentum: 0.0, ..small_config() };
        let err = train(&cfg, &small_data(&cfg)).unwrap_err();
        assert!(matches!(err, PfcError::Divergence { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_configs() {
        let base = small_config();
        let data = small_data(&base);
        for cfg in [
            TrainConfig { momentum: 1.0, ..base.clone() },
            TrainConfig { decay_epochs: vec![15, 10], ..base.clone() },
            TrainConfig { decay_epochs: vec![20], ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { lr: -0.1, ..base.clone() },
        ] {
            assert!(matches!(train(&cfg, &data), Err(PfcError::Validation(_))));
        }
        let wrong = TrainConfig { input_dim: 5, ..base };
        assert!(matches!(train(&wrong, &data), Err(PfcError::Dimension(_))));
    }
}
