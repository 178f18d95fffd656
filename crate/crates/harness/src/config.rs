//! Experiment configuration.
//!
//! A config file is TOML with three optional top-level keys and one table:
//!
//! ```toml
//! kind = "solve-mufm"
//! seed = 7
//! out = "runs/mufm"
//!
//! [params]
//! epochs = 20000
//! ```
//!
//! Every parameter has a default, so `[params]` may be partial or absent.
//! Command-line overrides are applied to the parsed TOML before the typed
//! parameter block is built, so they go through the same validation.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pfc_core::resnet::BlockForm;
use pfc_core::surrogate::Loss;
use pfc_core::resnet::TrainConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EtfCheck,
    Interpolate,
    Theorem1,
    Theorem2,
    SolveUfm,
    SolveMufm,
    SweepLambda,
    TrainResnet,
    PfcReport,
    EquivalenceThm3,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::EtfCheck,
        ExperimentKind::Interpolate,
        ExperimentKind::Theorem1,
        ExperimentKind::Theorem2,
        ExperimentKind::SolveUfm,
        ExperimentKind::SolveMufm,
        ExperimentKind::SweepLambda,
        ExperimentKind::TrainResnet,
        ExperimentKind::PfcReport,
        ExperimentKind::EquivalenceThm3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EtfCheck => "etf-check",
            ExperimentKind::Interpolate => "interpolate",
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Theorem2 => "theorem2",
            ExperimentKind::SolveUfm => "solve-ufm",
            ExperimentKind::SolveMufm => "solve-mufm",
            ExperimentKind::SweepLambda => "sweep-lambda",
            ExperimentKind::TrainResnet => "train-resnet",
            ExperimentKind::PfcReport => "pfc-report",
            ExperimentKind::EquivalenceThm3 => "equivalence-thm3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtfCheckParams {
    pub classes: Vec<usize>,
    /// Each `K` is checked in dimension `K + extra` for every entry.
    pub extra_dims: Vec<usize>,
}

impl Default for EtfCheckParams {
    fn default() -> Self {
        Self {
            classes: (2..=10).collect(),
            extra_dims: vec![0, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolateParams {
    /// Feature-set files for `t = 0` and `t = 1`.
    pub start: Option<PathBuf>,
    pub end: Option<PathBuf>,
    pub grid_points: usize,
    pub slack: f64,
}

impl Default for InterpolateParams {
    fn default() -> Self {
        Self {
            start: None,
            end: None,
            grid_points: pfc_core::geodesic::DEFAULT_GRID_POINTS,
            slack: 1e-10,
        }
    }
}

/// Shared by `theorem1` and `theorem2`. Path `i` uses the `i`-th entry of
/// the cartesian product of `classes × per_class × dims`, cycling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremParams {
    pub paths: usize,
    pub grid_points: usize,
    pub slack: f64,
    pub classes: Vec<usize>,
    pub per_class: Vec<usize>,
    pub dims: Vec<usize>,
    /// Start draws rejected before giving up on one path (`theorem1`).
    pub max_attempts: usize,
    /// `‖H̃(0) − H̃(1)‖_F / ‖H̃(1)‖_F` (`theorem2`).
    pub transport_ratio: f64,
}

impl Default for TheoremParams {
    fn default() -> Self {
        Self {
            paths: 100,
            grid_points: pfc_core::geodesic::DEFAULT_GRID_POINTS,
            slack: 1e-10,
            classes: vec![3, 5],
            per_class: vec![4, 20],
            dims: vec![8, 20],
            max_attempts: 1000,
            transport_ratio: 0.01,
        }
    }
}

impl TheoremParams {
    pub fn shape(&self, i: usize) -> (usize, usize, usize) {
        let (a, b, c) = (self.classes.len(), self.per_class.len(), self.dims.len());
        let j = i % (a * b * c);
        (self.classes[j / (b * c)], self.per_class[(j / c) % b], self.dims[j % c])
    }
}

/// `solve-ufm` and `solve-mufm`. For UFM, `lambda` is the feature penalty
/// `λ_H`; the data matrix is still generated so the final features can be
/// compared with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub loss: String,
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub mean_scale: f64,
    pub lambda_w: f64,
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub trace_stride: usize,
    pub grad_tol: Option<f64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            loss: "mse".into(),
            num_classes: 5,
            dim: 20,
            per_class: 100,
            mean_scale: 1.0,
            lambda_w: 0.005,
            lambda: 0.001,
            lr: 0.1,
            epochs: 50_000,
            init_scale: 1.0,
            trace_stride: 1000,
            grad_tol: None,
        }
    }
}

pub const DEFAULT_LAMBDAS: [f64; 9] = [0.0005, 0.001, 0.002, 0.004, 0.006, 0.008, 0.01, 0.015, 0.02];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub lambdas: Vec<f64>,
    pub loss: String,
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub mean_scale: f64,
    pub lambda_w: f64,
    pub lr: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub grad_tol: Option<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        let s = SolveParams::default();
        Self {
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            loss: s.loss,
            num_classes: s.num_classes,
            dim: s.dim,
            per_class: s.per_class,
            mean_scale: s.mean_scale,
            lambda_w: s.lambda_w,
            lr: s.lr,
            epochs: s.epochs,
            init_scale: s.init_scale,
            grad_tol: s.grad_tol,
        }
    }
}

impl SweepParams {
    /// Solve parameters for the first grid point.
    pub fn base(&self) -> SolveParams {
        SolveParams {
            loss: self.loss.clone(),
            num_classes: self.num_classes,
            dim: self.dim,
            per_class: self.per_class,
            mean_scale: self.mean_scale,
            lambda_w: self.lambda_w,
            lambda: self.lambdas.first().copied().unwrap_or(f64::NAN),
            lr: self.lr,
            epochs: self.epochs,
            init_scale: self.init_scale,
            trace_stride: self.epochs,
            grad_tol: self.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub num_blocks: usize,
    pub width: usize,
    pub input_dim: usize,
    pub num_classes: usize,
    pub per_class: usize,
    pub block_form: String,
    pub lr: f64,
    pub decay_factor: f64,
    pub decay_epochs: Vec<usize>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub decay_biases: bool,
    pub batch_size: usize,
    pub epochs: usize,
    pub record_stride: usize,
    pub branch_init_scale: f64,
    /// Gaussian-mixture data; ignored when MNIST files are given.
    pub mean_scale: f64,
    pub noise_std: f64,
    /// IDX image and label files. When set, `input_dim` and `num_classes`
    /// are taken from the data.
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    pub grid_points: usize,
    pub slack: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            num_blocks: c.num_blocks,
            width: c.width,
            input_dim: c.input_dim,
            num_classes: c.num_classes,
            per_class: c.per_class,
            block_form: c.block_form.name().into(),
            lr: c.lr,
            decay_factor: c.decay_factor,
            decay_epochs: c.decay_epochs,
            momentum: c.momentum,
            weight_decay: c.weight_decay,
            decay_biases: c.decay_biases,
            batch_size: c.batch_size,
            epochs: c.epochs,
            record_stride: c.record_stride,
            branch_init_scale: c.branch_init_scale,
            mean_scale: 8.0,
            noise_std: 1.0,
            mnist_images: None,
            mnist_labels: None,
            grid_points: pfc_core::geodesic::DEFAULT_GRID_POINTS,
            slack: 1e-10,
        }
    }
}

impl TrainParams {
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let block_form = BlockForm::parse(&self.block_form).ok_or_else(|| {
            HarnessError::Config(format!(
                "block_form must be single-layer-relu or two-layer-relu, got {:?}",
                self.block_form
            ))
        })?;
        Ok(TrainConfig {
            num_blocks: self.num_blocks,
            width: self.width,
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            per_class: self.per_class,
            block_form,
            lr: self.lr,
            decay_factor: self.decay_factor,
            decay_epochs: self.decay_epochs.clone(),
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            decay_biases: self.decay_biases,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            record_stride: self.record_stride,
            branch_init_scale: self.branch_init_scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfcReportParams {
    /// Feature-set files, one per layer, input side first.
    pub stack: Vec<PathBuf>,
    pub grid_points: usize,
    pub slack: f64,
}

impl Default for PfcReportParams {
    fn default() -> Self {
        Self {
            stack: Vec::new(),
            grid_points: pfc_core::geodesic::DEFAULT_GRID_POINTS,
            slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceParams {
    pub blocks: Vec<usize>,
    pub losses: Vec<String>,
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub lambda_w: f64,
    pub lambda: f64,
    pub descent_lr: f64,
    pub descent_steps: usize,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self {
            blocks: vec![2, 5, 10],
            losses: vec!["mse".into(), "ce".into()],
            num_classes: 3,
            dim: 6,
            per_class: 4,
            lambda_w: 0.1,
            lambda: 0.5,
            descent_lr: 0.2,
            descent_steps: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    EtfCheck(EtfCheckParams),
    Interpolate(InterpolateParams),
    Theorem(TheoremParams),
    Solve(SolveParams),
    Sweep(SweepParams),
    Train(TrainParams),
    PfcReport(PfcReportParams),
    Equivalence(EquivalenceParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out: PathBuf,
    pub params: Params,
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// `key=value` pairs. Keys name a parameter (optionally prefixed with
    /// `params.`) or one of `seed`, `out`. Values are TOML literals; anything
    /// that does not parse as one is taken as a string.
    pub set: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    resolve(Some(text), &Overrides::default())
}

/// Builds a validated config from an optional file body and overrides.
pub fn resolve(text: Option<&str>, ov: &Overrides) -> Result<ExperimentConfig> {
    let mut top = match text {
        Some(t) if t.trim().is_empty() => return Err(HarnessError::Usage("config file is empty".into())),
        Some(t) => t
            .parse::<toml::Table>()
            .map_err(|e| HarnessError::Config(e.message().to_string()))?,
        None => toml::Table::new(),
    };
    let mut params = match top.remove("params") {
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(HarnessError::Config("`params` must be a table".into())),
        None => toml::Table::new(),
    };
    for kv in &ov.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| HarnessError::Usage(format!("override {kv:?} is not key=value")))?;
        let key = key.trim();
        let value = toml_literal(value.trim());
        match key {
            "seed" | "out" | "kind" => top.insert(key.into(), value),
            _ => params.insert(key.strip_prefix("params.").unwrap_or(key).into(), value),
        };
    }

    let file_kind = match top.remove("kind") {
        Some(toml::Value::String(s)) => Some(
            ExperimentKind::parse(&s).ok_or_else(|| HarnessError::Usage(format!("unknown experiment kind {s:?}")))?,
        ),
        Some(_) => return Err(HarnessError::Config("`kind` must be a string".into())),
        None => None,
    };
    let kind = match (ov.kind, file_kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(HarnessError::Usage(format!(
                "subcommand {} does not match config kind {}",
                a.name(),
                b.name()
            )))
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(HarnessError::Usage("no experiment kind given".into())),
    };
    let seed = match top.remove("seed") {
        Some(toml::Value::Integer(s)) if s >= 0 => s as u64,
        Some(v) => return Err(HarnessError::Config(format!("`seed` must be a nonnegative integer, got {v}"))),
        None => 0,
    };
    let out = match top.remove("out") {
        Some(toml::Value::String(s)) => PathBuf::from(s),
        Some(v) => return Err(HarnessError::Config(format!("`out` must be a string, got {v}"))),
        None => PathBuf::from("runs").join(kind.name()),
    };
    if let Some(k) = top.keys().next() {
        return Err(HarnessError::Config(format!("unknown top-level key {k:?}")));
    }

    let params = match kind {
        ExperimentKind::EtfCheck => Params::EtfCheck(typed(params)?),
        ExperimentKind::Interpolate => Params::Interpolate(typed(params)?),
        ExperimentKind::Theorem1 | ExperimentKind::Theorem2 => Params::Theorem(typed(params)?),
        ExperimentKind::SolveUfm | ExperimentKind::SolveMufm => Params::Solve(typed(params)?),
        ExperimentKind::SweepLambda => Params::Sweep(typed(params)?),
        ExperimentKind::TrainResnet => Params::Train(typed(params)?),
        ExperimentKind::PfcReport => Params::PfcReport(typed(params)?),
        ExperimentKind::EquivalenceThm3 => Params::Equivalence(typed(params)?),
    };
    let cfg = ExperimentConfig {
        kind,
        seed: ov.seed.unwrap_or(seed),
        out: ov.out.clone().unwrap_or(out),
        params,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn toml_literal(s: &str) -> toml::Value {
    format!("v = {s}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(s.to_string()))
}

fn typed<T: DeserializeOwned>(t: toml::Table) -> Result<T> {
    toml::Value::Table(t)
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(HarnessError::Config(msg()))
    }
}

fn check_loss(s: &str) -> Result<()> {
    check(Loss::parse(s).is_some(), || format!("loss must be mse or ce, got {s:?}"))
}

fn check_grid(points: usize, slack: f64) -> Result<()> {
    check(points >= 2, || format!("grid_points must be at least 2, got {points}"))?;
    check(slack >= 0.0 && slack.is_finite(), || format!("slack must be >= 0, got {slack}"))
}

impl ExperimentConfig {
    /// Checks the harness-level constraints; model-level ones are enforced
    /// by the library when the experiment runs.
    pub fn validate(&self) -> Result<()> {
        match &self.params {
            Params::EtfCheck(p) => {
                check(!p.classes.is_empty() && !p.extra_dims.is_empty(), || {
                    "classes and extra_dims must be nonempty".into()
                })?;
                check(p.classes.iter().all(|&k| k >= 2), || "every K must be at least 2".into())
            }
            Params::Interpolate(p) => {
                check(p.start.is_some() && p.end.is_some(), || "start and end files are required".into())?;
                check_grid(p.grid_points, p.slack)
            }
            Params::Theorem(p) => {
                check(p.paths >= 1, || "paths must be positive".into())?;
                check(
                    !p.classes.is_empty() && !p.per_class.is_empty() && !p.dims.is_empty(),
                    || "classes, per_class and dims must be nonempty".into(),
                )?;
                check(p.classes.iter().all(|&k| k >= 2), || "every K must be at least 2".into())?;
                check(p.per_class.iter().all(|&n| n >= 1), || "every n must be positive".into())?;
                let kmax = p.classes.iter().max().copied().unwrap_or(0);
                check(p.dims.iter().all(|&d| d >= kmax), || {
                    format!("every dim must be at least the largest K ({kmax})")
                })?;
                check(p.max_attempts >= 1, || "max_attempts must be positive".into())?;
                check(p.transport_ratio > 0.0 && p.transport_ratio.is_finite(), || {
                    format!("transport_ratio must be positive, got {}", p.transport_ratio)
                })?;
                check_grid(p.grid_points, p.slack)
            }
            Params::Solve(p) => check_loss(&p.loss),
            Params::Sweep(p) => {
                check_loss(&p.loss)?;
                check(!p.lambdas.is_empty(), || "lambdas must be nonempty".into())
            }
            Params::Train(p) => {
                check(p.mnist_images.is_some() == p.mnist_labels.is_some(), || {
                    "mnist_images and mnist_labels must be given together".into()
                })?;
                p.train_config(self.seed)?;
                check_grid(p.grid_points, p.slack)
            }
            Params::PfcReport(p) => {
                check(p.stack.len() >= 2, || "stack needs at least 2 layer files".into())?;
                check_grid(p.grid_points, p.slack)
            }
            Params::Equivalence(p) => {
                check(!p.blocks.is_empty() && p.blocks.iter().all(|&l| l >= 1), || {
                    "blocks must be a nonempty list of positive depths".into()
                })?;
                check(!p.losses.is_empty(), || "losses must be nonempty".into())?;
                p.losses.iter().try_for_each(|l| check_loss(l))
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configs serialize")
    }
}
