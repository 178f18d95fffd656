//! Straight-line feature transport between a start configuration (t = 0)
//! and an end configuration (t = 1), metric curves along the line, and the
//! relative-position coordinate of recorded layers.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{PfcError, Result};
use crate::etf::EtfFrame;
use crate::features::{centered_class_mean_matrix, FeatureSet, LayerStack};
use crate::metrics;

pub const DEFAULT_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPath {
    start: FeatureSet,
    end: FeatureSet,
    grid: Vec<f64>,
}

/// `points` evenly spaced values from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "a grid needs both endpoints");
    let last = (points - 1) as f64;
    (0..points).map(|i| i as f64 / last).collect()
}

impl InterpolationPath {
    pub fn new(start: FeatureSet, end: FeatureSet, grid: Vec<f64>) -> Result<Self> {
        start.check_same_shape(&end)?;
        if grid.len() < 2 || grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
            return Err(PfcError::Validation("grid must start at 0 and end at 1".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(PfcError::Validation("grid must be strictly increasing".into()));
        }
        Ok(Self { start, end, grid })
    }

    pub fn with_uniform_grid(start: FeatureSet, end: FeatureSet, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(PfcError::Validation("grid needs at least 2 points".into()));
        }
        Self::new(start, end, uniform_grid(points))
    }

    pub fn start(&self) -> &FeatureSet {
        &self.start
    }

    pub fn end(&self) -> &FeatureSet {
        &self.end
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn reversed(&self) -> Self {
        let grid = self.grid.iter().rev().map(|t| 1.0 - t).collect();
        Self {
            start: self.end.clone(),
            end: self.start.clone(),
            grid,
        }
    }
}

/// Every feature moved to `(1 − t)·start + t·end`.
pub fn interpolate(path: &InterpolationPath, t: f64) -> Result<FeatureSet> {
    if !(0.0..=1.0).contains(&t) {
        return Err(PfcError::Range(format!("t = {t} is outside [0, 1]")));
    }
    let a = path.start.features();
    let b = path.end.features();
    let m = if t == 0.0 {
        a.clone()
    } else if t == 1.0 {
        b.clone()
    } else {
        a * (1.0 - t) + b * t
    };
    FeatureSet::new(m, path.start.num_classes(), path.start.per_class())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Pfc1,
    Pfc2,
    Pfc3,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Pfc1, MetricKind::Pfc2, MetricKind::Pfc3];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Pfc1 => "PFC1",
            MetricKind::Pfc2 => "PFC2",
            MetricKind::Pfc3 => "PFC3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    pub fn evaluate(self, fs: &FeatureSet, target: &EtfFrame) -> Result<f64> {
        match self {
            MetricKind::Pfc1 => metrics::pfc1(fs),
            MetricKind::Pfc2 => metrics::pfc2(fs, target),
            MetricKind::Pfc3 => Ok(metrics::pfc3(fs)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurve {
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: MetricKind,
}

impl MetricCurve {
    pub fn monotonicity(&self, slack_rel: f64) -> Monotonicity {
        monotonicity_report(&self.values, slack_rel)
    }
}

/// Evaluates `kind` at every grid point of the path. Grid points are
/// evaluated in parallel; the result is ordered by `t`.
pub fn metric_curve(path: &InterpolationPath, kind: MetricKind, target: &EtfFrame) -> Result<MetricCurve> {
    let values = path
        .grid
        .par_iter()
        .map(|&t| {
            interpolate(path, t)
                .and_then(|fs| kind.evaluate(&fs, target))
                .map_err(|e| PfcError::CurvePoint { t, source: Box::new(e) })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MetricCurve {
        ts: path.grid.clone(),
        values,
        kind,
    })
}

/// `Σ_k ⟨h_k(0) − h_G(0), h_k(1) − h_G(1)⟩` and whether it is nonnegative.
/// Nonnegativity is the sufficient condition for a monotone PFC1 curve
/// toward a collapsed end point.
pub fn check_theorem1_assumption(path: &InterpolationPath) -> (bool, f64) {
    let a = centered_class_mean_matrix(&path.start);
    let b = centered_class_mean_matrix(&path.end);
    let value = a.dot(&b);
    (value >= 0.0, value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    StrictlyDecreasing,
    Nonincreasing,
    /// First index `i` with `values[i+1] − values[i] > slack·max|values|`.
    Violated(usize),
}

impl Monotonicity {
    pub fn is_monotone(self) -> bool {
        !matches!(self, Monotonicity::Violated(_))
    }

    pub fn label(self) -> String {
        match self {
            Monotonicity::StrictlyDecreasing => "strictly-decreasing".into(),
            Monotonicity::Nonincreasing => "nonincreasing".into(),
            Monotonicity::Violated(i) => format!("violated({i})"),
        }
    }
}

/// Classifies a sequence as strictly decreasing (every step negative),
/// nonincreasing (no step rises above the tolerance) or violated.
/// The tolerance is `slack_rel · max|values|`.
pub fn monotonicity_report(values: &[f64], slack_rel: f64) -> Monotonicity {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = slack_rel * scale;
    let mut strict = true;
    for (i, w) in values.windows(2).enumerate() {
        let step = w[1] - w[0];
        if step > tol || step.is_nan() {
            return Monotonicity::Violated(i);
        }
        if step >= 0.0 {
            strict = false;
        }
    }
    if strict {
        Monotonicity::StrictlyDecreasing
    } else {
        Monotonicity::Nonincreasing
    }
}

/// Cumulative feature path length up to each layer, normalized so layer 0
/// sits at 0 and the last layer at 1.
pub fn relative_positions(stack: &LayerStack) -> Result<Vec<f64>> {
    if stack.len() < 2 {
        return Err(PfcError::Validation("relative positions need at least 2 layers".into()));
    }
    let steps: Vec<f64> = stack
        .layers()
        .windows(2)
        .map(|w| displacement(w[0].features(), w[1].features()))
        .collect();
    let total: f64 = steps.iter().sum();
    if !(total > 0.0) {
        return Err(PfcError::Degenerate("total feature path length is zero".into()));
    }
    let mut positions = Vec::with_capacity(stack.len());
    let mut acc = 0.0;
    positions.push(0.0);
    for s in &steps[..steps.len() - 1] {
        acc += s;
        positions.push(acc / total);
    }
    positions.push(1.0);
    Ok(positions)
}

/// `Σ_j ‖b_j − a_j‖₂` over columns.
fn displacement(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.column_iter().zip(b.column_iter()).map(|(x, y)| (y - x).norm()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etf::build_etf;
    use crate::rng;

    fn fs(m: DMatrix<f64>, k: usize, n: usize) -> FeatureSet {
        FeatureSet::new(m, k, n).unwrap()
    }

    fn random_fs(seed: u64, k: usize, n: usize, d: usize) -> FeatureSet {
        fs(rng::gaussian_matrix(&mut rng::stream(seed, rng::STREAM_PATH), d, k * n, 1.0), k, n)
    }

    /// Each sample at its class mean, centered means from an ETF scaled by
    /// `scale`, translated by `offset`.
    fn nc_end(k: usize, n: usize, d: usize, scale: f64, offset: f64) -> FeatureSet {
        let f = build_etf(k, d, None).unwrap();
        let mut m = DMatrix::zeros(d, k * n);
        for c in 0..k {
            for i in 0..n {
                m.set_column(c * n + i, &(f.frame.column(c) * scale).add_scalar(offset));
            }
        }
        fs(m, k, n)
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let a = fs(DMatrix::from_column_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]), 2, 1);
        let b = fs(DMatrix::from_column_slice(2, 2, &[2.0, 4.0, 3.0, -1.0]), 2, 1);
        let p = InterpolationPath::with_uniform_grid(a.clone(), b.clone(), 3).unwrap();
        assert_eq!(interpolate(&p, 0.0).unwrap(), a);
        assert_eq!(interpolate(&p, 1.0).unwrap(), b);
        let mid = interpolate(&p, 0.5).unwrap();
        assert_eq!(mid.features().column(0).as_slice(), &[1.0, 2.0]);
        assert!(matches!(interpolate(&p, 1.5), Err(PfcError::Range(_))));
        assert!(matches!(interpolate(&p, -0.1), Err(PfcError::Range(_))));
    }

    #[test]
    fn interpolation_is_symmetric_under_reversal() {
        let p = InterpolationPath::with_uniform_grid(random_fs(1, 3, 4, 5), random_fs(2, 3, 4, 5), 11).unwrap();
        let r = p.reversed();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let a = interpolate(&p, t).unwrap();
            let b = interpolate(&r, 1.0 - t).unwrap();
            assert!((a.features() - b.features()).amax() < 1e-14);
        }
    }

    #[test]
    fn path_validation() {
        let a = random_fs(1, 3, 4, 5);
        let b = random_fs(2, 3, 4, 6);
        assert!(InterpolationPath::with_uniform_grid(a.clone(), b, 5).is_err());
        assert!(InterpolationPath::new(a.clone(), a.clone(), vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(InterpolationPath::new(a.clone(), a.clone(), vec![0.1, 1.0]).is_err());
        assert!(InterpolationPath::new(a.clone(), a, vec![0.0, 0.9]).is_err());
    }

    #[test]
    fn curves_end_at_zero_for_collapsed_end() {
        let end = nc_end(3, 4, 6, 2.0, 0.3);
        let target = build_etf(3, 6, None).unwrap();
        let p = InterpolationPath::with_uniform_grid(random_fs(5, 3, 4, 6), end, 101).unwrap();
        let c1 = metric_curve(&p, MetricKind::Pfc1, &target).unwrap();
        let c2 = metric_curve(&p, MetricKind::Pfc2, &target).unwrap();
        let c3 = metric_curve(&p, MetricKind::Pfc3, &target).unwrap();
        assert!(c1.values.last().unwrap().abs() < 1e-12);
        assert!(c2.values.last().unwrap().abs() < 1e-12);
        assert_eq!(*c3.values.last().unwrap(), 1.0);
        assert_eq!(c1.ts.len(), 101);
    }

    #[test]
    fn constant_collapsed_path_is_flat_zero() {
        let end = nc_end(4, 2, 5, 1.0, -1.0);
        let target = build_etf(4, 5, None).unwrap();
        let p = InterpolationPath::with_uniform_grid(end.clone(), end, 21).unwrap();
        for kind in [MetricKind::Pfc1, MetricKind::Pfc2] {
            let c = metric_curve(&p, kind, &target).unwrap();
            assert!(c.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn curve_reports_degenerate_t() {
        // Start means are the negated end means; at t = 0.5 every class mean
        // coincides.
        let end = nc_end(3, 2, 4, 1.0, 0.0);
        let start = fs(-end.features().clone(), 3, 2);
        let target = build_etf(3, 4, None).unwrap();
        let p = InterpolationPath::with_uniform_grid(start, end, 5).unwrap();
        match metric_curve(&p, MetricKind::Pfc1, &target) {
            Err(PfcError::CurvePoint { t, source }) => {
                assert_eq!(t, 0.5);
                assert!(matches!(*source, PfcError::Degenerate(_)));
            }
            other => panic!("expected a curve-point error, got {other:?}"),
        }
    }

    #[test]
    fn theorem1_checker_sign() {
        let end = nc_end(3, 2, 4, 1.5, 0.2);
        let same = InterpolationPath::with_uniform_grid(end.clone(), end.clone(), 3).unwrap();
        let (ok, v) = check_theorem1_assumption(&same);
        let c = centered_class_mean_matrix(&end);
        assert!(ok);
        assert!((v - c.norm_squared()).abs() < 1e-12);

        let flipped = fs(-end.features().clone(), 3, 2);
        let opposite = InterpolationPath::with_uniform_grid(flipped, end, 3).unwrap();
        let (ok, v) = check_theorem1_assumption(&opposite);
        assert!(!ok && v < 0.0);
    }

    #[test]
    fn theorem1_checker_matches_double_loop() {
        let (k, n, d) = (4, 3, 5);
        let p = InterpolationPath::with_uniform_grid(random_fs(21, k, n, d), random_fs(22, k, n, d), 3).unwrap();
        let centered = |f: &FeatureSet| -> Vec<Vec<f64>> {
            let x = f.features();
            let means: Vec<Vec<f64>> = (0..k)
                .map(|c| (0..d).map(|r| (0..n).map(|i| x[(r, c * n + i)]).sum::<f64>() / n as f64).collect())
                .collect();
            let g: Vec<f64> = (0..d).map(|r| means.iter().map(|m| m[r]).sum::<f64>() / k as f64).collect();
            means.iter().map(|m| m.iter().zip(&g).map(|(a, b)| a - b).collect()).collect()
        };
        let (a, b) = (centered(p.start()), centered(p.end()));
        let mut naive = 0.0;
        for c in 0..k {
            for r in 0..d {
                naive += a[c][r] * b[c][r];
            }
        }
        let (_, v) = check_theorem1_assumption(&p);
        assert!((v - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn monotonicity_examples() {
        assert_eq!(monotonicity_report(&[3.0, 2.0, 1.0, 0.0], 1e-12), Monotonicity::StrictlyDecreasing);
        assert_eq!(monotonicity_report(&[1.0, 1.0, 0.0], 1e-12), Monotonicity::Nonincreasing);
        assert_eq!(monotonicity_report(&[0.0, 1.0], 1e-12), Monotonicity::Violated(0));
        assert_eq!(monotonicity_report(&[2.0, 1.0, 1.0 + 1e-13, 0.5], 1e-10), Monotonicity::Nonincreasing);
        assert_eq!(monotonicity_report(&[2.0, 1.0, 1.1, 0.5], 1e-10), Monotonicity::Violated(1));
        assert_eq!(monotonicity_report(&[5.0], 1e-10), Monotonicity::StrictlyDecreasing);
    }

    fn stack_from_steps(steps: &[f64]) -> LayerStack {
        // One sample per class in 1-D; every sample moves by `s` per block.
        let mut layers = vec![];
        let mut pos = 0.0;
        layers.push(fs(DMatrix::from_column_slice(1, 2, &[pos, pos + 5.0]), 2, 1));
        for s in steps {
            pos += s / 2.0;
            layers.push(fs(DMatrix::from_column_slice(1, 2, &[pos, pos + 5.0]), 2, 1));
        }
        LayerStack::new(layers, None).unwrap()
    }

    #[test]
    fn relative_position_examples() {
        assert_eq!(relative_positions(&stack_from_steps(&[1.0, 1.0])).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(relative_positions(&stack_from_steps(&[3.0])).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            relative_positions(&stack_from_steps(&[1.0, 2.0, 1.0])).unwrap(),
            vec![0.0, 0.25, 0.75, 1.0]
        );
        assert!(matches!(
            relative_positions(&stack_from_steps(&[0.0, 0.0])),
            Err(PfcError::Degenerate(_))
        ));
        assert!(relative_positions(&stack_from_steps(&[])).is_err());
    }
}
