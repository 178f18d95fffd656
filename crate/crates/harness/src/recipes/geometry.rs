use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::json;

use pfc_core::geodesic::{check_theorem1_assumption, metric_curve, InterpolationPath, MetricKind};
use pfc_core::io::read_feature_set;
use pfc_core::{build_etf_seeded, gram_target, EtfFrame, FeatureSet, PfcError};
use pfc_core::rng;

use crate::config::{EtfCheckParams, InterpolateParams, TheoremParams};
use crate::error::{Context, HarnessError, Result};
use crate::manifest::ArtifactWriter;
use crate::table::{Cell, Table};

use super::{path_stream, verdict_counts};

pub fn etf_check(p: &EtfCheckParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let mut table = Table::new(&[
        "num_classes",
        "dim",
        "norm_error",
        "cosine_error",
        "gram_norm_error",
        "gram_identity_error",
    ]);
    let mut worst = [0.0f64; 4];
    for &k in &p.classes {
        for &extra in &p.extra_dims {
            let d = k + extra;
            let etf = build_etf_seeded(k, d, seed).context(|| format!("ETF with K = {k}, d = {d}"))?;
            let errs = etf_errors(&etf);
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
            let mut row: Vec<Cell> = vec![k.into(), d.into()];
            row.extend(errs.iter().map(|&e| Cell::Num(e)));
            table.push(row);
        }
    }
    out.table("etf.csv", &table)?;
    out.json(
        "summary.json",
        &json!({
            "max_norm_error": worst[0],
            "max_cosine_error": worst[1],
            "max_gram_norm_error": worst[2],
            "max_gram_identity_error": worst[3],
        }),
    )
}

/// Worst deviations of unit norms, pairwise cosines from `−1/(K−1)`, the
/// target Gram from unit norm, and `MᵀM` from `(K/sqrt(K−1))·E`.
pub fn etf_errors(etf: &EtfFrame) -> [f64; 4] {
    let k = etf.num_classes;
    let m = &etf.frame;
    let mut norm_err = 0.0f64;
    let mut cos_err = 0.0f64;
    for i in 0..k {
        let ni = m.column(i).norm();
        norm_err = norm_err.max((ni - 1.0).abs());
        for j in 0..i {
            let c = m.column(i).dot(&m.column(j)) / (ni * m.column(j).norm());
            cos_err = cos_err.max((c + 1.0 / (k as f64 - 1.0)).abs());
        }
    }
    let e = gram_target(k);
    let scale = k as f64 / ((k - 1) as f64).sqrt();
    let identity = (m.transpose() * m - &e * scale).amax();
    [norm_err, cos_err, (e.norm() - 1.0).abs(), identity]
}

pub fn interpolate(p: &InterpolateParams, _seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let (Some(start_path), Some(end_path)) = (&p.start, &p.end) else {
        return Err(HarnessError::Config("start and end files are required".into()));
    };
    let start = read_feature_set(start_path).context(|| format!("reading {}", start_path.display()))?;
    let end = read_feature_set(end_path).context(|| format!("reading {}", end_path.display()))?;
    let path = InterpolationPath::with_uniform_grid(start, end, p.grid_points).context(|| "building the path".into())?;
    let target = EtfFrame::canonical(path.start().num_classes()).context(|| "target frame".into())?;
    let (holds, value) = check_theorem1_assumption(&path);

    let mut table = Table::new(&["t", "value", "metric_kind"]);
    let mut verdicts = serde_json::Map::new();
    for kind in MetricKind::ALL {
        let curve = metric_curve(&path, kind, &target).context(|| format!("{} curve", kind.name()))?;
        for (t, v) in curve.ts.iter().zip(&curve.values) {
            table.push(vec![(*t).into(), (*v).into(), kind.name().into()]);
        }
        verdicts.insert(
            kind.name().into(),
            json!({
                "start": curve.values[0],
                "end": curve.values[curve.values.len() - 1],
                "monotonicity": curve.monotonicity(p.slack).label(),
            }),
        );
    }
    out.table("curve.csv", &table)?;
    out.json(
        "summary.json",
        &json!({
            "assumption_value": value,
            "assumption_holds": holds,
            "curves": verdicts,
        }),
    )
}

/// Every sample on its class mean, the centered means a scaled simplex ETF
/// in a random basis, translated by a random global mean.
fn collapsed_end<R: Rng>(r: &mut R, k: usize, n: usize, d: usize) -> Result<FeatureSet> {
    let etf = build_etf_seeded(k, d, r.random()).context(|| "end-point frame".into())?;
    let scale: f64 = r.random_range(0.5..2.0);
    let shift = DVector::from_column_slice(rng::gaussian_matrix(r, d, 1, 1.0).as_slice());
    let h = DMatrix::from_fn(d, k * n, |row, j| shift[row] + scale * etf.frame[(row, j / n)]);
    FeatureSet::new(h, k, n).context(|| "end point".into())
}

/// Random class means plus unit Gaussian noise.
fn random_start<R: Rng>(r: &mut R, k: usize, n: usize, d: usize) -> Result<FeatureSet> {
    let means = rng::gaussian_matrix(r, d, k, 1.0);
    let noise = rng::gaussian_matrix(r, d, k * n, 1.0);
    let h = DMatrix::from_fn(d, k * n, |row, j| means[(row, j / n)] + noise[(row, j)]);
    FeatureSet::new(h, k, n).context(|| "start point".into())
}

fn centered(h: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = h.column_mean();
    let mut c = h.clone();
    for mut col in c.column_iter_mut() {
        col -= &mean;
    }
    c
}

pub fn theorem1(p: &TheoremParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let mut table = Table::new(&[
        "path",
        "num_classes",
        "per_class",
        "dim",
        "attempts",
        "assumption",
        "start_value",
        "end_value",
        "verdict",
    ]);
    let mut verdicts = Vec::with_capacity(p.paths);
    let mut max_end = 0.0f64;
    for i in 0..p.paths {
        let (k, n, d) = p.shape(i);
        let mut r = path_stream(seed, i);
        let end = collapsed_end(&mut r, k, n, d)?;
        let mut attempts = 0;
        let path = loop {
            attempts += 1;
            let start = random_start(&mut r, k, n, d)?;
            let path = InterpolationPath::with_uniform_grid(start, end.clone(), p.grid_points)
                .context(|| format!("path {i}"))?;
            if check_theorem1_assumption(&path).0 {
                break path;
            }
            if attempts == p.max_attempts {
                return Err(HarnessError::Core {
                    context: format!("path {i}"),
                    source: PfcError::Validation(format!(
                        "no start satisfied the inner-product condition in {attempts} draws"
                    )),
                });
            }
        };
        let (_, assumption) = check_theorem1_assumption(&path);
        let target = EtfFrame::canonical(k).context(|| "target frame".into())?;
        let curve = metric_curve(&path, MetricKind::Pfc1, &target).context(|| format!("path {i}"))?;
        let verdict = curve.monotonicity(p.slack);
        let end_value = curve.values[curve.values.len() - 1];
        max_end = max_end.max(end_value);
        verdicts.push(verdict);
        table.push(vec![
            i.into(),
            k.into(),
            n.into(),
            d.into(),
            attempts.into(),
            assumption.into(),
            curve.values[0].into(),
            end_value.into(),
            verdict.label().as_str().into(),
        ]);
    }
    out.table("verdicts.csv", &table)?;
    out.json(
        "summary.json",
        &json!({
            "metric": MetricKind::Pfc1.name(),
            "paths": p.paths,
            "verdicts": verdict_counts(&verdicts),
            "max_end_value": max_end,
        }),
    )
}

pub fn theorem2(p: &TheoremParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let mut table = Table::new(&[
        "path",
        "num_classes",
        "per_class",
        "dim",
        "transport",
        "start_value",
        "end_value",
        "verdict",
    ]);
    let mut verdicts = Vec::with_capacity(p.paths);
    let mut max_end = 0.0f64;
    for i in 0..p.paths {
        let (k, n, d) = p.shape(i);
        let mut r = path_stream(seed, i);
        let end = collapsed_end(&mut r, k, n, d)?;
        let delta = centered(&rng::gaussian_matrix(&mut r, d, k * n, 1.0));
        let budget = p.transport_ratio * centered(end.features()).norm();
        let start = end.features() + &delta * (budget / delta.norm());
        let start = FeatureSet::new(start, k, n).context(|| format!("path {i}"))?;
        let transport = (centered(start.features()) - centered(end.features())).norm();
        let path = InterpolationPath::with_uniform_grid(start, end, p.grid_points).context(|| format!("path {i}"))?;
        let target = EtfFrame::canonical(k).context(|| "target frame".into())?;
        let curve = metric_curve(&path, MetricKind::Pfc2, &target).context(|| format!("path {i}"))?;
        let verdict = curve.monotonicity(p.slack);
        let end_value = curve.values[curve.values.len() - 1];
        max_end = max_end.max(end_value);
        verdicts.push(verdict);
        table.push(vec![
            i.into(),
            k.into(),
            n.into(),
            d.into(),
            transport.into(),
            curve.values[0].into(),
            end_value.into(),
            verdict.label().as_str().into(),
        ]);
    }
    out.table("verdicts.csv", &table)?;
    out.json(
        "summary.json",
        &json!({
            "metric": MetricKind::Pfc2.name(),
            "paths": p.paths,
            "transport_ratio": p.transport_ratio,
            "verdicts": verdict_counts(&verdicts),
            "max_end_value": max_end,
        }),
    )
}
