use serde_json::json;

use pfc_core::geodesic::{interpolate, metric_curve, relative_positions, InterpolationPath, MetricKind};
use pfc_core::io::{read_feature_set, write_feature_set_string};
use pfc_core::rank::spearman;
use pfc_core::resnet::idx::load_mnist_idx;
use pfc_core::resnet::{train, GaussianMixture, TrainTrace};
use pfc_core::{effective_depth, pfc_report, EtfFrame, FeatureSet, LayerStack, PfcReport};

use crate::config::{PfcReportParams, TrainParams};
use crate::error::{Context, Result};
use crate::manifest::ArtifactWriter;
use crate::table::{Cell, Table};

use super::num_or_null;

/// Metrics of every recorded layer, the same metrics along the straight
/// line from the first to the last layer, and a JSON digest of both.
pub struct StackReport {
    pub layers: Table,
    pub geodesic: Table,
    pub summary: serde_json::Value,
}

pub fn stack_report(stack: &LayerStack, grid_points: usize, slack: f64) -> Result<StackReport> {
    let positions = relative_positions(stack).context(|| "relative positions".into())?;
    let first = &stack.layers()[0];
    let target = EtfFrame::canonical(first.num_classes()).context(|| "target frame".into())?;
    let reports = stack
        .layers()
        .iter()
        .enumerate()
        .map(|(l, fs)| pfc_report(fs, &target).context(|| format!("layer {l}")))
        .collect::<Result<Vec<PfcReport>>>()?;
    let last = stack.layers()[stack.len() - 1].clone();
    let path = InterpolationPath::with_uniform_grid(first.clone(), last, grid_points).context(|| "geodesic".into())?;

    let mut layers = Table::new(&[
        "layer",
        "relative_position",
        "pfc1",
        "pfc2",
        "pfc3",
        "geodesic_pfc1",
        "geodesic_pfc2",
        "geodesic_pfc3",
    ]);
    for (l, (t, r)) in positions.iter().zip(&reports).enumerate() {
        let predicted = interpolate(&path, *t)
            .and_then(|fs| pfc_report(&fs, &target))
            .context(|| format!("geodesic at t = {t}"))?;
        layers.push(vec![
            l.into(),
            (*t).into(),
            r.pfc1.into(),
            r.pfc2.into(),
            r.pfc3.into(),
            predicted.pfc1.into(),
            predicted.pfc2.into(),
            predicted.pfc3.into(),
        ]);
    }

    let curves = MetricKind::ALL
        .iter()
        .map(|&k| metric_curve(&path, k, &target).context(|| format!("geodesic {} curve", k.name())))
        .collect::<Result<Vec<_>>>()?;
    let mut geodesic = Table::new(&["t", "pfc1", "pfc2", "pfc3"]);
    for (i, t) in path.grid().iter().enumerate() {
        let mut row: Vec<Cell> = vec![(*t).into()];
        row.extend(curves.iter().map(|c| Cell::Num(c.values[i])));
        geodesic.push(row);
    }

    let index: Vec<f64> = (0..reports.len()).map(|l| l as f64).collect();
    let series = |f: fn(&PfcReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
    let mut monotonicity = serde_json::Map::new();
    for c in &curves {
        monotonicity.insert(c.kind.name().into(), json!(c.monotonicity(slack).label()));
    }
    let summary = json!({
        "layers": reports.len(),
        "spearman": {
            "layer_vs_pfc1": num_or_null(spearman(&index, &series(|r| r.pfc1))),
            "layer_vs_pfc2": num_or_null(spearman(&index, &series(|r| r.pfc2))),
            "layer_vs_pfc3": num_or_null(spearman(&index, &series(|r| r.pfc3))),
        },
        "geodesic_monotonicity": monotonicity,
        "effective_depth": effective_depth(stack, 0.0),
    });
    Ok(StackReport {
        layers,
        geodesic,
        summary,
    })
}

fn training_data(p: &TrainParams, seed: u64) -> Result<FeatureSet> {
    match (&p.mnist_images, &p.mnist_labels) {
        (Some(images), Some(labels)) => {
            let (fs, _) = load_mnist_idx(images, labels, p.per_class).context(|| "loading MNIST".into())?;
            Ok(fs)
        }
        _ => {
            let mixture = GaussianMixture {
                noise_std: p.noise_std,
                ..GaussianMixture::new(p.num_classes, p.input_dim, p.per_class, p.mean_scale)
            };
            Ok(mixture.generate(seed).context(|| "generating data".into())?.features)
        }
    }
}

/// One row per epoch; per-layer metric columns hold `NaN` on epochs without
/// a snapshot and for layers whose metrics are undefined.
pub fn trace_table(trace: &TrainTrace, num_layers: usize) -> Table {
    let mut header: Vec<String> = vec!["epoch".into(), "loss".into(), "accuracy".into()];
    for m in ["pfc1", "pfc2", "pfc3"] {
        header.extend((0..num_layers).map(|l| format!("{m}_l{l:02}")));
    }
    let mut table = Table::new(&header);
    for rec in &trace.records {
        let mut row: Vec<Cell> = vec![rec.epoch.into(), rec.loss.into(), rec.accuracy.into()];
        let snap = trace.snapshots.iter().find(|s| s.epoch() == rec.epoch);
        let metric = |l: usize, f: fn(&PfcReport) -> f64| {
            snap.and_then(|s| s.reports[l].as_ref()).map_or(f64::NAN, f)
        };
        for f in [|r: &PfcReport| r.pfc1, |r: &PfcReport| r.pfc2, |r: &PfcReport| r.pfc3] {
            row.extend((0..num_layers).map(|l| Cell::Num(metric(l, f))));
        }
        table.push(row);
    }
    table
}

pub fn train_resnet(p: &TrainParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let data = training_data(p, seed)?;
    let mut cfg = p.train_config(seed)?;
    cfg.input_dim = data.dim();
    cfg.num_classes = data.num_classes();
    let trace = train(&cfg, &data).context(|| "training".into())?;
    let snap = trace.final_snapshot();
    let report = stack_report(&snap.stack, p.grid_points, p.slack)?;

    out.table("trace.csv", &trace_table(&trace, snap.stack.len()))?;
    for (l, fs) in snap.stack.layers().iter().enumerate() {
        out.text(&format!("snapshot/layer_{l:02}.txt"), &write_feature_set_string(fs))?;
    }
    out.table("layers.csv", &report.layers)?;
    out.table("geodesic.csv", &report.geodesic)?;
    let last = trace.final_record();
    out.json(
        "summary.json",
        &json!({
            "final": {
                "epoch": last.epoch,
                "loss": last.loss,
                "accuracy": last.accuracy,
                "snapshot_epoch": snap.epoch(),
            },
            "parameters": trace.params.num_parameters(),
            "layers": report.summary,
        }),
    )
}

pub fn pfc_report_run(p: &PfcReportParams, out: &mut ArtifactWriter) -> Result<()> {
    let layers = p
        .stack
        .iter()
        .map(|f| read_feature_set(f).context(|| format!("reading {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let stack = LayerStack::new(layers, None).context(|| "layer stack".into())?;
    let report = stack_report(&stack, p.grid_points, p.slack)?;
    out.table("layers.csv", &report.layers)?;
    out.table("geodesic.csv", &report.geodesic)?;
    out.json("summary.json", &report.summary)
}
