use nalgebra::DMatrix;
use serde_json::json;

use pfc_core::io::write_feature_set_string;
use pfc_core::rank::spearman;
use pfc_core::resnet::GaussianMixture;
use pfc_core::surrogate::{
    collapse_multilayer, descend_intermediates, multilayer_objective, objective, solve_observed, sweep_lambda, Loss,
    SolveOptions, SolveProblem,
};
use pfc_core::{alignment, pfc_report, EtfFrame, FeatureSet, PfcReport};
use pfc_core::rng;

use crate::config::{EquivalenceParams, SolveParams, SweepParams};
use crate::error::{Context, Result};
use crate::manifest::ArtifactWriter;
use crate::table::Table;

use super::num_or_null;

pub const TRACE_COLUMNS: [&str; 7] = ["lambda", "epoch", "objective", "pfc1", "pfc2", "pfc3", "alignment"];

fn loss_of(name: &str) -> Loss {
    Loss::parse(name).expect("validated")
}

fn data(p: &SolveParams, seed: u64) -> Result<FeatureSet> {
    let sample = GaussianMixture::new(p.num_classes, p.dim, p.per_class, p.mean_scale)
        .generate(seed)
        .context(|| "generating data".into())?;
    Ok(sample.features)
}

fn options(p: &SolveParams) -> SolveOptions {
    SolveOptions {
        lr: p.lr,
        epochs: p.epochs,
        init_scale: p.init_scale,
        trace_stride: p.trace_stride,
        grad_tol: p.grad_tol,
    }
}

fn report_json(r: &PfcReport) -> serde_json::Value {
    json!({ "pfc1": r.pfc1, "pfc2": r.pfc2, "pfc3": r.pfc3 })
}

fn solve_run(problem: &SolveProblem, x: &FeatureSet, p: &SolveParams, out: &mut ArtifactWriter) -> Result<()> {
    let (k, n) = (p.num_classes, p.per_class);
    let target = EtfFrame::canonical(k).context(|| "target frame".into())?;
    let mut table = Table::new(&TRACE_COLUMNS);
    let mut last = None;
    let result = solve_observed(problem, &options(p), |epoch, _, h, value| {
        let fs = FeatureSet::new(h.clone(), k, n)?;
        let r = pfc_report(&fs, &target)?;
        let a = alignment(h, x.features())?;
        table.push(vec![p.lambda.into(), epoch.into(), value.into(), r.pfc1.into(), r.pfc2.into(), r.pfc3.into(), a.into()]);
        last = Some((r, a));
        Ok(())
    })
    .context(|| "solving".into())?;
    let (final_report, final_alignment) = last.expect("the final epoch is always observed");
    let data_report = pfc_report(x, &target).context(|| "data metrics".into())?;
    let objective_nonincreasing = result
        .objective_trace
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 1e-9 * w[0].1.abs());

    out.table("trace.csv", &table)?;
    let h = FeatureSet::new(result.h.clone(), k, n).context(|| "final features".into())?;
    out.text("features.txt", &write_feature_set_string(&h))?;
    out.text("data.txt", &write_feature_set_string(x))?;
    out.json(
        "summary.json",
        &json!({
            "model": if problem.data().is_some() { "mufm" } else { "ufm" },
            "loss": problem.loss().name(),
            "data": report_json(&data_report),
            "final": {
                "objective": result.final_objective,
                "grad_norm": result.final_grad_norm,
                "epochs_run": result.epochs_run,
                "metrics": report_json(&final_report),
                "alignment": final_alignment,
            },
            "objective_nonincreasing": objective_nonincreasing,
        }),
    )
}

pub fn solve_mufm(p: &SolveParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let x = data(p, seed)?;
    let problem = SolveProblem::mufm(
        loss_of(&p.loss),
        x.features().clone(),
        p.num_classes,
        p.per_class,
        p.lambda_w,
        p.lambda,
        seed,
    )
    .context(|| "MUFM problem".into())?;
    solve_run(&problem, &x, p, out)
}

pub fn solve_ufm(p: &SolveParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let x = data(p, seed)?;
    let problem = SolveProblem::ufm(loss_of(&p.loss), p.num_classes, p.dim, p.per_class, p.lambda_w, p.lambda, seed)
        .context(|| "UFM problem".into())?;
    solve_run(&problem, &x, p, out)
}

pub fn sweep(p: &SweepParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let base = p.base();
    let x = data(&base, seed)?;
    let problem = SolveProblem::mufm(
        loss_of(&p.loss),
        x.features().clone(),
        p.num_classes,
        p.per_class,
        p.lambda_w,
        base.lambda,
        seed,
    )
    .context(|| "MUFM problem".into())?;
    let rows = sweep_lambda(&problem, &p.lambdas, &options(&base)).context(|| "sweep".into())?;
    let target = EtfFrame::canonical(p.num_classes).context(|| "target frame".into())?;
    let data_report = pfc_report(&x, &target).context(|| "data metrics".into())?;

    let mut table = Table::new(&TRACE_COLUMNS);
    for r in &rows {
        table.push(vec![
            r.lambda.into(),
            r.result.epochs_run.into(),
            r.result.final_objective.into(),
            r.report.pfc1.into(),
            r.report.pfc2.into(),
            r.report.pfc3.into(),
            r.alignment.into(),
        ]);
    }
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let col = |f: fn(&pfc_core::surrogate::SweepRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (p1, p2, al) = (col(|r| r.report.pfc1), col(|r| r.report.pfc2), col(|r| r.alignment));
    // Grid points where the features end up more collapsed than the data.
    let more_collapsed: Vec<f64> = rows
        .iter()
        .filter(|r| r.report.pfc1 < data_report.pfc1)
        .map(|r| r.lambda)
        .collect();
    out.table("sweep.csv", &table)?;
    out.json(
        "summary.json",
        &json!({
            "data": report_json(&data_report),
            "spearman": {
                "lambda_vs_pfc1": num_or_null(spearman(&lambdas, &p1)),
                "lambda_vs_pfc2": num_or_null(spearman(&lambdas, &p2)),
                "lambda_vs_alignment": num_or_null(spearman(&lambdas, &al)),
            },
            "more_collapsed_than_data": {
                "count": more_collapsed.len(),
                "smallest_lambda": num_or_null(more_collapsed.iter().copied().reduce(f64::min)),
                "largest_lambda": num_or_null(more_collapsed.iter().copied().reduce(f64::max)),
            },
        }),
    )
}

pub fn equivalence(p: &EquivalenceParams, seed: u64, out: &mut ArtifactWriter) -> Result<()> {
    let mut table = Table::new(&[
        "loss",
        "blocks",
        "max_layer_error",
        "penalty_descent",
        "penalty_closed_form",
        "objective_multilayer",
        "objective_collapsed",
        "objective_rel_error",
        "expansion_rel_error",
    ]);
    let x = GaussianMixture::new(p.num_classes, p.dim, p.per_class, 1.0)
        .generate(seed)
        .context(|| "generating data".into())?
        .features
        .into_features();
    let mut r = rng::stream(seed, rng::STREAM_INIT);
    let w = rng::gaussian_matrix(&mut r, p.num_classes, p.dim, 1.0);
    let h = rng::gaussian_matrix(&mut r, p.dim, x.ncols(), 1.0);
    let mut worst = [0.0f64; 3];
    for name in &p.losses {
        let loss = loss_of(name);
        let problem = SolveProblem::mufm(loss, x.clone(), p.num_classes, p.per_class, p.lambda_w, p.lambda, seed)
            .context(|| "MUFM problem".into())?;
        for &l in &p.blocks {
            let ctx = || format!("L = {l}");
            let (closed, penalty) = collapse_multilayer(&x, &h, l).context(ctx)?;
            let found = descend_intermediates(&x, &h, l, seed, p.descent_lr, p.descent_steps).context(ctx)?;
            let layer_err = found.iter().zip(&closed).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
            let descent_penalty = pfc_core::surrogate::transport_penalty(&found);
            let multi = multilayer_objective(&problem, &w, &closed[1..]).context(ctx)?;
            let rescaled = problem.with_lambda(p.lambda / l as f64).context(ctx)?;
            let single = objective(&rescaled, &w, &h).context(ctx)?;
            let obj_err = (multi - single).abs() / single.abs();
            let exp_err = expansion_error(&h, &x, rescaled.lambda());
            worst = [worst[0].max(layer_err), worst[1].max(obj_err), worst[2].max(exp_err)];
            table.push(vec![
                loss.name().into(),
                l.into(),
                layer_err.into(),
                descent_penalty.into(),
                penalty.into(),
                multi.into(),
                single.into(),
                obj_err.into(),
                exp_err.into(),
            ]);
        }
    }
    out.table("equivalence.csv", &table)?;
    out.json(
        "summary.json",
        &json!({
            "max_layer_error": worst[0],
            "max_objective_rel_error": worst[1],
            "max_expansion_rel_error": worst[2],
        }),
    )
}

/// Relative gap between `(λ/2N)‖H − X‖²` and its expansion
/// `(λ/2N)‖H‖² − (λ/N)Tr(XHᵀ) + (λ/2N)‖X‖²`.
pub fn expansion_error(h: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> f64 {
    let c = lambda / (2.0 * h.ncols() as f64);
    let direct = c * (h - x).norm_squared();
    let expanded = c * h.norm_squared() - 2.0 * c * (x * h.transpose()).trace() + c * x.norm_squared();
    (direct - expanded).abs() / direct.abs()
}
