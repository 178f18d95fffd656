use rayon::prelude::*;

use super::{solve, ModelKind, SolveOptions, SolveProblem, SolveResult};
use crate::error::{PfcError, Result};
use crate::etf::EtfFrame;
use crate::features::FeatureSet;
use crate::metrics::{alignment, pfc_report, PfcReport};

/// Final-state metrics of one solve in a λ sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub report: PfcReport,
    /// `‖H/‖H‖ − X/‖X‖‖_F`.
    pub alignment: f64,
    pub result: SolveResult,
}

/// Solves `base` once per `λ`, sharing data and seed. Rows come back in the
/// order of `lambdas`; solves run in parallel.
pub fn sweep_lambda(base: &SolveProblem, lambdas: &[f64], opts: &SolveOptions) -> Result<Vec<SweepRow>> {
    let x = match (base.kind(), base.data()) {
        (ModelKind::Mufm, Some(x)) => x,
        _ => return Err(PfcError::Validation("a lambda sweep needs a MUFM problem".into())),
    };
    if lambdas.is_empty() {
        return Err(PfcError::Validation("empty lambda grid".into()));
    }
    let target = EtfFrame::canonical(base.num_classes())?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let annotate = |e: PfcError| PfcError::SweepPoint { lambda, source: Box::new(e) };
            let p = base.with_lambda(lambda).map_err(annotate)?;
            let result = solve(&p, opts).map_err(annotate)?;
            let fs = FeatureSet::new(result.h.clone(), p.num_classes(), p.per_class()).map_err(annotate)?;
            let report = pfc_report(&fs, &target).map_err(annotate)?;
            let alignment = alignment(&result.h, x).map_err(annotate)?;
            Ok(SweepRow { lambda, report, alignment, result })
        })
        .collect()
}
