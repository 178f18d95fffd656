//! Experiment runner for the pfc-core toolkit.
//!
//! Each experiment kind reads a validated [`ExperimentConfig`], writes CSV
//! and JSON artifacts into its output directory and finishes with a
//! `manifest.json` that echoes the resolved config and checksums every
//! artifact. Artifacts hold no timings or host details, so a rerun with the
//! same config produces the same checksums.

pub mod config;
pub mod error;
pub mod manifest;
pub mod recipes;
pub mod table;

pub use config::{parse_config, resolve, ExperimentConfig, ExperimentKind, Overrides, Params};
pub use error::{HarnessError, Result};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use table::{parse_table, Cell, Table};

use manifest::ArtifactWriter;

/// Runs one experiment and returns its manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let mut out = ArtifactWriter::create(&cfg.out)?;
    match (&cfg.params, cfg.kind) {
        (Params::EtfCheck(p), _) => recipes::geometry::etf_check(p, cfg.seed, &mut out)?,
        (Params::Interpolate(p), _) => recipes::geometry::interpolate(p, cfg.seed, &mut out)?,
        (Params::Theorem(p), ExperimentKind::Theorem1) => recipes::geometry::theorem1(p, cfg.seed, &mut out)?,
        (Params::Theorem(p), _) => recipes::geometry::theorem2(p, cfg.seed, &mut out)?,
        (Params::Solve(p), ExperimentKind::SolveUfm) => recipes::surrogate::solve_ufm(p, cfg.seed, &mut out)?,
        (Params::Solve(p), _) => recipes::surrogate::solve_mufm(p, cfg.seed, &mut out)?,
        (Params::Sweep(p), _) => recipes::surrogate::sweep(p, cfg.seed, &mut out)?,
        (Params::Equivalence(p), _) => recipes::surrogate::equivalence(p, cfg.seed, &mut out)?,
        (Params::Train(p), _) => recipes::resnet::train_resnet(p, cfg.seed, &mut out)?,
        (Params::PfcReport(p), _) => recipes::resnet::pfc_report_run(p, &mut out)?,
    }
    out.finish(cfg)
}
