//! One function per experiment kind. Each writes its artifacts through an
//! [`ArtifactWriter`](crate::manifest::ArtifactWriter).

pub mod geometry;
pub mod resnet;
pub mod surrogate;

use std::collections::BTreeMap;

use pfc_core::geodesic::Monotonicity;
use pfc_core::rng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for the `i`-th generated path or instance.
pub(crate) fn path_stream(seed: u64, i: usize) -> ChaCha8Rng {
    rng::stream(seed, rng::STREAM_PATH + ((i as u64 + 1) << 40))
}

/// How many curves got each monotonicity label; violations are pooled.
pub(crate) fn verdict_counts(verdicts: &[Monotonicity]) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::from([("strictly-decreasing", 0), ("nonincreasing", 0), ("violated", 0)]);
    for v in verdicts {
        let key = match v {
            Monotonicity::StrictlyDecreasing => "strictly-decreasing",
            Monotonicity::Nonincreasing => "nonincreasing",
            Monotonicity::Violated(_) => "violated",
        };
        *counts.get_mut(key).unwrap() += 1;
    }
    counts
}

/// `Option<f64>` as JSON, with `null` for `None` and non-finite values.
pub(crate) fn num_or_null(v: Option<f64>) -> serde_json::Value {
    match v {
        Some(x) if x.is_finite() => serde_json::json!(x),
        _ => serde_json::Value::Null,
    }
}
