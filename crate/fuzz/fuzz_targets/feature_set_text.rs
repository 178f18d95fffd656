#![no_main]
use libfuzzer_sys::fuzz_target;
use pfc_core::io::{parse_feature_set, write_feature_set_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(fs) = parse_feature_set(text) {
        // Whatever parses must survive a write/read cycle unchanged.
        let again = parse_feature_set(&write_feature_set_string(&fs)).expect("reparse");
        assert_eq!(fs.num_classes(), again.num_classes());
        assert_eq!(fs.per_class(), again.per_class());
        assert!(fs
            .features()
            .iter()
            .zip(again.features().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())));
    }
});
