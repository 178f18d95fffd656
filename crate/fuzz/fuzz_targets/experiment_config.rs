#![no_main]
use libfuzzer_sys::fuzz_target;
use pfc_harness::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        cfg.validate().expect("parsed configs are valid");
        let _ = cfg.to_json();
    }
});
