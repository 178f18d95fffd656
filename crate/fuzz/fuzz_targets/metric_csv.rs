#![no_main]
use libfuzzer_sys::fuzz_target;
use pfc_harness::parse_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_table(text) {
        let again = parse_table(&table.to_csv_string().expect("write")).expect("reparse");
        assert_eq!(table.header, again.header);
        assert_eq!(table.rows.len(), again.rows.len());
    }
});
