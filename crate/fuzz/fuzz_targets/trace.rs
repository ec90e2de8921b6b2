#![no_main]

use dogwalk_core::trace::{read_csv, to_csv_string, RunMeta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_csv(data) {
        // Re-encoding a parsed trace is stable.
        let text = to_csv_string(&records);
        let again = read_csv(text.as_bytes()).expect("own output parses");
        assert_eq!(to_csv_string(&again), text);
    }
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = RunMeta::from_json(s);
    }
});
