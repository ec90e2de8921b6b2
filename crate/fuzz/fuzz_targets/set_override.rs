#![no_main]

use dogwalk_core::config::{self, Override};
use libfuzzer_sys::fuzz_target;

const BASE: &str = "schema_version = 1\nbuiltin = \"case1\"\n";

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let overrides: Result<Vec<_>, _> = text.lines().map(Override::parse).collect();
    if let Ok(overrides) = overrides {
        let _ = config::load(BASE, &overrides);
    }
});
