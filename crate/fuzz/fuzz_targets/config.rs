#![no_main]

use dogwalk_core::config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(runs) = config::load(text, &[]) {
        // Anything accepted must dump and reload to the same scenarios.
        for def in &runs {
            let dumped = config::dump(def).expect("accepted scenario dumps");
            let back = config::load(&dumped, &[]).expect("dump reloads");
            assert_eq!(back.len(), 1);
            assert_eq!(config::dump(&back[0]).unwrap(), dumped);
        }
    }
});
