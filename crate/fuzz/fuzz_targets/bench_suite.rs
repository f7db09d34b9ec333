#![no_main]

use emmfit_core::bench::BenchSuite;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(suite) = BenchSuite::from_json(text) {
            let _ = suite.run_count();
        }
    }
});
