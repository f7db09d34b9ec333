#![no_main]

use emmfit_core::io::read_samples_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = read_samples_csv(data) {
        assert!(samples.nrows() > 0 && samples.ncols() > 0);
        assert!(samples.iter().all(|x| x.is_finite()));
    }
});
