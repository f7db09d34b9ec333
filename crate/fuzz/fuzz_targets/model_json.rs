#![no_main]

use emmfit_core::io::{model_from_json, model_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = model_from_json(text) {
            let again = model_from_json(&model_to_json(&model).unwrap()).unwrap();
            assert_eq!(again.k(), model.k());
        }
    }
});
