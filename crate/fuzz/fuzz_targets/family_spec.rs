#![no_main]

use emmfit_core::elliptical::parse_family_kind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(kind) = parse_family_kind(text) {
            // the display form parses back to itself; compared as text so NaN round-trips
            let shown = kind.to_string();
            assert_eq!(parse_family_kind(&shown).unwrap().to_string(), shown);
        }
    }
});
