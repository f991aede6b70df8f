//! Fuzz the ratings CSV parser and the densification that follows it.
//!
//! Arbitrary input must produce `Ok` or a structured error, never a panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(raw) = beware::ingest::parse_csv(text) {
            let _ = beware::ingest::densify(&raw, 8, 8);
        }
    }
});
