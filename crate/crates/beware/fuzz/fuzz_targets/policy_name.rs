//! Fuzz the policy-name parser used by the CLI.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = text.parse::<beware::sim::Policy>();
    }
});
