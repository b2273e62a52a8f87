//! Checkpoint loading must never panic: malformed JSON and structurally
//! broken populations are rejected with errors, and anything accepted must
//! rebuild into a live engine.

#![no_main]
use libfuzzer_sys::fuzz_target;
use tpg::checkpoint::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cp) = Checkpoint::from_json(text) {
            // validation may still reject; it must not panic
            let _ = cp.into_engine();
        }
    }
});
