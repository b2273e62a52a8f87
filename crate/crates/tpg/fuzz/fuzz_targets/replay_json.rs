//! Replay-trace loading must never panic, and any trace it accepts must
//! serialize back and parse again.

#![no_main]
use libfuzzer_sys::fuzz_target;
use tpg::trace::ReplayTrace;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(trace) = ReplayTrace::from_json(text) {
            ReplayTrace::from_json(&trace.to_json()).expect("round trip parses");
        }
    }
});
