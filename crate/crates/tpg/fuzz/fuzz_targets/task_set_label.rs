//! Task-set labels ("0,2,4") select champions from checkpoints; the parser
//! must never panic and accepted labels must round-trip.

#![no_main]
use libfuzzer_sys::fuzz_target;
use tpg::evolve::TaskSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Some(set) = TaskSet::parse_label(text) {
            assert_eq!(TaskSet::parse_label(&set.label()), Some(set));
        }
    }
});
