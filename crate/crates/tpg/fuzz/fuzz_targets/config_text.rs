//! The key=value run-configuration parser must never panic; on success the
//! parsed config must survive a text round-trip unchanged.

#![no_main]
use libfuzzer_sys::fuzz_target;
use tpg::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            // NaN-valued fields fail validation and are exempt from the
            // equality round trip
            if cfg.validate().is_ok() {
                let reparsed = RunConfig::parse(&cfg.to_text()).expect("round trip parses");
                assert_eq!(cfg, reparsed);
            }
        }
    }
});
