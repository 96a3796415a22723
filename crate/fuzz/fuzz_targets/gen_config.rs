#![no_main]

use libfuzzer_sys::fuzz_target;
use symgcp::config::GenConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = GenConfig::parse(text, "fuzz.toml") {
            let _ = cfg.binary().validate();
        }
    }
});
