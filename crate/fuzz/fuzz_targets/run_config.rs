#![no_main]

use libfuzzer_sys::fuzz_target;
use symgcp::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text, "fuzz.toml") {
        let _ = cfg.loss_spec();
        let _ = cfg.optimizer();
        for order in 1..6 {
            let _ = cfg.partition_for(order);
        }
    }
});
