#![no_main]

use apla::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_toml_str(s) {
            let _ = cfg.sim.validate();
            // finite configs survive a round trip
            if cfg.sim.epsilon.is_finite() && cfg.sim.nu.is_finite() {
                let _ = RunConfig::from_toml_str(&cfg.to_toml_string());
            }
        }
        // overrides share the parser
        let mut cfg = RunConfig::default();
        let _ = cfg.apply_override(s);
    }
});
