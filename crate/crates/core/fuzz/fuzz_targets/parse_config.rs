#![no_main]

use boselat::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScenarioConfig::parse(text) {
        // validation may reject, but must not panic
        let _ = cfg.validate();
        let _ = cfg.register();
        let _ = cfg.pulse_slots();
    }
});
