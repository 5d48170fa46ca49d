#![no_main]

use boselat::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ScenarioConfig::parse(text) else {
        return;
    };
    if cfg.validate().is_err() {
        return;
    }
    let effective = cfg.effective();
    let emitted = effective.to_toml().expect("valid configs serialize");
    let again = ScenarioConfig::parse(&emitted).expect("emitted config parses");
    assert_eq!(again, effective);
    assert_eq!(again.to_toml().unwrap(), emitted);
});
