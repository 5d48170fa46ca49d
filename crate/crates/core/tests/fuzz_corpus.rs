//! Replays the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::path::PathBuf;

use boselat::config::{GateName, ScenarioConfig};
use boselat::pulses::{ControlSlot, Pulse, ShapeFamily};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = String::from_utf8(std::fs::read(&p).unwrap()).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn parse_config_seeds() {
    let mut valid = 0;
    for (path, text) in seeds("parse_config") {
        let cfg = ScenarioConfig::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if cfg.validate().is_ok() {
            valid += 1;
        }
        let _ = cfg.register();
    }
    assert!(valid >= 5);
}

#[test]
fn config_round_trip_seeds() {
    for (path, text) in seeds("config_round_trip") {
        let Ok(cfg) = ScenarioConfig::parse(&text) else { continue };
        if cfg.validate().is_err() {
            continue;
        }
        let effective = cfg.effective();
        let emitted = effective.to_toml().unwrap();
        let again = ScenarioConfig::parse(&emitted).unwrap_or_else(|e| panic!("{}: {e}\n{emitted}", path.display()));
        assert_eq!(again, effective, "{}", path.display());
        assert_eq!(again.to_toml().unwrap(), emitted);
    }
}

#[test]
fn parse_sampled_seeds() {
    let mut ok = 0;
    for (_, text) in seeds("parse_sampled") {
        if let Ok(p) = Pulse::parse_sampled(&text) {
            p.validate().unwrap();
            let b = p.breakpoints();
            assert!(p.integral(b[0], b[b.len() - 1]).is_finite());
            ok += 1;
        }
    }
    assert_eq!(ok, 3);
}

#[test]
fn parse_slot_seeds() {
    for (_, text) in seeds("parse_slot") {
        if let Ok(slot) = text.parse::<ControlSlot>() {
            assert_eq!(slot.to_string().parse::<ControlSlot>().unwrap(), slot);
        }
        let _ = text.parse::<GateName>();
        let _ = text.parse::<ShapeFamily>();
    }
    assert_eq!("mu.1-0".parse::<ControlSlot>().unwrap(), ControlSlot::Mu(0, 1));
    assert!("mu.2-2".parse::<ControlSlot>().is_err());
}
