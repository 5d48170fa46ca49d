#![no_main]

use boselat::config::GateName;
use boselat::pulses::{ControlSlot, ShapeFamily};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(slot) = text.parse::<ControlSlot>() {
        let shown = slot.to_string();
        assert_eq!(shown.parse::<ControlSlot>().unwrap(), slot);
    }
    let _ = text.parse::<GateName>();
    let _ = text.parse::<ShapeFamily>();
});
