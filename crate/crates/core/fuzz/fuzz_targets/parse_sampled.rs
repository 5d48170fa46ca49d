#![no_main]

use boselat::pulses::Pulse;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(pulse) = Pulse::parse_sampled(text) else {
        return;
    };
    pulse.validate().expect("parsed pulses are valid");
    let bps = pulse.breakpoints();
    let (t0, t1) = (bps[0], bps[bps.len() - 1]);
    let _ = pulse.value(0.5 * (t0 + t1));
    let _ = pulse.integral(t0, t1);
});
