#![no_main]

use dicke_control::protocol::ProtocolParams;
use libfuzzer_sys::fuzz_target;

// Accepted protocols survive a write/read cycle unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = ProtocolParams::from_json(text) {
        let again = ProtocolParams::from_json(&p.to_json().expect("serializable")).expect("round trip parses");
        assert_eq!(p, again);
    }
});
