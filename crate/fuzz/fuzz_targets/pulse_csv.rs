#![no_main]

use dicke_control::gpg::PulseGrid;
use libfuzzer_sys::fuzz_target;

// Accepted pulse files survive a write/read cycle unchanged.
fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = PulseGrid::read_csv(data) {
        let mut out = Vec::new();
        grid.write_csv(&mut out).expect("writable");
        let again = PulseGrid::read_csv(out.as_slice()).expect("round trip parses");
        assert_eq!(grid.times, again.times);
        assert_eq!(grid.zeta, again.zeta);
        assert_eq!(grid.eta, again.eta);
    }
});
