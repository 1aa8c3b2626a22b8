#![no_main]

use dicke_control::fixtures::FixtureTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = FixtureTable::from_json(text) {
        for row in &table.rows {
            let _ = row.params();
            let _ = row.identity_steps();
        }
    }
});
