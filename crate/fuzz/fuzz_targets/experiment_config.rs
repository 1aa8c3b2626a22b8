#![no_main]

use libfuzzer_sys::fuzz_target;

// Every command schema either accepts or rejects; none may panic.
fuzz_target!(|data: &[u8]| {
    let _ = dickectl::config::accepted_schemas(data);
});
