#![no_main]

use libfuzzer_sys::fuzz_target;
use mnas_core::space::{decode, encode};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = decode(text) {
        // anything accepted must survive a round trip
        let again = decode(&encode(&g)).expect("re-decode");
        assert_eq!(again, g);
    }
});
