#![no_main]

use libfuzzer_sys::fuzz_target;
use mnas_core::metrics::parse_png;

fuzz_target!(|data: &[u8]| {
    let _ = parse_png(data);
});
