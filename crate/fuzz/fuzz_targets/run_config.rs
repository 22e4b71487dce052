#![no_main]

use libfuzzer_sys::fuzz_target;
use mnas_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::from_toml(text) {
        let _ = config.search_config();
    }
});
