#![no_main]

use libfuzzer_sys::fuzz_target;
use mnas_core::eval::bridge::{parse_worker_line, WorkerMessage};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(WorkerMessage::Result {
        fitness, wall_seconds, ..
    }) = parse_worker_line(line)
    {
        assert!((0.0..=1.0).contains(&fitness));
        assert!(wall_seconds.is_finite() && wall_seconds >= 0.0);
    }
});
