#![no_main]

use libfuzzer_sys::fuzz_target;
use mnas_core::metrics::{confusion_counts, encode_pgm, parse_pgm, segmentation_metrics};

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = parse_pgm(data) {
        assert_eq!(parse_pgm(&encode_pgm(&mask)).as_ref(), Ok(&mask));
        let c = confusion_counts(&mask, &mask).unwrap();
        assert_eq!(segmentation_metrics(c).dsc, 1.0);
    }
});
