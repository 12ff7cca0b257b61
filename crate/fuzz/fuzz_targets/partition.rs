#![no_main]

use libfuzzer_sys::fuzz_target;

use spectral_coloring::io::{parse_partition, write_partition};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_partition(text) {
        assert_eq!(parse_partition(&write_partition(&p)).expect("written partition parses"), p);
    }
});
