//! Generator specs are only parsed and validated; generating could be arbitrarily large.

#![no_main]

use libfuzzer_sys::fuzz_target;

use spectral_coloring::instances::parse_generator_spec;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(spec) = parse_generator_spec(&text) {
        let json = serde_json::to_string(&spec).expect("spec serializes");
        assert_eq!(parse_generator_spec(&json).expect("serialized spec parses"), spec);
    }
});
