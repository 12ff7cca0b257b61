#![no_main]

use libfuzzer_sys::fuzz_target;

use spectral_coloring::instances::Manifest;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = Manifest::parse(&text);
});
