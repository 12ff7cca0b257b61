#![no_main]

use libfuzzer_sys::fuzz_target;

use spectral_coloring::planting::PlantedManifest;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = PlantedManifest::parse(&text);
});
