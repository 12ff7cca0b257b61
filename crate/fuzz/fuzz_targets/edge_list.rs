//! Edge lists: parsing never panics, and anything accepted survives a write/parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

use spectral_coloring::io::{parse_edge_list, parse_edge_list_strict, write_edge_list};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_edge_list_strict(text);
    if let Ok(g) = parse_edge_list(text) {
        let again = parse_edge_list(&write_edge_list(&g)).expect("written edge list parses");
        assert_eq!(g.edges(), again.edges());
    }
});
