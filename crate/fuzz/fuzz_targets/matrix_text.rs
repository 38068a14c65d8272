#![no_main]
use libfuzzer_sys::fuzz_target;
use qho_kam::matrix_spaces::{parse_text, write_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((matrix, alpha)) = parse_text(text) {
        // anything that parses must survive a write/parse round trip
        let dumped = write_text(&matrix, alpha);
        let (back, alpha2) = parse_text(&dumped).expect("roundtrip reparse");
        assert_eq!(alpha.to_bits(), alpha2.to_bits());
        assert_eq!(matrix.entries(), back.entries());
        assert_eq!(matrix.structure(), back.structure());
    }
});
