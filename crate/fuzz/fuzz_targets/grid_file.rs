#![no_main]

use libfuzzer_sys::fuzz_target;
use orlicz_core::grid::GridFunction;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = GridFunction::parse(text) {
        let again = GridFunction::parse(&f.to_grid_string()).expect("printed grid parses");
        assert_eq!(f.geometry(), again.geometry());
        assert!(f.values().iter().zip(again.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
