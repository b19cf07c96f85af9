#![no_main]

use libfuzzer_sys::fuzz_target;
use orlicz_core::covering::{select_scattered, verify_scattered, RectFamily};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(fam) = RectFamily::from_json(text) else { return };
    if fam.len() > 64 || fam.shape().iter().product::<usize>() > 1 << 16 {
        return;
    }
    let sel = select_scattered(&fam, 0.5).expect("valid family selects");
    assert!(verify_scattered(&fam, &sel, 0.5).expect("selection verifies").ok);
});
