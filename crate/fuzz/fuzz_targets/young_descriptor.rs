#![no_main]

use libfuzzer_sys::fuzz_target;
use orlicz_core::young::{inverse, YoungFunction, INVERSE_TOL};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(phi) = YoungFunction::from_json(text) {
        let mut last = 0.0;
        for t in [0.0, 1e-6, 0.5, 1.0, 2.0, 1e3, 1e9] {
            let v = phi.eval(t);
            assert!(v >= last, "not monotone at {t}: {v} < {last}");
            last = v;
        }
        let _ = inverse(&phi, 1.0, INVERSE_TOL);
    }
});
