#![no_main]

use libfuzzer_sys::fuzz_target;
use orlicz_core::verify::{CounterexampleConfig, ProbeSuite};
use orlicz_core::weights::{FamilySpec, SetSampler};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(suite) = serde_json::from_str::<ProbeSuite>(text) {
        let _ = suite.validate();
    }
    let _ = serde_json::from_str::<CounterexampleConfig>(text);
    let _ = serde_json::from_str::<FamilySpec>(text);
    let _ = serde_json::from_str::<SetSampler>(text);
});
