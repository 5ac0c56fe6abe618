#![no_main]

use antijam_core::unfold::CvnnWeights;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(w) = CvnnWeights::from_json(text) {
        let again = w.to_json().expect("parsed weights serialize");
        CvnnWeights::from_json(&again).expect("serialized weights parse");
    }
});
