#![no_main]

use antijam_core::impairments::ImpairmentModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ImpairmentModel::from_json(text) {
        let again = m.to_json().expect("parsed model serializes");
        assert_eq!(ImpairmentModel::from_json(&again).expect("serialized model parses"), m);
    }
});
