#![no_main]

use antijam_core::impairments::PhaseMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = PhaseMap::read_csv(data) {
        let mut buf = Vec::new();
        map.write_csv(&mut buf).expect("parsed map serializes");
        assert_eq!(PhaseMap::read_csv(buf.as_slice()).expect("serialized map parses"), map);
    }
});
