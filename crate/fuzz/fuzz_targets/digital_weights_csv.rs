#![no_main]

use antijam_core::io::{read_digital_weights, write_digital_weights};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(w) = read_digital_weights(data) {
        let mut buf = Vec::new();
        write_digital_weights(&mut buf, &w).expect("parsed weights serialize");
        assert_eq!(read_digital_weights(buf.as_slice()).expect("serialized weights parse"), w);
    }
});
