#![no_main]

use antijam_core::io::read_pattern;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_pattern(data);
});
