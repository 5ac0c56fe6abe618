#![no_main]

use antijam_core::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::from_toml(text) {
        // Anything that validates must survive a round trip.
        let again = cfg.to_toml().expect("validated config serializes");
        ScenarioConfig::from_toml(&again).expect("serialized config parses");
    }
});
