#![no_main]

use asgs_flow::app::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(text) {
        // anything accepted must survive a round trip
        let again = RunConfig::from_toml(&cfg.to_toml().expect("serializes")).expect("reparses");
        assert_eq!(cfg, again);
    }
});
