#![no_main]

use evoproc::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_json(src) {
        let back = Config::from_json(&cfg.to_json()).expect("serialized config reloads");
        assert_eq!(back.hash(), cfg.hash());
    }
});
