#![no_main]

use evoproc::dump::ProcessDump;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = ProcessDump::decode(data) {
        assert_eq!(d.encode(), data);
    }
});
