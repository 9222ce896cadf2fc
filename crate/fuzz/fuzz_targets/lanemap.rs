#![no_main]

use drivestack::map::LaneMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = LaneMap::from_json_str(text, "fuzz");
    }
});
