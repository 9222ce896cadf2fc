#![no_main]

use drivestack_cli::train::TrainFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = TrainFile::from_json_str(text, "fuzz");
    }
});
