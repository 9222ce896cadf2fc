#![no_main]

use drivestack_cli::ablation::Matrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Matrix::from_json_str(text, "fuzz");
    }
});
