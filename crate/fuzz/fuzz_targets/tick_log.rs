#![no_main]

use drivestack::sim::log::read_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_log(data, "fuzz");
});
