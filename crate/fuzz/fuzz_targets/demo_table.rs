#![no_main]

use drivestack::irl::read_demo_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_demo_table(data, "fuzz");
});
