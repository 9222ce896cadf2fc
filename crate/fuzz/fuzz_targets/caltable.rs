#![no_main]

use drivestack::controller::CalibrationTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = CalibrationTable::read_csv(data, "fuzz") {
        // lookups on a parsed table never panic, even off the grid
        for v in [-1.0, 0.0, 7.5, 1e3] {
            for a in [-10.0, 0.0, 2.0] {
                let _ = table.lookup(v, a);
            }
        }
    }
});
