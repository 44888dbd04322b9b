// SPDX-License-Identifier: Apache-2.0
#![no_main]

use dpweibull::harness::{parse_report, write_report_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = parse_report(data) else { return };
    // Anything accepted must survive a write/parse round trip. NaN fields
    // compare unequal, so only the row count is checked for those.
    let mut buf = Vec::new();
    write_report_csv(&rows, &mut buf).expect("writing to memory");
    let again = parse_report(buf.as_slice()).expect("reparse of emitted report");
    assert_eq!(again.len(), rows.len());
    let finite = rows
        .iter()
        .all(|r| !r.mdae.is_nan() && !r.exact_value.is_nan() && !r.epsilon_per_param.is_nan());
    if finite {
        assert_eq!(again, rows);
    }
});
