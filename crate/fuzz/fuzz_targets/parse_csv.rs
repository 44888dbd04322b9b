// SPDX-License-Identifier: Apache-2.0
#![no_main]

use dpweibull::data::{normalize, parse_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(raw) = parse_csv(data, "time", "event") else { return };
    assert_eq!(raw.times().len(), raw.events().len());
    assert!(raw.times().iter().all(|t| t.is_finite() && *t > 0.0));
    if let Ok(d) = normalize(&raw, 6.0) {
        let floor = (-6.0f64).exp();
        assert!(d.times().iter().all(|t| (floor..=1.0).contains(t)));
    }
});
