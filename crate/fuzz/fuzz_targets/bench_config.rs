// SPDX-License-Identifier: Apache-2.0
#![no_main]

use dpweibull::harness::BenchmarkSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = BenchmarkSpec::from_toml(text) {
        assert!(spec.trials >= 1);
        assert!(spec.epsilons.iter().all(|e| *e > 0.0));
    }
});
