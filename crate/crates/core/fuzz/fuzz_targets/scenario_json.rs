#![no_main]

use libfuzzer_sys::fuzz_target;
use pareto_region::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = Scenario::from_json_slice(data) {
        let back = Scenario::from_json_str(&s.to_json_string()).expect("round trip");
        assert_eq!(back.fingerprint(), s.fingerprint());
    }
});
