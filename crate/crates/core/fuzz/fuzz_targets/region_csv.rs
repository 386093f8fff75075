#![no_main]

use libfuzzer_sys::fuzz_target;
use pareto_region::region::RegionSample;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = RegionSample::from_csv_str(text) {
        let csv = s.to_csv_string().expect("valid sample writes");
        assert_eq!(RegionSample::from_csv_str(&csv).expect("round trip"), s);
    }
});
