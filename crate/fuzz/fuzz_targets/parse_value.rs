#![no_main]

use libfuzzer_sys::fuzz_target;
use volterra_sim::config::parse_value;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_value(text) {
        assert_eq!(parse_value(&v.to_string()).unwrap(), v);
        let _ = v.as_f64_list("fuzz");
        let _ = v.as_points("fuzz", 2);
    }
});
