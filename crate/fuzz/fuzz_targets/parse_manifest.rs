#![no_main]

use libfuzzer_sys::fuzz_target;
use volterra_sim::manifest::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(m) = parse_manifest(&text) {
        assert_eq!(parse_manifest(&m.render()).unwrap(), m);
    }
});
