#![no_main]

use libfuzzer_sys::fuzz_target;
use volterra_sim::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Anything accepted must echo back to an equivalent configuration.
        if let Ok(cfg) = parse_config(text) {
            let echo: String = cfg
                .resolved()
                .into_iter()
                .map(|(k, v)| format!("{k} = {v}\n"))
                .collect();
            let again = parse_config(&echo).expect("resolved config must reparse");
            assert_eq!(again.resolved(), cfg.resolved());
        }
    }
});
