#![no_main]

use curvflow::io::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        let again = parse_config(&cfg.echo()).expect("echo of a valid config parses");
        assert_eq!(again, cfg);
    }
});
