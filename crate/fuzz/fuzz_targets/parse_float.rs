#![no_main]

use curvflow::io::floats;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Some(v) = floats::parse(text) {
        let back = floats::parse(&floats::format(v)).expect("formatted float parses");
        assert!(back == v || (back.is_nan() && v.is_nan()));
    }
});
