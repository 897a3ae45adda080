#![no_main]

use curvflow::io::obj::{format_obj, parse_obj};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = parse_obj(text) {
        assert_eq!(parse_obj(&format_obj(&mesh)).expect("written mesh parses"), mesh);
    }
});
