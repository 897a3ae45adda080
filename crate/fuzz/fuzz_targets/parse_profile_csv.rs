#![no_main]

use curvflow::io::profile_csv::{format_profile_csv, parse_profile_csv};
use libfuzzer_sys::fuzz_target;

// first byte picks the dimension
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let n = 2 + usize::from(n % 4);
    if let Ok(profile) = parse_profile_csv(text, n) {
        if let Ok(written) = format_profile_csv(&profile) {
            assert_eq!(parse_profile_csv(&written, n).expect("written profile parses"), profile);
        }
    }
});
