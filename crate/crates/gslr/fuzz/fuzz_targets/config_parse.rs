#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // config parsing is total on arbitrary text
        let _ = gslr::pipeline::parse_config_str(text);
    }
});
