#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // parsing must be total: typed errors, never panics or huge allocations
    if let Ok(parsed) = gslr::pipeline::read_array_bytes(data) {
        // anything that parses must re-serialize and re-parse identically
        let bytes = gslr::pipeline::write_array_bytes(&parsed);
        let again = gslr::pipeline::read_array_bytes(&bytes).expect("round trip re-parses");
        assert_eq!(again, parsed);
    }
});
