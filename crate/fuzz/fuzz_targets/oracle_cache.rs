#![no_main]

use coral::oracle::parse_cache_file;
use libfuzzer_sys::fuzz_target;
use std::io::Cursor;

fuzz_target!(|data: &[u8]| {
    let _ = parse_cache_file(Cursor::new(data));
});
