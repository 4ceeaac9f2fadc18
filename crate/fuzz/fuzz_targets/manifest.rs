#![no_main]

use coral::dataset::read_manifest;
use libfuzzer_sys::fuzz_target;
use std::io::Cursor;

fuzz_target!(|data: &[u8]| {
    let _ = read_manifest(Cursor::new(data));
});
