#![no_main]

use coral::dataset::{parse_records, FieldConfig};
use libfuzzer_sys::fuzz_target;
use std::io::Cursor;

fuzz_target!(|data: &[u8]| {
    let _ = parse_records(Cursor::new(&b""[..]), Cursor::new(data), &FieldConfig::default());
});
