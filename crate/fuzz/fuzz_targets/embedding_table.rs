#![no_main]

use coral::embeddings::load_table_bytes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = load_table_bytes(data);
});
