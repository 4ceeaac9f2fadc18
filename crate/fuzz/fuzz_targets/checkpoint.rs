#![no_main]

use coral::ddpg::load_checkpoint_bytes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = load_checkpoint_bytes(data);
});
