#![no_main]

use libfuzzer_sys::fuzz_target;

// The CSV reader accepts arbitrary bytes; anything invalid must surface as
// a ParseError, never a panic.
fuzz_target!(|data: &[u8]| {
    let _ = ordibound_cli::io::parse_unit_csv(data);
});
