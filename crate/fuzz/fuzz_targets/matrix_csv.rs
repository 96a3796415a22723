#![no_main]

use libfuzzer_sys::{fuzz_target, Corpus};
use symgcp::io::{parse_matrix_csv, write_matrix_csv};

fuzz_target!(|data: &[u8]| -> Corpus {
    let Ok(text) = std::str::from_utf8(data) else {
        return Corpus::Reject;
    };
    let Ok(a) = parse_matrix_csv(text, "fuzz") else {
        return Corpus::Keep;
    };
    let mut out = Vec::new();
    write_matrix_csv(&mut out, &a).unwrap();
    let back = parse_matrix_csv(std::str::from_utf8(&out).unwrap(), "fuzz").expect("roundtrip");
    assert_eq!(back, a);
    Corpus::Keep
});
