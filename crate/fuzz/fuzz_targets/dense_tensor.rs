#![no_main]

use libfuzzer_sys::{fuzz_target, Corpus};
use symgcp::io::{parse_dense_tensor, write_dense_tensor};

fuzz_target!(|data: &[u8]| -> Corpus {
    let Ok(text) = std::str::from_utf8(data) else {
        return Corpus::Reject;
    };
    let Ok(t) = parse_dense_tensor(text, "fuzz") else {
        return Corpus::Keep;
    };
    let mut out = Vec::new();
    write_dense_tensor(&mut out, &t).unwrap();
    let back = parse_dense_tensor(std::str::from_utf8(&out).unwrap(), "fuzz").expect("roundtrip");
    assert_eq!(back, t);
    Corpus::Keep
});
