#![no_main]

use libfuzzer_sys::{fuzz_target, Corpus};
use symgcp::io::{parse_sparse_tensor, write_sparse_tensor};

fuzz_target!(|data: &[u8]| -> Corpus {
    let Ok(text) = std::str::from_utf8(data) else {
        return Corpus::Reject;
    };
    let Ok((t, _)) = parse_sparse_tensor(text, "fuzz") else {
        return Corpus::Keep;
    };
    let mut out = Vec::new();
    write_sparse_tensor(&mut out, &t).unwrap();
    let (back, dups) = parse_sparse_tensor(std::str::from_utf8(&out).unwrap(), "fuzz").expect("roundtrip");
    assert_eq!(dups, 0);
    assert_eq!(back, t);
    Corpus::Keep
});
