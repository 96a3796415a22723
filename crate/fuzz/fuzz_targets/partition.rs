#![no_main]

use libfuzzer_sys::fuzz_target;
use symgcp::ModePartition;

fuzz_target!(|input: (u8, &str)| {
    let (order, text) = input;
    if let Ok(p) = ModePartition::parse(text, order as usize % 9) {
        let again = ModePartition::parse(&p.to_string(), p.order()).expect("display parses");
        assert_eq!(again, p);
        assert_eq!(p.sigma().len(), p.order());
    }
});
