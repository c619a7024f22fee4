#![no_main]
use libfuzzer_sys::fuzz_target;

use qfgn::circuit::parse_circuit;

fuzz_target!(|data: &str| {
    if let Ok(spec) = parse_circuit(data) {
        let text = spec.to_text();
        let again = parse_circuit(&text).expect("printed circuit parses");
        assert_eq!(again, spec);
    }
});
