#![no_main]
use libfuzzer_sys::fuzz_target;

use qfgn::checkpoint::parse_checkpoint;

fuzz_target!(|data: &str| {
    if let Ok(ck) = parse_checkpoint(data) {
        let text = ck.to_text();
        assert_eq!(parse_checkpoint(&text).expect("written checkpoint parses").to_text(), text);
        let _ = ck.to_model();
    }
});
