#![no_main]
use libfuzzer_sys::fuzz_target;

use qfgn::config::RunConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = RunConfig::parse(data) {
        let again = RunConfig::parse(&cfg.to_toml()).expect("written config parses");
        assert_eq!(again, cfg);
    }
});
