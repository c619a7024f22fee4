#![no_main]
use libfuzzer_sys::fuzz_target;

use qfgn::imaging::decode_image;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_image(data) {
        assert!(img.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        let back = decode_image(&img.to_pgm()).expect("written PGM decodes");
        assert_eq!((back.height(), back.width()), (img.height(), img.width()));
    }
});
