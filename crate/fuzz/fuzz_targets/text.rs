#![no_main]
use convsearch::textproc::{normalize, TextConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let once = normalize(text);
        assert_eq!(normalize(&once), once);
        for term in TextConfig::default().process(text).iter() {
            assert!(!term.is_empty());
        }
        let _ = convsearch::classify::default_rules().classify(text);
    }
});
