#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rules) = convsearch::classify::ClassifierRules::parse(data, "fuzz") {
        let _ = rules.classify("how much does it cost in 1990?");
    }
});
