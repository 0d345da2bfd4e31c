#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(run) = convsearch::evalkit::parse_run(data, "fuzz") {
        let text = run.to_trec();
        let again = convsearch::evalkit::parse_run(text.as_bytes(), "fuzz").expect("written run must parse");
        assert_eq!(again.to_trec(), text);
    }
});
