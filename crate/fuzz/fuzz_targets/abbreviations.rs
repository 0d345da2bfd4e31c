#![no_main]
use convsearch::textproc::{expand_abbreviations, AbbreviationTable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = AbbreviationTable::parse(data, "fuzz") {
        let _ = expand_abbreviations("the US and UK GDP", &table);
    }
});
