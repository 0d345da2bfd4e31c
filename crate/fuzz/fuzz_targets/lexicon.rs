#![no_main]
use convsearch::classify::QuestionCategory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(lexicon) = convsearch::rerank::CueLexicon::parse(data, "fuzz") {
        for c in QuestionCategory::ALL {
            let _ = lexicon.cue_count(c, "It cost $40 in 1990 because of the river.");
        }
    }
});
