#![no_main]
use convsearch::index::{build_index, read_corpus, CorpusFormat};
use convsearch::textproc::TextConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let docs: Vec<_> = read_corpus(data, CorpusFormat::Tsv, "fuzz").collect();
    let _ = build_index(docs, TextConfig::default());
});
