#![no_main]
use convsearch::index::InvertedIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = InvertedIndex::from_bytes(data) {
        assert_eq!(InvertedIndex::from_bytes(&index.to_bytes()).unwrap(), index);
    }
});
