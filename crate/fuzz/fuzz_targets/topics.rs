#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(topics) = convsearch::rewrite::parse_topics(text) {
            let options = convsearch::rewrite::RewriteOptions::default();
            let config = convsearch::textproc::TextConfig::default();
            for topic in &topics {
                let _ = convsearch::rewrite::rewrite_topic(topic, &options, &config);
            }
        }
    }
});
