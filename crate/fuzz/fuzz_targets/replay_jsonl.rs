#![no_main]

use libfuzzer_sys::fuzz_target;
use nlts::backend::ReplayBackend;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let backend = ReplayBackend::from_jsonl(&text, "fuzz");
    let lines = text.lines().filter(|l| !l.trim().is_empty()).count();
    assert!(backend.len() + backend.quarantined() <= lines);
});
