#![no_main]

use libfuzzer_sys::fuzz_target;
use nlts::bench::{parse_dataset, DatasetFormat};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(d) = parse_dataset(&text, "fuzz", &DatasetFormat::default()) {
        assert!(d.series.values().iter().all(|v| v.is_finite()));
        if let Some(h) = d.holdout {
            assert!(h <= d.series.len());
        }
        // Splitting may refuse, but never panics.
        let _ = d.split(None);
    }
});
