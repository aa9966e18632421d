#![no_main]

use libfuzzer_sys::fuzz_target;
use nlts::bench::SweepConfig;
use nlts::pipeline::JobSettings;

// Whatever parses must survive validation and a serialize/parse round trip.
fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<SweepConfig>(data) {
        let _ = cfg.validate();
        let again: SweepConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
    if let Ok(s) = serde_json::from_slice::<JobSettings>(data) {
        let again: JobSettings = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(again, s);
    }
});
