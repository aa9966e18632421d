#![no_main]

use libfuzzer_sys::fuzz_target;
use nlts::codec::{deserialize, CodecConfig, Scaler};

// First three bytes pick the codec settings and horizon; the rest is model output.
fuzz_target!(|data: &[u8]| {
    let [flags, precision, horizon, rest @ ..] = data else {
        return;
    };
    let base = if flags & 1 == 1 { CodecConfig::basic() } else { CodecConfig::default() };
    let config = CodecConfig {
        precision: u32::from(precision % 8),
        signed: flags & 2 == 2,
        half_bin_correction: flags & 4 == 4,
        ..base
    };
    let scaler =
        Scaler { scale: if flags & 8 == 8 { 1e-6 } else { 1.0 }, offset: if flags & 16 == 16 { -3.5 } else { 0.0 } };
    let horizon = usize::from(*horizon);
    let text = String::from_utf8_lossy(rest);
    if let Ok((values, report)) = deserialize(&text, &scaler, &config, horizon) {
        assert!(values.len() <= horizon);
        assert_eq!(values.len(), report.parsed_steps);
        assert!(values.iter().all(|v| v.is_finite()));
    }
});
