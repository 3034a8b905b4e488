#![no_main]

use libfuzzer_sys::fuzz_target;

// Parsing followed by validation and the spectral and zero-drift checks
// that every command runs first.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = brwre::config::parse_config(text) else { return };
    let _ = cfg.hash();
    if let Ok(spec) = cfg.spec() {
        let _ = brwre::spectral::has_zero_drift(&spec);
        let _ = brwre::spectral::env_rho(&spec, cfg.run.tol);
    }
});
