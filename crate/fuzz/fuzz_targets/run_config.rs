#![no_main]
use libfuzzer_sys::fuzz_target;
use qho_kam_cli::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config_str(text) {
        // validated configs satisfy the documented invariants
        assert!(cfg.eps < 1.0 && cfg.eps >= 0.0);
        assert!(cfg.alpha > 0.0 && cfg.alpha <= 1.0);
        assert!(cfg.n_max >= 16);
        assert!(cfg.sigma0 > 0.0);
        assert!(cfg.gamma > 0.0 && cfg.gamma < 0.25);
        if let Some(omega) = &cfg.omega {
            assert_eq!(omega.len(), cfg.n_freq);
        }
    }
});
