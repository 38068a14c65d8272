#![no_main]
use libfuzzer_sys::fuzz_target;
use qho_kam::perturbation::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = parse_manifest(text) {
        // accepted manifests expose only sanitized filenames
        for (k, fname) in &manifest.entries {
            assert_eq!(k.len(), manifest.n_freq);
            assert!(!fname.contains('/') && !fname.contains('\\'));
            assert!(!fname.starts_with('.'));
        }
    }
});
