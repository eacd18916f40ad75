#![no_main]

use diffusion_emd::io::EmbeddingMetadata;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(meta) = EmbeddingMetadata::parse(text) {
        let again = EmbeddingMetadata::parse(&meta.to_text()).expect("formatted metadata parses");
        assert_eq!(again.width, meta.width);
        assert_eq!(again.centers, meta.centers);
    }
});
