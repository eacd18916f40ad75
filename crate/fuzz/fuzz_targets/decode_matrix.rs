#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(matrix) = diffusion_emd::io::decode_matrix(data) {
        assert_eq!(diffusion_emd::io::encode_matrix(&matrix).expect("encodable"), data);
    }
});
