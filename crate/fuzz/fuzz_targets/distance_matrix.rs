#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(dist) = diffusion_emd::io::read_distance_matrix(data, "fuzz") {
        let mut out = Vec::new();
        diffusion_emd::io::write_distance_matrix(&mut out, &dist).expect("writing to memory");
        let again = diffusion_emd::io::read_distance_matrix(&out[..], "fuzz").expect("written matrix parses");
        assert_eq!(again.values, dist.values);
    }
});
