#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = diffusion_emd::io::read_points(data) {
        let mut out = Vec::new();
        diffusion_emd::io::write_points(&mut out, &points).expect("writing to memory");
        let again = diffusion_emd::io::read_points(&out[..]).expect("written points parse");
        assert_eq!(again, points);
    }
});
