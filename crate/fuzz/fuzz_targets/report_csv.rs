#![no_main]

use diffusion_emd::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else { return };
    match selector % 4 {
        0 => drop(io::read_rank_profile(rest)),
        1 => drop(io::read_pair_report(rest)),
        2 => drop(io::read_neighbors(rest)),
        _ => drop(io::read_gradient_report(rest)),
    }
});
