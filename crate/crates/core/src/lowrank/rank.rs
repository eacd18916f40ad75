/// Number of eigenvalues with `|lambda|^power >= delta`.
pub fn approximate_rank(eigenvalues: &[f64], delta: f64, power: u64) -> usize {
    eigenvalues.iter().filter(|l| magnitude_power(l.abs(), power) >= delta).count()
}

fn magnitude_power(x: f64, power: u64) -> f64 {
    match i32::try_from(power) {
        Ok(p) => x.powi(p),
        Err(_) => x.powf(power as f64),
    }
}

/// Rank estimate and basis size at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankEntry {
    pub scale: usize,
    /// `None` when every retained eigenvalue passed the threshold, so the true rank may be larger.
    pub rank: Option<usize>,
    pub basis_size: usize,
}

/// Per-scale rank diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankProfile {
    pub entries: Vec<RankEntry>,
}

impl RankProfile {
    pub fn push(&mut self, scale: usize, rank: Option<usize>, basis_size: usize) {
        self.entries.push(RankEntry { scale, rank, basis_size });
    }
}
