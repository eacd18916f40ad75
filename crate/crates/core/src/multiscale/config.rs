use std::fmt;
use std::str::FromStr;

use crate::error::{invalid_param, Error, Result};

/// Engine used to compute the dyadic diffusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    ExactSpectral,
    #[default]
    Chebyshev,
    Interpolative,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_spectral" => Ok(Method::ExactSpectral),
            "chebyshev" => Ok(Method::Chebyshev),
            "id" | "interpolative" => Ok(Method::Interpolative),
            other => Err(invalid_param(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactSpectral => "exact",
            Method::Chebyshev => "chebyshev",
            Method::Interpolative => "id",
        })
    }
}

/// Parameters of the multiscale embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub alpha: f64,
    pub max_scale: usize,
    pub cheb_order: usize,
    pub n_scales_kept: usize,
    pub rank_delta: f64,
    pub method: Method,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            max_scale: 8,
            cheb_order: 32,
            n_scales_kept: 6,
            rank_delta: 1e-6,
            method: Method::Chebyshev,
        }
    }
}

impl EmbedConfig {
    /// Defaults for a graph with `n` nodes: `K = max(ceil(log2 n), 8)`.
    pub fn for_nodes(n: usize) -> Self {
        Self { max_scale: default_scale_count(n), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(invalid_param(format!("alpha must lie in (0, 0.5], got {}", self.alpha)));
        }
        if self.max_scale < 1 {
            return Err(invalid_param("max scale must be at least 1"));
        }
        if self.cheb_order < 1 {
            return Err(invalid_param("Chebyshev order must be at least 1"));
        }
        if self.n_scales_kept < 1 {
            return Err(invalid_param("at least one scale must be kept"));
        }
        if !(self.rank_delta >= 0.0 && self.rank_delta.is_finite()) {
            return Err(invalid_param("rank delta must be finite and nonnegative"));
        }
        Ok(())
    }
}

pub(crate) fn default_scale_count(n: usize) -> usize {
    let log = usize::BITS - n.saturating_sub(1).leading_zeros();
    (log as usize).max(8)
}
