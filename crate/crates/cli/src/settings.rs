use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use diffusion_emd::io::parse_key_values;

use crate::error::{io_context, CliError, CliResult};

const KNOWN_KEYS: &[&str] = &[
    "knn", "epsilon", "truncate", "percentile", "method", "alpha", "max-scale", "cheb-order", "delta", "gamma",
    "n-scales", "subsample", "seed", "k", "n", "stride", "m", "per", "noise", "methods", "step", "tolerance",
];

/// Values from a config file, consulted when a flag is absent.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| io_context(path, e))?;
        let parsed = parse_key_values(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (key, value) in parsed {
            let key = key.replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("{}: unknown key `{key}`", path.display())));
            }
            values.insert(key, value);
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse '{raw}'"))),
        }
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.get(None::<bool>, key)?.unwrap_or(false))
    }
}
