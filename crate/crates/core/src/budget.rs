//! Resource budgets for enumeration-heavy computations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable overriding [`Budget::default`].
pub const BUDGET_ENV: &str = "FFSUM_BUDGET";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Largest residue ring / table / transform size.
    pub max_states: u64,
    /// Largest tuple count for brute-force energies (mass^(2k-1) free tuples).
    pub max_tuples: u64,
    /// Largest number of summed terms in a single evaluation.
    pub max_terms: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_states: 1 << 22,
            max_tuples: 100_000_000,
            max_terms: 1 << 32,
        }
    }
}

impl Budget {
    /// Defaults, overridden by `FFSUM_BUDGET` when set.
    pub fn from_env() -> Result<Budget> {
        match std::env::var(BUDGET_ENV) {
            Ok(s) => Budget::default().with_overrides(&s),
            Err(_) => Ok(Budget::default()),
        }
    }

    /// Applies `states=N,tuples=N,terms=N` (any subset); a bare number sets `states`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Budget> {
        let bad = || Error::InvalidArgument(format!("bad budget spec {spec:?}"));
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, val) = part.split_once('=').unwrap_or(("states", part));
            let val: u64 = val.trim().replace('_', "").parse().map_err(|_| bad())?;
            match key.trim() {
                "states" => self.max_states = val,
                "tuples" => self.max_tuples = val,
                "terms" => self.max_terms = val,
                _ => return Err(bad()),
            }
        }
        Ok(self)
    }

    pub fn check_states(&self, n: u64, what: &str) -> Result<()> {
        check(n, self.max_states, what)
    }

    pub fn check_tuples(&self, n: u64, what: &str) -> Result<()> {
        check(n, self.max_tuples, what)
    }

    pub fn check_terms(&self, n: u64, what: &str) -> Result<()> {
        check(n, self.max_terms, what)
    }
}

fn check(n: u64, limit: u64, what: &str) -> Result<()> {
    if n > limit {
        Err(Error::ResourceLimit(format!("{what}: {n} exceeds budget {limit}")))
    } else {
        Ok(())
    }
}

/// `base^exp`, saturating at `u64::MAX` so budget checks fail cleanly.
pub fn sat_pow(base: u64, exp: u32) -> u64 {
    base.checked_pow(exp).unwrap_or(u64::MAX)
}
