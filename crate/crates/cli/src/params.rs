use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use ffsum_core::experiments::{APolicy, ModuliSpec, WeightSource};
use ffsum_core::{Budget, Error, FieldCtx, Modulus, Poly, Result, WeightSeq};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Flags shared by every command. Any of them may also come from `--config`,
/// a JSON object keyed by the long flag names; flags given on the command
/// line win.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Field as p^ell, optionally with ":c0,c1,.." for the defining polynomial.
    #[arg(long)]
    pub field: Option<String>,
    /// Modulus F.
    #[arg(long = "F")]
    #[serde(rename = "F")]
    pub f: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Degree of the moduli when F is not given.
    #[arg(long)]
    pub r: Option<usize>,
    /// Bound on deg F for averaged progressions.
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub big_r: Option<usize>,
    #[arg(long)]
    pub k: Option<u32>,
    /// Vaughan cutoff; all valid cutoffs when omitted.
    #[arg(long = "U")]
    #[serde(rename = "U")]
    pub cutoff: Option<usize>,
    /// Truncation degree for the main-term check.
    #[arg(long)]
    pub d: Option<usize>,
    /// Sum kind: moebius-kloosterman, kloosterman, incomplete-kloosterman, bilinear.
    #[arg(long)]
    pub kind: Option<String>,
    /// 2.1, 2.2, 2.3, 2.4 or 2.6.
    #[arg(long)]
    pub theorem: Option<String>,
    /// Inclusive range lo..hi.
    #[arg(long)]
    pub n_range: Option<String>,
    /// Inclusive range lo..hi.
    #[arg(long)]
    pub m_range: Option<String>,
    /// JSON weight file [{poly, re, im}].
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed for random ±1 weights.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub budget_states: Option<u64>,
    /// Full budget object; FFSUM_BUDGET and --budget-states apply on top.
    #[arg(skip)]
    pub budget: Option<Budget>,
    /// Output directory for CSV, JSON lines and the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn missing(name: &str) -> Error {
    Error::InvalidArgument(format!("--{name} is required"))
}

impl Params {
    /// Fills unset flags from the config file, if one was given.
    pub fn resolve(self) -> Result<Params> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut merged: Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let cli = serde_json::to_value(&self).map_err(|e| Error::Parse(e.to_string()))?;
        let (Value::Object(base), Value::Object(over)) = (&mut merged, cli) else {
            return Err(Error::Parse("config must be a JSON object".into()));
        };
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
        let mut out: Params =
            serde_json::from_value(merged).map_err(|e| Error::Parse(format!("config: {e}")))?;
        out.config = self.config;
        Ok(out)
    }

    pub fn ctx(&self) -> Result<Arc<FieldCtx>> {
        FieldCtx::parse_spec(self.field.as_deref().unwrap_or("3^1"))
    }

    pub fn budget(&self) -> Result<Budget> {
        let mut b = match self.budget {
            Some(b) => b,
            None => Budget::default(),
        };
        if let Ok(s) = std::env::var(ffsum_core::budget::BUDGET_ENV) {
            b = b.with_overrides(&s)?;
        }
        if let Some(s) = self.budget_states {
            b.max_states = s;
        }
        Ok(b)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    pub fn modulus(&self, ctx: &Arc<FieldCtx>) -> Result<Modulus> {
        Modulus::parse(ctx, self.f.as_deref().ok_or_else(|| missing("F"))?)
    }

    pub fn moduli(&self, ctx: &Arc<FieldCtx>) -> Result<ModuliSpec> {
        match (&self.f, self.r) {
            (Some(_), _) => Ok(ModuliSpec::Explicit(vec![self.modulus(ctx)?])),
            (None, Some(r)) => Ok(ModuliSpec::AllMonic(r)),
            (None, None) => Err(Error::InvalidArgument("give --F or --r".into())),
        }
    }

    pub fn poly(&self, ctx: &Arc<FieldCtx>, value: &Option<String>, default: &str) -> Result<Poly> {
        Poly::parse(ctx, value.as_deref().unwrap_or(default))
    }

    pub fn a_policy(&self, ctx: &Arc<FieldCtx>) -> Result<APolicy> {
        match &self.a {
            Some(a) => Ok(APolicy::Fixed(Poly::parse(ctx, a)?)),
            None => Ok(APolicy::WorstOverAll),
        }
    }

    pub fn need_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| missing("n"))
    }

    pub fn need_r(&self) -> Result<usize> {
        self.r.ok_or_else(|| missing("r"))
    }

    pub fn n_values(&self) -> Result<Vec<usize>> {
        values(&self.n_range, self.n, "n")
    }

    pub fn m_values(&self) -> Result<Vec<usize>> {
        values(&self.m_range, self.m, "m")
    }

    /// Weight source: a file, seeded ±1 weights, or all ones.
    pub fn weight_source(&self, ctx: &Arc<FieldCtx>, bound: usize) -> Result<WeightSource> {
        if let Some(path) = &self.weights {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            return Ok(WeightSource::File(WeightSeq::from_json(ctx, bound, &text)?));
        }
        Ok(match self.seed {
            Some(seed) => WeightSource::RandomPm1 { seed },
            None => WeightSource::Unit,
        })
    }
}

fn values(range: &Option<String>, single: Option<usize>, name: &str) -> Result<Vec<usize>> {
    match (range, single) {
        (Some(r), _) => parse_range(r),
        (None, Some(v)) => Ok(vec![v]),
        (None, None) => Err(Error::InvalidArgument(format!("give --{name} or --{name}-range"))),
    }
}

/// `lo..hi` and `lo..=hi` are both inclusive; a bare number is a single value.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parse(format!("bad range {s:?}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    match s.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(bad());
            }
            Ok((lo..=hi).collect())
        }
        None => Ok(vec![num(s)?]),
    }
}
