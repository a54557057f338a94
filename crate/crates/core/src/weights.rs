//! Weight sequences α_x indexed by polynomials of bounded degree.

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::FieldCtx;
use crate::poly::{checked_pow, Poly};

/// Exact Gaussian rational.
pub type GaussRational = Complex<BigRational>;

#[derive(Clone, Debug, PartialEq)]
pub enum WeightValues {
    /// Every weight is 1.
    Unit,
    Integer(Vec<i64>),
    GaussianRational(Vec<GaussRational>),
    Float(Vec<Complex64>),
}

/// Weights on `{x : deg x < bound}`, stored densely by [`Poly::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSeq {
    bound: usize,
    values: WeightValues,
}

#[derive(Serialize, Deserialize)]
struct WeightEntry {
    poly: String,
    re: String,
    #[serde(default = "zero_string")]
    im: String,
}

fn zero_string() -> String {
    "0".into()
}

fn parse_rational(s: &str) -> Option<BigRational> {
    s.trim().parse::<BigRational>().ok()
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

fn float_to_string(x: f64) -> String {
    format!("{x:?}")
}

impl WeightSeq {
    pub fn unit(bound: usize) -> WeightSeq {
        WeightSeq {
            bound,
            values: WeightValues::Unit,
        }
    }

    pub fn from_values(ctx: &FieldCtx, bound: usize, values: WeightValues) -> Result<WeightSeq> {
        let len = checked_pow(ctx.q(), bound)? as usize;
        let actual = match &values {
            WeightValues::Unit => len,
            WeightValues::Integer(v) => v.len(),
            WeightValues::GaussianRational(v) => v.len(),
            WeightValues::Float(v) => v.len(),
        };
        if actual != len {
            return Err(Error::InvalidArgument(format!(
                "weight sequence has {actual} entries, expected {len}"
            )));
        }
        Ok(WeightSeq { bound, values })
    }

    /// Independent uniform ±1 weights from a seeded ChaCha8 stream.
    pub fn random_pm1(ctx: &FieldCtx, bound: usize, seed: u64) -> Result<WeightSeq> {
        let len = checked_pow(ctx.q(), bound)? as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..len)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        WeightSeq::from_values(ctx, bound, WeightValues::Integer(v))
    }

    #[inline]
    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn values(&self) -> &WeightValues {
        &self.values
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.values, WeightValues::Float(_))
    }

    /// True when every weight lies in {-1, 0, 1}.
    pub fn is_signed_unit(&self) -> bool {
        match &self.values {
            WeightValues::Unit => true,
            WeightValues::Integer(v) => v.iter().all(|w| w.abs() <= 1),
            _ => false,
        }
    }

    /// Integer weight at index, if the sequence is integral.
    #[inline]
    pub fn integer(&self, idx: u64) -> Option<i64> {
        match &self.values {
            WeightValues::Unit => Some(1),
            WeightValues::Integer(v) => Some(v[idx as usize]),
            _ => None,
        }
    }

    pub fn gaussian(&self, idx: u64) -> Option<GaussRational> {
        match &self.values {
            WeightValues::Unit => Some(Complex::new(BigRational::from_integer(1.into()), Zero::zero())),
            WeightValues::Integer(v) => Some(Complex::new(
                BigRational::from_integer(v[idx as usize].into()),
                Zero::zero(),
            )),
            WeightValues::GaussianRational(v) => Some(v[idx as usize].clone()),
            WeightValues::Float(_) => None,
        }
    }

    pub fn complex(&self, idx: u64) -> Complex64 {
        match &self.values {
            WeightValues::Unit => Complex64::new(1.0, 0.0),
            WeightValues::Integer(v) => Complex64::new(v[idx as usize] as f64, 0.0),
            WeightValues::GaussianRational(v) => {
                let z = &v[idx as usize];
                Complex64::new(rational_to_f64(&z.re), rational_to_f64(&z.im))
            }
            WeightValues::Float(v) => v[idx as usize],
        }
    }

    /// ‖w‖_∞.
    pub fn max_abs(&self) -> f64 {
        match &self.values {
            WeightValues::Unit => 1.0,
            WeightValues::Integer(v) => v.iter().map(|w| w.unsigned_abs()).max().unwrap_or(0) as f64,
            _ => {
                let n = self.len();
                (0..n as u64).map(|i| self.complex(i).norm()).fold(0.0, f64::max)
            }
        }
    }

    /// The same weights restricted to `deg x < bound`.
    pub fn prefix(&self, ctx: &FieldCtx, bound: usize) -> Result<WeightSeq> {
        if bound > self.bound {
            return Err(Error::InvalidArgument(format!(
                "weights cover deg < {}, requested deg < {bound}",
                self.bound
            )));
        }
        let len = checked_pow(ctx.q(), bound)? as usize;
        let values = match &self.values {
            WeightValues::Unit => WeightValues::Unit,
            WeightValues::Integer(v) => WeightValues::Integer(v[..len].to_vec()),
            WeightValues::GaussianRational(v) => WeightValues::GaussianRational(v[..len].to_vec()),
            WeightValues::Float(v) => WeightValues::Float(v[..len].to_vec()),
        };
        Ok(WeightSeq { bound, values })
    }

    fn len(&self) -> usize {
        match &self.values {
            WeightValues::Unit => usize::MAX,
            WeightValues::Integer(v) => v.len(),
            WeightValues::GaussianRational(v) => v.len(),
            WeightValues::Float(v) => v.len(),
        }
    }

    /// Reads the JSON format `[{"poly": "T+1", "re": "1/2", "im": "0"}, ...]`.
    /// Absent polynomials get weight 0. Values are exact rationals when they
    /// parse as such, otherwise floats.
    pub fn from_json(ctx: &Arc<FieldCtx>, bound: usize, text: &str) -> Result<WeightSeq> {
        let entries: Vec<WeightEntry> =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("weights: {e}")))?;
        let len = checked_pow(ctx.q(), bound)? as usize;
        let mut exact: Option<Vec<GaussRational>> = Some(vec![Complex::zero(); len]);
        let mut float = vec![Complex64::zero(); len];
        for e in &entries {
            let x = Poly::parse(ctx, &e.poly)?;
            if !x.deg_lt(bound) {
                return Err(Error::InvalidArgument(format!(
                    "weight for {x} outside deg < {bound}"
                )));
            }
            let idx = x.index() as usize;
            match (parse_rational(&e.re), parse_rational(&e.im)) {
                (Some(re), Some(im)) => {
                    float[idx] = Complex64::new(rational_to_f64(&re), rational_to_f64(&im));
                    if let Some(v) = exact.as_mut() {
                        v[idx] = Complex::new(re, im);
                    }
                }
                _ => {
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad weight component {s:?}")))
                    };
                    float[idx] = Complex64::new(parse(&e.re)?, parse(&e.im)?);
                    exact = None;
                }
            }
        }
        let values = match exact {
            Some(v) if v.iter().all(|z| z.im.is_zero() && z.re.is_integer()) => {
                let ints = v
                    .iter()
                    .map(|z| {
                        z.re.to_integer()
                            .to_i64()
                            .ok_or_else(|| Error::InvalidArgument("weight overflows i64".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                WeightValues::Integer(ints)
            }
            Some(v) => WeightValues::GaussianRational(v),
            None => WeightValues::Float(float),
        };
        WeightSeq::from_values(ctx, bound, values)
    }

    /// Writes the JSON format, skipping zero weights.
    pub fn to_json(&self, ctx: &Arc<FieldCtx>) -> Result<String> {
        let len = checked_pow(ctx.q(), self.bound)?;
        let mut entries = Vec::new();
        for i in 0..len {
            let (re, im) = match &self.values {
                WeightValues::Float(v) => {
                    let z = v[i as usize];
                    if z.is_zero() {
                        continue;
                    }
                    (float_to_string(z.re), float_to_string(z.im))
                }
                _ => {
                    let z = self.gaussian(i).expect("exact weights");
                    if z.is_zero() {
                        continue;
                    }
                    (z.re.to_string(), z.im.to_string())
                }
            };
            entries.push(WeightEntry {
                poly: Poly::from_index(ctx, i).to_string(),
                re,
                im,
            });
        }
        serde_json::to_string_pretty(&entries).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `Ratio<i64>` convenience for callers building small exact weights.
pub fn gauss(re: Ratio<i64>, im: Ratio<i64>) -> GaussRational {
    let big = |r: Ratio<i64>| {
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    };
    Complex::new(big(re), big(im))
}
