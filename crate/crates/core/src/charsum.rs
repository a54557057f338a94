//! The additive character e_F and Kloosterman-type sums with exact values.
//!
//! A sum of integer-weighted characters is an integer combination of the p-th
//! roots of unity and is stored as an [`ExpHistogram`]: `counts[j]` is the
//! coefficient of ζ_p^j.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::moebius_table;
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::modulus::{Modulus, ResidueRing, NOT_A_UNIT};
use crate::poly::{checked_pow, Poly};
use crate::weights::{GaussRational, WeightSeq, WeightValues};

/// Terms per work unit. Fixed so that floating reductions do not depend on
/// the number of workers.
const CHUNK: u64 = 1 << 12;

/// Exponent j of a character value ζ_p^j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CharExponent(pub u32);

/// Σ_j counts[j] ζ_p^j.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ExpHistogram {
    p: u32,
    counts: Vec<i64>,
}

impl ExpHistogram {
    pub fn zero(p: u32) -> ExpHistogram {
        ExpHistogram {
            p,
            counts: vec![0; p as usize],
        }
    }

    pub fn from_counts(counts: Vec<i64>) -> ExpHistogram {
        ExpHistogram {
            p: counts.len() as u32,
            counts,
        }
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn counts(&self) -> &[i64] {
        &self.counts
    }

    #[inline]
    pub fn add_term(&mut self, exp: u32, weight: i64) {
        self.counts[exp as usize] += weight;
    }

    pub fn merge(&mut self, other: &ExpHistogram) {
        assert_eq!(self.p, other.p, "histograms over different characteristics");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn sub(&self, other: &ExpHistogram) -> ExpHistogram {
        let mut out = self.clone();
        for (a, b) in out.counts.iter_mut().zip(&other.counts) {
            *a -= b;
        }
        out
    }

    pub fn scaled(&self, k: i64) -> ExpHistogram {
        ExpHistogram {
            p: self.p,
            counts: self.counts.iter().map(|c| c * k).collect(),
        }
    }

    /// Number of terms with multiplicity, Σ_j counts[j].
    pub fn total(&self) -> i64 {
        self.counts.iter().sum()
    }

    /// Reduced coordinates in the basis 1, ζ, …, ζ^{p-2}.
    pub fn canonical(&self) -> Vec<i64> {
        let last = self.counts[self.p as usize - 1];
        self.counts[..self.p as usize - 1]
            .iter()
            .map(|c| c - last)
            .collect()
    }

    /// Equality of the represented cyclotomic integers.
    pub fn value_eq(&self, other: &ExpHistogram) -> bool {
        self.p == other.p && self.canonical() == other.canonical()
    }

    /// True when the represented value is 0, i.e. all counts agree.
    pub fn is_zero_value(&self) -> bool {
        self.counts.iter().all(|&c| c == self.counts[0])
    }

    /// The value as a rational integer, when it is one.
    pub fn as_integer(&self) -> Option<i64> {
        let rest = &self.counts[1..];
        rest.iter()
            .all(|&c| c == rest[0])
            .then(|| self.counts[0] - rest[0])
    }

    pub fn to_complex(&self) -> Complex64 {
        cyclotomic_value(self.p, self.canonical().iter().map(|&c| c as f64))
    }

    /// |value| with an absolute error bound.
    pub fn abs(&self) -> (f64, f64) {
        histogram_abs(self)
    }
}

impl fmt::Display for ExpHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

fn cyclotomic_value(p: u32, coeffs: impl Iterator<Item = f64>) -> Complex64 {
    let mut z = <Complex64 as Zero>::zero();
    for (j, c) in coeffs.enumerate() {
        if c != 0.0 {
            let t = TAU * j as f64 / p as f64;
            z += Complex64::new(c * t.cos(), c * t.sin());
        }
    }
    z
}

/// |Σ_j counts[j] ζ_p^j| and a bound on the absolute error of the returned
/// float. Integer values are returned exactly with zero error.
pub fn histogram_abs(h: &ExpHistogram) -> (f64, f64) {
    if let Some(v) = h.as_integer() {
        return (v.unsigned_abs() as f64, 0.0);
    }
    let canon = h.canonical();
    let l1: f64 = canon.iter().map(|c| c.unsigned_abs() as f64).sum();
    let z = h.to_complex();
    (z.norm(), (2 * h.p as u64 + 8) as f64 * l1 * f64::EPSILON)
}

/// Value of a character sum with general weights.
#[derive(Clone, Debug, PartialEq)]
pub enum SumValue {
    Exact(ExpHistogram),
    /// Exact Gaussian-rational coefficient per exponent class.
    GaussianRational { p: u32, coeffs: Vec<GaussRational> },
    /// Floating coefficient per exponent class.
    Float { p: u32, coeffs: Vec<Complex64> },
}

impl SumValue {
    pub fn histogram(&self) -> Option<&ExpHistogram> {
        match self {
            SumValue::Exact(h) => Some(h),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, SumValue::Float { .. })
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            SumValue::Exact(h) => h.to_complex(),
            SumValue::GaussianRational { p, coeffs } => {
                let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
                let re = cyclotomic_value(*p, coeffs.iter().map(|z| f(&z.re)));
                let im = cyclotomic_value(*p, coeffs.iter().map(|z| f(&z.im)));
                re + Complex64::i() * im
            }
            SumValue::Float { p, coeffs } => {
                let re = cyclotomic_value(*p, coeffs.iter().map(|z| z.re));
                let im = cyclotomic_value(*p, coeffs.iter().map(|z| z.im));
                re + Complex64::i() * im
            }
        }
    }

    /// |value| with an absolute error bound for the floating evaluation.
    pub fn abs(&self) -> (f64, f64) {
        match self {
            SumValue::Exact(h) => histogram_abs(h),
            SumValue::GaussianRational { p, coeffs } => {
                let l1: f64 = coeffs
                    .iter()
                    .map(|z| {
                        z.re.to_f64().unwrap_or(0.0).abs() + z.im.to_f64().unwrap_or(0.0).abs()
                    })
                    .sum();
                (self.to_complex().norm(), (2 * *p as u64 + 12) as f64 * l1 * f64::EPSILON)
            }
            SumValue::Float { p, coeffs } => {
                let l1: f64 = coeffs.iter().map(|z| z.re.abs() + z.im.abs()).sum();
                (self.to_complex().norm(), (2 * *p as u64 + 12) as f64 * l1 * f64::EPSILON)
            }
        }
    }
}

/// Coefficient types a character sum can accumulate.
pub(crate) trait Coef: Clone + Send + Sync {
    fn czero() -> Self;
    fn acc(&mut self, other: &Self);
    fn times(&self, other: &Self) -> Self;
    fn vanishes(&self) -> bool;
}

impl Coef for i64 {
    fn czero() -> Self {
        0
    }
    fn acc(&mut self, other: &Self) {
        *self += other;
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn vanishes(&self) -> bool {
        *self == 0
    }
}

impl Coef for GaussRational {
    fn czero() -> Self {
        <GaussRational as Zero>::zero()
    }
    fn acc(&mut self, other: &Self) {
        *self += other;
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn vanishes(&self) -> bool {
        Zero::is_zero(self)
    }
}

impl Coef for Complex64 {
    fn czero() -> Self {
        <Complex64 as Zero>::zero()
    }
    fn acc(&mut self, other: &Self) {
        *self += other;
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn vanishes(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Sums `term(i)` for `i < count` into exponent classes. Work is split into
/// fixed chunks and merged in index order, so the result is independent of
/// the thread pool size.
pub(crate) fn accumulate<C, T>(p: u32, count: u64, term: T) -> Vec<C>
where
    C: Coef,
    T: Fn(u64) -> Option<(u32, C)> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Vec<C>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut local = vec![C::czero(); p as usize];
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                if let Some((e, w)) = term(i) {
                    local[e as usize].acc(&w);
                }
            }
            local
        })
        .collect();
    let mut out = vec![C::czero(); p as usize];
    for part in parts {
        for (o, x) in out.iter_mut().zip(&part) {
            o.acc(x);
        }
    }
    out
}

pub(crate) fn accumulate_hist<T>(p: u32, count: u64, term: T) -> ExpHistogram
where
    T: Fn(u64) -> Option<(u32, i64)> + Sync,
{
    ExpHistogram::from_counts(accumulate(p, count, term))
}

/// e_F(x) = ζ_p^{Tr(a_{-1})}, computed from the top coefficient of the
/// reduced representative.
pub fn residue_exponent(x: &Poly, f: &Modulus) -> Result<CharExponent> {
    Ok(CharExponent(f.exponent_of(x)?))
}

/// e_F(x) from the T^{-1} coefficient of the Laurent expansion of x/F, by long
/// division of T·x by F (F taken as given, not normalized).
pub fn laurent_exponent(x: &Poly, f: &Modulus) -> Result<CharExponent> {
    let tx = x.shift(1);
    let (quot, _) = tx.divrem(&f.original())?;
    Ok(CharExponent(f.ctx().trace(quot.coeff(0))))
}

/// Phase maps accepted by [`char_sum`].
#[derive(Clone, Copy)]
pub enum Phase<'a> {
    /// x ↦ a·x
    Linear(&'a Poly),
    /// x ↦ a·x̄
    Inverse(&'a Poly),
    /// x ↦ a·x + b·x̄
    Kloosterman(&'a Poly, &'a Poly),
    /// Arbitrary polynomial-valued map.
    Custom(&'a (dyn Fn(&Poly) -> Result<Poly> + Sync)),
}

impl Phase<'_> {
    fn needs_inverse(&self) -> bool {
        matches!(self, Phase::Inverse(_) | Phase::Kloosterman(..))
    }
}

/// Σ_{deg x < n} w_x e_F(phase(x)).
///
/// With `coprime_to = Some(u)`, terms with gcd(x, u·F) ≠ 1 are skipped. Phases
/// involving x̄ fail with `NotInvertible` on non-units when no filter is given.
pub fn char_sum(
    f: &Modulus,
    n: usize,
    phase: Phase<'_>,
    weights: Option<&WeightSeq>,
    coprime_to: Option<&Poly>,
    budget: &Budget,
) -> Result<SumValue> {
    let ctx = f.ctx();
    let p = ctx.p();
    let count = checked_pow(ctx.q(), n)?;
    budget.check_terms(count, "character sum range")?;
    if let Some(w) = weights {
        if w.bound() < n {
            return Err(Error::InvalidArgument(format!(
                "weights cover deg < {}, sum needs deg < {n}",
                w.bound()
            )));
        }
    }
    let ring = f.ring()?;
    let res = ring.residues_deg_lt(n)?;
    let inv = ring.inverses();
    let extra = match coprime_to {
        Some(u) if !u.is_constant() => Some(u.clone()),
        Some(u) if u.is_zero() => return Err(Error::ZeroPolynomial),
        _ => None,
    };
    let filter = coprime_to.is_some();
    if !filter && phase.needs_inverse() {
        if let Some(bad) = res.iter().find(|&&r| inv[r as usize] == NOT_A_UNIT) {
            return Err(Error::NotInvertible(ring.to_poly(*bad).to_string(), f.to_string()));
        }
    }
    let (a_res, b_res) = match phase {
        Phase::Linear(a) | Phase::Inverse(a) => (ring.of_poly(a), 0),
        Phase::Kloosterman(a, b) => (ring.of_poly(a), ring.of_poly(b)),
        Phase::Custom(_) => (0, 0),
    };
    let exponent = |i: u64| -> Option<u32> {
        let xr = res[i as usize];
        if filter {
            if inv[xr as usize] == NOT_A_UNIT {
                return None;
            }
            if let Some(u) = &extra {
                let x = Poly::from_index(ctx, i);
                if !x.gcd(u).map(|g| g.is_one()).unwrap_or(false) {
                    return None;
                }
            }
        }
        Some(match phase {
            Phase::Linear(_) => ring.exponent(ring.mul(a_res, xr)),
            Phase::Inverse(_) => ring.exponent(ring.mul(a_res, inv[xr as usize])),
            Phase::Kloosterman(..) => ring.exponent(
                ring.add(ring.mul(a_res, xr), ring.mul(b_res, inv[xr as usize])),
            ),
            Phase::Custom(g) => {
                let y = g(&Poly::from_index(ctx, i)).ok()?;
                ring.exponent(ring.of_poly(&y))
            }
        })
    };
    Ok(match weights.map(|w| w.values()) {
        None | Some(WeightValues::Unit) => {
            SumValue::Exact(accumulate_hist(p, count, |i| Some((exponent(i)?, 1))))
        }
        Some(WeightValues::Integer(v)) => SumValue::Exact(accumulate_hist(p, count, |i| {
            let w = v[i as usize];
            if w == 0 {
                return None;
            }
            Some((exponent(i)?, w))
        })),
        Some(WeightValues::GaussianRational(v)) => SumValue::GaussianRational {
            p,
            coeffs: accumulate(p, count, |i| {
                let w = &v[i as usize];
                if Zero::is_zero(w) {
                    return None;
                }
                Some((exponent(i)?, w.clone()))
            }),
        },
        Some(WeightValues::Float(v)) => SumValue::Float {
            p,
            coeffs: accumulate(p, count, |i| Some((exponent(i)?, v[i as usize]))),
        },
    })
}

fn unit_weight_hist(v: SumValue) -> ExpHistogram {
    match v {
        SumValue::Exact(h) => h,
        _ => unreachable!("unit weights give exact sums"),
    }
}

/// K(a, b; F) = Σ_{x mod F, (x,F)=1} e_F(a·x + b·x̄).
pub fn kloosterman_complete(f: &Modulus, a: &Poly, b: &Poly, budget: &Budget) -> Result<ExpHistogram> {
    let one = Poly::one(f.ctx());
    char_sum(f, f.degree(), Phase::Kloosterman(a, b), None, Some(&one), budget).map(unit_weight_hist)
}

/// Σ_{deg x < n, (x,F)=1} e_F(b·x̄).
pub fn kloosterman_incomplete(f: &Modulus, b: &Poly, n: usize, budget: &Budget) -> Result<ExpHistogram> {
    let one = Poly::one(f.ctx());
    char_sum(f, n, Phase::Inverse(b), None, Some(&one), budget).map(unit_weight_hist)
}

/// Σ_{deg x < r, (x, uF)=1} e_F(b·x̄).
pub fn kloosterman_coprime_variant(
    f: &Modulus,
    u: &Poly,
    b: &Poly,
    budget: &Budget,
) -> Result<ExpHistogram> {
    char_sum(f, f.degree(), Phase::Inverse(b), None, Some(u), budget).map(unit_weight_hist)
}

/// Residues x̄ for x with deg x < n coprime to F, paired with their indices.
fn inverse_residues(ring: &ResidueRing, n: usize) -> Result<Vec<(u64, u32)>> {
    let res = ring.residues_deg_lt(n)?;
    let inv = ring.inverses();
    Ok(res
        .iter()
        .enumerate()
        .filter_map(|(i, &r)| {
            let v = inv[r as usize];
            (v != NOT_A_UNIT).then_some((i as u64, v))
        })
        .collect())
}

/// W_{F,a}(m, n; α, β) = Σ_{deg x₁<m} Σ_{deg x₂<n} α_{x₁} β_{x₂} e_F(a·x̄₁x̄₂) over
/// x₁, x₂ coprime to F.
///
/// Groups both ranges by inverse residue first, so the double loop runs over
/// residue classes rather than polynomials.
pub fn bilinear_kloosterman(
    f: &Modulus,
    a: &Poly,
    m: usize,
    n: usize,
    alpha: &WeightSeq,
    beta: &WeightSeq,
    budget: &Budget,
) -> Result<SumValue> {
    bilinear_dispatch(f, a, m, n, alpha, beta, budget, false)
}

/// Direct double loop over (x₁, x₂); the reference for [`bilinear_kloosterman`].
pub fn bilinear_kloosterman_naive(
    f: &Modulus,
    a: &Poly,
    m: usize,
    n: usize,
    alpha: &WeightSeq,
    beta: &WeightSeq,
    budget: &Budget,
) -> Result<SumValue> {
    bilinear_dispatch(f, a, m, n, alpha, beta, budget, true)
}

#[allow(clippy::too_many_arguments)]
fn bilinear_dispatch(
    f: &Modulus,
    a: &Poly,
    m: usize,
    n: usize,
    alpha: &WeightSeq,
    beta: &WeightSeq,
    budget: &Budget,
    naive: bool,
) -> Result<SumValue> {
    if alpha.bound() < m || beta.bound() < n {
        return Err(Error::InvalidArgument("weights do not cover the ranges".into()));
    }
    let ring = f.ring()?;
    let p = f.ctx().p();
    let ar = ring.of_poly(a);
    let run = |alpha_c: &(dyn Fn(u64) -> i64 + Sync), beta_c: &(dyn Fn(u64) -> i64 + Sync)| {
        bilinear_core(ring, ar, m, n, alpha_c, beta_c, naive, budget)
    };
    if let (Some(_), Some(_)) = (alpha.integer(0), beta.integer(0)) {
        let h = run(&|i| alpha.integer(i).unwrap(), &|i| beta.integer(i).unwrap())?;
        return Ok(SumValue::Exact(ExpHistogram::from_counts(h)));
    }
    if alpha.is_exact() && beta.is_exact() {
        let coeffs = bilinear_core(
            ring,
            ar,
            m,
            n,
            &|i| alpha.gaussian(i).unwrap(),
            &|i| beta.gaussian(i).unwrap(),
            naive,
            budget,
        )?;
        return Ok(SumValue::GaussianRational { p, coeffs });
    }
    let coeffs = bilinear_core(
        ring,
        ar,
        m,
        n,
        &|i| alpha.complex(i),
        &|i| beta.complex(i),
        naive,
        budget,
    )?;
    Ok(SumValue::Float { p, coeffs })
}

#[allow(clippy::too_many_arguments)]
fn bilinear_core<C: Coef>(
    ring: &ResidueRing,
    a: u32,
    m: usize,
    n: usize,
    alpha: &(dyn Fn(u64) -> C + Sync),
    beta: &(dyn Fn(u64) -> C + Sync),
    naive: bool,
    budget: &Budget,
) -> Result<Vec<C>> {
    let p = ring.ctx().p();
    if naive {
        let xs = inverse_residues(ring, m)?;
        let ys = inverse_residues(ring, n)?;
        budget.check_terms((xs.len() as u64).saturating_mul(ys.len() as u64), "bilinear double loop")?;
        let total = xs.len() as u64 * ys.len() as u64;
        let ny = ys.len() as u64;
        return Ok(accumulate(p, total, |k| {
            let (i, s) = xs[(k / ny) as usize];
            let (j, t) = ys[(k % ny) as usize];
            let w = alpha(i).times(&beta(j));
            if w.vanishes() {
                return None;
            }
            let prod = ring.mul(s, t);
            Some((ring.exponent(ring.mul(a, prod)), w))
        }));
    }
    let size = ring.size() as usize;
    let group = |len: usize, w: &(dyn Fn(u64) -> C + Sync)| -> Result<Vec<(u32, C)>> {
        let mut dense = vec![C::czero(); size];
        for (i, s) in inverse_residues(ring, len)? {
            dense[s as usize].acc(&w(i));
        }
        Ok(dense
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.vanishes())
            .map(|(s, c)| (s as u32, c))
            .collect())
    };
    let xs = group(m, alpha)?;
    let ys = group(n, beta)?;
    budget.check_terms((xs.len() as u64).saturating_mul(ys.len() as u64), "bilinear residue loop")?;
    // Distribution of x̄₁x̄₂ over residues, then one pass over residues.
    let rows: Vec<Vec<C>> = xs
        .par_iter()
        .map(|(s, ws)| {
            let mut row = vec![C::czero(); size];
            for (t, wt) in &ys {
                row[ring.mul(*s, *t) as usize].acc(&ws.times(wt));
            }
            row
        })
        .collect();
    let mut dist = vec![C::czero(); size];
    for row in rows {
        for (d, x) in dist.iter_mut().zip(&row) {
            d.acc(x);
        }
    }
    let mut out = vec![C::czero(); p as usize];
    for (u, c) in dist.iter().enumerate() {
        if !c.vanishes() {
            out[ring.exponent(ring.mul(a, u as u32)) as usize].acc(c);
        }
    }
    Ok(out)
}

/// Σ_{deg x < n, (x,F)=1} μ(x) e_F(a·x̄).
pub fn moebius_kloosterman(f: &Modulus, a: &Poly, n: usize, budget: &Budget) -> Result<ExpHistogram> {
    let ctx = f.ctx();
    let ring = f.ring()?;
    let count = checked_pow(ctx.q(), n)?;
    budget.check_terms(count, "moebius-kloosterman range")?;
    let mu = moebius_table(ctx, n, budget)?;
    let res = ring.residues_deg_lt(n)?;
    let inv = ring.inverses();
    let ar = ring.of_poly(a);
    Ok(accumulate_hist(ctx.p(), count, |i| {
        let m = mu[i as usize];
        if m == 0 {
            return None;
        }
        let xi = inv[res[i as usize] as usize];
        if xi == NOT_A_UNIT {
            return None;
        }
        Some((ring.exponent(ring.mul(ar, xi)), m as i64))
    }))
}

/// Term-by-term reference for [`moebius_kloosterman`]: factorization for μ,
/// xgcd for x̄ and Laurent division for the character.
pub fn moebius_kloosterman_naive(f: &Modulus, a: &Poly, n: usize) -> Result<ExpHistogram> {
    let ctx = f.ctx();
    let mut h = ExpHistogram::zero(ctx.p());
    for x in crate::poly::all_deg_lt(ctx, n)? {
        if x.is_zero() || !f.is_coprime(&x)? {
            continue;
        }
        let mu = crate::arith::moebius(&x)?;
        if mu == 0 {
            continue;
        }
        let xbar = f.mod_inverse(&x)?;
        h.add_term(laurent_exponent(&(a * &xbar), f)?.0, mu as i64);
    }
    Ok(h)
}

/// (a₀, F₀, d) with d = deg gcd(a, F), F₀ = F/gcd and a₀ = a/gcd, so that
/// e_F(a·x̄) = e_{F₀}(a₀·x̄) for x coprime to F. Uses gcd(0, F) = F. For
/// non-monic F the leading coefficient is folded into a₀.
pub fn reduce_modulus(a: &Poly, f: &Modulus) -> Result<(Poly, Modulus, usize)> {
    let fm = f.poly();
    let g = if a.is_zero() { fm.clone() } else { a.gcd(fm)? };
    let d = g.coeffs().len() - 1;
    let f0 = fm.exact_div(&g)?;
    let a0 = a.exact_div(&g)?.scale(f.lead_inv());
    let f0 = if f0.is_constant() {
        Modulus::trivial(f.ctx())
    } else {
        Modulus::new(&f0)?
    };
    Ok((a0, f0, d))
}
