//! The ring F_q[T].

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FqElem};
use crate::literal::parse_terms;

/// Degree of a polynomial; the zero polynomial has degree `NegInf`, which
/// compares below every finite degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    NegInf,
    Finite(usize),
}

impl Degree {
    pub fn finite(self) -> Option<usize> {
        match self {
            Degree::NegInf => None,
            Degree::Finite(d) => Some(d),
        }
    }

    /// `deg < n`, true for the zero polynomial.
    #[inline]
    pub fn is_lt(self, n: usize) -> bool {
        match self {
            Degree::NegInf => true,
            Degree::Finite(d) => d < n,
        }
    }
}

impl PartialEq<usize> for Degree {
    fn eq(&self, other: &usize) -> bool {
        *self == Degree::Finite(*other)
    }
}

impl PartialOrd<usize> for Degree {
    fn partial_cmp(&self, other: &usize) -> Option<Ordering> {
        Some(self.cmp(&Degree::Finite(*other)))
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::NegInf => write!(f, "-inf"),
            Degree::Finite(d) => write!(f, "{d}"),
        }
    }
}

/// A polynomial over GF(q), coefficients lowest degree first, no trailing zeros.
#[derive(Clone)]
pub struct Poly {
    ctx: Arc<FieldCtx>,
    coeffs: Vec<FqElem>,
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && same_ctx(&self.ctx, &other.ctx)
    }
}

impl Eq for Poly {}

impl Hash for Poly {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.coeffs.hash(state);
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

#[inline]
pub(crate) fn same_ctx(a: &Arc<FieldCtx>, b: &Arc<FieldCtx>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn trim(v: &mut Vec<FqElem>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

pub(crate) fn mul_slices(ctx: &FieldCtx, a: &[FqElem], b: &[FqElem]) -> Vec<FqElem> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![FqElem::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = ctx.add(out[i + j], ctx.mul(x, y));
        }
    }
    out
}

/// Coefficients of the monic polynomial of degree `deg` whose lower
/// coefficients have base-q index `idx`.
pub(crate) fn monic_coeffs(q: u32, deg: usize, idx: u64) -> Vec<FqElem> {
    let mut out = Vec::with_capacity(deg + 1);
    let mut rest = idx;
    for _ in 0..deg {
        out.push(FqElem((rest % q as u64) as u32));
        rest /= q as u64;
    }
    out.push(FqElem::ONE);
    out
}

/// Base-q index of the first `len` coefficients.
#[inline]
pub(crate) fn lower_index(q: u32, coeffs: &[FqElem], len: usize) -> u64 {
    let mut idx = 0u64;
    for i in (0..len).rev() {
        let c = coeffs.get(i).map_or(0, |c| c.index());
        idx = idx * q as u64 + c as u64;
    }
    idx
}

pub(crate) fn checked_pow(q: u32, n: usize) -> Result<u64> {
    (q as u64)
        .checked_pow(n as u32)
        .ok_or_else(|| Error::ResourceLimit(format!("{q}^{n} overflows u64")))
}

impl Poly {
    pub fn new(ctx: &Arc<FieldCtx>, mut coeffs: Vec<FqElem>) -> Poly {
        trim(&mut coeffs);
        Poly {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    pub fn zero(ctx: &Arc<FieldCtx>) -> Poly {
        Poly::new(ctx, Vec::new())
    }

    pub fn one(ctx: &Arc<FieldCtx>) -> Poly {
        Poly::constant(ctx, FqElem::ONE)
    }

    pub fn constant(ctx: &Arc<FieldCtx>, c: FqElem) -> Poly {
        Poly::new(ctx, vec![c])
    }

    /// The indeterminate T.
    pub fn t(ctx: &Arc<FieldCtx>) -> Poly {
        Poly::monomial(ctx, FqElem::ONE, 1)
    }

    pub fn monomial(ctx: &Arc<FieldCtx>, c: FqElem, k: usize) -> Poly {
        let mut coeffs = vec![FqElem::ZERO; k + 1];
        coeffs[k] = c;
        Poly::new(ctx, coeffs)
    }

    /// Builds a polynomial from coefficient indices, low-to-high.
    pub fn from_indices(ctx: &Arc<FieldCtx>, coeffs: &[u32]) -> Result<Poly> {
        let coeffs = coeffs
            .iter()
            .map(|&c| ctx.elem(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Poly::new(ctx, coeffs))
    }

    /// The polynomial whose coefficients are the base-q digits of `idx`
    /// (constant term least significant).
    pub fn from_index(ctx: &Arc<FieldCtx>, idx: u64) -> Poly {
        let q = ctx.q() as u64;
        let mut coeffs = Vec::new();
        let mut rest = idx;
        while rest > 0 {
            coeffs.push(FqElem((rest % q) as u32));
            rest /= q;
        }
        Poly::new(ctx, coeffs)
    }

    /// The monic polynomial of degree `deg` with lower coefficients given by `idx`.
    pub fn monic_from_index(ctx: &Arc<FieldCtx>, deg: usize, idx: u64) -> Poly {
        Poly::new(ctx, monic_coeffs(ctx.q(), deg, idx))
    }

    /// Inverse of [`Poly::from_index`].
    pub fn index(&self) -> u64 {
        let q = self.ctx.q() as u64;
        self.coeffs.iter().rev().fold(0u64, |acc, c| {
            acc.checked_mul(q)
                .and_then(|v| v.checked_add(c.index() as u64))
                .expect("polynomial index overflows u64")
        })
    }

    /// Index of the lower coefficients of a monic polynomial.
    pub fn monic_index(&self) -> u64 {
        debug_assert!(self.is_monic());
        lower_index(self.ctx.q(), &self.coeffs, self.coeffs.len().saturating_sub(1))
    }

    #[inline]
    pub fn ctx(&self) -> &Arc<FieldCtx> {
        &self.ctx
    }

    #[inline]
    pub fn coeffs(&self) -> &[FqElem] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> FqElem {
        self.coeffs.get(i).copied().unwrap_or(FqElem::ZERO)
    }

    #[inline]
    pub fn degree(&self) -> Degree {
        match self.coeffs.len() {
            0 => Degree::NegInf,
            n => Degree::Finite(n - 1),
        }
    }

    #[inline]
    pub fn deg_lt(&self, n: usize) -> bool {
        self.coeffs.len() <= n
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == FqElem::ONE
    }

    /// True for units and zero.
    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Leading coefficient (zero for the zero polynomial).
    pub fn lead(&self) -> FqElem {
        self.coeffs.last().copied().unwrap_or(FqElem::ZERO)
    }

    pub fn is_monic(&self) -> bool {
        self.lead() == FqElem::ONE
    }

    /// Splits a nonzero polynomial as `unit · monic`.
    pub fn to_monic(&self) -> Result<(FqElem, Poly)> {
        if self.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let lc = self.lead();
        let inv = self.ctx.inv(lc)?;
        Ok((lc, self.scale(inv)))
    }

    fn check_ctx(&self, other: &Poly) -> Result<()> {
        if same_ctx(&self.ctx, &other.ctx) {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    pub fn try_add(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let f = &*self.ctx;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| f.add(self.coeff(i), other.coeff(i)))
            .collect();
        Ok(Poly::new(&self.ctx, coeffs))
    }

    pub fn try_sub(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let f = &*self.ctx;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| f.sub(self.coeff(i), other.coeff(i)))
            .collect();
        Ok(Poly::new(&self.ctx, coeffs))
    }

    pub fn try_mul(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        Ok(Poly::new(
            &self.ctx,
            mul_slices(&self.ctx, &self.coeffs, &other.coeffs),
        ))
    }

    pub fn scale(&self, c: FqElem) -> Poly {
        let f = &*self.ctx;
        Poly::new(&self.ctx, self.coeffs.iter().map(|&x| f.mul(x, c)).collect())
    }

    /// Multiplication by T^k.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let mut coeffs = vec![FqElem::ZERO; k];
        coeffs.extend_from_slice(&self.coeffs);
        Poly::new(&self.ctx, coeffs)
    }

    /// Euclidean division: `self = quot·d + rem` with `deg rem < deg d`.
    pub fn divrem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        self.check_ctx(d)?;
        if d.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let f = &*self.ctx;
        let dl = d.coeffs.len();
        if self.coeffs.len() < dl {
            return Ok((Poly::zero(&self.ctx), self.clone()));
        }
        let lc_inv = f.inv(d.lead())?;
        let mut rem = self.coeffs.clone();
        let mut quot = vec![FqElem::ZERO; rem.len() - dl + 1];
        for k in (0..quot.len()).rev() {
            let c = f.mul(rem[k + dl - 1], lc_inv);
            quot[k] = c;
            if c.is_zero() {
                continue;
            }
            for (j, &dc) in d.coeffs.iter().enumerate() {
                rem[k + j] = f.sub(rem[k + j], f.mul(c, dc));
            }
        }
        rem.truncate(dl - 1);
        Ok((Poly::new(&self.ctx, quot), Poly::new(&self.ctx, rem)))
    }

    pub fn rem(&self, d: &Poly) -> Result<Poly> {
        Ok(self.divrem(d)?.1)
    }

    /// Exact quotient; errors if `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Result<Poly> {
        let (q, r) = self.divrem(d)?;
        if r.is_zero() {
            Ok(q)
        } else {
            Err(Error::InvalidArgument(format!("{d} does not divide {self}")))
        }
    }

    pub fn divides(&self, x: &Poly) -> Result<bool> {
        Ok(x.rem(self)?.is_zero())
    }

    /// Monic gcd; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Poly) -> Result<Poly> {
        self.check_ctx(other)?;
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b)?;
            a = b;
            b = r;
        }
        if a.is_zero() {
            Ok(a)
        } else {
            Ok(a.to_monic()?.1)
        }
    }

    /// Extended gcd: returns `(g, s, t)` with `s·self + t·other = g`, `g` monic.
    pub fn xgcd(&self, other: &Poly) -> Result<(Poly, Poly, Poly)> {
        self.check_ctx(other)?;
        if self.is_zero() && other.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let ctx = &self.ctx;
        let (mut r0, mut r1) = (self.clone(), other.clone());
        let (mut s0, mut s1) = (Poly::one(ctx), Poly::zero(ctx));
        let (mut t0, mut t1) = (Poly::zero(ctx), Poly::one(ctx));
        while !r1.is_zero() {
            let (q, r) = r0.divrem(&r1)?;
            let s = &s0 - &(&q * &s1);
            let t = &t0 - &(&q * &t1);
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
            t0 = t1;
            t1 = t;
        }
        let inv = ctx.inv(r0.lead())?;
        Ok((r0.scale(inv), s0.scale(inv), t0.scale(inv)))
    }

    pub fn mul_mod(&self, other: &Poly, m: &Poly) -> Result<Poly> {
        self.try_mul(other)?.rem(m)
    }

    pub fn pow_mod(&self, exp: &BigUint, m: &Poly) -> Result<Poly> {
        let mut acc = Poly::one(&self.ctx).rem(m)?;
        let base = self.rem(m)?;
        for i in (0..exp.bits()).rev() {
            acc = acc.mul_mod(&acc, m)?;
            if exp.bit(i) {
                acc = acc.mul_mod(&base, m)?;
            }
        }
        Ok(acc)
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(&self.ctx);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        let f = &*self.ctx;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| f.mul(c, f.from_int(i as i64)))
            .collect();
        Poly::new(&self.ctx, coeffs)
    }

    /// Parses either a symbolic literal (`T^2+2T+1`, coefficients as element
    /// literals, parenthesised when they are expressions in `u`) or a
    /// comma-separated list of coefficient indices, low-to-high (`1,2,1`).
    pub fn parse(ctx: &Arc<FieldCtx>, s: &str) -> Result<Poly> {
        let s = s.trim();
        if s.contains(',') || (s.chars().all(|c| c.is_ascii_digit()) && !s.is_empty()) {
            let coeffs = s
                .split(',')
                .map(|t| ctx.parse_elem(t))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Poly::new(ctx, coeffs));
        }
        let mut coeffs: Vec<FqElem> = Vec::new();
        for term in parse_terms(s, 'T')? {
            let c = match &term.coef {
                Some(text) => ctx.parse_elem(text)?,
                None => FqElem::ONE,
            };
            let c = if term.negative { ctx.neg(c) } else { c };
            if coeffs.len() <= term.exp {
                coeffs.resize(term.exp + 1, FqElem::ZERO);
            }
            coeffs[term.exp] = ctx.add(coeffs[term.exp], c);
        }
        Ok(Poly::new(ctx, coeffs))
    }

    pub fn is_irreducible(&self) -> Result<bool> {
        if self.is_zero() || self.is_constant() {
            return Err(Error::ConstantPolynomial);
        }
        let (_, m) = self.to_monic()?;
        let d = m.coeffs.len() - 1;
        if let Some(table) = irr_table(&self.ctx, d) {
            return Ok(table.is_irr[m.monic_index() as usize]);
        }
        ben_or(&m)
    }

    /// Complete factorization into a unit and monic irreducible powers, sorted by
    /// (degree, index).
    pub fn factorize(&self) -> Result<Factorization> {
        let (unit, m) = self.to_monic()?;
        let d = m.coeffs.len() - 1;
        let mut factors = if d == 0 {
            Vec::new()
        } else if (1..=d / 2).all(|e| irr_table(&self.ctx, e).is_some()) {
            factor_trial(&m)?
        } else {
            factor_cantor_zassenhaus(&m)?
        };
        factors.sort_by(|a, b| {
            a.0.degree()
                .cmp(&b.0.degree())
                .then_with(|| a.0.index().cmp(&b.0.index()))
        });
        Ok(Factorization { unit, factors })
    }

    /// Number of monic divisors.
    pub fn divisor_count(&self) -> Result<u64> {
        Ok(self
            .factorize()?
            .factors
            .iter()
            .map(|(_, e)| *e as u64 + 1)
            .product())
    }

    /// All monic divisors, sorted by (degree, index).
    pub fn monic_divisors(&self) -> Result<Vec<Poly>> {
        let fac = self.factorize()?;
        let mut divs = vec![Poly::one(&self.ctx)];
        for (p, e) in &fac.factors {
            let mut next = Vec::with_capacity(divs.len() * (*e as usize + 1));
            for d in &divs {
                let mut cur = d.clone();
                next.push(cur.clone());
                for _ in 0..*e {
                    cur = &cur * p;
                    next.push(cur.clone());
                }
            }
            divs = next;
        }
        divs.sort_by(|a, b| a.degree().cmp(&b.degree()).then(a.index().cmp(&b.index())));
        Ok(divs)
    }

    /// φ(x) for nonzero x: the number of residues modulo x coprime to x.
    pub fn euler_phi(&self) -> Result<u64> {
        let fac = self.factorize()?;
        let q = self.ctx.q() as u64;
        let mut phi = 1u64;
        for (p, e) in &fac.factors {
            let dp = p.coeffs.len() as u32 - 1;
            let norm = q
                .checked_pow(dp)
                .ok_or_else(|| Error::ResourceLimit("φ overflows u64".into()))?;
            let part = (norm - 1)
                .checked_mul(norm.checked_pow(e - 1).unwrap_or(u64::MAX))
                .ok_or_else(|| Error::ResourceLimit("φ overflows u64".into()))?;
            phi = phi
                .checked_mul(part)
                .ok_or_else(|| Error::ResourceLimit("φ overflows u64".into()))?;
        }
        Ok(phi)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let ctx = &*self.ctx;
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, "+")?;
            }
            first = false;
            let cs = ctx.format_elem(c);
            let cs = if cs.contains('+') {
                format!("({cs})")
            } else {
                cs
            };
            match i {
                0 => write!(f, "{cs}")?,
                _ => {
                    if c != FqElem::ONE {
                        write!(f, "{cs}")?;
                    }
                    if i == 1 {
                        write!(f, "T")?;
                    } else {
                        write!(f, "T^{i}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.try_add(rhs).expect("polynomials over different fields")
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.try_sub(rhs).expect("polynomials over different fields")
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.try_mul(rhs).expect("polynomials over different fields")
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        let f = &*self.ctx;
        Poly::new(&self.ctx, self.coeffs.iter().map(|&c| f.neg(c)).collect())
    }
}

/// `unit · Π P_i^{e_i}` with monic irreducible `P_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub unit: FqElem,
    pub factors: Vec<(Poly, u32)>,
}

impl Factorization {
    pub fn expand(&self, ctx: &Arc<FieldCtx>) -> Poly {
        let mut acc = Poly::constant(ctx, self.unit);
        for (p, e) in &self.factors {
            acc = &acc * &p.pow(*e);
        }
        acc
    }

    /// Number of distinct irreducible factors.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|(_, e)| *e == 1)
    }
}

// ---------------------------------------------------------------------------
// Enumeration

/// The q^n polynomials of degree < n in base-q counter order (constant
/// coefficient fastest).
pub fn all_deg_lt(ctx: &Arc<FieldCtx>, n: usize) -> Result<impl Iterator<Item = Poly> + '_> {
    let count = checked_pow(ctx.q(), n)?;
    Ok(all_deg_lt_range(ctx, 0..count))
}

/// A contiguous block of the `all_deg_lt` stream, for partitioned consumers.
pub fn all_deg_lt_range(
    ctx: &Arc<FieldCtx>,
    range: std::ops::Range<u64>,
) -> impl Iterator<Item = Poly> + '_ {
    range.map(move |i| Poly::from_index(ctx, i))
}

/// The q^n monic polynomials of degree exactly n.
pub fn monic_deg_eq(ctx: &Arc<FieldCtx>, n: usize) -> Result<impl Iterator<Item = Poly> + '_> {
    let count = checked_pow(ctx.q(), n)?;
    Ok((0..count).map(move |i| Poly::monic_from_index(ctx, n, i)))
}

/// Enumeration selector for [`enumerate`].
#[derive(Clone, Copy, Debug)]
pub enum EnumKind<'a> {
    AllDegLt(usize),
    MonicDegEq(usize),
    UnitsMod(&'a Poly),
}

/// Deterministic enumeration of one of the standard ranges.
pub fn enumerate<'a>(
    ctx: &'a Arc<FieldCtx>,
    kind: EnumKind<'a>,
) -> Result<Box<dyn Iterator<Item = Poly> + 'a>> {
    Ok(match kind {
        EnumKind::AllDegLt(n) => Box::new(all_deg_lt(ctx, n)?),
        EnumKind::MonicDegEq(n) => Box::new(monic_deg_eq(ctx, n)?),
        EnumKind::UnitsMod(f) => {
            if f.is_zero() {
                return Err(Error::ZeroPolynomial);
            }
            let r = f.coeffs.len() - 1;
            let f = f.clone();
            Box::new(all_deg_lt(ctx, r)?.filter(move |x| {
                x.gcd(&f).map(|g| g.is_one()).unwrap_or(false)
            }))
        }
    })
}

// ---------------------------------------------------------------------------
// Irreducible tables

/// Degrees with cached irreducible tables.
pub const IRR_CACHE_MAX_DEGREE: usize = 6;
const IRR_CACHE_MAX_STATES: u64 = 1 << 20;

#[derive(Default)]
pub(crate) struct IrrCache {
    tables: [OnceLock<Option<Arc<IrrTable>>>; IRR_CACHE_MAX_DEGREE + 1],
}

pub(crate) struct IrrTable {
    /// Indexed by monic index.
    pub is_irr: Vec<bool>,
    /// Monic indices of the irreducibles, ascending.
    pub list: Vec<u64>,
}

/// Sieved table of monic irreducibles of degree `d`, if `d` is small enough
/// to be cached.
pub(crate) fn irr_table(ctx: &Arc<FieldCtx>, d: usize) -> Option<Arc<IrrTable>> {
    if d == 0 || d > IRR_CACHE_MAX_DEGREE {
        return None;
    }
    ctx.irreducibles.tables[d]
        .get_or_init(|| {
            let size = checked_pow(ctx.q(), d).ok()?;
            if size > IRR_CACHE_MAX_STATES {
                return None;
            }
            let mut is_irr = vec![true; size as usize];
            let q = ctx.q();
            for e in 1..=d / 2 {
                let small = irr_table(ctx, e)?;
                let cof_count = (q as u64).pow((d - e) as u32);
                for &pi in &small.list {
                    let pc = monic_coeffs(q, e, pi);
                    for ci in 0..cof_count {
                        let cc = monic_coeffs(q, d - e, ci);
                        let prod = mul_slices(ctx, &pc, &cc);
                        is_irr[lower_index(q, &prod, d) as usize] = false;
                    }
                }
            }
            let list = (0..size).filter(|&i| is_irr[i as usize]).collect();
            Some(Arc::new(IrrTable { is_irr, list }))
        })
        .clone()
}

/// Monic irreducibles of degree `d`, ascending by index.
pub fn monic_irreducibles(ctx: &Arc<FieldCtx>, d: usize) -> Result<Vec<Poly>> {
    if let Some(t) = irr_table(ctx, d) {
        return Ok(t
            .list
            .iter()
            .map(|&i| Poly::monic_from_index(ctx, d, i))
            .collect());
    }
    let mut out = Vec::new();
    for x in monic_deg_eq(ctx, d)? {
        if x.is_irreducible()? {
            out.push(x);
        }
    }
    Ok(out)
}

/// Ben-Or irreducibility test for monic `f` of degree >= 1.
fn ben_or(f: &Poly) -> Result<bool> {
    let ctx = f.ctx();
    let d = f.coeffs.len() - 1;
    let t = Poly::t(ctx);
    let q = BigUint::from(ctx.q());
    let mut h = t.rem(f)?;
    for _ in 1..=d / 2 {
        h = h.pow_mod(&q, f)?;
        let g = (&h - &t).gcd(f)?;
        if !g.is_one() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn factor_trial(f: &Poly) -> Result<Vec<(Poly, u32)>> {
    let ctx = f.ctx().clone();
    let mut rest = f.clone();
    let mut out = Vec::new();
    let mut e = 1;
    while 2 * e <= rest.coeffs.len() - 1 {
        let table = irr_table(&ctx, e).expect("trial division needs cached tables");
        for &pi in &table.list {
            if 2 * e > rest.coeffs.len() - 1 {
                break;
            }
            let p = Poly::monic_from_index(&ctx, e, pi);
            let mut mult = 0;
            loop {
                let (q, r) = rest.divrem(&p)?;
                if !r.is_zero() {
                    break;
                }
                rest = q;
                mult += 1;
            }
            if mult > 0 {
                out.push((p, mult));
            }
        }
        e += 1;
    }
    if rest.coeffs.len() > 1 {
        // Remaining cofactor has no factor of degree <= deg/2. It may still be a
        // power of an already-found prime when that prime exceeds the bound.
        if let Some(entry) = out.iter_mut().find(|(p, _)| *p == rest) {
            entry.1 += 1;
        } else {
            out.push((rest, 1));
        }
    }
    Ok(out)
}

fn factor_cantor_zassenhaus(f: &Poly) -> Result<Vec<(Poly, u32)>> {
    let mut out: Vec<(Poly, u32)> = Vec::new();
    for (sqf, mult) in squarefree_decomposition(f)? {
        for (deg, part) in distinct_degree(&sqf)? {
            for p in equal_degree(&part, deg)? {
                match out.iter_mut().find(|(x, _)| *x == p) {
                    Some(entry) => entry.1 += mult,
                    None => out.push((p, mult)),
                }
            }
        }
    }
    Ok(out)
}

/// Square-free decomposition of monic `f` in characteristic p.
fn squarefree_decomposition(f: &Poly) -> Result<Vec<(Poly, u32)>> {
    let ctx = f.ctx().clone();
    let p = ctx.p();
    let mut out = Vec::new();
    let mut i = 1u32;
    let fp = f.derivative();
    let mut c = f.gcd(&fp)?;
    let mut w = f.exact_div(&c)?;
    while !w.is_one() {
        let y = w.gcd(&c)?;
        let fac = w.exact_div(&y)?;
        if !fac.is_one() {
            out.push((fac, i));
        }
        w = y;
        c = c.exact_div(&w)?;
        i += 1;
    }
    if !c.is_one() {
        // c is a p-th power.
        let root_coeffs: Vec<FqElem> = c
            .coeffs
            .iter()
            .step_by(p as usize)
            .map(|&x| ctx.pth_root(x))
            .collect();
        let root = Poly::new(&ctx, root_coeffs);
        for (g, m) in squarefree_decomposition(&root)? {
            out.push((g, m * p));
        }
    }
    Ok(out)
}

fn distinct_degree(f: &Poly) -> Result<Vec<(usize, Poly)>> {
    let ctx = f.ctx().clone();
    let t = Poly::t(&ctx);
    let q = BigUint::from(ctx.q());
    let mut out = Vec::new();
    let mut rest = f.clone();
    let mut h = t.rem(&rest)?;
    let mut d = 1;
    while rest.coeffs.len() - 1 >= 2 * d {
        h = h.pow_mod(&q, &rest)?;
        let g = (&h - &t).gcd(&rest)?;
        if !g.is_one() {
            rest = rest.exact_div(&g)?;
            h = h.rem(&rest)?;
            out.push((d, g));
        }
        d += 1;
    }
    if rest.coeffs.len() > 1 {
        out.push((rest.coeffs.len() - 1, rest));
    }
    Ok(out)
}

fn equal_degree(f: &Poly, d: usize) -> Result<Vec<Poly>> {
    let n = f.coeffs.len() - 1;
    if n == d {
        return Ok(vec![f.clone()]);
    }
    let ctx = f.ctx().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ (n as u64) << 8 ^ d as u64);
    let exp = (BigUint::from(ctx.q()).pow(d as u32) - 1u32) / 2u32;
    let one = Poly::one(&ctx);
    loop {
        let coeffs: Vec<FqElem> = (0..n).map(|_| FqElem(rng.gen_range(0..ctx.q()))).collect();
        let a = Poly::new(&ctx, coeffs);
        if a.is_constant() {
            continue;
        }
        let g = a.gcd(f)?;
        let g = if !g.is_one() {
            g
        } else {
            let b = a.pow_mod(&exp, f)?;
            (&b - &one).gcd(f)?
        };
        let gd = g.coeffs.len() - 1;
        if gd > 0 && gd < n {
            let mut out = equal_degree(&g, d)?;
            out.extend(equal_degree(&f.exact_div(&g)?, d)?);
            return Ok(out);
        }
    }
}

#[cfg(test)]
pub(crate) fn factor_with_cantor_zassenhaus(f: &Poly) -> Result<Vec<(Poly, u32)>> {
    let mut v = factor_cantor_zassenhaus(&f.to_monic()?.1)?;
    v.sort_by(|a, b| a.0.degree().cmp(&b.0.degree()).then(a.0.index().cmp(&b.0.index())));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn gf(p: u32, ell: u32) -> Arc<FieldCtx> {
        FieldCtx::new(p, ell, None).unwrap()
    }

    fn poly(ctx: &Arc<FieldCtx>, s: &str) -> Poly {
        Poly::parse(ctx, s).unwrap()
    }

    #[test]
    fn degree_sentinel_orders_below_everything() {
        let f = gf(3, 1);
        assert_eq!(Poly::zero(&f).degree(), Degree::NegInf);
        assert!(Degree::NegInf < Degree::Finite(0));
        assert!(Poly::zero(&f).deg_lt(0));
        assert!(!Poly::one(&f).deg_lt(0));
        assert!(Poly::t(&f).degree() < 2usize);
    }

    #[test]
    fn arithmetic_examples() {
        let f = gf(3, 1);
        let (q, r) = poly(&f, "T^2+1").divrem(&poly(&f, "T")).unwrap();
        assert_eq!((q, r), (poly(&f, "T"), poly(&f, "1")));
        assert_eq!(&poly(&f, "T+1") * &poly(&f, "T+2"), poly(&f, "T^2+2"));
        let x = poly(&f, "2T^3+T");
        assert_eq!(&x + &Poly::zero(&f), x);
        assert_eq!(x.divrem(&Poly::zero(&f)), Err(Error::DivisionByZero));
    }

    #[test]
    fn context_mismatch_is_reported() {
        let a = Poly::t(&gf(3, 1));
        let b = Poly::t(&gf(5, 1));
        assert_eq!(a.try_add(&b), Err(Error::ContextMismatch));
        assert_eq!(a.divrem(&b), Err(Error::ContextMismatch));
    }

    #[test]
    fn xgcd_examples() {
        let f = gf(3, 1);
        let (g, s, t) = poly(&f, "T^2-1").xgcd(&poly(&f, "T-1")).unwrap();
        assert_eq!(g, poly(&f, "T+2"));
        assert_eq!(&(&s * &poly(&f, "T^2-1")) + &(&t * &poly(&f, "T-1")), g);
        assert!(poly(&f, "T").xgcd(&poly(&f, "T+1")).unwrap().0.is_one());
        let f5 = gf(5, 1);
        assert_eq!(poly(&f5, "T^2").xgcd(&poly(&f5, "T^3")).unwrap().0, poly(&f5, "T^2"));
        assert_eq!(
            Poly::zero(&f).xgcd(&Poly::zero(&f)).unwrap_err(),
            Error::ZeroPolynomial
        );
    }

    #[test]
    fn enumeration_counts_and_order() {
        let f = gf(3, 1);
        let v: Vec<Poly> = all_deg_lt(&f, 1).unwrap().collect();
        assert_eq!(v, vec![poly(&f, "0"), poly(&f, "1"), poly(&f, "2")]);
        assert_eq!(monic_deg_eq(&f, 2).unwrap().count(), 9);
        let t2 = poly(&f, "T^2");
        assert_eq!(enumerate(&f, EnumKind::UnitsMod(&t2)).unwrap().count(), 6);
        let all: Vec<u64> = all_deg_lt(&f, 3).unwrap().map(|p| p.index()).collect();
        assert_eq!(all, (0..27).collect::<Vec<_>>());
    }

    #[test]
    fn factorization_examples() {
        let f = gf(3, 1);
        let fac = poly(&f, "T^2+2T+1").factorize().unwrap();
        assert_eq!(fac.unit, FqElem::ONE);
        assert_eq!(fac.factors, vec![(poly(&f, "T+1"), 2)]);
        let fac = poly(&f, "2T").factorize().unwrap();
        assert_eq!(fac.unit, FqElem(2));
        assert_eq!(fac.factors, vec![(poly(&f, "T"), 1)]);
        let fac = poly(&f, "T^2+1").factorize().unwrap();
        assert_eq!(fac.factors, vec![(poly(&f, "T^2+1"), 1)]);
        assert_eq!(Poly::zero(&f).factorize().unwrap_err(), Error::ZeroPolynomial);
    }

    #[test]
    fn irreducibility_examples() {
        let f = gf(3, 1);
        assert!(poly(&f, "T+1").is_irreducible().unwrap());
        assert!(!poly(&f, "T^2").is_irreducible().unwrap());
        assert_eq!(poly(&f, "2").is_irreducible(), Err(Error::ConstantPolynomial));
        // Brute-force: a monic quadratic is irreducible iff it has no root.
        let brute = monic_deg_eq(&f, 2)
            .unwrap()
            .filter(|x| {
                f.elements().all(|a| {
                    let c = x.coeffs();
                    let v = f.add(f.add(f.mul(a, a), f.mul(c[1], a)), c[0]);
                    !v.is_zero()
                })
            })
            .count();
        assert_eq!(brute, 3);
        assert_eq!(monic_irreducibles(&f, 2).unwrap().len(), 3);
    }

    #[test]
    fn irreducible_counts_match_necklace_formula() {
        // Gauss: d·N(d) = Σ_{e|d} μ(d/e) q^e.
        fn mobius_int(n: u64) -> i64 {
            let (mut n, mut k, mut p) = (n, 0, 2);
            while p * p <= n {
                if n % p == 0 {
                    n /= p;
                    if n % p == 0 {
                        return 0;
                    }
                    k += 1;
                }
                p += 1;
            }
            if n > 1 {
                k += 1;
            }
            if k % 2 == 0 { 1 } else { -1 }
        }
        for (p, ell, dmax) in [(3, 1, 6), (5, 1, 4), (3, 2, 3)] {
            let f = gf(p, ell);
            let q = f.q() as i64;
            for d in 1..=dmax {
                let total: i64 = (1..=d as u64)
                    .filter(|e| d as u64 % e == 0)
                    .map(|e| mobius_int(d as u64 / e) * q.pow(e as u32))
                    .sum();
                assert_eq!(monic_irreducibles(&f, d).unwrap().len() as i64, total / d as i64);
            }
        }
    }

    #[test]
    fn ben_or_agrees_with_table() {
        let f = gf(3, 1);
        for x in monic_deg_eq(&f, 4).unwrap() {
            assert_eq!(ben_or(&x).unwrap(), x.is_irreducible().unwrap(), "{x}");
        }
    }

    #[test]
    fn factorization_reassembles_exhaustively() {
        for p in [3u32, 5] {
            let f = gf(p, 1);
            let dmax = if p == 3 { 4 } else { 3 };
            for x in all_deg_lt(&f, dmax + 1).unwrap().filter(|x| !x.is_constant()) {
                let fac = x.factorize().unwrap();
                assert_eq!(fac.expand(&f), x);
                for (p, _) in &fac.factors {
                    assert!(p.is_monic() && p.is_irreducible().unwrap());
                }
            }
        }
    }

    #[test]
    fn cantor_zassenhaus_agrees_with_trial_division() {
        let f = gf(3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let deg = rng.gen_range(1..12);
            let mut c: Vec<FqElem> = (0..deg).map(|_| FqElem(rng.gen_range(0..3))).collect();
            c.push(FqElem::ONE);
            let x = Poly::new(&f, c);
            let direct = x.factorize().unwrap().factors;
            assert_eq!(factor_with_cantor_zassenhaus(&x).unwrap(), direct, "{x}");
        }
        // Inseparable input: (T^3 + 2T + 1)^3 · T^2.
        let base = poly(&f, "T^3+2T+1");
        let x = &base.pow(3) * &poly(&f, "T^2");
        assert_eq!(
            factor_with_cantor_zassenhaus(&x).unwrap(),
            vec![(poly(&f, "T"), 2), (base, 3)]
        );
    }

    #[test]
    fn large_degree_uses_fallback() {
        let f = gf(3, 1);
        let a = poly(&f, "T^7+2T+1");
        assert!(a.is_irreducible().unwrap() || !a.is_irreducible().unwrap());
        let x = &(&a * &a) * &poly(&f, "T^2+1");
        let fac = x.factorize().unwrap();
        assert_eq!(fac.expand(&f), x);
        assert!(fac.factors.iter().all(|(p, _)| p.is_irreducible().unwrap()));
    }

    #[test]
    fn phi_examples_and_brute_force() {
        let f = gf(3, 1);
        assert_eq!(poly(&f, "T").euler_phi().unwrap(), 2);
        assert_eq!(poly(&f, "T^2").euler_phi().unwrap(), 6);
        assert_eq!(poly(&f, "T^2+T").euler_phi().unwrap(), 4);
        for r in 1..=3 {
            for m in monic_deg_eq(&f, r).unwrap() {
                let brute = all_deg_lt(&f, r)
                    .unwrap()
                    .filter(|x| x.gcd(&m).unwrap().is_one())
                    .count() as u64;
                assert_eq!(m.euler_phi().unwrap(), brute, "{m}");
            }
        }
    }

    #[test]
    fn divisor_count_examples_and_enumeration() {
        let f = gf(3, 1);
        assert_eq!(poly(&f, "T^2").divisor_count().unwrap(), 3);
        assert_eq!(poly(&f, "1").divisor_count().unwrap(), 1);
        assert_eq!(poly(&f, "T^2+T").divisor_count().unwrap(), 4);
        for x in all_deg_lt(&f, 5).unwrap().filter(|x| !x.is_zero()) {
            let d = x.degree().finite().unwrap();
            let brute = (0..=d)
                .flat_map(|e| monic_deg_eq(&f, e).unwrap())
                .filter(|m| m.divides(&x).unwrap())
                .count() as u64;
            assert_eq!(x.divisor_count().unwrap(), brute);
            assert_eq!(x.monic_divisors().unwrap().len() as u64, brute);
        }
    }

    #[test]
    fn literals_parse_and_print() {
        let f = gf(3, 1);
        let x = poly(&f, "T^2+2T+1");
        assert_eq!(x.to_string(), "T^2+2T+1");
        assert_eq!(poly(&f, "1,2,1"), x);
        assert_eq!(poly(&f, "2*T"), poly(&f, "0,2"));
        assert_eq!(poly(&f, "T - 1"), poly(&f, "T+2"));
        let g = gf(3, 2);
        let y = poly(&g, "(u+1)T^2+uT+2");
        assert_eq!(y.to_string(), "(u+1)T^2+uT+2");
        assert_eq!(Poly::parse(&g, &y.to_string()).unwrap(), y);
    }

    proptest! {
        #[test]
        fn divrem_contract(a in 0u64..6561, b in 1u64..729) {
            let f = gf(3, 1);
            let (x, y) = (Poly::from_index(&f, a), Poly::from_index(&f, b));
            let (q, r) = x.divrem(&y).unwrap();
            prop_assert_eq!(&(&q * &y) + &r, x);
            prop_assert!(r.degree() < y.degree());
        }

        #[test]
        fn xgcd_bezout(a in 0u64..6561, b in 1u64..6561) {
            let f = gf(3, 1);
            let (x, y) = (Poly::from_index(&f, a), Poly::from_index(&f, b));
            let (g, s, t) = x.xgcd(&y).unwrap();
            prop_assert!(g.is_monic());
            prop_assert_eq!(&(&s * &x) + &(&t * &y), g.clone());
            prop_assert!(g.divides(&x).unwrap() && g.divides(&y).unwrap());
        }

        #[test]
        fn literal_round_trip(idx in 0u64..(81u64.pow(3))) {
            let f = gf(3, 4);
            let x = Poly::from_index(&f, idx);
            prop_assert_eq!(Poly::parse(&f, &x.to_string()).unwrap(), x);
        }
    }
}
