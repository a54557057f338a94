//! The coefficient field GF(q) = GF(p^ell) for an odd prime p.
//!
//! Elements are stored as their index `Σ c_i p^i`, where `(c_0, .., c_{ell-1})`
//! are the coordinates in the polynomial basis `1, u, .., u^{ell-1}` of
//! GF(p)[u]/(defining_poly). Small fields get full addition and multiplication
//! tables; every field gets negation, inversion and trace tables.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::literal::parse_terms;
use crate::poly::{IrrCache, Poly};

/// Largest supported field order.
pub const MAX_FIELD_ORDER: u64 = 1 << 16;

/// Fields up to this order get q×q addition and multiplication tables.
const TABLE_ORDER: u32 = 256;

/// An element of GF(q), identified by its coordinate index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FqElem(pub(crate) u32);

impl FqElem {
    pub const ZERO: FqElem = FqElem(0);
    pub const ONE: FqElem = FqElem(1);

    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Arithmetic context for GF(p^ell). Immutable once built and shared through `Arc`.
pub struct FieldCtx {
    p: u32,
    ell: u32,
    q: u32,
    defining: Vec<u32>,
    add_tab: Vec<u32>,
    mul_tab: Vec<u32>,
    neg_tab: Vec<u32>,
    inv_tab: Vec<u32>,
    trace_tab: Vec<u32>,
    pub(crate) irreducibles: IrrCache,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})[{:?}]", self.p, self.ell, self.defining)
    }
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.ell == other.ell && self.defining == other.defining
    }
}

impl Eq for FieldCtx {}

pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldCtx {
    /// Builds GF(p^ell). Without `defining`, the lexicographically smallest monic
    /// irreducible of degree `ell` over GF(p) is used (coefficients compared from
    /// the constant term upwards). `defining` lists coefficients low-to-high and
    /// may omit the leading 1.
    pub fn new(p: u32, ell: u32, defining: Option<&[u32]>) -> Result<Arc<FieldCtx>> {
        if !is_prime_u64(p as u64) {
            return Err(Error::NotPrime(p as u64));
        }
        if p == 2 {
            return Err(Error::EvenCharacteristic(2));
        }
        if ell == 0 {
            return Err(Error::InvalidArgument("extension degree must be >= 1".into()));
        }
        let q = (p as u64)
            .checked_pow(ell)
            .filter(|&q| q <= MAX_FIELD_ORDER)
            .ok_or_else(|| {
                Error::ResourceLimit(format!("field order {p}^{ell} exceeds {MAX_FIELD_ORDER}"))
            })?;

        let modulus = match defining {
            Some(coeffs) => {
                let mut m = coeffs.to_vec();
                if m.len() == ell as usize {
                    m.push(1);
                }
                if m.len() != ell as usize + 1 || *m.last().unwrap() != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "defining polynomial must be monic of degree {ell}"
                    )));
                }
                if m.iter().any(|&c| c >= p) {
                    return Err(Error::InvalidArgument(format!(
                        "defining polynomial coefficients must lie in [0, {p})"
                    )));
                }
                if ell > 1 {
                    let base = Self::build(p, 1, vec![0, 1]);
                    let poly = Poly::new(&base, m.iter().map(|&c| FqElem(c)).collect());
                    if !poly.is_irreducible()? {
                        return Err(Error::NotIrreducible(poly.to_string()));
                    }
                }
                m
            }
            None if ell == 1 => vec![0, 1],
            None => Self::smallest_irreducible(p, ell)?,
        };
        debug_assert_eq!(q, (p as u64).pow(ell));
        Ok(Self::build(p, ell, modulus))
    }

    /// The prime field GF(p).
    pub fn prime(p: u32) -> Result<Arc<FieldCtx>> {
        Self::new(p, 1, None)
    }

    fn smallest_irreducible(p: u32, ell: u32) -> Result<Vec<u32>> {
        let base = Self::build(p, 1, vec![0, 1]);
        let count = (p as u64).pow(ell);
        for t in 0..count {
            // c_0 is the most significant key of the ordering.
            let mut coeffs = vec![0u32; ell as usize + 1];
            let mut rest = t;
            for i in (0..ell as usize).rev() {
                coeffs[i] = (rest % p as u64) as u32;
                rest /= p as u64;
            }
            coeffs[ell as usize] = 1;
            let poly = Poly::new(&base, coeffs.iter().map(|&c| FqElem(c)).collect());
            if poly.is_irreducible()? {
                return Ok(coeffs);
            }
        }
        Err(Error::InvariantViolation(format!(
            "no irreducible polynomial of degree {ell} over GF({p})"
        )))
    }

    fn build(p: u32, ell: u32, defining: Vec<u32>) -> Arc<FieldCtx> {
        let q = p.pow(ell);
        let mut ctx = FieldCtx {
            p,
            ell,
            q,
            defining,
            add_tab: Vec::new(),
            mul_tab: Vec::new(),
            neg_tab: Vec::new(),
            inv_tab: Vec::new(),
            trace_tab: Vec::new(),
            irreducibles: IrrCache::default(),
        };
        if q <= TABLE_ORDER {
            let mut add = vec![0u32; (q * q) as usize];
            let mut mul = vec![0u32; (q * q) as usize];
            for a in 0..q {
                for b in 0..q {
                    add[(a * q + b) as usize] = ctx.add_slow(a, b);
                    mul[(a * q + b) as usize] = ctx.mul_slow(a, b);
                }
            }
            ctx.add_tab = add;
            ctx.mul_tab = mul;
        }
        ctx.neg_tab = (0..q).map(|a| ctx.neg_slow(a)).collect();
        ctx.inv_tab = (0..q)
            .map(|a| if a == 0 { 0 } else { ctx.pow_slow(a, q as u64 - 2) })
            .collect();
        ctx.trace_tab = (0..q).map(|a| ctx.trace_slow(a)).collect();
        Arc::new(ctx)
    }

    /// Parses `"p^ell"`, `"p"`, or either followed by `:c0,c1,..` giving the
    /// defining polynomial low-to-high.
    pub fn parse_spec(spec: &str) -> Result<Arc<FieldCtx>> {
        let spec = spec.trim();
        let (head, coeffs) = match spec.split_once(':') {
            Some((h, c)) => (h, Some(c)),
            None => (spec, None),
        };
        let (p, ell) = match head.split_once('^') {
            Some((p, e)) => (p.trim(), e.trim()),
            None => (head.trim(), "1"),
        };
        let p: u32 = p
            .parse()
            .map_err(|_| Error::Parse(format!("bad characteristic in field spec {spec:?}")))?;
        let ell: u32 = ell
            .parse()
            .map_err(|_| Error::Parse(format!("bad extension degree in field spec {spec:?}")))?;
        let coeffs = coeffs
            .map(|c| {
                c.split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<u32>()
                            .map_err(|_| Error::Parse(format!("bad coefficient {t:?}")))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .transpose()?;
        FieldCtx::new(p, ell, coeffs.as_deref())
    }

    /// Canonical spec string, always including the defining polynomial.
    pub fn spec_string(&self) -> String {
        let coeffs: Vec<String> = self.defining.iter().map(|c| c.to_string()).collect();
        format!("{}^{}:{}", self.p, self.ell, coeffs.join(","))
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn ell(&self) -> u32 {
        self.ell
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    /// Defining polynomial of GF(q) over GF(p), low-to-high, monic.
    pub fn defining_poly(&self) -> &[u32] {
        &self.defining
    }

    pub fn elem(&self, index: u32) -> Result<FqElem> {
        if index < self.q {
            Ok(FqElem(index))
        } else {
            Err(Error::InvalidArgument(format!("element index {index} >= q = {}", self.q)))
        }
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, n: i64) -> FqElem {
        FqElem(n.rem_euclid(self.p as i64) as u32)
    }

    pub fn elements(&self) -> impl Iterator<Item = FqElem> {
        (0..self.q).map(FqElem)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FqElem> {
        (1..self.q).map(FqElem)
    }

    pub fn coords(&self, x: FqElem) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.ell as usize);
        let mut v = x.0;
        for _ in 0..self.ell {
            out.push(v % self.p);
            v /= self.p;
        }
        out
    }

    pub fn from_coords(&self, coords: &[u32]) -> FqElem {
        let mut v = 0u32;
        for &c in coords.iter().rev() {
            v = v * self.p + c % self.p;
        }
        FqElem(v)
    }

    #[inline]
    pub fn add(&self, a: FqElem, b: FqElem) -> FqElem {
        if self.add_tab.is_empty() {
            FqElem(self.add_slow(a.0, b.0))
        } else {
            FqElem(self.add_tab[(a.0 * self.q + b.0) as usize])
        }
    }

    #[inline]
    pub fn neg(&self, a: FqElem) -> FqElem {
        FqElem(self.neg_tab[a.0 as usize])
    }

    #[inline]
    pub fn sub(&self, a: FqElem, b: FqElem) -> FqElem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FqElem, b: FqElem) -> FqElem {
        if self.mul_tab.is_empty() {
            FqElem(self.mul_slow(a.0, b.0))
        } else {
            FqElem(self.mul_tab[(a.0 * self.q + b.0) as usize])
        }
    }

    pub fn inv(&self, a: FqElem) -> Result<FqElem> {
        if a.is_zero() {
            Err(Error::DivisionByZero)
        } else {
            Ok(FqElem(self.inv_tab[a.0 as usize]))
        }
    }

    pub fn div(&self, a: FqElem, b: FqElem) -> Result<FqElem> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FqElem, mut e: u64) -> FqElem {
        let mut base = a;
        let mut acc = FqElem::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// x ↦ x^p.
    pub fn frobenius(&self, a: FqElem) -> FqElem {
        self.pow(a, self.p as u64)
    }

    /// Inverse Frobenius x ↦ x^{q/p}.
    pub fn pth_root(&self, a: FqElem) -> FqElem {
        self.pow(a, (self.q / self.p) as u64)
    }

    /// Absolute trace to GF(p), returned as a residue in [0, p).
    #[inline]
    pub fn trace(&self, a: FqElem) -> u32 {
        self.trace_tab[a.0 as usize]
    }

    pub fn format_elem(&self, a: FqElem) -> String {
        if self.ell == 1 {
            return a.0.to_string();
        }
        let coords = self.coords(a);
        let mut parts = Vec::new();
        for (i, &c) in coords.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let var = match i {
                0 => String::new(),
                1 => "u".to_string(),
                _ => format!("u^{i}"),
            };
            if i == 0 {
                parts.push(c.to_string());
            } else if c == 1 {
                parts.push(var);
            } else {
                parts.push(format!("{c}{var}"));
            }
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join("+")
        }
    }

    /// Parses an element: a decimal index in [0, q), or for ell > 1 a polynomial
    /// in `u` such as `2u+1`.
    pub fn parse_elem(&self, s: &str) -> Result<FqElem> {
        let s = s.trim();
        if let Ok(v) = s.parse::<u64>() {
            return u32::try_from(v)
                .map_err(|_| Error::Parse(format!("element index {v} out of range")))
                .and_then(|v| self.elem(v));
        }
        let mut coords = vec![0u32; self.ell as usize];
        for term in parse_terms(s, 'u')? {
            if term.exp >= self.ell as usize {
                return Err(Error::Parse(format!(
                    "power u^{} is not reduced for GF({}^{})",
                    term.exp, self.p, self.ell
                )));
            }
            let c = match &term.coef {
                Some(text) => text
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad coordinate {text:?}")))?
                    % self.p as u64,
                None => 1,
            } as u32;
            let c = if term.negative { (self.p - c) % self.p } else { c };
            let slot = &mut coords[term.exp];
            *slot = (*slot + c) % self.p;
        }
        Ok(self.from_coords(&coords))
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        let (mut a, mut b) = (a, b);
        let mut out = 0u32;
        let mut scale = 1u32;
        for _ in 0..self.ell {
            out += ((a % self.p + b % self.p) % self.p) * scale;
            a /= self.p;
            b /= self.p;
            scale *= self.p;
        }
        out
    }

    fn neg_slow(&self, a: u32) -> u32 {
        let mut a = a;
        let mut out = 0u32;
        let mut scale = 1u32;
        for _ in 0..self.ell {
            out += ((self.p - a % self.p) % self.p) * scale;
            a /= self.p;
            scale *= self.p;
        }
        out
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.p as u64;
        let ell = self.ell as usize;
        let ca = self.coords(FqElem(a));
        let cb = self.coords(FqElem(b));
        let mut prod = vec![0u64; 2 * ell - 1];
        for (i, &x) in ca.iter().enumerate() {
            for (j, &y) in cb.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p;
            }
        }
        for k in (ell..prod.len()).rev() {
            let c = prod[k];
            if c == 0 {
                continue;
            }
            prod[k] = 0;
            for i in 0..ell {
                let sub = c * self.defining[i] as u64 % p;
                prod[k - ell + i] = (prod[k - ell + i] + p - sub) % p;
            }
        }
        let coords: Vec<u32> = prod[..ell].iter().map(|&c| c as u32).collect();
        self.from_coords(&coords).0
    }

    fn pow_slow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, base);
            }
            base = self.mul_slow(base, base);
            e >>= 1;
        }
        acc
    }

    fn trace_slow(&self, a: u32) -> u32 {
        let mut acc = 0u32;
        let mut conj = a;
        for _ in 0..self.ell {
            acc = self.add_slow(acc, conj);
            conj = self.pow_slow(conj, self.p as u64);
        }
        assert!(acc < self.p, "trace left the prime subfield");
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf(p: u32, ell: u32) -> Arc<FieldCtx> {
        FieldCtx::new(p, ell, None).unwrap()
    }

    #[test]
    fn prime_field_defaults() {
        let f = gf(3, 1);
        assert_eq!(f.q(), 3);
        assert_eq!(f.defining_poly(), &[0, 1]);
        assert_eq!(f.mul(FqElem(2), FqElem(2)), FqElem(1));
        assert_eq!(f.trace(FqElem(2)), 2);
    }

    #[test]
    fn gf9_uses_u_squared_plus_one() {
        let f = gf(3, 2);
        assert_eq!(f.defining_poly(), &[1, 0, 1]);
        let u = f.from_coords(&[0, 1]);
        assert_eq!(f.mul(u, u), FqElem(2));
        assert_eq!(f.trace(u), 0);
    }

    #[test]
    fn default_modulus_matches_exhaustive_search() {
        // Brute-force root/factor search over all monic quadratics of GF(3), in
        // the order c0 first then c1.
        let mut expected = None;
        'outer: for c0 in 0..3u32 {
            for c1 in 0..3u32 {
                let has_root = (0..3u32).any(|x| (x * x + c1 * x + c0) % 3 == 0);
                if !has_root {
                    expected = Some(vec![c0, c1, 1]);
                    break 'outer;
                }
            }
        }
        assert_eq!(gf(3, 2).defining_poly(), expected.unwrap().as_slice());
    }

    #[test]
    fn rejects_bad_characteristics() {
        assert_eq!(FieldCtx::new(2, 1, None).unwrap_err(), Error::EvenCharacteristic(2));
        assert_eq!(FieldCtx::new(9, 1, None).unwrap_err(), Error::NotPrime(9));
        assert!(matches!(
            FieldCtx::new(3, 2, Some(&[2, 0, 1])),
            Err(Error::NotIrreducible(_))
        ));
        assert!(FieldCtx::new(3, 2, Some(&[2, 1, 1])).is_ok());
    }

    #[test]
    fn spec_strings_round_trip() {
        let f = FieldCtx::parse_spec("3^2").unwrap();
        assert_eq!(f.spec_string(), "3^2:1,0,1");
        let g = FieldCtx::parse_spec(&f.spec_string()).unwrap();
        assert_eq!(*f, *g);
        let h = FieldCtx::parse_spec("5").unwrap();
        assert_eq!(h.q(), 5);
        assert!(FieldCtx::parse_spec("3^x").is_err());
    }

    #[test]
    fn inverse_of_zero_fails() {
        let f = gf(5, 1);
        assert_eq!(f.inv(FqElem::ZERO), Err(Error::DivisionByZero));
        assert_eq!(f.inv(FqElem::ONE), Ok(FqElem::ONE));
    }

    #[test]
    fn field_axioms_and_trace_laws_exhaustive() {
        for (p, ell) in [(3, 1), (3, 2), (3, 3), (3, 4), (5, 1), (5, 2), (7, 2)] {
            let f = gf(p, ell);
            assert!(f.q() <= 81 || ell == 2);
            let mut seen = vec![false; p as usize];
            for a in f.elements() {
                seen[f.trace(a) as usize] = true;
                assert_eq!(f.trace(f.frobenius(a)), f.trace(a));
                assert_eq!(f.add(a, f.neg(a)), FqElem::ZERO);
                if !a.is_zero() {
                    let inv = f.inv(a).unwrap();
                    assert_eq!(f.mul(a, inv), FqElem::ONE);
                    assert_eq!(f.inv(inv).unwrap(), a);
                }
                for b in f.elements() {
                    assert_eq!(f.trace(f.add(a, b)), (f.trace(a) + f.trace(b)) % p);
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                }
            }
            assert!(seen.iter().all(|&s| s), "trace not surjective for {p}^{ell}");
        }
    }

    #[test]
    fn inversion_is_a_bijection_on_units() {
        let f = gf(3, 4);
        let mut hit = vec![false; f.q() as usize];
        for a in f.nonzero_elements() {
            hit[f.inv(a).unwrap().index() as usize] = true;
        }
        assert!(!hit[0]);
        assert!(hit[1..].iter().all(|&h| h));
    }

    #[test]
    fn element_literals() {
        let f = gf(3, 2);
        let a = f.parse_elem("2u+1").unwrap();
        assert_eq!(f.coords(a), vec![1, 2]);
        assert_eq!(f.format_elem(a), "2u+1");
        assert_eq!(f.parse_elem("7").unwrap(), FqElem(7));
        assert_eq!(f.parse_elem("-u").unwrap(), f.from_coords(&[0, 2]));
        assert!(f.parse_elem("u^2").is_err());
        assert!(f.parse_elem("9").is_err());
    }
}
