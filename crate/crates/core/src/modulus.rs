//! Moduli F and the residue ring F_q[T]/F.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FqElem};
use crate::poly::{mul_slices, Factorization, Poly};

/// Residue rings larger than this are never tabulated.
pub const RING_MAX_SIZE: u64 = 1 << 22;
/// Multiplication tables are built for rings up to this size.
pub const MUL_TABLE_MAX_SIZE: u32 = 1024;

/// Marker in the inverse table for non-units.
pub const NOT_A_UNIT: u32 = u32::MAX;

/// A modulus `F = lead · F_m` with `F_m` monic. All residue arithmetic is mod `F_m`.
#[derive(Clone)]
pub struct Modulus {
    monic: Poly,
    lead: FqElem,
    lead_inv: FqElem,
    factorization: Factorization,
    phi: u64,
    ring: OnceLock<Result<Arc<ResidueRing>>>,
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Modulus({})", self.original())
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.original())
    }
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.monic == other.monic && self.lead == other.lead
    }
}

impl Eq for Modulus {}

impl Modulus {
    /// A modulus of degree >= 1. Non-monic input keeps its leading coefficient.
    pub fn new(f: &Poly) -> Result<Modulus> {
        if f.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        if f.is_constant() {
            return Err(Error::ConstantPolynomial);
        }
        Modulus::build(f)
    }

    /// The trivial modulus F = 1 (degree 0, one residue class).
    pub fn trivial(ctx: &Arc<FieldCtx>) -> Modulus {
        Modulus::build(&Poly::one(ctx)).expect("unit modulus")
    }

    fn build(f: &Poly) -> Result<Modulus> {
        let (lead, monic) = f.to_monic()?;
        let lead_inv = f.ctx().inv(lead)?;
        let factorization = monic.factorize()?;
        let phi = monic.euler_phi()?;
        Ok(Modulus {
            monic,
            lead,
            lead_inv,
            factorization,
            phi,
            ring: OnceLock::new(),
        })
    }

    pub fn parse(ctx: &Arc<FieldCtx>, s: &str) -> Result<Modulus> {
        Modulus::new(&Poly::parse(ctx, s)?)
    }

    #[inline]
    pub fn ctx(&self) -> &Arc<FieldCtx> {
        self.monic.ctx()
    }

    /// The monic normalization F_m.
    #[inline]
    pub fn poly(&self) -> &Poly {
        &self.monic
    }

    /// F as given, `lead · F_m`.
    pub fn original(&self) -> Poly {
        self.monic.scale(self.lead)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.monic.coeffs().len() - 1
    }

    pub fn lead(&self) -> FqElem {
        self.lead
    }

    pub fn lead_inv(&self) -> FqElem {
        self.lead_inv
    }

    pub fn factors(&self) -> &[(Poly, u32)] {
        &self.factorization.factors
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    /// φ(F).
    pub fn phi(&self) -> u64 {
        self.phi
    }

    /// Number of distinct irreducible factors.
    pub fn omega(&self) -> usize {
        self.factorization.omega()
    }

    pub fn reduce(&self, x: &Poly) -> Result<Poly> {
        x.rem(&self.monic)
    }

    pub fn is_coprime(&self, x: &Poly) -> Result<bool> {
        Ok(x.gcd(&self.monic)?.is_one())
    }

    /// x̄ with x·x̄ ≡ 1 (mod F) and deg x̄ < r.
    pub fn mod_inverse(&self, x: &Poly) -> Result<Poly> {
        let not_inv = || Error::NotInvertible(x.to_string(), self.to_string());
        if x.is_zero() {
            return if self.degree() == 0 {
                Ok(x.clone())
            } else {
                Err(not_inv())
            };
        }
        let (g, s, _) = x.xgcd(&self.monic)?;
        if !g.is_one() {
            return Err(not_inv());
        }
        s.rem(&self.monic)
    }

    /// Character exponent Tr(c_{r-1}(lead⁻¹·x mod F_m)) of e_F(x), without
    /// tabulating the residue ring.
    pub fn exponent_of(&self, x: &Poly) -> Result<u32> {
        let r = self.degree();
        if r == 0 {
            return Ok(0);
        }
        let red = x.rem(&self.monic)?;
        let ctx = self.ctx();
        Ok(ctx.trace(ctx.mul(self.lead_inv, red.coeff(r - 1))))
    }

    /// Tabulated residue ring, built on first use.
    pub fn ring(&self) -> Result<&Arc<ResidueRing>> {
        self.ring
            .get_or_init(|| ResidueRing::new(self).map(Arc::new))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Number of residues q^r, if it fits in u64.
    pub fn residue_count(&self) -> Result<u64> {
        crate::poly::checked_pow(self.ctx().q(), self.degree())
    }
}

/// F_q[T]/F_m with residues indexed by `Σ c_i q^i` over the coefficients of the
/// reduced representative. This index coincides with [`Poly::index`], and
/// addition is digitwise mod p in base p.
pub struct ResidueRing {
    ctx: Arc<FieldCtx>,
    r: usize,
    size: u32,
    p: u32,
    digits: usize,
    top_place: u32,
    lead_inv: FqElem,
    fmod: Vec<FqElem>,
    inv: OnceLock<Vec<u32>>,
    mul_tab: OnceLock<Option<Vec<u32>>>,
}

impl fmt::Debug for ResidueRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ResidueRing(size={})", self.size)
    }
}

impl ResidueRing {
    fn new(m: &Modulus) -> Result<ResidueRing> {
        let ctx = m.ctx().clone();
        let r = m.degree();
        let size = m.residue_count()?;
        if size > RING_MAX_SIZE {
            return Err(Error::ResourceLimit(format!(
                "residue ring of size {size} exceeds {RING_MAX_SIZE}"
            )));
        }
        let q = ctx.q();
        Ok(ResidueRing {
            r,
            size: size as u32,
            p: ctx.p(),
            digits: r * ctx.ell() as usize,
            top_place: if r == 0 { 1 } else { q.pow(r as u32 - 1) },
            lead_inv: m.lead_inv,
            fmod: m.monic.coeffs().to_vec(),
            inv: OnceLock::new(),
            mul_tab: OnceLock::new(),
            ctx,
        })
    }

    #[inline]
    pub fn size(&self) -> u32 {
        self.size
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.r
    }

    pub fn ctx(&self) -> &Arc<FieldCtx> {
        &self.ctx
    }

    #[inline]
    pub fn add(&self, mut a: u32, mut b: u32) -> u32 {
        let p = self.p;
        let (mut out, mut place) = (0, 1);
        for _ in 0..self.digits {
            out += (a % p + b % p) % p * place;
            place *= p;
            a /= p;
            b /= p;
        }
        out
    }

    #[inline]
    pub fn neg(&self, mut a: u32) -> u32 {
        let p = self.p;
        let (mut out, mut place) = (0, 1);
        for _ in 0..self.digits {
            out += (p - a % p) % p * place;
            place *= p;
            a /= p;
        }
        out
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    /// Coefficients of the reduced representative, low-to-high, length r.
    pub fn coeffs(&self, mut a: u32) -> Vec<FqElem> {
        let q = self.ctx.q();
        (0..self.r)
            .map(|_| {
                let c = FqElem(a % q);
                a /= q;
                c
            })
            .collect()
    }

    fn compose(&self, coeffs: &[FqElem]) -> u32 {
        let q = self.ctx.q();
        coeffs[..self.r.min(coeffs.len())]
            .iter()
            .rev()
            .fold(0, |acc, c| acc * q + c.index())
    }

    /// Residue of an arbitrary coefficient vector.
    pub fn reduce(&self, coeffs: &[FqElem]) -> u32 {
        let r = self.r;
        if coeffs.len() <= r {
            return self.compose(coeffs);
        }
        if r == 0 {
            return 0;
        }
        let f = &*self.ctx;
        let mut buf = coeffs.to_vec();
        for k in (r..buf.len()).rev() {
            let c = buf[k];
            if c.is_zero() {
                continue;
            }
            for j in 0..r {
                buf[k - r + j] = f.sub(buf[k - r + j], f.mul(c, self.fmod[j]));
            }
        }
        self.compose(&buf[..r])
    }

    pub fn of_poly(&self, x: &Poly) -> u32 {
        self.reduce(x.coeffs())
    }

    pub fn to_poly(&self, a: u32) -> Poly {
        Poly::from_index(&self.ctx, a as u64)
    }

    pub fn scale(&self, c: FqElem, a: u32) -> u32 {
        let f = &*self.ctx;
        let v: Vec<FqElem> = self.coeffs(a).into_iter().map(|x| f.mul(c, x)).collect();
        self.compose(&v)
    }

    fn mul_direct(&self, a: u32, b: u32) -> u32 {
        self.reduce(&mul_slices(&self.ctx, &self.coeffs(a), &self.coeffs(b)))
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match self.mul_table() {
            Some(t) => t[(a * self.size + b) as usize],
            None => self.mul_direct(a, b),
        }
    }

    fn mul_table(&self) -> Option<&Vec<u32>> {
        self.mul_tab
            .get_or_init(|| {
                (self.size <= MUL_TABLE_MAX_SIZE).then(|| {
                    let n = self.size;
                    let mut t = vec![0; (n * n) as usize];
                    for a in 0..n {
                        for b in a..n {
                            let v = self.mul_direct(a, b);
                            t[(a * n + b) as usize] = v;
                            t[(b * n + a) as usize] = v;
                        }
                    }
                    t
                })
            })
            .as_ref()
    }

    /// Inverse table; non-units map to [`NOT_A_UNIT`].
    pub fn inverses(&self) -> &[u32] {
        self.inv.get_or_init(|| {
            let n = self.size;
            let mut inv = vec![NOT_A_UNIT; n as usize];
            if self.r == 0 {
                inv[0] = 0;
                return inv;
            }
            let fpoly = Poly::new(&self.ctx, self.fmod.clone());
            let mut done = vec![false; n as usize];
            for a in 1..n {
                if done[a as usize] {
                    continue;
                }
                done[a as usize] = true;
                let x = self.to_poly(a);
                let (g, s, _) = x.xgcd(&fpoly).expect("nonzero operands");
                if g.is_one() {
                    let b = self.of_poly(&s);
                    inv[a as usize] = b;
                    inv[b as usize] = a;
                    done[b as usize] = true;
                }
            }
            inv
        })
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        let v = self.inverses()[a as usize];
        (v != NOT_A_UNIT).then_some(v)
    }

    pub fn is_unit(&self, a: u32) -> bool {
        self.inverses()[a as usize] != NOT_A_UNIT
    }

    /// Unit residues in ascending order.
    pub fn units(&self) -> impl Iterator<Item = u32> + '_ {
        let inv = self.inverses();
        (0..self.size).filter(move |&a| inv[a as usize] != NOT_A_UNIT)
    }

    /// Exponent j of e_F(a) = ζ_p^j.
    #[inline]
    pub fn exponent(&self, a: u32) -> u32 {
        if self.r == 0 {
            return 0;
        }
        let q = self.ctx.q();
        let top = FqElem(a / self.top_place % q);
        self.ctx.trace(self.ctx.mul(self.lead_inv, top))
    }

    /// Residue of T^k.
    pub fn t_power(&self, k: usize) -> u32 {
        let mut v = vec![FqElem::ZERO; k + 1];
        v[k] = FqElem::ONE;
        self.reduce(&v)
    }

    /// Residues of all x with deg x < n, indexed by [`Poly::index`].
    pub fn residues_deg_lt(&self, n: usize) -> Result<Vec<u32>> {
        let q = self.ctx.q();
        let total = crate::poly::checked_pow(q, n)?;
        if total > RING_MAX_SIZE.max(self.size as u64) {
            return Err(Error::ResourceLimit(format!(
                "range of {total} polynomials exceeds {RING_MAX_SIZE}"
            )));
        }
        let base = n.min(self.r);
        let mut res: Vec<u32> = (0..q.pow(base as u32)).collect();
        res.reserve(total as usize - res.len());
        for len in base..n {
            let t = self.t_power(len);
            let block = res.len();
            for c in 1..q {
                let shift = self.scale(FqElem(c), t);
                for i in 0..block {
                    let v = self.add(res[i], shift);
                    res.push(v);
                }
            }
        }
        Ok(res)
    }

    /// Residues of the monic polynomials of degree d, indexed by monic index.
    pub fn residues_monic(&self, d: usize) -> Result<Vec<u32>> {
        let t = self.t_power(d);
        Ok(self
            .residues_deg_lt(d)?
            .into_iter()
            .map(|x| self.add(x, t))
            .collect())
    }
}
