//! Möbius and von Mangoldt functions on F_q[T] and their summatory functions.

use std::sync::Arc;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::gf::{FieldCtx, FqElem};
use crate::modulus::Modulus;
use crate::poly::{checked_pow, lower_index, monic_coeffs, monic_irreducibles, mul_slices, Poly};

/// μ(x) for nonzero x; the leading unit is ignored.
pub fn moebius(x: &Poly) -> Result<i8> {
    let fac = x.factorize()?;
    Ok(if !fac.is_squarefree() {
        0
    } else if fac.omega() % 2 == 0 {
        1
    } else {
        -1
    })
}

/// Λ(x) for nonzero x: deg P when x is a unit times a power of the prime P.
pub fn von_mangoldt(x: &Poly) -> Result<u32> {
    let fac = x.factorize()?;
    Ok(match fac.factors.as_slice() {
        [(p, _)] => p.coeffs().len() as u32 - 1,
        _ => 0,
    })
}

/// μ and Λ for every monic polynomial of one degree, indexed by monic index.
///
/// Sieves by the monic primes of degree at most d/2; whatever degree is left
/// over belongs to a single prime.
#[derive(Clone, Debug)]
pub struct MonicSieve {
    degree: usize,
    mu: Vec<i8>,
    lambda: Vec<u32>,
}

impl MonicSieve {
    pub fn new(ctx: &Arc<FieldCtx>, d: usize, budget: &Budget) -> Result<MonicSieve> {
        let q = ctx.q();
        let size = checked_pow(q, d)?;
        budget.check_states(size, "monic sieve")?;
        let size = size as usize;
        let mut smooth = vec![0u16; size];
        let mut nprimes = vec![0u8; size];
        let mut squarefree = vec![true; size];
        let mut last = vec![0u16; size];
        for e in 1..=d / 2 {
            for prime in monic_irreducibles(ctx, e)? {
                let mut power = prime.coeffs().to_vec();
                let mut j = 1;
                while j * e <= d {
                    let cof_deg = d - j * e;
                    for ci in 0..q.pow(cof_deg as u32) as u64 {
                        let prod = mul_slices(ctx, &power, &monic_coeffs(q, cof_deg, ci));
                        let x = lower_index(q, &prod, d) as usize;
                        smooth[x] += e as u16;
                        if j == 1 {
                            nprimes[x] += 1;
                            last[x] = e as u16;
                        } else {
                            squarefree[x] = false;
                        }
                    }
                    power = mul_slices(ctx, &power, prime.coeffs());
                    j += 1;
                }
            }
        }
        let mut mu = vec![0i8; size];
        let mut lambda = vec![0u32; size];
        for x in 0..size {
            let leftover = d - smooth[x] as usize;
            let k = nprimes[x] as usize + usize::from(leftover > 0);
            if squarefree[x] {
                mu[x] = if k % 2 == 0 { 1 } else { -1 };
            }
            if k == 1 {
                lambda[x] = if leftover > 0 { leftover as u32 } else { last[x] as u32 };
            }
        }
        Ok(MonicSieve { degree: d, mu, lambda })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    #[inline]
    pub fn mu(&self, monic_index: u64) -> i8 {
        self.mu[monic_index as usize]
    }

    #[inline]
    pub fn lambda(&self, monic_index: u64) -> u32 {
        self.lambda[monic_index as usize]
    }

    pub fn mu_values(&self) -> &[i8] {
        &self.mu
    }

    pub fn lambda_values(&self) -> &[u32] {
        &self.lambda
    }
}

/// μ(x) for every x with deg x < n, indexed by [`Poly::index`].
pub fn moebius_table(ctx: &Arc<FieldCtx>, n: usize, budget: &Budget) -> Result<Vec<i8>> {
    let q = ctx.q() as u64;
    budget.check_states(checked_pow(ctx.q(), n)?, "moebius table")?;
    let mut out = vec![0i8; checked_pow(ctx.q(), n)? as usize];
    for d in 0..n {
        let sieve = MonicSieve::new(ctx, d, budget)?;
        let place = q.pow(d as u32);
        for c in 1..q {
            // c·m has coefficients c·m_i; index it through the field.
            for (mi, &mu) in sieve.mu_values().iter().enumerate() {
                if mu == 0 {
                    continue;
                }
                let coeffs = monic_coeffs(ctx.q(), d, mi as u64);
                let idx = coeffs
                    .iter()
                    .rev()
                    .fold(0u64, |acc, &x| acc * q + ctx.mul(FqElem(c as u32), x).index() as u64);
                debug_assert!(idx >= place * c && idx < place * (c + 1));
                out[idx as usize] = mu;
            }
        }
    }
    Ok(out)
}

/// Σ_{x ∈ M_n} μ(x).
pub fn mertens_monic(ctx: &Arc<FieldCtx>, n: usize, budget: &Budget) -> Result<i64> {
    let sieve = MonicSieve::new(ctx, n, budget)?;
    Ok(sieve.mu_values().iter().map(|&m| m as i64).sum())
}

/// Σ_{x ∈ M_n} Λ(x).
pub fn lambda_total(ctx: &Arc<FieldCtx>, n: usize, budget: &Budget) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidArgument("lambda_total needs n >= 1".into()));
    }
    let sieve = MonicSieve::new(ctx, n, budget)?;
    Ok(sieve.lambda_values().iter().map(|&l| l as u64).sum())
}

/// Σ_{deg x < n, x ≡ a (mod F)} μ(x) for a coprime to F.
pub fn moebius_in_ap(n: usize, f: &Modulus, a: &Poly, budget: &Budget) -> Result<i64> {
    if !f.is_coprime(a)? {
        return Err(Error::NotCoprime(a.to_string(), f.to_string()));
    }
    let ctx = f.ctx();
    let ring = f.ring()?;
    let target = ring.of_poly(a);
    let mut total = 0i64;
    for d in 0..n {
        let sieve = MonicSieve::new(ctx, d, budget)?;
        let res = ring.residues_monic(d)?;
        for c in ctx.nonzero_elements() {
            // c·m ≡ a  ⇔  m ≡ c⁻¹·a
            let want = ring.scale(ctx.inv(c)?, target);
            for (mi, &r) in res.iter().enumerate() {
                if r == want {
                    total += sieve.mu(mi as u64) as i64;
                }
            }
        }
    }
    Ok(total)
}
