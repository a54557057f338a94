//! Vaughan-type decomposition of Σ μ(x) e_F(a·x̄) into type-I and type-II
//! pieces that recombine exactly.
//!
//! On monic polynomials, with μ_≤ = μ·[deg ≤ U] and μ_> = μ − μ_≤,
//!
//! ```text
//! μ = 2μ_≤ − μ_≤ ∗ μ_≤ ∗ 1 + μ_> ∗ μ_> ∗ 1.
//! ```
//!
//! The first piece is a short correction sum, the second a sum over short
//! x = gh (deg ≤ 2U) of complete-phase sums over a long free variable, and the
//! third a bilinear sum Σ μ(g) β_w with both degrees above U, where
//! β_w = Σ_{h | w, deg h > U} μ(h). Every degree slice is kept, so the signed
//! total equals the direct sum as a histogram.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::arith::MonicSieve;
use crate::budget::Budget;
use crate::charsum::{histogram_abs, moebius_kloosterman, reduce_modulus, ExpHistogram};
use crate::error::{Error, Result};
use crate::gf::FieldCtx;
use crate::modulus::{Modulus, NOT_A_UNIT};
use crate::poly::{checked_pow, Poly};

/// Per-quadrant values of Σ_{g,h monic, gh | x} μ(g)μ(h), split by
/// deg g ≤ k or > k and deg h ≤ k or > k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuadrantReport {
    /// Order: (≤,≤), (≤,>), (>,≤), (>,>).
    pub quadrants: [i64; 4],
    pub total: i64,
    pub mu: i8,
}

pub fn quadrant_convolution_check(x: &Poly, k: usize) -> Result<QuadrantReport> {
    if !x.is_monic() {
        return Err(Error::InvalidArgument(format!("{x} is not monic")));
    }
    let mut quadrants = [0i64; 4];
    for d in x.monic_divisors()? {
        // Split the divisor d = g·h in every way.
        for g in d.monic_divisors()? {
            let h = d.exact_div(&g)?;
            let w = crate::arith::moebius(&g)? as i64 * crate::arith::moebius(&h)? as i64;
            if w == 0 {
                continue;
            }
            let big_g = g.coeffs().len() - 1 > k;
            let big_h = h.coeffs().len() - 1 > k;
            quadrants[2 * usize::from(big_g) + usize::from(big_h)] += w;
        }
    }
    Ok(QuadrantReport {
        quadrants,
        total: quadrants.iter().sum(),
        mu: crate::arith::moebius(x)?,
    })
}

/// One short x = gh of a type-I slice with its coefficient Σ_{gh=x} μ(g)μ(h)
/// and inner sum Σ_{deg y < n−deg x, (y,F)=1} e_{F₀}(a₀·(xy)⁻¹).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeOneTerm {
    pub x: String,
    pub coefficient: i64,
    pub inner: ExpHistogram,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeOneSlice {
    pub u: usize,
    pub terms: Vec<TypeOneTerm>,
    /// Σ coefficient · inner.
    pub total: ExpHistogram,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeTwoSlice {
    /// deg g.
    pub v: usize,
    /// Largest |β_w| over the w in this slice.
    pub beta_max: i64,
    /// Σ_{deg g = v} Σ_y μ(g) β_y e_F(a·(gy)⁻¹).
    pub total: ExpHistogram,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VaughanSplit {
    #[serde(rename = "F")]
    pub f: String,
    pub a: String,
    pub n: usize,
    #[serde(rename = "U")]
    pub cutoff: usize,
    pub a0: String,
    #[serde(rename = "F0")]
    pub f0: String,
    pub d: usize,
    pub type1: Vec<TypeOneSlice>,
    pub type2: Vec<TypeTwoSlice>,
    /// 2·Σ_{deg x ≤ U} μ(x) e_F(a·x̄).
    pub correction: ExpHistogram,
}

impl VaughanSplit {
    /// correction − Σ type I + Σ type II.
    pub fn recombine(&self) -> ExpHistogram {
        let mut out = self.correction.clone();
        for s in &self.type1 {
            out = out.sub(&s.total);
        }
        for s in &self.type2 {
            out.merge(&s.total);
        }
        out
    }

    /// |correction| + Σ_u |type-I slice u|.
    pub fn s1_abs(&self) -> f64 {
        histogram_abs(&self.correction).0 + self.type1.iter().map(|s| histogram_abs(&s.total).0).fold(0.0, |a, b| a + b)
    }

    /// Σ_v |type-II slice v|.
    pub fn s2_abs(&self) -> f64 {
        self.type2.iter().map(|s| histogram_abs(&s.total).0).fold(0.0, |a, b| a + b)
    }
}

/// Degree and monic index of the monic part of the nonzero polynomial with
/// index i.
fn monic_part(ctx: &Arc<FieldCtx>, i: u64) -> (usize, u64) {
    let (_, m) = Poly::from_index(ctx, i).to_monic().expect("nonzero");
    (m.coeffs().len() - 1, m.monic_index())
}

pub fn vaughan_decompose(
    f: &Modulus,
    a: &Poly,
    n: usize,
    cutoff: usize,
    budget: &Budget,
) -> Result<VaughanSplit> {
    if cutoff == 0 || 2 * cutoff >= n {
        return Err(Error::BadCutoff { u: cutoff, n });
    }
    let ctx = f.ctx();
    let p = ctx.p();
    budget.check_terms(checked_pow(ctx.q(), n)?, "vaughan range")?;
    let ring = f.ring()?;
    let inv = ring.inverses();
    let ar = ring.of_poly(a);
    let (a0, f0, d) = reduce_modulus(a, f)?;
    let ring0 = f0.ring()?;
    let inv0 = ring0.inverses();
    let a0r = ring0.of_poly(&a0);

    let sieves = (0..n)
        .map(|d| MonicSieve::new(ctx, d, budget))
        .collect::<Result<Vec<_>>>()?;
    let mu_monic = |deg: usize, idx: u64| sieves[deg].mu(idx) as i64;
    let mu_of = |m: &Poly| mu_monic(m.coeffs().len() - 1, m.monic_index());

    // Correction: all x with deg x ≤ U.
    let short = ring.residues_deg_lt(cutoff + 1)?;
    let mut correction = ExpHistogram::zero(p);
    for (i, &xr) in short.iter().enumerate().skip(1) {
        let xi = inv[xr as usize];
        if xi == NOT_A_UNIT {
            continue;
        }
        let (deg, idx) = monic_part(ctx, i as u64);
        let m = mu_monic(deg, idx);
        if m != 0 {
            correction.add_term(ring.exponent(ring.mul(ar, xi)), 2 * m);
        }
    }

    // Type I: x = gh monic with deg g, deg h ≤ U.
    let mut type1 = Vec::new();
    for u in 0..=2 * cutoff {
        let hi = n - u;
        let long_f = ring.residues_deg_lt(hi)?;
        let long_f0 = ring0.residues_deg_lt(hi)?;
        let xs: Vec<Poly> = crate::poly::monic_deg_eq(ctx, u)?.collect();
        let terms: Vec<Option<TypeOneTerm>> = xs
            .par_iter()
            .map(|x| -> Result<Option<TypeOneTerm>> {
                let mut coefficient = 0i64;
                for g in x.monic_divisors()? {
                    let h = x.exact_div(&g)?;
                    if g.coeffs().len() - 1 <= cutoff && h.coeffs().len() - 1 <= cutoff {
                        coefficient += mu_of(&g) * mu_of(&h);
                    }
                }
                if coefficient == 0 || !f.is_coprime(x)? {
                    return Ok(None);
                }
                let xr0 = ring0.of_poly(x);
                let mut inner = ExpHistogram::zero(p);
                for (i, &yr) in long_f.iter().enumerate().skip(1) {
                    if inv[yr as usize] == NOT_A_UNIT {
                        continue;
                    }
                    let prod = ring0.mul(xr0, long_f0[i]);
                    inner.add_term(ring0.exponent(ring0.mul(a0r, inv0[prod as usize])), 1);
                }
                Ok(Some(TypeOneTerm {
                    x: x.to_string(),
                    coefficient,
                    inner,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let terms: Vec<TypeOneTerm> = terms.into_iter().flatten().collect();
        let mut total = ExpHistogram::zero(p);
        for t in &terms {
            total.merge(&t.inner.scaled(t.coefficient));
        }
        type1.push(TypeOneSlice { u, terms, total });
    }

    // β_w for monic w with U < deg w ≤ n − U − 1.
    let wmax = n - cutoff - 1;
    let mut beta: Vec<Vec<i64>> = vec![Vec::new(); wmax + 1];
    for (dw, slot) in beta.iter_mut().enumerate().skip(cutoff + 1) {
        let ws: Vec<Poly> = crate::poly::monic_deg_eq(ctx, dw)?.collect();
        *slot = ws
            .par_iter()
            .map(|w| -> Result<i64> {
                let divs = w.monic_divisors()?;
                let b: i64 = divs
                    .iter()
                    .filter(|h| h.coeffs().len() - 1 > cutoff)
                    .map(|h| mu_of(h))
                    .sum();
                if b.unsigned_abs() > divs.len() as u64 {
                    return Err(Error::InvariantViolation(format!(
                        "|β_{w}| = {} exceeds its divisor count {}",
                        b.abs(),
                        divs.len()
                    )));
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
    }

    // Type II: g monic with U < deg g, y with U < deg y < n − deg g.
    let long = ring.residues_deg_lt(wmax + 1)?;
    let size = ring.size() as usize;
    let type2 = (cutoff + 1..=wmax)
        .into_par_iter()
        .map(|v| -> Result<TypeTwoSlice> {
            let mut a_dist = vec![0i64; size];
            let gres = ring.residues_monic(v)?;
            for (gi, &gr) in gres.iter().enumerate() {
                let m = mu_monic(v, gi as u64);
                let gi_inv = inv[gr as usize];
                if m != 0 && gi_inv != NOT_A_UNIT {
                    a_dist[gi_inv as usize] += m;
                }
            }
            let mut b_dist = vec![0i64; size];
            let mut beta_max = 0i64;
            let lo = checked_pow(ctx.q(), cutoff + 1)?;
            let hi = checked_pow(ctx.q(), n - v)?;
            for i in lo..hi {
                let yi = inv[long[i as usize] as usize];
                if yi == NOT_A_UNIT {
                    continue;
                }
                let (dw, wi) = monic_part(ctx, i);
                let b = beta[dw][wi as usize];
                beta_max = beta_max.max(b.abs());
                b_dist[yi as usize] += b;
            }
            let mut total = ExpHistogram::zero(p);
            for (s, &wa) in a_dist.iter().enumerate().filter(|(_, &w)| w != 0) {
                let as_ = ring.mul(ar, s as u32);
                for (t, &wb) in b_dist.iter().enumerate().filter(|(_, &w)| w != 0) {
                    total.add_term(ring.exponent(ring.mul(as_, t as u32)), wa * wb);
                }
            }
            Ok(TypeTwoSlice { v, beta_max, total })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(VaughanSplit {
        f: f.to_string(),
        a: a.to_string(),
        n,
        cutoff,
        a0: a0.to_string(),
        f0: f0.to_string(),
        d,
        type1,
        type2,
        correction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceReport {
    pub kind: &'static str,
    pub degree: usize,
    pub abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitReport {
    #[serde(rename = "F")]
    pub f: String,
    pub a: String,
    pub n: usize,
    #[serde(rename = "U")]
    pub cutoff: usize,
    pub direct_abs: f64,
    #[serde(rename = "S1_abs")]
    pub s1_abs: f64,
    #[serde(rename = "S2_abs")]
    pub s2_abs: f64,
    pub constant: f64,
    pub exact: bool,
    pub slices: Vec<SliceReport>,
}

/// Magnitudes of the pieces of a split next to the direct sum. `exact`
/// records whether the recombination reproduces the direct histogram.
pub fn split_bound_report(split: &VaughanSplit, f: &Modulus, a: &Poly, budget: &Budget) -> Result<SplitReport> {
    let direct = moebius_kloosterman(f, a, split.n, budget)?;
    let direct_abs = histogram_abs(&direct).0;
    let (s1, s2) = (split.s1_abs(), split.s2_abs());
    let constant = if direct_abs == 0.0 { 0.0 } else { direct_abs / (s1 + s2) };
    let mut slices = vec![SliceReport {
        kind: "correction",
        degree: split.cutoff,
        abs: histogram_abs(&split.correction).0,
    }];
    slices.extend(split.type1.iter().map(|s| SliceReport {
        kind: "type1",
        degree: s.u,
        abs: histogram_abs(&s.total).0,
    }));
    slices.extend(split.type2.iter().map(|s| SliceReport {
        kind: "type2",
        degree: s.v,
        abs: histogram_abs(&s.total).0,
    }));
    Ok(SplitReport {
        f: split.f.clone(),
        a: split.a.clone(),
        n: split.n,
        cutoff: split.cutoff,
        direct_abs,
        s1_abs: s1,
        s2_abs: s2,
        constant,
        exact: split.recombine() == direct,
        slices,
    })
}
