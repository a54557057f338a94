//! Inversion counts I_{F,a,k}(n) and additive energies E^inv_{F,k}(n).

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::budget::{sat_pow, Budget};
use crate::charsum::{accumulate_hist, histogram_abs};
use crate::error::{Error, Result};
use crate::gf::FieldCtx;
use crate::modulus::{Modulus, NOT_A_UNIT};
use crate::poly::{checked_pow, monic_deg_eq, Poly};
use crate::transform::self_convolve;

/// Rings up to this size use direct convolution.
pub const DIRECT_CONVOLUTION_MAX: u32 = 1 << 12;

/// Counts of x̄ over residues mod F for x coprime to F with deg x < n.
#[derive(Clone, Debug)]
pub struct ResidueDistribution {
    modulus: Modulus,
    counts: Vec<u64>,
}

impl ResidueDistribution {
    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// Dense counts indexed by residue.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, residue: u32) -> u64 {
        self.counts[residue as usize]
    }

    /// Number of contributing x.
    pub fn mass(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Nonzero entries in residue order.
    pub fn support(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i as u32, c))
    }
}

pub fn inversion_distribution(f: &Modulus, n: usize, budget: &Budget) -> Result<ResidueDistribution> {
    let ring = f.ring()?;
    budget.check_states(ring.size() as u64, "residue ring")?;
    budget.check_terms(checked_pow(f.ctx().q(), n)?, "inversion range")?;
    let inv = ring.inverses();
    let mut counts = vec![0u64; ring.size() as usize];
    for r in ring.residues_deg_lt(n)? {
        let v = inv[r as usize];
        if v != NOT_A_UNIT {
            counts[v as usize] += 1;
        }
    }
    Ok(ResidueDistribution {
        modulus: f.clone(),
        counts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMethod {
    /// Direct group convolution.
    Convolution,
    /// Character transform modulo two primes.
    Transform,
    /// Tuple enumeration with independent arithmetic.
    BruteForce,
}

impl fmt::Display for EnergyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyMethod::Convolution => "convolution",
            EnergyMethod::Transform => "transform",
            EnergyMethod::BruteForce => "brute_force",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EnergyRecord {
    pub field: String,
    pub q: u32,
    pub r: usize,
    #[serde(rename = "F")]
    pub f: String,
    pub k: u32,
    pub n: usize,
    pub mass: u64,
    #[serde(rename = "E")]
    pub energy: u128,
    pub method: EnergyMethod,
}

/// The k-fold convolution of the inversion distribution: entry a is I_{F,a,k}(n).
pub fn inversion_counts(
    f: &Modulus,
    k: u32,
    n: usize,
    method: EnergyMethod,
    budget: &Budget,
) -> Result<Vec<u128>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let dist = inversion_distribution(f, n, budget)?;
    let ring = f.ring()?;
    match method {
        EnergyMethod::Convolution => {
            let support: Vec<(u32, u64)> = dist.support().collect();
            let mut acc: Vec<u128> = dist.counts.iter().map(|&c| c as u128).collect();
            for _ in 1..k {
                let rows: Vec<Vec<u128>> = acc
                    .par_chunks(256)
                    .enumerate()
                    .map(|(ci, chunk)| {
                        let mut row = vec![0u128; acc.len()];
                        for (off, &v) in chunk.iter().enumerate() {
                            if v == 0 {
                                continue;
                            }
                            let a = (ci * 256 + off) as u32;
                            for &(s, c) in &support {
                                row[ring.add(a, s) as usize] += v * c as u128;
                            }
                        }
                        row
                    })
                    .collect();
                let mut next = vec![0u128; acc.len()];
                for row in rows {
                    for (x, y) in next.iter_mut().zip(&row) {
                        *x += y;
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
        EnergyMethod::Transform => {
            let ctx = f.ctx();
            let bound = (dist.mass() as u128)
                .checked_pow(k)
                .ok_or_else(|| Error::ResourceLimit("mass^k overflows u128".into()))?;
            self_convolve(
                &dist.counts,
                ctx.p(),
                f.degree() * ctx.ell() as usize,
                k,
                bound,
            )
        }
        EnergyMethod::BruteForce => Err(Error::InvalidArgument(
            "brute force computes energies, not count vectors".into(),
        )),
    }
}

/// I_{F,a,k}(n).
pub fn i_count(f: &Modulus, a: &Poly, k: u32, n: usize, budget: &Budget) -> Result<u128> {
    let ring = f.ring()?;
    let method = default_method(ring.size());
    let counts = inversion_counts(f, k, n, method, budget)?;
    Ok(counts[ring.of_poly(a) as usize])
}

fn default_method(size: u32) -> EnergyMethod {
    if size <= DIRECT_CONVOLUTION_MAX {
        EnergyMethod::Convolution
    } else {
        EnergyMethod::Transform
    }
}

/// E^inv_{F,k}(n) = Σ_a I_{F,a,k}(n)². `method = None` picks direct
/// convolution for small rings and the transform above that.
pub fn energy(
    f: &Modulus,
    k: u32,
    n: usize,
    method: Option<EnergyMethod>,
    budget: &Budget,
) -> Result<EnergyRecord> {
    let ctx = f.ctx();
    let ring = f.ring()?;
    let method = method.unwrap_or_else(|| default_method(ring.size()));
    let (energy, mass) = match method {
        EnergyMethod::BruteForce => brute_force_energy(f, k, n, budget)?,
        _ => {
            let counts = inversion_counts(f, k, n, method, budget)?;
            let mass = inversion_distribution(f, n, budget)?.mass();
            let total: u128 = counts.iter().sum();
            if Some(total) != (mass as u128).checked_pow(k) {
                return Err(Error::InvariantViolation(format!(
                    "Σ_a I_a = {total} differs from mass^k for F={f}"
                )));
            }
            let mut e = 0u128;
            for &c in &counts {
                e = c
                    .checked_mul(c)
                    .and_then(|s| e.checked_add(s))
                    .ok_or_else(|| Error::ResourceLimit("energy overflows u128".into()))?;
            }
            (e, mass)
        }
    };
    // Cauchy–Schwarz: E · q^r >= mass^{2k}.
    let floor = (mass as u128).checked_pow(2 * k);
    if let Some(floor) = floor {
        if energy.saturating_mul(ring.size() as u128) < floor {
            return Err(Error::InvariantViolation(format!(
                "energy {energy} below the Cauchy–Schwarz floor for F={f}"
            )));
        }
    }
    Ok(EnergyRecord {
        field: ctx.spec_string(),
        q: ctx.q(),
        r: f.degree(),
        f: f.to_string(),
        k,
        n,
        mass,
        energy,
        method,
    })
}

/// Counts solutions of x̄₁+…+x̄_k = ȳ₁+…+ȳ_k by enumerating 2k−1 of the
/// variables and looking the last one up. Inverses come from xgcd and sums
/// are taken on coordinate vectors, independently of the residue ring.
fn brute_force_energy(f: &Modulus, k: u32, n: usize, budget: &Budget) -> Result<(u128, u64)> {
    let ctx = f.ctx();
    let r = f.degree();
    let p = ctx.p();
    let coords = |x: &Poly| -> Vec<u32> {
        (0..r).flat_map(|i| ctx.coords(x.coeff(i))).collect()
    };
    let mut inverses: Vec<Vec<u32>> = Vec::new();
    for x in crate::poly::all_deg_lt(ctx, n)? {
        if x.is_zero() && r > 0 {
            continue;
        }
        let (g, s, _) = if x.is_zero() {
            (Poly::one(ctx), Poly::zero(ctx), Poly::zero(ctx))
        } else {
            x.xgcd(f.poly())?
        };
        if g.is_one() {
            inverses.push(coords(&s.rem(f.poly())?));
        }
    }
    let mass = inverses.len() as u64;
    let free = 2 * k - 1;
    budget.check_tuples(sat_pow(mass, free), "brute-force energy tuples")?;
    let mut lookup: HashMap<Vec<u32>, u64> = HashMap::new();
    for v in &inverses {
        *lookup.entry(v.clone()).or_default() += 1;
    }
    let dim = r * ctx.ell() as usize;
    // Tuples (x_1..x_k, y_1..y_{k-1}); the target for ȳ_k is Σx̄ − Σȳ.
    let total_tuples = sat_pow(mass, free);
    let count: u128 = (0..total_tuples)
        .into_par_iter()
        .fold(
            || 0u128,
            |acc, mut t| {
                let mut target = vec![0u32; dim];
                for slot in 0..free {
                    let v = &inverses[(t % mass) as usize];
                    t /= mass;
                    let sign_plus = slot < k;
                    for (d, &c) in target.iter_mut().zip(v) {
                        *d = if sign_plus { (*d + c) % p } else { (*d + p - c) % p };
                    }
                }
                acc + lookup.get(&target).copied().unwrap_or(0) as u128
            },
        )
        .sum();
    Ok((count, mass))
}

/// Σ over monic F of degree r of E^inv_{F,k}(n), with the per-F terms.
pub fn energy_avg(
    ctx: &Arc<FieldCtx>,
    r: usize,
    k: u32,
    n: usize,
    budget: &Budget,
) -> Result<(u128, Vec<EnergyRecord>)> {
    if r == 0 {
        return Err(Error::InvalidArgument("energy_avg needs r >= 1".into()));
    }
    let moduli: Vec<Poly> = monic_deg_eq(ctx, r)?.collect();
    let records = moduli
        .par_iter()
        .map(|fp| energy(&Modulus::new(fp)?, k, n, None, budget))
        .collect::<Result<Vec<_>>>()?;
    let total = records.iter().map(|rec| rec.energy).sum();
    Ok((total, records))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    /// Σ_λ |Σ_{deg x<n,(x,F)=1} e_F(λx̄)|^{2k}, in floating point.
    pub lhs: f64,
    /// q^r · E^inv_{F,k}(n), exact.
    pub rhs: u128,
    pub relative_deviation: f64,
}

/// Compares the 2k-th moment of incomplete Kloosterman sums over all λ with
/// q^r times the inversion energy.
pub fn moment_identity_check(f: &Modulus, k: u32, n: usize, budget: &Budget) -> Result<MomentReport> {
    let dist = inversion_distribution(f, n, budget)?;
    let ring = f.ring()?;
    let size = ring.size();
    budget.check_terms(size as u64 * size as u64, "moment identity")?;
    let support: Vec<(u32, u64)> = dist.support().collect();
    let p = f.ctx().p();
    let moments: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|lambda| {
            let h = accumulate_hist(p, support.len() as u64, |i| {
                let (s, c) = support[i as usize];
                Some((ring.exponent(ring.mul(lambda, s)), c as i64))
            });
            histogram_abs(&h).0.powi(2 * k as i32)
        })
        .collect();
    let lhs: f64 = moments.iter().sum();
    let e = energy(f, k, n, None, budget)?.energy;
    let rhs = e * size as u128;
    let relative_deviation = if rhs == 0 {
        lhs.abs()
    } else {
        (lhs - rhs as f64).abs() / rhs as f64
    };
    Ok(MomentReport {
        lhs,
        rhs,
        relative_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf3() -> Arc<FieldCtx> {
        FieldCtx::new(3, 1, None).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let f = gf3();
        let b = Budget::default();
        let t = Modulus::parse(&f, "T").unwrap();
        let d = inversion_distribution(&t, 1, &b).unwrap();
        assert_eq!(d.counts(), &[0, 1, 1]);
        assert_eq!(inversion_distribution(&t, 0, &b).unwrap().mass(), 0);
        let t2 = Modulus::parse(&f, "T^2").unwrap();
        assert_eq!(inversion_distribution(&t2, 2, &b).unwrap().mass(), 6);
    }

    #[test]
    fn energy_examples() {
        let f = gf3();
        let b = Budget::default();
        let t = Modulus::parse(&f, "T").unwrap();
        assert_eq!(i_count(&t, &Poly::zero(&f), 2, 1, &b).unwrap(), 2);
        for m in [EnergyMethod::Convolution, EnergyMethod::Transform, EnergyMethod::BruteForce] {
            assert_eq!(energy(&t, 2, 1, Some(m), &b).unwrap().energy, 6, "{m}");
        }
        let (total, per_f) = energy_avg(&f, 1, 2, 1, &b).unwrap();
        assert_eq!(total, 18);
        assert_eq!(per_f.len(), 3);
        let rep = moment_identity_check(&t, 2, 1, &b).unwrap();
        assert_eq!(rep.rhs, 18);
        assert!(rep.relative_deviation < 1e-12);
    }

    #[test]
    fn methods_agree_on_small_ring() {
        let f = gf3();
        let b = Budget::default();
        let m = Modulus::parse(&f, "T^2+1").unwrap();
        let e: Vec<u128> = [EnergyMethod::Convolution, EnergyMethod::Transform, EnergyMethod::BruteForce]
            .iter()
            .map(|&meth| energy(&m, 2, 2, Some(meth), &b).unwrap().energy)
            .collect();
        assert!(e.windows(2).all(|w| w[0] == w[1]), "{e:?}");
    }

    #[test]
    fn brute_force_respects_budget() {
        let f = gf3();
        let b = Budget::default().with_overrides("tuples=10").unwrap();
        let m = Modulus::parse(&f, "T^2+1").unwrap();
        assert!(matches!(
            energy(&m, 2, 2, Some(EnergyMethod::BruteForce), &b),
            Err(Error::ResourceLimit(_))
        ));
    }
}
