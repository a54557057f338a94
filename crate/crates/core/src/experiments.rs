//! Both sides of the bounds at desk scale: ratio tables for bilinear and
//! Möbius-weighted Kloosterman sums, exact discrepancy tables for Λ in
//! progressions, and the main-term check for μ over coprime monics.
//!
//! Savings exponents are reported as data. Only exact identities and the
//! explicit-constant Hölder chains are checked.

use std::f64::consts::E;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::arith::{moebius_table, MonicSieve};
use crate::budget::Budget;
use crate::charsum::{accumulate_hist, bilinear_kloosterman, histogram_abs, reduce_modulus, ExpHistogram};
use crate::energy::{energy, inversion_distribution};
use crate::error::{Error, Result};
use crate::gf::FieldCtx;
use crate::modulus::{Modulus, ResidueRing, NOT_A_UNIT, RING_MAX_SIZE};
use crate::poly::{checked_pow, monic_deg_eq, Poly};
use crate::weights::WeightSeq;

/// Slack on floating comparisons against exact right-hand sides.
pub const FLOAT_SLACK: f64 = 1e-6;

/// The bound a table row is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    /// |W_{F,a}(m,n)| against q^{m+n}.
    Bilinear,
    /// Σ_{deg F=r} max_a |W_{F,a}(m,n)|.
    BilinearAverage,
    /// Möbius–Kloosterman sums with n > r/2, saving a power of q^n.
    MoebiusLong,
    /// Möbius–Kloosterman sums against q^{15n/16} + q^{2n/3+r/4}.
    MoebiusUniform,
    /// Σ_{deg F=r} max_a of the Möbius–Kloosterman sum.
    MoebiusAverage,
    /// Σ_{deg F<R} max_a |Λ-discrepancy|.
    BombieriVinogradov,
}

impl Claim {
    pub fn label(self) -> &'static str {
        match self {
            Claim::Bilinear => "bilinear",
            Claim::BilinearAverage => "bilinear_average",
            Claim::MoebiusLong => "moebius_long",
            Claim::MoebiusUniform => "moebius_uniform",
            Claim::MoebiusAverage => "moebius_average",
            Claim::BombieriVinogradov => "bombieri_vinogradov",
        }
    }
}

impl std::fmt::Display for Claim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// How the shift a is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum APolicy {
    Fixed(Poly),
    /// Maximize over all residues mod F (over units for bilinear sums).
    WorstOverAll,
}

/// Which moduli a scan visits.
#[derive(Clone, Debug)]
pub enum ModuliSpec {
    Explicit(Vec<Modulus>),
    /// Every monic F of degree r; per-n rows keep the worst F.
    AllMonic(usize),
}

impl ModuliSpec {
    pub fn moduli(&self, ctx: &Arc<FieldCtx>) -> Result<Vec<Modulus>> {
        match self {
            ModuliSpec::Explicit(v) => Ok(v.clone()),
            ModuliSpec::AllMonic(r) => {
                if *r == 0 {
                    return Err(Error::InvalidArgument("moduli need degree >= 1".into()));
                }
                monic_deg_eq(ctx, *r)?.map(|f| Modulus::new(&f)).collect()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum WeightSource {
    Unit,
    /// α from `seed`, β from `seed + 1`.
    RandomPm1 { seed: u64 },
    /// One sequence used for both ranges, truncated to each.
    File(WeightSeq),
}

impl WeightSource {
    pub fn label(&self) -> String {
        match self {
            WeightSource::Unit => "unit".into(),
            WeightSource::RandomPm1 { seed } => format!("random_pm1:{seed}"),
            WeightSource::File(_) => "file".into(),
        }
    }

    /// (α on deg < m, β on deg < n).
    pub fn pair(&self, ctx: &Arc<FieldCtx>, m: usize, n: usize) -> Result<(WeightSeq, WeightSeq)> {
        match self {
            WeightSource::Unit => Ok((WeightSeq::unit(m), WeightSeq::unit(n))),
            WeightSource::RandomPm1 { seed } => Ok((
                WeightSeq::random_pm1(ctx, m, *seed)?,
                WeightSeq::random_pm1(ctx, n, seed.wrapping_add(1))?,
            )),
            WeightSource::File(w) => Ok((w.prefix(ctx, m)?, w.prefix(ctx, n)?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub theorem: Claim,
    pub field: String,
    pub q: u32,
    pub r: usize,
    #[serde(rename = "F")]
    pub f: String,
    pub a: String,
    pub m: Option<usize>,
    pub n: usize,
    pub k: Option<u32>,
    pub weights: String,
    pub lhs_abs: f64,
    pub lhs_err: f64,
    pub trivial_bound: f64,
    /// log_q of the bound being compared against, when it is explicit.
    pub theorem_exponent: Option<f64>,
    pub ratio: f64,
    /// Savings log_q(trivial / lhs) per unit of the scale variable.
    pub observed_delta: Option<f64>,
    /// log_q of a secondary bound (the k₁ = k₂ = 2 energy form for bilinear rows).
    pub companion_exponent: Option<f64>,
    /// Whether an explicit-constant inequality held.
    pub chain_holds: Option<bool>,
}

fn log_q(q: u32, x: f64) -> f64 {
    x.ln() / (q as f64).ln()
}

fn observed_delta(q: u32, lhs: f64, trivial: f64, scale: f64) -> Option<f64> {
    (lhs > 0.0 && scale > 0.0).then(|| log_q(q, trivial / lhs) / scale)
}

fn ratio(lhs: f64, trivial: f64) -> f64 {
    if trivial > 0.0 {
        lhs / trivial
    } else {
        0.0
    }
}

fn poly_of(ring: &ResidueRing, a: u32) -> String {
    ring.to_poly(a).to_string()
}

/// Largest value by first occurrence, so ties resolve to the lowest index.
fn first_max<T: Copy>(items: impl IntoIterator<Item = (f64, T)>) -> Option<(f64, T)> {
    let mut best: Option<(f64, T)> = None;
    for (v, t) in items {
        if best.map_or(true, |(b, _)| v > b) {
            best = Some((v, t));
        }
    }
    best
}

struct BilinearPoint {
    abs: f64,
    err: f64,
    a: u32,
    mass: f64,
    energy_m: u128,
    energy_n: u128,
}

fn bilinear_point(
    f: &Modulus,
    policy: &APolicy,
    m: usize,
    n: usize,
    alpha: &WeightSeq,
    beta: &WeightSeq,
    budget: &Budget,
) -> Result<BilinearPoint> {
    let ring = f.ring()?;
    let candidates: Vec<u32> = match policy {
        APolicy::Fixed(a) => {
            if !f.is_coprime(a)? {
                return Err(Error::NotCoprime(a.to_string(), f.to_string()));
            }
            vec![ring.of_poly(a)]
        }
        APolicy::WorstOverAll => ring.units().collect(),
    };
    let values = candidates
        .par_iter()
        .map(|&a| {
            let (abs, err) = bilinear_kloosterman(f, &ring.to_poly(a), m, n, alpha, beta, budget)?.abs();
            Ok((abs, err, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let (abs, (err, a)) = first_max(values.iter().map(|&(v, e, a)| (v, (e, a))))
        .ok_or_else(|| Error::InvalidArgument(format!("no unit residues mod {f}")))?;
    let mass = inversion_distribution(f, m, budget)?.mass() as f64 * inversion_distribution(f, n, budget)?.mass() as f64;
    Ok(BilinearPoint {
        abs,
        err,
        a,
        mass,
        energy_m: energy(f, 2, m, None, budget)?.energy,
        energy_n: energy(f, 2, n, None, budget)?.energy,
    })
}

/// |W_{F,a}(m,n;α,β)| per (F, m, n) with the k = 2 energy bounds beside it.
///
/// `theorem_exponent` is log_q of q^{(3m+max(r,m))/4}·E_{F,2}(n)^{1/4} and
/// `chain_holds` checks S⁴ ≤ ‖α‖⁴‖β‖⁴·q^{3m+max(0,m−r)+r}·E_{F,2}(n) with the
/// exact energy.
pub fn bilinear_ratio_scan(
    moduli: &[Modulus],
    ranges: &[(usize, usize)],
    policy: &APolicy,
    weights: &WeightSource,
    budget: &Budget,
) -> Result<Vec<RatioRow>> {
    let grid: Vec<(&Modulus, usize, usize)> = moduli
        .iter()
        .flat_map(|f| ranges.iter().map(move |&(m, n)| (f, m, n)))
        .collect();
    grid.into_par_iter()
        .map(|(f, m, n)| bilinear_row(f, m, n, policy, weights, budget))
        .collect()
}

fn bilinear_row(
    f: &Modulus,
    m: usize,
    n: usize,
    policy: &APolicy,
    weights: &WeightSource,
    budget: &Budget,
) -> Result<RatioRow> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("bilinear ranges need m, n >= 1".into()));
    }
    let ctx = f.ctx();
    let (q, r) = (ctx.q(), f.degree());
    let (alpha, beta) = weights.pair(ctx, m, n)?;
    let pt = bilinear_point(f, policy, m, n, &alpha, &beta, budget)?;
    let norms = alpha.max_abs() * beta.max_abs();
    let trivial = norms * pt.mass;
    let (mf, nf, rf) = (m as f64, n as f64, r as f64);
    let e_n = pt.energy_n as f64;
    let e_m = pt.energy_m as f64;
    let garaev = (3.0 * mf + rf.max(mf)) / 4.0 + log_q(q, e_n) / 4.0;
    let companion = mf + nf + (log_q(q, e_m) + log_q(q, e_n) + rf - 4.0 * nf - 4.0 * mf) / 8.0;
    let chain_rhs = norms.powi(4) * (q as f64).powf(3.0 * mf + (mf - rf).max(0.0) + rf) * e_n;
    Ok(RatioRow {
        theorem: Claim::Bilinear,
        field: ctx.spec_string(),
        q,
        r,
        f: f.to_string(),
        a: poly_of(f.ring()?, pt.a),
        m: Some(m),
        n,
        k: Some(2),
        weights: weights.label(),
        lhs_abs: pt.abs,
        lhs_err: pt.err,
        trivial_bound: trivial,
        theorem_exponent: Some(garaev),
        ratio: ratio(pt.abs, trivial),
        observed_delta: observed_delta(q, pt.abs, trivial, rf),
        companion_exponent: Some(companion),
        chain_holds: Some(pt.abs.powi(4) <= chain_rhs * (1.0 + FLOAT_SLACK)),
    })
}

/// Σ_{F monic, deg F=r} max_{(a,F)=1} |W_{F,a}(m,n)| per range pair, against
/// q^{(m+r)·3/4 + max(m,r)/4}·(Σ_F E_{F,2}(n))^{1/4}, which holds with
/// constant ‖α‖∞‖β‖∞.
pub fn bilinear_average_scan(
    ctx: &Arc<FieldCtx>,
    r: usize,
    ranges: &[(usize, usize)],
    weights: &WeightSource,
    budget: &Budget,
) -> Result<Vec<RatioRow>> {
    let moduli = ModuliSpec::AllMonic(r).moduli(ctx)?;
    let q = ctx.q();
    ranges
        .iter()
        .map(|&(m, n)| {
            if m == 0 || n == 0 {
                return Err(Error::InvalidArgument("bilinear ranges need m, n >= 1".into()));
            }
            let (alpha, beta) = weights.pair(ctx, m, n)?;
            let points = moduli
                .par_iter()
                .map(|f| bilinear_point(f, &APolicy::WorstOverAll, m, n, &alpha, &beta, budget))
                .collect::<Result<Vec<_>>>()?;
            let norms = alpha.max_abs() * beta.max_abs();
            let lhs: f64 = points.iter().map(|p| p.abs).sum();
            let err: f64 = points.iter().map(|p| p.err).sum();
            let trivial = norms * points.iter().map(|p| p.mass).sum::<f64>();
            let energy_sum: u128 = points.iter().map(|p| p.energy_n).sum();
            let (mf, rf) = (m as f64, r as f64);
            let exponent = (mf + rf) * 0.75 + mf.max(rf) / 4.0 + log_q(q, energy_sum as f64) / 4.0;
            let bound = norms * (q as f64).powf(exponent);
            Ok(RatioRow {
                theorem: Claim::BilinearAverage,
                field: ctx.spec_string(),
                q,
                r,
                f: "*".into(),
                a: "*".into(),
                m: Some(m),
                n,
                k: Some(2),
                weights: weights.label(),
                lhs_abs: lhs,
                lhs_err: err,
                trivial_bound: trivial,
                theorem_exponent: Some(exponent),
                ratio: ratio(lhs, trivial),
                observed_delta: observed_delta(q, lhs, trivial, rf),
                companion_exponent: None,
                chain_holds: Some(lhs <= bound * (1.0 + FLOAT_SLACK)),
            })
        })
        .collect()
}

/// Σ μ(x) over deg x < n, (x,F) = 1, grouped by the residue of x̄.
pub fn moebius_profile(f: &Modulus, n: usize, budget: &Budget) -> Result<Vec<(u32, i64)>> {
    let ring = f.ring()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mu = moebius_table(f.ctx(), n, budget)?;
    let res = ring.residues_deg_lt(n)?;
    let inv = ring.inverses();
    let mut weight = vec![0i64; ring.size() as usize];
    for (i, &m) in mu.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let xi = inv[res[i] as usize];
        if xi != NOT_A_UNIT {
            weight[xi as usize] += m as i64;
        }
    }
    Ok(weight
        .into_iter()
        .enumerate()
        .filter(|&(_, w)| w != 0)
        .map(|(s, w)| (s as u32, w))
        .collect())
}

/// Σ_s w_s e_F(a·s) for a profile from [`moebius_profile`].
pub fn profile_value(ring: &ResidueRing, profile: &[(u32, i64)], a: u32) -> ExpHistogram {
    let p = ring.ctx().p();
    accumulate_hist(p, profile.len() as u64, |i| {
        let (s, w) = profile[i as usize];
        Some((ring.exponent(ring.mul(a, s)), w))
    })
}

struct MoebiusPoint {
    abs: f64,
    err: f64,
    a: u32,
}

fn moebius_point(f: &Modulus, n: usize, policy: &APolicy, budget: &Budget) -> Result<MoebiusPoint> {
    let ring = f.ring()?;
    let profile = moebius_profile(f, n, budget)?;
    let candidates: Vec<u32> = match policy {
        APolicy::Fixed(a) => vec![ring.of_poly(a)],
        APolicy::WorstOverAll => (0..ring.size()).collect(),
    };
    budget.check_terms(
        (candidates.len() as u64).saturating_mul(profile.len() as u64),
        "moebius scan",
    )?;
    let values: Vec<(f64, f64, u32)> = candidates
        .par_iter()
        .map(|&a| {
            let (abs, err) = histogram_abs(&profile_value(ring, &profile, a));
            (abs, err, a)
        })
        .collect();
    let (abs, (err, a)) = first_max(values.iter().map(|&(v, e, a)| (v, (e, a)))).expect("ring is nonempty");
    Ok(MoebiusPoint { abs, err, a })
}

/// Möbius–Kloosterman ratio rows. For [`Claim::MoebiusLong`] and
/// [`Claim::MoebiusUniform`] there is one row per (F, n), or per n with the
/// worst F under [`ModuliSpec::AllMonic`]. [`Claim::MoebiusAverage`] sums the
/// per-F maxima over all listed moduli, one row per n, always maximizing
/// over a.
pub fn moebius_ratio_scan(
    claim: Claim,
    ctx: &Arc<FieldCtx>,
    moduli: &ModuliSpec,
    n_values: &[usize],
    policy: &APolicy,
    budget: &Budget,
) -> Result<Vec<RatioRow>> {
    let list = moduli.moduli(ctx)?;
    if list.is_empty() {
        return Err(Error::InvalidArgument("no moduli to scan".into()));
    }
    let q = ctx.q();
    match claim {
        Claim::MoebiusLong | Claim::MoebiusUniform => {
            let worst_f = matches!(moduli, ModuliSpec::AllMonic(_));
            let mut rows = Vec::new();
            if worst_f {
                for &n in n_values {
                    let points = list
                        .par_iter()
                        .map(|f| moebius_point(f, n, policy, budget))
                        .collect::<Result<Vec<_>>>()?;
                    let (_, i) = first_max(points.iter().enumerate().map(|(i, p)| (p.abs, i))).expect("nonempty");
                    rows.push(moebius_row(claim, &list[i], n, &points[i])?);
                }
            } else {
                for f in &list {
                    for &n in n_values {
                        rows.push(moebius_row(claim, f, n, &moebius_point(f, n, policy, budget)?)?);
                    }
                }
            }
            Ok(rows)
        }
        Claim::MoebiusAverage => {
            let r = list[0].degree();
            n_values
                .iter()
                .map(|&n| {
                    let points = list
                        .par_iter()
                        .map(|f| moebius_point(f, n, &APolicy::WorstOverAll, budget))
                        .collect::<Result<Vec<_>>>()?;
                    let lhs: f64 = points.iter().map(|p| p.abs).sum();
                    let err: f64 = points.iter().map(|p| p.err).sum();
                    let trivial = list.len() as f64 * (q as f64).powi(n as i32);
                    let (nf, rf) = (n as f64, r as f64);
                    let qf = q as f64;
                    let bound = qf.powf(rf)
                        * (qf.powf(0.9 * nf)
                            + qf.powf(rf / 6.0 + 13.0 * nf / 18.0)
                            + qf.powf(13.0 * nf / 8.0 - 5.0 * rf / 6.0));
                    Ok(RatioRow {
                        theorem: claim,
                        field: ctx.spec_string(),
                        q,
                        r,
                        f: "*".into(),
                        a: "*".into(),
                        m: None,
                        n,
                        k: None,
                        weights: "moebius".into(),
                        lhs_abs: lhs,
                        lhs_err: err,
                        trivial_bound: trivial,
                        theorem_exponent: Some(log_q(q, bound)),
                        ratio: ratio(lhs, trivial),
                        observed_delta: observed_delta(q, lhs, trivial, nf),
                        companion_exponent: None,
                        chain_holds: None,
                    })
                })
                .collect()
        }
        other => Err(Error::InvalidArgument(format!("{other} is not a Möbius scan"))),
    }
}

fn moebius_row(claim: Claim, f: &Modulus, n: usize, pt: &MoebiusPoint) -> Result<RatioRow> {
    let ctx = f.ctx();
    let (q, r) = (ctx.q(), f.degree());
    let ring = f.ring()?;
    let trivial = (q as f64).powi(n as i32);
    let (nf, rf) = (n as f64, r as f64);
    let exponent = match claim {
        Claim::MoebiusLong => {
            let (_, f0, _) = reduce_modulus(&ring.to_poly(pt.a), f)?;
            f0.degree() as f64 + nf / 2.0
        }
        _ => (15.0 * nf / 16.0).max(2.0 * nf / 3.0 + rf / 4.0),
    };
    Ok(RatioRow {
        theorem: claim,
        field: ctx.spec_string(),
        q,
        r,
        f: f.to_string(),
        a: poly_of(ring, pt.a),
        m: None,
        n,
        k: None,
        weights: "moebius".into(),
        lhs_abs: pt.abs,
        lhs_err: pt.err,
        trivial_bound: trivial,
        theorem_exponent: Some(exponent),
        ratio: ratio(pt.abs, trivial),
        observed_delta: observed_delta(q, pt.abs, trivial, nf),
        companion_exponent: None,
        chain_holds: None,
    })
}

fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(r)
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn q_pow(q: u32, n: usize) -> BigInt {
    BigInt::from(q).pow(n as u32)
}

/// Whether q > p²e²·((c − ω)/(c − (2c−1)ω))² for ω below 1/2 + 1/(4c − 2).
/// With c = 16 this is the progression hypothesis, with c = 10 the averaged one.
fn admissible(p: u32, q: u32, omega: f64, c: f64) -> bool {
    let limit = 0.5 + 1.0 / (4.0 * c - 2.0);
    let den = c - (2.0 * c - 1.0) * omega;
    if omega >= limit || den <= 0.0 {
        return false;
    }
    let t = (p as f64) * E * (c - omega) / den;
    (q as f64) > t * t
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscrepancyRow {
    pub field: String,
    pub q: u32,
    #[serde(rename = "F")]
    pub f: String,
    pub r: usize,
    pub n: usize,
    pub a: String,
    pub ap_sum: u64,
    #[serde(serialize_with = "ser_rational")]
    pub main_term: BigRational,
    #[serde(serialize_with = "ser_rational")]
    pub delta: BigRational,
    pub delta_value: f64,
    /// r / n.
    pub omega: f64,
    /// Whether (q, ω = r/n) satisfies the hypothesis for progressions.
    pub admissible: bool,
    /// δ with |delta| = q^{n − r(1+δ)}.
    pub observed_delta: Option<f64>,
}

/// Σ_{x ∈ M_n, x ≡ a (F)} Λ(x) against q^n/φ(F), one row per unit a in
/// residue order. The coprime total is checked against
/// q^n − Σ_{P | F, deg P | n} deg P.
pub fn ap_lambda_discrepancy(f: &Modulus, n: usize, budget: &Budget) -> Result<Vec<DiscrepancyRow>> {
    if n == 0 {
        return Err(Error::InvalidArgument("progressions need n >= 1".into()));
    }
    let sieve = MonicSieve::new(f.ctx(), n, budget)?;
    ap_rows(&sieve, f, n)
}

fn ap_rows(sieve: &MonicSieve, f: &Modulus, n: usize) -> Result<Vec<DiscrepancyRow>> {
    let ctx = f.ctx();
    let (p, q, r) = (ctx.p(), ctx.q(), f.degree());
    if r == 0 {
        return Err(Error::InvalidArgument("progressions need deg F >= 1".into()));
    }
    let ring = f.ring()?;
    let res = ring.residues_monic(n)?;
    let mut sums = vec![0u64; ring.size() as usize];
    for (i, &l) in sieve.lambda_values().iter().enumerate() {
        if l != 0 {
            sums[res[i] as usize] += l as u64;
        }
    }
    let units: Vec<u32> = ring.units().collect();
    let coprime_total: u64 = units.iter().map(|&a| sums[a as usize]).sum();
    let excluded: u64 = f
        .factors()
        .iter()
        .map(|(pr, _)| pr.coeffs().len() - 1)
        .filter(|&e| n % e == 0)
        .map(|e| e as u64)
        .sum();
    let expected = checked_pow(q, n)? - excluded;
    if coprime_total != expected {
        return Err(Error::InvariantViolation(format!(
            "Λ over progressions mod {f} sums to {coprime_total}, expected {expected}"
        )));
    }
    let main = BigRational::new(q_pow(q, n), BigInt::from(f.phi()));
    let omega = r as f64 / n as f64;
    let ok = admissible(p, q, omega, 16.0);
    Ok(units
        .into_iter()
        .map(|a| {
            let ap_sum = sums[a as usize];
            let delta = BigRational::from_integer(ap_sum.into()) - &main;
            let delta_value = to_f64(&delta);
            let observed = (!delta.is_zero())
                .then(|| (n as f64 - r as f64 - log_q(q, delta_value.abs())) / r as f64);
            DiscrepancyRow {
                field: ctx.spec_string(),
                q,
                f: f.to_string(),
                r,
                n,
                a: poly_of(ring, a),
                ap_sum,
                main_term: main.clone(),
                delta,
                delta_value,
                omega,
                admissible: ok,
                observed_delta: observed,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvRow {
    pub field: String,
    pub q: u32,
    #[serde(rename = "R")]
    pub big_r: usize,
    pub n: usize,
    #[serde(rename = "F")]
    pub f: String,
    pub r: usize,
    /// Residue attaining the maximum (lowest in residue order on ties).
    pub a: String,
    #[serde(serialize_with = "ser_rational")]
    pub max_abs_delta: BigRational,
    pub max_abs_delta_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvReport {
    pub field: String,
    pub q: u32,
    #[serde(rename = "R")]
    pub big_r: usize,
    pub n: usize,
    #[serde(serialize_with = "ser_rational")]
    pub total: BigRational,
    pub total_value: f64,
    /// R / n.
    pub omega: f64,
    pub admissible: bool,
    /// δ with total = q^{n − Rδ}.
    pub observed_delta: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<BvRow>,
}

/// Σ over monic F with 1 ≤ deg F < R of max_{(a,F)=1} |Σ_{x∈M_n, x≡a} Λ(x) − q^n/φ(F)|.
pub fn bombieri_vinogradov_sum(ctx: &Arc<FieldCtx>, big_r: usize, n: usize, budget: &Budget) -> Result<BvReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("progressions need n >= 1".into()));
    }
    let (p, q) = (ctx.p(), ctx.q());
    let sieve = MonicSieve::new(ctx, n, budget)?;
    let mut moduli = Vec::new();
    for d in 1..big_r {
        moduli.extend(monic_deg_eq(ctx, d)?);
    }
    let rows = moduli
        .par_iter()
        .map(|fp| {
            let f = Modulus::new(fp)?;
            let table = ap_rows(&sieve, &f, n)?;
            let mut best: Option<(BigRational, String)> = None;
            for row in table {
                let v = row.delta.abs();
                if best.as_ref().map_or(true, |(b, _)| v > *b) {
                    best = Some((v, row.a));
                }
            }
            let (max_abs_delta, a) = best.expect("units exist");
            Ok(BvRow {
                field: ctx.spec_string(),
                q,
                big_r,
                n,
                f: f.to_string(),
                r: f.degree(),
                a,
                max_abs_delta_value: to_f64(&max_abs_delta),
                max_abs_delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = rows.iter().fold(BigRational::zero(), |acc, r| acc + &r.max_abs_delta);
    let total_value = to_f64(&total);
    let omega = big_r as f64 / n as f64;
    Ok(BvReport {
        field: ctx.spec_string(),
        q,
        big_r,
        n,
        observed_delta: (!total.is_zero() && big_r > 0)
            .then(|| (n as f64 - log_q(q, total_value)) / big_r as f64),
        total,
        total_value,
        omega,
        admissible: admissible(p, q, omega, 10.0),
        rows,
    })
}

/// One ratio row per n for the averaged Λ-discrepancy, against q^n.
pub fn bv_ratio_scan(ctx: &Arc<FieldCtx>, big_r: usize, n_values: &[usize], budget: &Budget) -> Result<Vec<RatioRow>> {
    let q = ctx.q();
    n_values
        .iter()
        .map(|&n| {
            let rep = bombieri_vinogradov_sum(ctx, big_r, n, budget)?;
            let trivial = (q as f64).powi(n as i32);
            Ok(RatioRow {
                theorem: Claim::BombieriVinogradov,
                field: rep.field.clone(),
                q,
                r: big_r,
                f: "*".into(),
                a: "*".into(),
                m: None,
                n,
                k: None,
                weights: "lambda".into(),
                lhs_abs: rep.total_value,
                lhs_err: 0.0,
                trivial_bound: trivial,
                theorem_exponent: None,
                ratio: ratio(rep.total_value, trivial),
                observed_delta: rep.observed_delta,
                companion_exponent: None,
                chain_holds: None,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientRoute {
    /// Sieve count confirmed against the generating function.
    Sieve,
    /// Generating function alone; the degree is beyond the sieve budget.
    GeneratingFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MainTermRow {
    pub field: String,
    pub q: u32,
    #[serde(rename = "F")]
    pub f: String,
    pub r: usize,
    pub d: usize,
    /// Σ_{x∈M_d, (x,F)=1} μ(x).
    pub coefficient: i64,
    pub route: CoefficientRoute,
    #[serde(serialize_with = "ser_rational")]
    pub partial: BigRational,
    /// partial + q^r/φ(F).
    #[serde(serialize_with = "ser_rational")]
    pub error: BigRational,
    /// Σ_{k>d} k·q^{-k}·(h_k + q·h_{k−1}) ≥ |error|.
    #[serde(serialize_with = "ser_rational")]
    pub tail: BigRational,
    pub error_value: f64,
    pub tail_value: f64,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MainTermReport {
    /// q^r / φ(F).
    pub main_term: BigRational,
    /// Rows for d' = 1..=d.
    pub rows: Vec<MainTermRow>,
}

/// Partial sums Σ_{k≤d} k·q^{−k}·Σ_{x∈M_k,(x,F)=1} μ(x) and their distance
/// to −q^r/φ(F), in exact rationals.
///
/// The coefficients are those of (1 − qu)·H(u) with
/// H(u) = Π_{P|F} (1 − u^{deg P})^{−1} = Σ h_k u^k; they are recounted with
/// the μ sieve wherever q^k fits the state budget. The tail bound uses
/// |c_k| ≤ h_k + q·h_{k−1} and the closed forms H(1/q) = q^r/φ(F) and
/// Σ k·h_k·q^{−k} = H(1/q)·Σ_{P|F} deg P·q^{−deg P}/(1 − q^{−deg P}).
pub fn main_term_check(f: &Modulus, d: usize, budget: &Budget) -> Result<MainTermReport> {
    if d == 0 {
        return Err(Error::InvalidArgument("main-term check needs d >= 1".into()));
    }
    let ctx = f.ctx();
    let (q, r) = (ctx.q(), f.degree());
    let degrees: Vec<usize> = f.factors().iter().map(|(p, _)| p.coeffs().len() - 1).collect();
    let mut h = vec![BigInt::zero(); d + 1];
    h[0] = BigInt::one();
    for &e in &degrees {
        for k in e..=d {
            let prev = h[k - e].clone();
            h[k] += prev;
        }
    }
    let qb = BigInt::from(q);
    let coeff = |k: usize| -> BigInt {
        if k == 0 {
            h[0].clone()
        } else {
            &h[k] - &qb * &h[k - 1]
        }
    };
    let main = BigRational::new(q_pow(q, r), BigInt::from(f.phi()));
    let inv_q = |k: usize| BigRational::new(BigInt::one(), q_pow(q, k));
    let weighted: BigRational = degrees
        .iter()
        .map(|&e| BigRational::from_integer(e.into()) * inv_q(e) / (BigRational::one() - inv_q(e)))
        .fold(BigRational::zero(), |acc, t| acc + t);
    let a_sum = &main * weighted;
    let sieve_cap = budget.max_states.min(RING_MAX_SIZE);
    let ring = f.ring()?;

    let mut rows = Vec::with_capacity(d);
    let mut partial = BigRational::zero();
    // Σ_{k≤j} k h_k q^{-k} and Σ_{k≤j} h_k q^{-k}, for j = d' and d' − 1.
    let mut kh = BigRational::zero();
    let mut kh_prev;
    let mut hh_prev = BigRational::from_integer(h[0].clone());
    for k in 1..=d {
        let c = coeff(k);
        let route = if checked_pow(q, k).map_or(false, |s| s <= sieve_cap) {
            let counted = coprime_mertens(f, ring, k, budget)?;
            if BigInt::from(counted) != c {
                return Err(Error::InvariantViolation(format!(
                    "coprime Möbius sum in degree {k} mod {f}: sieve {counted}, series {c}"
                )));
            }
            CoefficientRoute::Sieve
        } else {
            CoefficientRoute::GeneratingFunction
        };
        let c_small = c
            .to_i64()
            .ok_or_else(|| Error::ResourceLimit(format!("coefficient in degree {k} overflows i64")))?;
        partial += BigRational::from_integer(BigInt::from(k) * &c) * inv_q(k);
        kh_prev = kh.clone();
        kh += BigRational::from_integer(BigInt::from(k) * &h[k]) * inv_q(k);
        let tail = (&a_sum - &kh) + (&a_sum - &kh_prev) + (&main - &hh_prev);
        hh_prev += BigRational::from_integer(h[k].clone()) * inv_q(k);
        let error = &partial + &main;
        rows.push(MainTermRow {
            field: ctx.spec_string(),
            q,
            f: f.to_string(),
            r,
            d: k,
            coefficient: c_small,
            route,
            error_value: to_f64(&error),
            tail_value: to_f64(&tail),
            bounded: error.abs() <= tail,
            partial: partial.clone(),
            error,
            tail,
        });
    }
    Ok(MainTermReport { main_term: main, rows })
}

fn coprime_mertens(f: &Modulus, ring: &ResidueRing, k: usize, budget: &Budget) -> Result<i64> {
    let sieve = MonicSieve::new(f.ctx(), k, budget)?;
    let res = ring.residues_monic(k)?;
    Ok(sieve
        .mu_values()
        .iter()
        .zip(&res)
        .filter(|(_, &x)| ring.is_unit(x))
        .map(|(&m, _)| m as i64)
        .sum())
}

/// Runs `job` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, job: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// CSV with a header row.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(io_err)?;
    }
    String::from_utf8(w.into_inner().map_err(io_err)?).map_err(io_err)
}

pub fn jsonl_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).map_err(io_err)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    std::fs::write(path, csv_string(rows)?).map_err(io_err)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    w.write_all(jsonl_string(rows)?.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charsum::moebius_kloosterman;
    use num_rational::Ratio;

    fn f3() -> Arc<FieldCtx> {
        FieldCtx::new(3, 1, None).unwrap()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn ap_rows_for_t() {
        let ctx = f3();
        let f = Modulus::parse(&ctx, "T").unwrap();
        let rows = ap_lambda_discrepancy(&f, 2, &Budget::default()).unwrap();
        assert_eq!(rows.len(), 2);
        let one = rows.iter().find(|r| r.a == "1").unwrap();
        assert_eq!(one.ap_sum, 4);
        assert_eq!(one.main_term, rat(9, 2));
        assert_eq!(one.delta, rat(-1, 2));
        assert_eq!(rows.iter().map(|r| r.ap_sum).sum::<u64>(), 8);
    }

    #[test]
    fn bv_small() {
        let ctx = f3();
        let b = Budget::default();
        let rep = bombieri_vinogradov_sum(&ctx, 2, 2, &b).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.total, rat(3, 2));
        let empty = bombieri_vinogradov_sum(&ctx, 1, 2, &b).unwrap();
        assert!(empty.total.is_zero() && empty.rows.is_empty());
    }

    #[test]
    fn main_term_hand_value_and_tail() {
        let ctx = f3();
        let f = Modulus::parse(&ctx, "T").unwrap();
        let rep = main_term_check(&f, 8, &Budget::default()).unwrap();
        assert_eq!(rep.main_term, rat(3, 2));
        let first = &rep.rows[0];
        assert_eq!(first.coefficient, -2);
        assert_eq!(first.partial, rat(-2, 3));
        assert_eq!(first.error, rat(5, 6));
        assert_eq!(first.tail, rat(5, 3));
        for w in rep.rows.windows(2) {
            assert!(w[1].tail <= w[0].tail);
        }
        assert!(rep.rows.iter().all(|r| r.bounded && r.route == CoefficientRoute::Sieve));
    }

    #[test]
    fn main_term_route_switches_past_budget() {
        let ctx = f3();
        let f = Modulus::parse(&ctx, "T^2+1").unwrap();
        let b = Budget { max_states: 81, ..Budget::default() };
        let rep = main_term_check(&f, 6, &b).unwrap();
        assert_eq!(rep.rows[3].route, CoefficientRoute::Sieve);
        assert_eq!(rep.rows[4].route, CoefficientRoute::GeneratingFunction);
        assert!(rep.rows.iter().all(|r| r.bounded));
    }

    #[test]
    fn profile_matches_direct_sum() {
        let ctx = f3();
        let b = Budget::default();
        let f = Modulus::parse(&ctx, "T^2+T+2").unwrap();
        let ring = f.ring().unwrap();
        for n in 0..4 {
            let prof = moebius_profile(&f, n, &b).unwrap();
            for a in 0..ring.size() {
                let direct = moebius_kloosterman(&f, &ring.to_poly(a), n, &b).unwrap();
                assert!(profile_value(ring, &prof, a).value_eq(&direct));
            }
        }
    }

    #[test]
    fn moebius_scan_rows() {
        let ctx = f3();
        let b = Budget::default();
        let t = Modulus::parse(&ctx, "T").unwrap();
        let fixed = APolicy::Fixed(Poly::zero(&ctx));
        let rows =
            moebius_ratio_scan(Claim::MoebiusUniform, &ctx, &ModuliSpec::Explicit(vec![t]), &[0, 2], &fixed, &b)
                .unwrap();
        assert_eq!(rows[0].lhs_abs, 0.0);
        assert!((rows[1].lhs_abs - 2.0).abs() < 1e-12);
        assert_eq!(rows[1].trivial_bound, 9.0);
        let all = moebius_ratio_scan(
            Claim::MoebiusUniform,
            &ctx,
            &ModuliSpec::AllMonic(2),
            &[1, 2, 3, 4],
            &APolicy::WorstOverAll,
            &b,
        )
        .unwrap();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|r| r.ratio <= 1.0 + FLOAT_SLACK));
        let avg =
            moebius_ratio_scan(Claim::MoebiusAverage, &ctx, &ModuliSpec::AllMonic(2), &[3], &APolicy::WorstOverAll, &b)
                .unwrap();
        assert_eq!(avg[0].trivial_bound, 9.0 * 27.0);
    }

    #[test]
    fn bilinear_example_and_chain() {
        let ctx = f3();
        let b = Budget::default();
        let t = Modulus::parse(&ctx, "T").unwrap();
        let one = APolicy::Fixed(Poly::one(&ctx));
        let rows = bilinear_ratio_scan(&[t.clone()], &[(1, 1)], &one, &WeightSource::Unit, &b).unwrap();
        assert!((rows[0].lhs_abs - 2.0).abs() < 1e-12);
        assert_eq!(rows[0].trivial_bound, 4.0);
        assert_eq!(rows[0].chain_holds, Some(true));
        let zero = APolicy::Fixed(Poly::zero(&ctx));
        assert!(matches!(
            bilinear_ratio_scan(&[t], &[(1, 1)], &zero, &WeightSource::Unit, &b),
            Err(Error::NotCoprime(..))
        ));
        let avg = bilinear_average_scan(&ctx, 2, &[(1, 2), (2, 1)], &WeightSource::RandomPm1 { seed: 7 }, &b).unwrap();
        assert!(avg.iter().all(|r| r.chain_holds == Some(true)));
    }

    #[test]
    fn file_weights_truncate() {
        let ctx = f3();
        let w = WeightSeq::from_values(
            &ctx,
            2,
            crate::weights::WeightValues::GaussianRational(vec![crate::weights::gauss(Ratio::new(1, 2), Ratio::new(0, 1)); 9]),
        )
        .unwrap();
        let t = Modulus::parse(&ctx, "T+1").unwrap();
        let rows =
            bilinear_ratio_scan(&[t], &[(1, 2)], &APolicy::WorstOverAll, &WeightSource::File(w), &Budget::default())
                .unwrap();
        assert_eq!(rows[0].weights, "file");
        assert_eq!(rows[0].chain_holds, Some(true));
    }

    #[test]
    fn csv_is_worker_independent() {
        let ctx = f3();
        let b = Budget::default();
        let run = || {
            let rows = moebius_ratio_scan(
                Claim::MoebiusLong,
                &ctx,
                &ModuliSpec::AllMonic(2),
                &[2, 3],
                &APolicy::WorstOverAll,
                &b,
            )
            .unwrap();
            csv_string(&rows).unwrap()
        };
        assert_eq!(with_workers(1, run).unwrap(), with_workers(4, run).unwrap());
    }

    #[test]
    fn admissibility_thresholds() {
        assert!(!admissible(3, 3, 0.4, 16.0));
        assert!(admissible(3, 3usize.pow(8) as u32, 0.25, 16.0));
        assert!(!admissible(3, u32::MAX, 0.6, 16.0));
    }
}
