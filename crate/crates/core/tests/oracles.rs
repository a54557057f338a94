//! Fast paths checked against independent, deliberately naive oracles.

use std::collections::HashMap;
use std::sync::Arc;

use ffsum_core::arith::{lambda_total, moebius, moebius_in_ap, von_mangoldt};
use ffsum_core::charsum::{
    bilinear_kloosterman, bilinear_kloosterman_naive, kloosterman_complete, kloosterman_coprime_variant,
    kloosterman_incomplete, moebius_kloosterman, moebius_kloosterman_naive, reduce_modulus, residue_exponent,
};
use ffsum_core::energy::{energy, energy_avg, i_count, inversion_distribution, moment_identity_check, EnergyMethod};
use ffsum_core::poly::{all_deg_lt, monic_deg_eq};
use ffsum_core::vaughan::{quadrant_convolution_check, vaughan_decompose};
use ffsum_core::weights::{gauss, WeightValues};
use ffsum_core::{Budget, Error, ExpHistogram, FieldCtx, FqElem, Modulus, Poly, WeightSeq};
use num_rational::Ratio;

fn gf(p: u32, ell: u32) -> Arc<FieldCtx> {
    FieldCtx::new(p, ell, None).unwrap()
}

fn poly(ctx: &Arc<FieldCtx>, s: &str) -> Poly {
    Poly::parse(ctx, s).unwrap()
}

fn hist(counts: &[i64]) -> ExpHistogram {
    ExpHistogram::from_counts(counts.to_vec())
}

/// Tr of the T^{-1} coefficient of x/F, by power-series division in u = 1/T.
fn laurent_oracle(ctx: &FieldCtx, x: &Poly, f: &Poly) -> u32 {
    if x.is_zero() {
        return 0;
    }
    let xs = x.coeffs();
    let fs = f.coeffs();
    let (s, r) = (xs.len() - 1, fs.len() - 1);
    // x/F = T^{s-r} · x̃(u)/f̃(u); T^{-1} is u^{s-r+1} of the quotient series.
    let Some(order) = (s + 1).checked_sub(r) else {
        return 0;
    };
    let xt = |j: usize| if j <= s { xs[s - j] } else { FqElem::ZERO };
    let ft = |j: usize| if j <= r { fs[r - j] } else { FqElem::ZERO };
    let lead_inv = ctx.inv(ft(0)).unwrap();
    let mut g: Vec<FqElem> = Vec::with_capacity(order + 1);
    for j in 0..=order {
        let mut acc = xt(j);
        for (i, &gi) in g.iter().enumerate() {
            acc = ctx.sub(acc, ctx.mul(gi, ft(j - i)));
        }
        g.push(ctx.mul(acc, lead_inv));
    }
    ctx.trace(g[order])
}

#[test]
fn residue_exponent_matches_laurent_division() {
    for (p, ell, moduli) in [
        (3, 1, vec!["T", "T^2", "T^2+1", "2T^2+T", "T^3+2T+1", "2T^3+T^2"]),
        (5, 1, vec!["T^2+2", "3T+1"]),
        (3, 2, vec!["T^2+uT+1", "uT+2", "(u+1)T"]),
    ] {
        let ctx = gf(p, ell);
        for fs in moduli {
            let fp = poly(&ctx, fs);
            let f = Modulus::new(&fp).unwrap();
            let bound = if ctx.q() > 5 { 3 } else { 4 };
            for x in all_deg_lt(&ctx, bound).unwrap() {
                let want = laurent_oracle(&ctx, &x, &fp);
                assert_eq!(residue_exponent(&x, &f).unwrap().0, want, "F={fs} x={x}");
            }
        }
    }
}

#[test]
fn documented_exponent_values() {
    let ctx = gf(3, 1);
    let f = Modulus::parse(&ctx, "T^2").unwrap();
    assert_eq!(residue_exponent(&Poly::t(&ctx), &f).unwrap().0, 1);
    assert_eq!(residue_exponent(&Poly::one(&ctx), &f).unwrap().0, 0);
    assert_eq!(residue_exponent(&Poly::zero(&ctx), &f).unwrap().0, 0);
}

#[test]
fn kloosterman_examples() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    let one = Poly::one(&ctx);
    let f = Modulus::parse(&ctx, "T+1").unwrap();
    let k = kloosterman_complete(&f, &one, &one, &b).unwrap();
    assert!(k.value_eq(&hist(&[0, 1, 1])));
    assert!((k.abs().0 - 1.0).abs() < 1e-12);
    let t = Modulus::parse(&ctx, "T").unwrap();
    let inc = kloosterman_incomplete(&t, &Poly::zero(&ctx), 1, &b).unwrap();
    assert_eq!(inc.as_integer(), Some(2));
    let v = kloosterman_coprime_variant(&f, &Poly::t(&ctx), &one, &b).unwrap();
    assert_eq!(v.as_integer(), Some(-1));
}

#[test]
fn bilinear_fast_path_matches_double_loop() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    let f = Modulus::parse(&ctx, "T^2+1").unwrap();
    let alpha = WeightSeq::random_pm1(&ctx, 2, 11).unwrap();
    let beta = WeightSeq::random_pm1(&ctx, 2, 12).unwrap();
    for a in all_deg_lt(&ctx, 2).unwrap() {
        let fast = bilinear_kloosterman(&f, &a, 2, 2, &alpha, &beta, &b).unwrap();
        let slow = bilinear_kloosterman_naive(&f, &a, 2, 2, &alpha, &beta, &b).unwrap();
        assert_eq!(fast, slow, "a={a}");
    }
    let t = Modulus::parse(&ctx, "T").unwrap();
    let unit1 = WeightSeq::unit(1);
    let w = bilinear_kloosterman(&t, &Poly::one(&ctx), 1, 1, &unit1, &unit1, &b).unwrap();
    assert_eq!(w.histogram().unwrap().as_integer(), Some(-2));
    let zero = bilinear_kloosterman(&f, &Poly::zero(&ctx), 2, 2, &WeightSeq::unit(2), &WeightSeq::unit(2), &b).unwrap();
    assert_eq!(zero.histogram().unwrap().as_integer(), Some(8 * 8));

    let g = WeightSeq::from_values(
        &ctx,
        2,
        WeightValues::GaussianRational(
            (0..9).map(|i| gauss(Ratio::new(i, 3), Ratio::new(1 - i, 2))).collect(),
        ),
    )
    .unwrap();
    let sq = Modulus::parse(&ctx, "T^2").unwrap();
    for a in ["1", "T+2", "2T+1"] {
        let a = poly(&ctx, a);
        let fast = bilinear_kloosterman(&sq, &a, 2, 2, &g, &beta, &b).unwrap();
        let slow = bilinear_kloosterman_naive(&sq, &a, 2, 2, &g, &beta, &b).unwrap();
        assert_eq!(fast, slow);
    }
}

#[test]
fn moebius_kloosterman_matches_factorization_oracle() {
    let b = Budget::default();
    for (p, ell, moduli, top) in [
        (3, 1, vec!["T", "T^2+1", "T^2", "T^3+T^2+2", "2T^2+2"], 5),
        (5, 1, vec!["T^2+2", "T^2"], 3),
        (3, 2, vec!["T^2+T+u"], 2),
    ] {
        let ctx = gf(p, ell);
        for fs in moduli {
            let f = Modulus::parse(&ctx, fs).unwrap();
            for a in all_deg_lt(&ctx, f.degree()).unwrap() {
                for n in 0..=top {
                    let fast = moebius_kloosterman(&f, &a, n, &b).unwrap();
                    let slow = moebius_kloosterman_naive(&f, &a, n).unwrap();
                    assert_eq!(fast, slow, "F={fs} a={a} n={n}");
                }
            }
        }
    }
    let ctx = gf(3, 1);
    let t = Modulus::parse(&ctx, "T").unwrap();
    assert_eq!(moebius_kloosterman(&t, &Poly::zero(&ctx), 2, &b).unwrap().as_integer(), Some(-2));
    assert!(moebius_kloosterman(&t, &Poly::one(&ctx), 0, &b).unwrap().is_zero_value());
}

#[test]
fn reduction_examples_and_transport() {
    let ctx = gf(3, 1);
    let sq = Modulus::parse(&ctx, "T^2").unwrap();
    let (a0, f0, d) = reduce_modulus(&Poly::t(&ctx), &sq).unwrap();
    assert_eq!((a0, f0.poly().clone(), d), (Poly::one(&ctx), Poly::t(&ctx), 1));
    let (a0, f0, d) = reduce_modulus(&Poly::zero(&ctx), &sq).unwrap();
    assert!(a0.is_zero() && f0.degree() == 0 && d == 2);
    let g = poly(&ctx, "T+2");
    let (a0, f0, d) = reduce_modulus(&g, &sq).unwrap();
    assert_eq!((a0, f0, d), (g, sq.clone(), 0));
    // e_F(a·x̄_F) = e_{F0}(a0·x̄_{F0}) for every unit x.
    let f = Modulus::parse(&ctx, "2T^3+T^2").unwrap();
    for a in all_deg_lt(&ctx, 3).unwrap() {
        let (a0, f0, _) = reduce_modulus(&a, &f).unwrap();
        for x in all_deg_lt(&ctx, 3).unwrap() {
            if x.is_zero() || !f.is_coprime(&x).unwrap() {
                continue;
            }
            let lhs = residue_exponent(&(&a * &f.mod_inverse(&x).unwrap()), &f).unwrap();
            let rhs = if f0.degree() == 0 {
                0
            } else {
                residue_exponent(&(&a0 * &f0.mod_inverse(&x).unwrap()), &f0).unwrap().0
            };
            assert_eq!(lhs.0, rhs, "a={a} x={x}");
        }
    }
}

#[test]
fn arithmetic_function_examples() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    assert_eq!(moebius(&poly(&ctx, "T^2")).unwrap(), 0);
    assert_eq!(moebius(&poly(&ctx, "2")).unwrap(), 1);
    assert_eq!(moebius(&poly(&ctx, "T^2+T")).unwrap(), 1);
    assert_eq!(von_mangoldt(&poly(&ctx, "T^3")).unwrap(), 1);
    assert_eq!(von_mangoldt(&poly(&ctx, "T^2+T")).unwrap(), 0);
    assert_eq!(von_mangoldt(&poly(&ctx, "2T^2+T+2")).unwrap(), 1);
    assert_eq!(lambda_total(&ctx, 2, &b).unwrap(), 9);
    assert_eq!(lambda_total(&gf(5, 1), 3, &b).unwrap(), 125);
    let t = Modulus::parse(&ctx, "T").unwrap();
    let one = Poly::one(&ctx);
    assert_eq!(moebius_in_ap(1, &t, &one, &b).unwrap(), 1);
    assert_eq!(moebius_in_ap(2, &t, &one, &b).unwrap(), -1);
    for n in 1..5 {
        let both: i64 = ["1", "2"].iter().map(|a| moebius_in_ap(n, &t, &poly(&ctx, a), &b).unwrap()).sum();
        let direct: i64 = all_deg_lt(&ctx, n)
            .unwrap()
            .filter(|x| !x.is_zero() && t.is_coprime(x).unwrap())
            .map(|x| moebius(&x).unwrap() as i64)
            .sum();
        assert_eq!(both, direct);
    }
    assert!(matches!(moebius_in_ap(2, &t, &Poly::zero(&ctx), &b), Err(Error::NotCoprime(..))));
}

/// I_{F,a,k}(n) by enumerating k-tuples of polynomials with xgcd inverses.
fn tuple_counts(f: &Modulus, k: u32, n: usize) -> HashMap<Poly, u128> {
    let ctx = f.ctx();
    let inverses: Vec<Poly> = all_deg_lt(ctx, n)
        .unwrap()
        .filter(|x| !x.is_zero() && f.is_coprime(x).unwrap())
        .map(|x| f.mod_inverse(&x).unwrap())
        .collect();
    let mut sums = vec![Poly::zero(ctx)];
    for _ in 0..k {
        sums = sums.iter().flat_map(|s| inverses.iter().map(move |v| s + v)).collect();
    }
    let mut out = HashMap::new();
    for s in sums {
        *out.entry(f.reduce(&s).unwrap()).or_insert(0) += 1;
    }
    out
}

#[test]
fn inversion_counts_match_tuple_enumeration() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    for fs in ["T", "T^2+1", "T^2", "T^2+T"] {
        let f = Modulus::parse(&ctx, fs).unwrap();
        for n in 0..=f.degree() {
            let mass = inversion_distribution(&f, n, &b).unwrap().mass() as u128;
            for k in 1..=3 {
                let oracle = tuple_counts(&f, k, n);
                let mut total = 0;
                let mut e = 0;
                for a in all_deg_lt(&ctx, f.degree()).unwrap() {
                    let c = i_count(&f, &a, k, n, &b).unwrap();
                    assert_eq!(c, oracle.get(&a).copied().unwrap_or(0), "F={fs} n={n} k={k} a={a}");
                    total += c;
                    e += c * c;
                }
                assert_eq!(total, mass.pow(k));
                assert_eq!(energy(&f, k, n, None, &b).unwrap().energy, e);
            }
        }
    }
    let t = Modulus::parse(&ctx, "T").unwrap();
    assert_eq!(i_count(&t, &Poly::zero(&ctx), 2, 1, &b).unwrap(), 2);
    assert_eq!(energy(&t, 2, 1, None, &b).unwrap().energy, 6);
}

#[test]
fn energy_methods_agree() {
    let b = Budget::default();
    let ctx = gf(3, 1);
    let f = Modulus::parse(&ctx, "T^2+1").unwrap();
    let conv = energy(&f, 2, 2, Some(EnergyMethod::Convolution), &b).unwrap().energy;
    assert_eq!(conv, energy(&f, 2, 2, Some(EnergyMethod::BruteForce), &b).unwrap().energy);
    for (p, fs) in [(3, "T^3+2T+1"), (3, "T^4+T"), (5, "T^2+T+1"), (7, "T^2")] {
        let ctx = gf(p, 1);
        let f = Modulus::parse(&ctx, fs).unwrap();
        for k in 1..=3 {
            for n in 1..=f.degree() {
                let conv = energy(&f, k, n, Some(EnergyMethod::Convolution), &b).unwrap().energy;
                let tr = energy(&f, k, n, Some(EnergyMethod::Transform), &b).unwrap().energy;
                assert_eq!(conv, tr, "F={fs} k={k} n={n}");
            }
        }
    }
    let ctx9 = gf(3, 2);
    let f = Modulus::parse(&ctx9, "T^2+uT+1").unwrap();
    let conv = energy(&f, 2, 1, Some(EnergyMethod::Convolution), &b).unwrap().energy;
    assert_eq!(conv, energy(&f, 2, 1, Some(EnergyMethod::Transform), &b).unwrap().energy);
    assert_eq!(conv, energy(&f, 2, 1, Some(EnergyMethod::BruteForce), &b).unwrap().energy);
}

#[test]
fn energy_average_matches_per_modulus_sum() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    let (total, recs) = energy_avg(&ctx, 1, 2, 1, &b).unwrap();
    assert_eq!(total, 18);
    assert_eq!(recs.len(), 3);
    for k in 1..=2 {
        let (total, _) = energy_avg(&ctx, 2, k, 1, &b).unwrap();
        let brute: u128 = monic_deg_eq(&ctx, 2)
            .unwrap()
            .map(|fp| {
                let f = Modulus::new(&fp).unwrap();
                energy(&f, k, 1, Some(EnergyMethod::BruteForce), &b).unwrap().energy
            })
            .sum();
        assert_eq!(total, brute);
    }
    let (total, _) = energy_avg(&ctx, 2, 1, 2, &b).unwrap();
    let masses: u64 = monic_deg_eq(&ctx, 2)
        .unwrap()
        .map(|fp| inversion_distribution(&Modulus::new(&fp).unwrap(), 2, &b).unwrap().mass())
        .sum();
    assert_eq!(total, masses as u128);
}

#[test]
fn moment_identity_instances() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    let t = Modulus::parse(&ctx, "T").unwrap();
    let rep = moment_identity_check(&t, 2, 1, &b).unwrap();
    assert!((rep.lhs - 18.0).abs() < 1e-9);
    assert_eq!(rep.rhs, 18);
    let sq = Modulus::parse(&ctx, "T^2").unwrap();
    assert!(moment_identity_check(&sq, 2, 2, &b).unwrap().relative_deviation <= 1e-9);
    let zero = moment_identity_check(&sq, 3, 0, &b).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (0.0, 0));
}

#[test]
fn quadrant_identity_exhaustive() {
    let ctx = gf(3, 1);
    for d in 0..=4 {
        for x in monic_deg_eq(&ctx, d).unwrap() {
            for k in 0..=2 {
                let rep = quadrant_convolution_check(&x, k).unwrap();
                assert_eq!(rep.total, rep.mu as i64, "x={x} k={k}");
            }
        }
    }
    assert_eq!(quadrant_convolution_check(&Poly::t(&ctx), 0).unwrap().total, -1);
    assert_eq!(quadrant_convolution_check(&Poly::one(&ctx), 1).unwrap().total, 1);
}

#[test]
fn vaughan_split_examples() {
    let ctx = gf(3, 1);
    let b = Budget::default();
    let f = Modulus::parse(&ctx, "T^2+1").unwrap();
    let one = Poly::one(&ctx);
    let split = vaughan_decompose(&f, &one, 3, 1, &b).unwrap();
    assert_eq!(split.recombine(), moebius_kloosterman(&f, &one, 3, &b).unwrap());
    assert!(matches!(vaughan_decompose(&f, &one, 1, 0, &b), Err(Error::BadCutoff { .. })));
    assert!(matches!(vaughan_decompose(&f, &one, 4, 2, &b), Err(Error::BadCutoff { .. })));
}
