//! Quick exact-identity suite behind `ffsum selftest`.

use ffsum_core::arith::{lambda_total, mertens_monic};
use ffsum_core::charsum::{char_sum, moebius_kloosterman, moebius_kloosterman_naive, Phase};
use ffsum_core::energy::{energy, moment_identity_check, EnergyMethod};
use ffsum_core::experiments::{ap_lambda_discrepancy, main_term_check};
use ffsum_core::poly::{all_deg_lt, monic_deg_eq};
use ffsum_core::vaughan::vaughan_decompose;
use ffsum_core::{Budget, Degree, Error, ExpHistogram, FieldCtx, Modulus, Result};

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvariantViolation(msg()))
    }
}

fn mertens(b: &Budget) -> Result<()> {
    for (p, ell) in [(3, 1), (5, 1), (3, 2)] {
        let ctx = FieldCtx::new(p, ell, None)?;
        let q = ctx.q() as i64;
        for n in 1..=4 {
            let got = mertens_monic(&ctx, n, b)?;
            let want = if n == 1 { -q } else { 0 };
            ensure(got == want, || format!("q={q} n={n}: {got} != {want}"))?;
        }
    }
    Ok(())
}

fn primes(b: &Budget) -> Result<()> {
    for p in [3, 5] {
        let ctx = FieldCtx::new(p, 1, None)?;
        for n in 1..=4 {
            let got = lambda_total(&ctx, n, b)?;
            ensure(got == (p as u64).pow(n as u32), || format!("q={p} n={n}: {got}"))?;
        }
    }
    Ok(())
}

fn orthogonality(b: &Budget) -> Result<()> {
    let ctx = FieldCtx::new(3, 1, None)?;
    for r in 1..=3 {
        for fp in monic_deg_eq(&ctx, r)? {
            let f = Modulus::new(&fp)?;
            for a in all_deg_lt(&ctx, r)? {
                for n in 0..=r {
                    let v = char_sum(&f, n, Phase::Linear(&a), None, None, b)?;
                    let h = v.histogram().expect("unit weights");
                    let small = match a.degree() {
                        Degree::NegInf => true,
                        Degree::Finite(d) => d + n < r,
                    };
                    let ok = if small {
                        let mut want = ExpHistogram::zero(3);
                        want.add_term(0, 3i64.pow(n as u32));
                        h.value_eq(&want)
                    } else {
                        h.is_zero_value()
                    };
                    ensure(ok, || format!("F={f} a={a} n={n}: {h}"))?;
                }
            }
        }
    }
    Ok(())
}

fn moebius_oracle(b: &Budget) -> Result<()> {
    let ctx = FieldCtx::new(3, 1, None)?;
    for fs in ["T^2+1", "T^2", "T^3+2T+1"] {
        let f = Modulus::parse(&ctx, fs)?;
        for a in all_deg_lt(&ctx, f.degree())? {
            for n in 0..=4 {
                let fast = moebius_kloosterman(&f, &a, n, b)?;
                let slow = moebius_kloosterman_naive(&f, &a, n)?;
                ensure(fast == slow, || format!("F={f} a={a} n={n}: {fast} vs {slow}"))?;
            }
        }
    }
    Ok(())
}

fn energies(b: &Budget) -> Result<()> {
    let ctx = FieldCtx::new(3, 1, None)?;
    for r in 1..=2 {
        for fp in monic_deg_eq(&ctx, r)? {
            let f = Modulus::new(&fp)?;
            for k in 1..=2 {
                for n in 1..=r {
                    let conv = energy(&f, k, n, Some(EnergyMethod::Convolution), b)?.energy;
                    let brute = energy(&f, k, n, Some(EnergyMethod::BruteForce), b)?.energy;
                    ensure(conv == brute, || format!("F={f} k={k} n={n}: {conv} vs {brute}"))?;
                }
            }
        }
    }
    let t = Modulus::parse(&ctx, "T")?;
    let rep = moment_identity_check(&t, 2, 1, b)?;
    ensure(rep.rhs == 18 && rep.relative_deviation < 1e-9, || format!("{rep:?}"))
}

fn vaughan(b: &Budget) -> Result<()> {
    let ctx = FieldCtx::new(3, 1, None)?;
    let f = Modulus::parse(&ctx, "T^2+1")?;
    for a in all_deg_lt(&ctx, 2)? {
        let direct = moebius_kloosterman(&f, &a, 5, b)?;
        for u in 1..=2 {
            let split = vaughan_decompose(&f, &a, 5, u, b)?;
            ensure(split.recombine() == direct, || format!("a={a} U={u}"))?;
        }
    }
    Ok(())
}

fn main_term(b: &Budget) -> Result<()> {
    let ctx = FieldCtx::new(3, 1, None)?;
    let t = Modulus::parse(&ctx, "T")?;
    let rep = main_term_check(&t, 8, b)?;
    ensure(rep.rows[0].error.to_string() == "5/6", || format!("error(1) = {}", rep.rows[0].error))?;
    ensure(rep.rows.iter().all(|r| r.bounded), || "tail bound".into())
}

fn progressions(b: &Budget) -> Result<()> {
    let ctx = FieldCtx::new(3, 1, None)?;
    for fs in ["T", "T^2+1", "T^2"] {
        let f = Modulus::parse(&ctx, fs)?;
        for n in 1..=4 {
            ap_lambda_discrepancy(&f, n, b)?;
        }
    }
    let rows = ap_lambda_discrepancy(&Modulus::parse(&ctx, "T")?, 2, b)?;
    let one = rows.iter().find(|r| r.a == "1").expect("a = 1 is a unit");
    ensure(one.ap_sum == 4 && one.delta.to_string() == "-1/2", || format!("{one:?}"))
}

type Check = fn(&Budget) -> Result<()>;

/// Runs every check, printing one line each. True when all pass.
pub fn run(budget: &Budget) -> bool {
    let checks: [(&str, Check); 8] = [
        ("mertens", mertens),
        ("prime_polynomial_count", primes),
        ("orthogonality", orthogonality),
        ("moebius_kloosterman_oracle", moebius_oracle),
        ("energy_oracle_and_moment", energies),
        ("vaughan_recombination", vaughan),
        ("main_term", main_term),
        ("progression_conservation", progressions),
    ];
    let mut all = true;
    for (name, check) in checks {
        match check(budget) {
            Ok(()) => println!("ok   {name}"),
            Err(e) => {
                all = false;
                println!("FAIL {name}: {e}");
            }
        }
    }
    all
}
