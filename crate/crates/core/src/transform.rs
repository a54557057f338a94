//! Exact convolution on (Z/p)^D through character transforms modulo
//! word-sized primes P ≡ 1 (mod p), recombined by CRT.

use crate::error::{Error, Result};

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for b in BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A prime P ≡ 1 (mod p) with a primitive p-th root of unity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NttPrime {
    pub modulus: u64,
    pub root: u64,
}

/// The `count` largest primes below 2^62 that are ≡ 1 (mod p).
pub fn ntt_primes(p: u32, count: usize) -> Vec<NttPrime> {
    let p = p as u64;
    let top = (1u64 << 62) - 1;
    let mut cand = top - (top - 1) % p;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if is_prime(cand) {
            let root = (2..)
                .map(|g| pow_mod(g, (cand - 1) / p, cand))
                .find(|&w| w != 1)
                .expect("a non-residue exists");
            out.push(NttPrime { modulus: cand, root });
        }
        cand -= p;
    }
    out
}

/// In-place transform over (Z/p)^digits with ω a primitive p-th root mod P.
fn transform(values: &mut [u64], p: usize, digits: usize, omega: u64, modulus: u64) {
    let powers: Vec<u64> = (0..p as u64).map(|e| pow_mod(omega, e, modulus)).collect();
    let mut fiber = vec![0u64; p];
    let mut stride = 1;
    for _ in 0..digits {
        let block = stride * p;
        for base in (0..values.len()).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (t, f) in fiber.iter_mut().enumerate() {
                    *f = values[start + t * stride];
                }
                for s in 0..p {
                    let mut acc = 0u128;
                    for (t, &v) in fiber.iter().enumerate() {
                        acc += v as u128 * powers[(s * t) % p] as u128;
                    }
                    values[start + s * stride] = (acc % modulus as u128) as u64;
                }
            }
        }
        stride = block;
    }
}

/// k-fold additive self-convolution of `counts` over (Z/p)^digits (indices in
/// base p, digit i least significant first). Exact provided every output
/// entry is at most `bound`.
pub fn self_convolve(counts: &[u64], p: u32, digits: usize, k: u32, bound: u128) -> Result<Vec<u128>> {
    let size = counts.len();
    debug_assert_eq!(size as u128, (p as u128).pow(digits as u32));
    let primes = ntt_primes(p, 2);
    let product = primes[0].modulus as u128 * primes[1].modulus as u128;
    if bound >= product {
        return Err(Error::ResourceLimit(format!(
            "convolution values up to {bound} exceed CRT range"
        )));
    }
    let mut residues = Vec::with_capacity(2);
    for pr in &primes {
        let m = pr.modulus;
        let mut v: Vec<u64> = counts.iter().map(|&c| c % m).collect();
        transform(&mut v, p as usize, digits, pr.root, m);
        for x in v.iter_mut() {
            *x = pow_mod(*x, k as u64, m);
        }
        let inv_root = pow_mod(pr.root, p as u64 - 1, m);
        transform(&mut v, p as usize, digits, inv_root, m);
        let scale = pow_mod(size as u64 % m, m - 2, m);
        for x in v.iter_mut() {
            *x = mul_mod(*x, scale, m);
        }
        residues.push(v);
    }
    let (m1, m2) = (primes[0].modulus, primes[1].modulus);
    let m1_inv = pow_mod(m1 % m2, m2 - 2, m2);
    Ok(residues[0]
        .iter()
        .zip(&residues[1])
        .map(|(&a1, &a2)| {
            let diff = (a2 + m2 - a1 % m2) % m2;
            let t = mul_mod(diff, m1_inv, m2);
            a1 as u128 + m1 as u128 * t as u128
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miller_rabin_matches_trial_division() {
        for n in 0..5000u64 {
            let trial = n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime(n), trial, "{n}");
        }
        assert!(is_prime((1 << 61) - 1));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn primes_have_roots_of_unity() {
        for p in [3u32, 5, 7, 13] {
            for pr in ntt_primes(p, 2) {
                assert_eq!((pr.modulus - 1) % p as u64, 0);
                assert!(pr.modulus < 1 << 62);
                assert_eq!(pow_mod(pr.root, p as u64, pr.modulus), 1);
                assert_ne!(pr.root, 1);
            }
        }
    }

    #[test]
    fn matches_direct_convolution() {
        let (p, digits) = (3usize, 3usize);
        let size = 27;
        let add = |a: usize, b: usize| {
            let (mut a, mut b, mut out, mut place) = (a, b, 0, 1);
            for _ in 0..digits {
                out += (a % p + b % p) % p * place;
                place *= p;
                a /= p;
                b /= p;
            }
            out
        };
        let counts: Vec<u64> = (0..size as u64).map(|i| (i * 7 + 3) % 5).collect();
        let mut direct = counts.iter().map(|&c| c as u128).collect::<Vec<_>>();
        for _ in 1..3 {
            let mut next = vec![0u128; size];
            for a in 0..size {
                for b in 0..size {
                    next[add(a, b)] += direct[a] * counts[b] as u128;
                }
            }
            direct = next;
        }
        let fast = self_convolve(&counts, 3, digits, 3, 1 << 40).unwrap();
        assert_eq!(fast, direct);
    }
}
