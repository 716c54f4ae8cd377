//! Exact residue arithmetic: Kloosterman sums, Ramanujan sums and the three
//! character sums that appear before Voronoi (a-sum form), after evaluating
//! the a-sum (closed form) and after Cauchy-Schwarz plus Poisson.

use crate::{Complex64, Error, Result};
use num_integer::Integer;
use serde::{Deserialize, Serialize};

/// Cap on the number of naive residue pairs in the post-Poisson sum.
pub const POISSON_PAIR_CAP: u128 = 100_000_000;

pub fn gcd(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Prime factorisation by trial division, as (prime, exponent) pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Primes up to `n` by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    let n = n as usize;
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            for j in (i * i..=n).step_by(i) {
                sieve[j] = false;
            }
        }
        i += 1;
    }
    (0..=n).filter(|&k| sieve[k]).map(|k| k as u64).collect()
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && factorize(n).len() == 1 && factorize(n)[0].1 == 1
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let len = ds.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

pub fn mobius(n: u64) -> i64 {
    assert!(n >= 1, "mobius of zero");
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub fn divisor_count(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| e as u64 + 1).product()
}

/// Number of ordered factorisations n = abc.
pub fn divisor_count3(n: u64) -> u64 {
    factorize(n)
        .iter()
        .map(|&(_, e)| {
            let e = e as u64;
            (e + 1) * (e + 2) / 2
        })
        .product()
}

pub fn modp(a: i64, q: u64) -> u64 {
    a.rem_euclid(q as i64) as u64
}

pub fn mod_inverse(a: i64, q: u64) -> Result<u64> {
    if q == 1 {
        return Ok(0);
    }
    let a = modp(a, q) as i64;
    let eg = a.extended_gcd(&(q as i64));
    if eg.gcd != 1 {
        return Err(Error::domain(format!("{a} is not a unit modulo {q}")));
    }
    Ok(modp(eg.x, q))
}

/// Ramanujan sum c_q(n) from the divisor formula.
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    let g = (q as i64).gcd(&n) as u64;
    divisors(g)
        .into_iter()
        .map(|d| d as i64 * mobius(q / d))
        .sum()
}

/// Ramanujan sum by summing e(an/q) over units a.
pub fn ramanujan_sum_direct(q: u64, n: i64) -> Complex64 {
    let t = UnitTable::new(q);
    t.units
        .iter()
        .map(|&a| t.root(a as i128 * n as i128))
        .sum()
}

/// Units modulo M with their inverses and a table of M-th roots of unity.
#[derive(Debug, Clone)]
pub struct UnitTable {
    pub modulus: u64,
    pub units: Vec<u64>,
    inverse: Vec<u64>,
    roots: Vec<Complex64>,
}

impl UnitTable {
    pub fn new(modulus: u64) -> Self {
        assert!(modulus >= 1);
        let m = modulus as usize;
        let roots = (0..m)
            .map(|j| crate::e(j as f64 / modulus as f64))
            .collect();
        let mut inverse = vec![0u64; m];
        let mut units = Vec::new();
        for x in 0..modulus {
            if modulus == 1 || (x as i64).gcd(&(modulus as i64)) == 1 {
                units.push(x);
                inverse[x as usize] = mod_inverse(x as i64, modulus).unwrap_or(0);
            }
        }
        UnitTable {
            modulus,
            units,
            inverse,
            roots,
        }
    }

    #[inline]
    pub fn inv(&self, x: u64) -> u64 {
        self.inverse[x as usize]
    }

    #[inline]
    pub fn is_unit(&self, x: u64) -> bool {
        self.modulus == 1 || (x != 0 && self.inverse[x as usize] != 0)
    }

    /// e(k / M) for any integer k.
    #[inline]
    pub fn root(&self, k: i128) -> Complex64 {
        self.roots[k.rem_euclid(self.modulus as i128) as usize]
    }

    pub fn kloosterman(&self, a: i64, b: i64) -> Complex64 {
        let m = self.modulus as i128;
        let (a, b) = (a as i128 % m, b as i128 % m);
        self.units
            .iter()
            .map(|&x| self.root(a * x as i128 + b * self.inv(x) as i128))
            .sum()
    }
}

/// A finite exponential sum together with its modulus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResidueSum {
    pub modulus: u64,
    pub value: Complex64,
}

impl ResidueSum {
    pub fn kloosterman(a: i64, b: i64, q: u64) -> Self {
        ResidueSum {
            modulus: q,
            value: kloosterman(a, b, q),
        }
    }

    pub fn ramanujan(q: u64, n: i64) -> Self {
        ResidueSum {
            modulus: q,
            value: ramanujan_sum_direct(q, n),
        }
    }

    /// |value| <= phi(q), the trivial bound for a sum over units.
    pub fn within_trivial_bound(&self) -> bool {
        self.value.norm() <= euler_phi(self.modulus) as f64 * (1.0 + 1e-12) + 1e-12
    }
}

/// S(a, b; q) by enumeration over units.
pub fn kloosterman(a: i64, b: i64, q: u64) -> Complex64 {
    UnitTable::new(q).kloosterman(a, b)
}

/// Parameters of the character sums built from the a-sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSumParams {
    pub n1: u64,
    pub n2: u64,
    pub q: u64,
    pub r: u64,
    pub m: i64,
    pub sign: i8,
    /// Prime (or unit) twist from the mass-transfer variant; 1 otherwise.
    pub ell: u64,
}

impl CharSumParams {
    pub fn new(n1: u64, n2: u64, q: u64, r: u64, m: i64, sign: i8) -> Result<Self> {
        Self::with_ell(n1, n2, q, r, m, sign, 1)
    }

    pub fn with_ell(n1: u64, n2: u64, q: u64, r: u64, m: i64, sign: i8, ell: u64) -> Result<Self> {
        if n1 == 0 || q == 0 || r == 0 || ell == 0 {
            return Err(Error::domain("moduli must be positive"));
        }
        if (q * r) % n1 != 0 {
            return Err(Error::domain(format!("n1 = {n1} does not divide qr = {}", q * r)));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::domain("sign must be +1 or -1"));
        }
        if (ell as i64).gcd(&(q as i64)) != 1 {
            return Err(Error::domain("ell must be coprime to q"));
        }
        Ok(CharSumParams {
            n1,
            n2,
            q,
            r,
            m,
            sign,
            ell,
        })
    }

    /// Kloosterman modulus qr/n1.
    pub fn modulus(&self) -> u64 {
        self.q * self.r / self.n1
    }

    /// q = q1 q2 with q1 | (n1 r)^infinity and gcd(q2, n1 r) = 1.
    pub fn split(&self) -> (u64, u64) {
        split_modulus(self.q, self.n1 * self.r)
    }
}

/// Splits q into the part supported on primes dividing `base` and the rest.
pub fn split_modulus(q: u64, base: u64) -> (u64, u64) {
    let mut q1 = 1;
    for (p, e) in factorize(q) {
        if base % p == 0 {
            q1 *= p.pow(e);
        }
    }
    (q1, q / q1)
}

/// Reusable tables for a fixed (q, r, n1).
#[derive(Debug, Clone)]
pub struct CharSumContext {
    pub q: u64,
    pub r: u64,
    pub n1: u64,
    tq: UnitTable,
    tm: UnitTable,
    divs: Vec<(u64, i64)>,
}

impl CharSumContext {
    pub fn new(q: u64, r: u64, n1: u64) -> Result<Self> {
        if n1 == 0 || (q * r) % n1 != 0 {
            return Err(Error::domain("n1 must divide qr"));
        }
        let divs = divisors(q)
            .into_iter()
            .map(|d| (d, d as i64 * mobius(q / d)))
            .filter(|&(_, w)| w != 0)
            .collect();
        Ok(CharSumContext {
            q,
            r,
            n1,
            tq: UnitTable::new(q),
            tm: UnitTable::new(q * r / n1),
            divs,
        })
    }

    /// Sum over units a mod q of S(r a^-1, sign n2; qr/n1) e((a ell)^-1 m / q).
    pub fn a_form(&self, n2: u64, sign: i8, m: i64, ell: u64) -> Complex64 {
        let ell_inv = mod_inverse(ell as i64, self.q).unwrap_or(0) as i128;
        let b = sign as i64 * n2 as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in &self.tq.units {
            let abar = self.tq.inv(a);
            let c = (self.r as u128 * abar as u128 % self.tm.modulus as u128) as i64;
            let k = self.tm.kloosterman(c, b);
            acc += k * self.tq.root(abar as i128 * ell_inv * m as i128);
        }
        acc
    }

    /// Weight sum over d | q with ell n1 beta = -m (mod d) of d mu(q/d).
    fn congruence_weight(&self, beta: u64, m: i64, ell: u64) -> i64 {
        let lhs = ell as i128 * self.n1 as i128 * beta as i128 + m as i128;
        self.divs
            .iter()
            .filter(|&&(d, _)| lhs.rem_euclid(d as i128) == 0)
            .map(|&(_, w)| w)
            .sum()
    }

    /// Sum over d | q of d mu(q/d) times the sum over units beta mod qr/n1
    /// with ell n1 beta = -m (mod d) of e(sign beta^-1 n2 / (qr/n1)).
    pub fn closed_form(&self, n2: u64, sign: i8, m: i64, ell: u64) -> Complex64 {
        let b = sign as i128 * n2 as i128;
        let mut acc = Complex64::new(0.0, 0.0);
        for &beta in &self.tm.units {
            let w = self.congruence_weight(beta, m, ell);
            if w != 0 {
                acc += self.tm.root(b * self.tm.inv(beta) as i128) * w as f64;
            }
        }
        acc
    }
}

pub fn charsum_a_form(p: &CharSumParams) -> Complex64 {
    CharSumContext::new(p.q, p.r, p.n1)
        .expect("validated parameters")
        .a_form(p.n2, p.sign, p.m, p.ell)
}

pub fn charsum_closed_form(p: &CharSumParams) -> Complex64 {
    CharSumContext::new(p.q, p.r, p.n1)
        .expect("validated parameters")
        .closed_form(p.n2, p.sign, p.m, p.ell)
}

/// Arguments of the post-Poisson double character sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoissonSumParams {
    pub q1: u64,
    pub q2: u64,
    pub q2p: u64,
    pub r: u64,
    pub n1: u64,
    pub m: i64,
    pub mp: i64,
    pub ell: u64,
    pub ellp: u64,
    pub n2: i64,
}

impl PoissonSumParams {
    pub fn q(&self) -> u64 {
        self.q1 * self.q2
    }

    pub fn qp(&self) -> u64 {
        self.q1 * self.q2p
    }

    fn validate(&self) -> Result<()> {
        let p = self;
        if [p.q1, p.q2, p.q2p, p.r, p.n1, p.ell, p.ellp].contains(&0) {
            return Err(Error::domain("moduli must be positive"));
        }
        if (p.q() * p.r) % p.n1 != 0 || (p.qp() * p.r) % p.n1 != 0 {
            return Err(Error::domain("n1 must divide both q r and q' r"));
        }
        Ok(())
    }
}

fn unit_weights(ctx: &CharSumContext, m: i64, ell: u64) -> Vec<i64> {
    let mut w = vec![0i64; ctx.tm.modulus as usize];
    for &beta in &ctx.tm.units {
        w[beta as usize] = ctx.congruence_weight(beta, m, ell);
    }
    w
}

/// The double beta, beta' sum with the congruence
/// beta^-1 q2' - beta'^-1 q2 + n2 = 0 (mod q1 q2 q2' r / n1).
///
/// For each beta the congruence pins beta'^-1 modulo q1 q2' r / n1, so the
/// pair enumeration is linear in the first modulus.
pub fn charsum_poisson(p: &PoissonSumParams) -> Result<Complex64> {
    p.validate()?;
    let c = CharSumContext::new(p.q(), p.r, p.n1)?;
    let cp = CharSumContext::new(p.qp(), p.r, p.n1)?;
    let (mm, mmp) = (c.tm.modulus, cp.tm.modulus);
    if mm as u128 * mmp as u128 > POISSON_PAIR_CAP {
        return Err(Error::resource(format!(
            "{} residue pairs exceed the cap of {POISSON_PAIR_CAP}",
            mm as u128 * mmp as u128
        )));
    }
    let big = mm as i128 * p.q2p as i128;
    let w = unit_weights(&c, p.m, p.ell);
    let wp = unit_weights(&cp, p.mp, p.ellp);
    let mut total: i64 = 0;
    for &beta in &c.tm.units {
        if w[beta as usize] == 0 {
            continue;
        }
        let t = (c.tm.inv(beta) as i128 * p.q2p as i128 + p.n2 as i128).rem_euclid(big);
        if t % p.q2 as i128 != 0 {
            continue;
        }
        let bbar_p = ((t / p.q2 as i128) % mmp as i128) as u64;
        if !cp.tm.is_unit(bbar_p) {
            continue;
        }
        let beta_p = cp.tm.inv(bbar_p);
        total += w[beta as usize] * wp[beta_p as usize];
    }
    Ok(Complex64::new(total as f64, 0.0))
}

/// Same sum by brute force over all unit pairs; test oracle for small moduli.
pub fn charsum_poisson_pairs(p: &PoissonSumParams) -> Result<Complex64> {
    p.validate()?;
    let c = CharSumContext::new(p.q(), p.r, p.n1)?;
    let cp = CharSumContext::new(p.qp(), p.r, p.n1)?;
    let big = c.tm.modulus as i128 * p.q2p as i128;
    let w = unit_weights(&c, p.m, p.ell);
    let wp = unit_weights(&cp, p.mp, p.ellp);
    let mut total = 0i64;
    for &b in &c.tm.units {
        for &bp in &cp.tm.units {
            let lhs = c.tm.inv(b) as i128 * p.q2p as i128 - cp.tm.inv(bp) as i128 * p.q2 as i128
                + p.n2 as i128;
            if lhs.rem_euclid(big) == 0 {
                total += w[b as usize] * wp[bp as usize];
            }
        }
    }
    Ok(Complex64::new(total as f64, 0.0))
}

/// Dual evaluation through Poisson summation over the closed form:
/// (1/M) sum_{k mod M} C(k, q, m) conj(C(k, q', m')) e(k n2 / M).
pub fn charsum_poisson_dual(p: &PoissonSumParams) -> Result<Complex64> {
    p.validate()?;
    let c = CharSumContext::new(p.q(), p.r, p.n1)?;
    let cp = CharSumContext::new(p.qp(), p.r, p.n1)?;
    let big = c.tm.modulus * p.q2p;
    let tb = UnitTable::new(big);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..big {
        let a = c.closed_form_any(k as i64, p.m, p.ell);
        let b = cp.closed_form_any(k as i64, p.mp, p.ellp);
        acc += a * b.conj() * tb.root(k as i128 * p.n2 as i128);
    }
    Ok(acc / big as f64)
}

impl CharSumContext {
    /// Closed form with an arbitrary integer frequency in place of sign n2.
    pub fn closed_form_any(&self, freq: i64, m: i64, ell: u64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &beta in &self.tm.units {
            let w = self.congruence_weight(beta, m, ell);
            if w != 0 {
                acc += self.tm.root(freq as i128 * self.tm.inv(beta) as i128) * w as f64;
            }
        }
        acc
    }
}

/// Bound for the post-Poisson sum at a non-zero frequency:
/// (q1^2 r (m, n1) / n1) times the sum of d2 d2' over
/// d2 | (q2, ell n1 q2' - m n2) and d2' | (q2', ell' n1 q2 + m' n2).
pub fn charsum_poisson_bound(p: &PoissonSumParams) -> f64 {
    let g1 = (p.q2 as i64).gcd(&(p.ell as i64 * p.n1 as i64 * p.q2p as i64 - p.m * p.n2));
    let g2 = (p.q2p as i64).gcd(&(p.ellp as i64 * p.n1 as i64 * p.q2 as i64 + p.mp * p.n2));
    let s1: u64 = divisors(g1 as u64).iter().sum();
    let s2: u64 = divisors(g2 as u64).iter().sum();
    let gmn = p.m.gcd(&(p.n1 as i64)) as f64;
    (p.q1 * p.q1 * p.r) as f64 * gmn / p.n1 as f64 * (s1 * s2) as f64
}

/// Bound at zero frequency: (q r / n1) times the sum over d, d' | q with
/// (d, d') | m - m' of (d, d')(n1, m).
pub fn charsum_zero_frequency_bound(p: &PoissonSumParams) -> f64 {
    let q = p.q();
    let ds = divisors(q);
    let gnm = (p.n1 as i64).gcd(&p.m) as f64;
    let mut s = 0.0;
    for &d in &ds {
        for &dp in &ds {
            let g = d.gcd(&dp);
            if (p.m - p.mp).rem_euclid(g as i64) == 0 {
                s += g as f64 * gnm;
            }
        }
    }
    (q * p.r) as f64 / p.n1 as f64 * s
}

/// Trivial bound d(q) d(q') q q' r / n1.
pub fn charsum_poisson_trivial_bound(p: &PoissonSumParams) -> f64 {
    (divisor_count(p.q()) * divisor_count(p.qp()) * p.q() * p.qp() * p.r) as f64 / p.n1 as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plumbing_examples() {
        assert_eq!(mobius(12), 0);
        assert_eq!(mobius(30), -1);
        assert_eq!(divisor_count(12), 6);
        assert_eq!(mod_inverse(3, 7).unwrap(), 5);
        assert!(mod_inverse(4, 8).is_err());
        assert_eq!(euler_phi(36), 12);
        assert_eq!(divisor_count3(4), 6);
        assert_eq!(gcd(12, 18), 6);
    }

    #[test]
    fn kloosterman_small() {
        assert!((kloosterman(5, 7, 1) - 1.0).norm() < 1e-15);
        assert!((kloosterman(1, 1, 3) + 1.0).norm() < 1e-12);
        for q in 1..30u64 {
            assert!((kloosterman(0, 0, q).re - euler_phi(q) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn ramanujan_sums_agree() {
        for q in 1..40u64 {
            for n in -30..30i64 {
                let d = ramanujan_sum_direct(q, n);
                assert!((d.re - ramanujan_sum(q, n) as f64).abs() < 1e-9);
                assert!(d.im.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn a_form_q_one_is_single_kloosterman() {
        let p = CharSumParams::new(2, 3, 1, 6, 4, -1).unwrap();
        let expected = kloosterman(6, -3, 3);
        assert!((charsum_a_form(&p) - expected).norm() < 1e-12);
    }

    #[test]
    fn a_form_brute_force_instance() {
        // (n1, n2, q, r, m) = (1, 1, 2, 1, 1): a = 1 only, S(1, 1; 2) e(1/2).
        let p = CharSumParams::new(1, 1, 2, 1, 1, 1).unwrap();
        let mut brute = Complex64::new(0.0, 0.0);
        for beta in [1i64] {
            brute += crate::e((beta + beta) as f64 / 2.0) * crate::e(0.5);
        }
        assert!((charsum_a_form(&p) - brute).norm() < 1e-12);
        assert!((charsum_closed_form(&p) - brute).norm() < 1e-12);
    }

    #[test]
    fn closed_form_prime_hand_expansion() {
        // m = 0, n1 = 1, q = 3, r = 1: 3 * sum_{beta = 0 (3), unit} - full unit sum.
        // The first sum is empty, so the value is -S(0, n2; 3) = -c_3(n2).
        for n2 in 1..7u64 {
            let p = CharSumParams::new(1, n2, 3, 1, 0, 1).unwrap();
            let expected = -(ramanujan_sum(3, n2 as i64) as f64);
            assert!((charsum_closed_form(&p).re - expected).abs() < 1e-12);
            assert!((charsum_a_form(&p).re - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn split_is_unique() {
        let p = CharSumParams::new(2, 1, 12 * 5, 3, 1, 1).unwrap();
        assert_eq!(p.split(), (12, 5));
    }

    #[test]
    fn poisson_linear_solve_matches_pairs_and_dual() {
        let cases = [
            (1, 3, 5, 1, 1, 2, 3, 1, 1, 4),
            (2, 3, 5, 2, 2, 1, 1, 1, 1, 0),
            (2, 1, 3, 1, 1, 1, 2, 1, 1, 7),
            (3, 2, 2, 3, 3, 6, 3, 1, 1, 5),
            (1, 7, 7, 1, 1, 2, 2, 1, 1, 0),
            (2, 3, 5, 2, 1, 1, 4, 7, 11, 3),
        ];
        for (q1, q2, q2p, r, n1, m, mp, ell, ellp, n2) in cases {
            let p = PoissonSumParams {
                q1,
                q2,
                q2p,
                r,
                n1,
                m,
                mp,
                ell,
                ellp,
                n2,
            };
            let fast = charsum_poisson(&p).unwrap();
            let slow = charsum_poisson_pairs(&p).unwrap();
            let dual = charsum_poisson_dual(&p).unwrap();
            assert!((fast - slow).norm() < 1e-9, "{p:?}");
            assert!((fast - dual).norm() < 1e-7, "{p:?} {fast} {dual}");
        }
    }

    #[test]
    fn poisson_cap() {
        let p = PoissonSumParams {
            q1: 1,
            q2: 20011,
            q2p: 20021,
            r: 1,
            n1: 1,
            m: 1,
            mp: 1,
            ell: 1,
            ellp: 1,
            n2: 1,
        };
        assert!(matches!(charsum_poisson(&p), Err(Error::Resource { .. })));
    }
}
