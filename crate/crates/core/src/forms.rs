//! Fourier coefficient sources: the discriminant form and two GL(3) models.

use crate::arith::{divisor_count, factorize, primes_up_to};
use crate::special_fn::SpectralParams;
use crate::{Complex64, Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DELTA_MAX: usize = 1_000_000;

/// A holomorphic Hecke eigenform through its Deligne-normalised eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoloForm {
    pub weight: u32,
    /// lambda[n] for 1 <= n <= n_max; index 0 is unused.
    pub lambda: Vec<f64>,
}

impl HoloForm {
    pub fn n_max(&self) -> usize {
        self.lambda.len() - 1
    }

    pub fn lambda(&self, n: u64) -> Result<f64> {
        self.lambda
            .get(n as usize)
            .copied()
            .filter(|_| n >= 1)
            .ok_or_else(|| Error::resource(format!("lambda({n}) beyond the table of {}", self.n_max())))
    }
}

/// Coefficients of prod_{n>=1} (1 - q^n)^24 up to q^len, reduced mod 2^128.
///
/// Uses Jacobi's identity prod (1 - q^n)^3 = sum (-1)^k (2k+1) q^{k(k+1)/2}
/// and seven sparse multiplications by that series.
fn eta24_coefficients(len: usize) -> Vec<i128> {
    let mut sparse: Vec<(usize, i128)> = Vec::new();
    let mut k = 0usize;
    while k * (k + 1) / 2 < len {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        sparse.push((k * (k + 1) / 2, sign * (2 * k as i128 + 1)));
        k += 1;
    }
    let mut acc = vec![0i128; len];
    for &(e, c) in &sparse {
        acc[e] = c;
    }
    for _ in 0..7 {
        let mut next = vec![0i128; len];
        for &(e, c) in &sparse {
            for i in 0..len - e {
                next[i + e] = next[i + e].wrapping_add(acc[i].wrapping_mul(c));
            }
        }
        acc = next;
    }
    acc
}

/// Ramanujan tau(n) for 1 <= n <= n_max; entry 0 is zero.
pub fn ramanujan_tau(n_max: usize) -> Result<Vec<i128>> {
    if n_max == 0 || n_max > DELTA_MAX {
        return Err(Error::domain(format!("n_max must lie in 1..={DELTA_MAX}")));
    }
    let coeffs = eta24_coefficients(n_max);
    let mut tau = vec![0i128; n_max + 1];
    tau[1..].copy_from_slice(&coeffs);
    Ok(tau)
}

/// The weight 12 cusp form with lambda(n) = tau(n) / n^(11/2).
pub fn delta_eigenvalues(n_max: usize) -> Result<HoloForm> {
    let tau = ramanujan_tau(n_max)?;
    let lambda = tau
        .iter()
        .enumerate()
        .map(|(n, &t)| if n == 0 { 0.0 } else { t as f64 / (n as f64).powf(5.5) })
        .collect();
    Ok(HoloForm { weight: 12, lambda })
}

/// Maximum over n <= n_max of |lambda(n)| / d(n); Deligne's bound says <= 1.
pub fn deligne_ratio(f: &HoloForm, n_max: usize) -> f64 {
    (1..=n_max.min(f.n_max()))
        .map(|n| f.lambda[n].abs() / divisor_count(n as u64) as f64)
        .fold(0.0, f64::max)
}

/// Largest relative defect of lambda(p) lambda(p^j) = lambda(p^{j+1}) + lambda(p^{j-1}) for p^{j+1} <= n_max.
pub fn hecke_recursion_defect(f: &HoloForm, n_max: usize) -> f64 {
    let n_max = n_max.min(f.n_max()) as u64;
    let mut worst = 0.0f64;
    for p in primes_up_to(n_max) {
        let mut pj = p;
        let mut pjm1 = 1u64;
        while pj * p <= n_max {
            let lhs = f.lambda[p as usize] * f.lambda[pj as usize];
            let rhs = f.lambda[(pj * p) as usize] + f.lambda[pjm1 as usize];
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
            pjm1 = pj;
            pj *= p;
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GL3Model {
    /// Symmetric-square lift of a holomorphic form.
    Sym2(HoloForm),
    /// Minimal parabolic Eisenstein series with Satake triple p^{-i t_j}.
    Eisenstein(SpectralParams),
}

/// A GL(3) coefficient source A(m, n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GL3Coeffs {
    pub model: GL3Model,
}

/// Complete homogeneous symmetric polynomials h_0..=h_k from e1, e2 and e3 = 1.
fn complete_homogeneous(e1: Complex64, e2: Complex64, k: usize) -> Vec<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let mut h = vec![Complex64::new(0.0, 0.0); k + 1];
    h[0] = one;
    for j in 1..=k {
        let mut v = e1 * h[j - 1];
        if j >= 2 {
            v -= e2 * h[j - 2];
        }
        if j >= 3 {
            v += h[j - 3];
        }
        h[j] = v;
    }
    h
}

/// Schur polynomial s_{(a+b, a, 0)} at a triple with elementary symmetric
/// functions (e1, e2, 1), by Jacobi-Trudi.
pub fn local_schur(e1: Complex64, e2: Complex64, a: u32, b: u32) -> Complex64 {
    let (a, b) = (a as usize, b as usize);
    let h = complete_homogeneous(e1, e2, a + b + 1);
    let mut v = h[a + b] * h[a];
    if a >= 1 {
        v -= h[a + b + 1] * h[a - 1];
    }
    v
}

impl GL3Coeffs {
    pub fn sym2(f: HoloForm) -> Self {
        GL3Coeffs {
            model: GL3Model::Sym2(f),
        }
    }

    pub fn eisenstein(t: SpectralParams) -> Self {
        GL3Coeffs {
            model: GL3Model::Eisenstein(t),
        }
    }

    /// Largest n for which A(m, n) is available for m n <= limit.
    pub fn budget(&self) -> u64 {
        match &self.model {
            GL3Model::Sym2(f) => f.n_max() as u64,
            GL3Model::Eisenstein(_) => u64::MAX,
        }
    }

    fn local_elementary(&self, p: u64) -> Result<(Complex64, Complex64)> {
        match &self.model {
            GL3Model::Sym2(f) => {
                let l = f.lambda(p)?;
                let e = Complex64::new(l * l - 1.0, 0.0);
                Ok((e, e))
            }
            GL3Model::Eisenstein(t) => {
                let lp = (p as f64).ln();
                let x: Vec<Complex64> = t
                    .as_array()
                    .iter()
                    .map(|tj| Complex64::from_polar(1.0, -tj * lp))
                    .collect();
                let e1 = x[0] + x[1] + x[2];
                let e2 = x[0] * x[1] + x[0] * x[2] + x[1] * x[2];
                Ok((e1, e2))
            }
        }
    }

    /// A(p^a, p^b).
    pub fn prime_power(&self, p: u64, a: u32, b: u32) -> Result<Complex64> {
        let (e1, e2) = self.local_elementary(p)?;
        Ok(local_schur(e1, e2, a, b))
    }

    /// A(m, n) by multiplicativity over the primes of m n.
    pub fn coeff(&self, m: u64, n: u64) -> Result<Complex64> {
        if m == 0 || n == 0 {
            return Err(Error::domain("coefficients are indexed by positive integers"));
        }
        let mut primes: Vec<u64> = factorize(m)
            .into_iter()
            .chain(factorize(n))
            .map(|(p, _)| p)
            .collect();
        primes.sort_unstable();
        primes.dedup();
        let mut acc = Complex64::new(1.0, 0.0);
        for p in primes {
            let (mut a, mut mm) = (0u32, m);
            while mm % p == 0 {
                mm /= p;
                a += 1;
            }
            let (mut b, mut nn) = (0u32, n);
            while nn % p == 0 {
                nn /= p;
                b += 1;
            }
            acc *= self.prime_power(p, a, b)?;
        }
        Ok(acc)
    }

    /// A(r, n) for n = 1..=n_max; entry 0 is zero.
    pub fn row(&self, r: u64, n_max: u64) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); n_max as usize + 1];
        for n in 1..=n_max {
            out[n as usize] = self.coeff(r, n)?;
        }
        Ok(out)
    }
}

pub fn sym2_coeff(f: &HoloForm, m: u64, n: u64) -> Result<f64> {
    GL3Coeffs::sym2(f.clone()).coeff(m, n).map(|z| z.re)
}

pub fn eisenstein_coeff(t: &SpectralParams, m: u64, n: u64) -> Result<Complex64> {
    GL3Coeffs::eisenstein(*t).coeff(m, n)
}

/// A(1, n) = sum_{abc = n} a^{-i t1} b^{-i t2} c^{-i t3}, straight from the definition.
pub fn eisenstein_a1_direct(t: &SpectralParams, n: u64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for a in 1..=n {
        if n % a != 0 {
            continue;
        }
        for b in 1..=n / a {
            if (n / a) % b != 0 {
                continue;
            }
            let c = n / a / b;
            let ph = -(t.t1 * (a as f64).ln() + t.t2 * (b as f64).ln() + t.t3 * (c as f64).ln());
            s += Complex64::from_polar(1.0, ph);
        }
    }
    s
}

/// A(r, n l) + A(r l, n / l) + A(r / l, n), with absent terms zero.
pub fn mass_transfer_expand(c: &GL3Coeffs, r: u64, n: u64, ell: u64) -> Result<Complex64> {
    let mut v = c.coeff(r, n * ell)?;
    if n % ell == 0 {
        v += c.coeff(r * ell, n / ell)?;
    }
    if r % ell == 0 {
        v += c.coeff(r / ell, n)?;
    }
    Ok(v)
}

/// sum over n1^2 n2 <= x of |A(n1, n2)|^2, and that sum divided by x^1.05.
pub fn ramanujan_average_check(c: &GL3Coeffs, x: f64) -> Result<(f64, f64)> {
    let mut lhs = 0.0;
    let mut n1 = 1u64;
    while (n1 * n1) as f64 <= x {
        let n2_max = (x / (n1 * n1) as f64).floor() as u64;
        for n2 in 1..=n2_max {
            lhs += c.coeff(n1, n2)?.norm_sqr();
        }
        n1 += 1;
    }
    Ok((lhs, lhs / x.powf(1.05)))
}

/// Sum of |A(1, l)|^2 over primes l in [L, 2L], and that sum over L^(1 - eps).
pub fn prime_mass(c: &GL3Coeffs, l: u64, eps: f64) -> Result<(f64, f64)> {
    let mut s = 0.0;
    for p in primes_up_to(2 * l).into_iter().filter(|&p| p >= l) {
        s += c.coeff(1, p)?.norm_sqr();
    }
    Ok((s, s / (l as f64).powf(1.0 - eps)))
}

/// Writes (m, n, re, im) rows for all m, n <= side.
pub fn export_coeffs_csv<W: Write>(c: &GL3Coeffs, side: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "n", "re", "im"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for m in 1..=side {
        for n in 1..=side {
            let a = c.coeff(m, n)?;
            w.write_record([
                m.to_string(),
                n.to_string(),
                format!("{:.17e}", a.re),
                format!("{:.17e}", a.im),
            ])
            .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}
