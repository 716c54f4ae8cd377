//! Exact exponent bookkeeping.
//!
//! Every quantity is a monomial in the scale symbols; after substituting
//! N = T^3, K = T^(...), L = T^eta and so on it becomes an affine function of
//! the free exponents (xi, eta) with rational coefficients.

use crate::{Error, Rational64, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn ri(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    T,
    K,
    L,
    N,
    Q,
    R,
    C,
    M1,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Symbol::T => "T",
            Symbol::K => "K",
            Symbol::L => "L",
            Symbol::N => "N",
            Symbol::Q => "Q",
            Symbol::R => "r",
            Symbol::C => "C",
            Symbol::M1 => "M1",
        };
        f.write_str(s)
    }
}

/// A monomial prod s^{e_s} with rational exponents.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpExpr {
    pub exponents: BTreeMap<Symbol, Rational64>,
}

impl ExpExpr {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn sym(s: Symbol) -> Self {
        Self::pow(s, ri(1))
    }

    pub fn pow(s: Symbol, e: Rational64) -> Self {
        let mut out = Self::one();
        out.exponents.insert(s, e);
        out.normalize()
    }

    /// Builds a monomial from (symbol, numerator, denominator) triples.
    pub fn monomial(parts: &[(Symbol, i64, i64)]) -> Self {
        parts
            .iter()
            .fold(Self::one(), |acc, &(s, n, d)| acc.mul(&Self::pow(s, r(n, d))))
    }

    fn normalize(mut self) -> Self {
        self.exponents.retain(|_, e| *e != ri(0));
        self
    }

    pub fn mul(&self, other: &ExpExpr) -> ExpExpr {
        let mut out = self.clone();
        for (s, e) in &other.exponents {
            *out.exponents.entry(*s).or_insert(ri(0)) += *e;
        }
        out.normalize()
    }

    pub fn div(&self, other: &ExpExpr) -> ExpExpr {
        self.mul(&other.powr(ri(-1)))
    }

    pub fn powr(&self, k: Rational64) -> ExpExpr {
        let mut out = self.clone();
        for e in out.exponents.values_mut() {
            *e *= k;
        }
        out.normalize()
    }

    pub fn exponent(&self, s: Symbol) -> Rational64 {
        self.exponents.get(&s).copied().unwrap_or(ri(0))
    }
}

impl fmt::Display for ExpExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponents.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .exponents
            .iter()
            .map(|(s, e)| {
                if *e == ri(1) {
                    s.to_string()
                } else {
                    format!("{s}^({e})")
                }
            })
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// c + a xi + b eta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Affine {
    pub constant: Rational64,
    pub xi: Rational64,
    pub eta: Rational64,
}

impl Affine {
    pub fn new(constant: Rational64, xi: Rational64, eta: Rational64) -> Self {
        Affine { constant, xi, eta }
    }

    pub fn constant(c: Rational64) -> Self {
        Affine::new(c, ri(0), ri(0))
    }

    pub fn zero() -> Self {
        Affine::constant(ri(0))
    }

    pub fn add(&self, o: &Affine) -> Affine {
        Affine::new(self.constant + o.constant, self.xi + o.xi, self.eta + o.eta)
    }

    pub fn sub(&self, o: &Affine) -> Affine {
        self.add(&o.scale(ri(-1)))
    }

    pub fn scale(&self, k: Rational64) -> Affine {
        Affine::new(self.constant * k, self.xi * k, self.eta * k)
    }

    pub fn eval(&self, xi: Rational64, eta: Rational64) -> Rational64 {
        self.constant + self.xi * xi + self.eta * eta
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = format!("{}", self.constant);
        for (coef, name) in [(self.xi, "xi"), (self.eta, "eta")] {
            if coef != ri(0) {
                let sign = if coef > ri(0) { '+' } else { '-' };
                let mag = if coef > ri(0) { coef } else { -coef };
                if mag == ri(1) {
                    s.push_str(&format!(" {sign} {name}"));
                } else {
                    s.push_str(&format!(" {sign} ({mag}) {name}"));
                }
            }
        }
        f.write_str(&s)
    }
}

/// T-exponents of each scale symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub rules: BTreeMap<Symbol, Affine>,
}

impl Substitution {
    fn base() -> BTreeMap<Symbol, Affine> {
        let mut m = BTreeMap::new();
        m.insert(Symbol::T, Affine::constant(ri(1)));
        m.insert(Symbol::N, Affine::constant(ri(3)));
        m.insert(Symbol::R, Affine::zero());
        m
    }

    /// N = T^3, K = T^xi, Q = sqrt(N/K), r = 1.
    pub fn k_power() -> Self {
        let mut m = Self::base();
        m.insert(Symbol::K, Affine::new(ri(0), ri(1), ri(0)));
        m.insert(Symbol::Q, Affine::new(r(3, 2), r(-1, 2), ri(0)));
        m.insert(Symbol::C, Affine::new(r(3, 2), r(-1, 2), ri(0)));
        Substitution { rules: m }
    }

    /// The plain bound's parametrisation K = T^(1 - xi), Q = sqrt(N/K).
    pub fn plain() -> Self {
        let mut m = Self::base();
        m.insert(Symbol::K, Affine::new(ri(1), ri(-1), ri(0)));
        m.insert(Symbol::Q, Affine::new(ri(1), r(1, 2), ri(0)));
        m.insert(Symbol::C, Affine::new(ri(1), r(1, 2), ri(0)));
        Substitution { rules: m }
    }

    /// K = T^xi, L = T^eta, Q = sqrt(N L / K).
    pub fn averaged() -> Self {
        let mut m = Self::base();
        m.insert(Symbol::K, Affine::new(ri(0), ri(1), ri(0)));
        m.insert(Symbol::L, Affine::new(ri(0), ri(0), ri(1)));
        m.insert(Symbol::Q, Affine::new(r(3, 2), r(-1, 2), r(1, 2)));
        m.insert(Symbol::C, Affine::new(r(3, 2), r(-1, 2), r(1, 2)));
        Substitution { rules: m }
    }

    pub fn with(mut self, s: Symbol, a: Affine) -> Self {
        self.rules.insert(s, a);
        self
    }
}

/// T-exponent of a monomial under a substitution.
pub fn reduce_to_t(e: &ExpExpr, subst: &Substitution) -> Result<Affine> {
    let mut acc = Affine::zero();
    for (s, k) in &e.exponents {
        let rule = subst
            .rules
            .get(s)
            .ok_or_else(|| Error::domain(format!("no substitution for symbol {s}")))?;
        acc = acc.add(&rule.scale(*k));
    }
    Ok(acc)
}

/// lhs > rhs, required for the argument to close.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub lhs: ExpExpr,
    pub rhs: ExpExpr,
}

impl Constraint {
    /// lhs - rhs as a T-exponent; the constraint holds where this is positive.
    pub fn margin(&self, subst: &Substitution) -> Result<Affine> {
        Ok(reduce_to_t(&self.lhs, subst)?.sub(&reduce_to_t(&self.rhs, subst)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerStep {
    pub name: String,
    pub saving: ExpExpr,
    pub anchor: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub name: String,
    pub substitution: Substitution,
    /// Total saving needed over the trivial bound.
    pub target: ExpExpr,
    pub steps: Vec<LedgerStep>,
    /// Saving still needed after the Cauchy-Schwarz step.
    pub post_cauchy_target: ExpExpr,
    pub constraints: Vec<Constraint>,
    /// Terms of the final bound for L(1/2); the bound is their maximum.
    pub bound_terms: Vec<(String, ExpExpr)>,
}

impl Ledger {
    pub fn total_saving(&self) -> ExpExpr {
        self.steps
            .iter()
            .fold(ExpExpr::one(), |acc, s| acc.mul(&s.saving))
    }

    /// Saving left after the listed steps, target / total.
    pub fn remaining(&self) -> ExpExpr {
        self.target.div(&self.total_saving())
    }

    pub fn remaining_t(&self) -> Result<Affine> {
        reduce_to_t(&self.remaining(), &self.substitution)
    }

    pub fn constraint_margins(&self) -> Result<Vec<(String, Affine)>> {
        self.constraints
            .iter()
            .map(|c| Ok((c.name.clone(), c.margin(&self.substitution)?)))
            .collect()
    }

    pub fn bound_exponents(&self) -> Result<Vec<(String, Affine)>> {
        self.bound_terms
            .iter()
            .map(|(n, e)| Ok((n.clone(), reduce_to_t(e, &self.substitution)?)))
            .collect()
    }

    pub fn bound_at(&self, xi: Rational64, eta: Rational64) -> Result<Rational64> {
        Ok(self
            .bound_exponents()?
            .iter()
            .map(|(_, a)| a.eval(xi, eta))
            .max()
            .expect("ledger has bound terms"))
    }
}

fn step(name: &str, saving: ExpExpr, anchor: &str) -> LedgerStep {
    LedgerStep {
        name: name.into(),
        saving,
        anchor: anchor.into(),
    }
}

fn constraint(name: &str, lhs: ExpExpr, rhs: ExpExpr) -> Constraint {
    Constraint {
        name: name.into(),
        lhs,
        rhs,
    }
}

use Symbol::*;

/// Dual length of the GL(3) sum, r Q^3 K^2 T / N.
pub fn ntilde_plain() -> ExpExpr {
    ExpExpr::monomial(&[(R, 1, 1), (Q, 3, 1), (K, 2, 1), (T, 1, 1), (N, -1, 1)])
}

/// Dual length with the prime average, r Q^3 K T^2 / (N L).
pub fn ntilde_averaged() -> ExpExpr {
    ExpExpr::monomial(&[(R, 1, 1), (Q, 3, 1), (K, 1, 1), (T, 2, 1), (N, -1, 1), (L, -1, 1)])
}

/// Generic dual length of the GL(2) sum, T^2 Q^2 / N.
pub fn mtilde_generic() -> ExpExpr {
    ExpExpr::monomial(&[(T, 2, 1), (Q, 2, 1), (N, -1, 1)])
}

pub fn plain_ledger() -> Ledger {
    let t3 = ExpExpr::monomial(&[(T, 3, 1)]);
    Ledger {
        name: "plain bound".into(),
        substitution: Substitution::plain(),
        target: t3.clone(),
        steps: vec![
            step(
                "GL(3) Voronoi",
                t3.div(&ExpExpr::monomial(&[(Q, 3, 2), (K, 1, 1), (T, 1, 2)])),
                "dual length Q^3 K^2 T / T^3",
            ),
            step(
                "GL(2) Voronoi",
                t3.div(&ExpExpr::monomial(&[(Q, 1, 1), (T, 1, 1)])),
                "dual length Q^2 T^2 / T^3",
            ),
            step("a-sum", ExpExpr::monomial(&[(Q, 1, 2)]), "sqrt(Q)"),
            step("v-integral", ExpExpr::monomial(&[(K, 1, 2)]), "sqrt(K)"),
        ],
        post_cauchy_target: ExpExpr::monomial(&[(T, 3, 1), (K, -1, 1)]),
        constraints: vec![
            constraint(
                "zero frequency",
                ExpExpr::monomial(&[(Q, 3, 1), (T, -1, 1)]),
                ExpExpr::monomial(&[(T, 3, 1), (K, -1, 1)]),
            ),
            constraint(
                "non-zero frequency",
                ExpExpr::monomial(&[(Q, 3, 1), (K, 3, 2), (T, -2, 1)]),
                ExpExpr::monomial(&[(T, 3, 1), (K, -1, 1)]),
            ),
        ],
        bound_terms: vec![
            (
                "zero frequency".into(),
                ExpExpr::monomial(&[(R, 1, 2), (N, 1, 4), (T, 1, 2), (K, 1, 4)]),
            ),
            (
                "non-zero frequency, generic".into(),
                ExpExpr::monomial(&[(R, 1, 2), (N, 1, 4), (T, 1, 1), (K, -1, 2)]),
            ),
            (
                "non-zero frequency, small".into(),
                ExpExpr::monomial(&[(R, 1, 2), (N, 1, 4), (K, 7, 8), (T, -1, 8)]),
            ),
        ],
    }
}

pub fn averaged_ledger() -> Ledger {
    let t3 = ExpExpr::monomial(&[(T, 3, 1)]);
    let t3l = ExpExpr::monomial(&[(T, 3, 1), (L, 1, 1)]);
    Ledger {
        name: "prime-averaged bound".into(),
        substitution: Substitution::averaged(),
        target: t3l.clone(),
        steps: vec![
            step(
                "GL(3) Voronoi",
                t3l.div(&ExpExpr::monomial(&[(Q, 3, 2), (T, 1, 1), (K, 1, 2)])),
                "dual length Q^3 T^2 K / (T^3 L)",
            ),
            step(
                "GL(2) Voronoi",
                t3.div(&ExpExpr::monomial(&[(Q, 1, 1), (T, 1, 1)])),
                "dual length Q^2 T^2 / T^3",
            ),
            step("a-sum", ExpExpr::monomial(&[(Q, 1, 2)]), "sqrt(Q)"),
            step("v-integral", ExpExpr::monomial(&[(K, 1, 2)]), "sqrt(K)"),
        ],
        post_cauchy_target: ExpExpr::monomial(&[(T, 4, 1), (L, 2, 1), (K, -2, 1)]),
        constraints: vec![
            constraint(
                "zero frequency",
                ExpExpr::monomial(&[(L, 1, 1), (Q, 3, 1), (T, -1, 1)]),
                ExpExpr::monomial(&[(T, 4, 1), (L, 2, 1), (K, -2, 1)]),
            ),
            constraint(
                "non-zero frequency",
                ExpExpr::monomial(&[(Q, 3, 1), (T, -1, 1), (K, 1, 2), (L, -1, 1)]),
                ExpExpr::monomial(&[(T, 4, 1), (L, 2, 1), (K, -2, 1)]),
            ),
        ],
        bound_terms: vec![
            (
                "zero frequency".into(),
                ExpExpr::monomial(&[(R, 1, 2), (N, 1, 4), (T, 1, 1), (K, -1, 4), (L, -1, 4)]),
            ),
            (
                "non-zero frequency".into(),
                ExpExpr::monomial(&[(R, 1, 2), (N, 1, 4), (L, 3, 4), (T, 1, 1), (K, -1, 2)]),
            ),
        ],
    }
}

/// Open interval (lo, hi) of xi on which every affine term (in xi only)
/// stays strictly below `level`, intersected with (lo0, hi0).
pub fn strict_window(
    terms: &[Affine],
    level: Rational64,
    lo0: Rational64,
    hi0: Rational64,
) -> Option<(Rational64, Rational64)> {
    let (mut lo, mut hi) = (lo0, hi0);
    for a in terms {
        debug_assert_eq!(a.eta, ri(0));
        let gap = level - a.constant;
        if a.xi > ri(0) {
            hi = hi.min(gap / a.xi);
        } else if a.xi < ri(0) {
            lo = lo.max(gap / a.xi);
        } else if gap <= ri(0) {
            return None;
        }
    }
    (lo < hi).then_some((lo, hi))
}

/// Window where all the listed margins are positive, as an open xi-interval.
pub fn positive_window(
    margins: &[Affine],
    lo0: Rational64,
    hi0: Rational64,
) -> Option<(Rational64, Rational64)> {
    let negated: Vec<Affine> = margins.iter().map(|m| m.scale(ri(-1))).collect();
    strict_window(&negated, ri(0), lo0, hi0)
}

/// Final exponents of the plain bound and its corollary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainBoundSummary {
    pub bound: Vec<Affine>,
    pub dominated: Vec<Affine>,
    pub window: (Rational64, Rational64),
    pub corollary: Vec<Affine>,
    pub sketch_window: (Rational64, Rational64),
}

/// Splits the bound terms into those that realise the maximum somewhere on
/// (0, 1) and those dominated everywhere there.
pub fn plain_bound_summary() -> Result<PlainBoundSummary> {
    let ledger = plain_ledger();
    let terms: Vec<Affine> = ledger.bound_exponents()?.into_iter().map(|(_, a)| a).collect();
    let mut bound = Vec::new();
    let mut dominated = Vec::new();
    for (i, a) in terms.iter().enumerate() {
        let beaten = terms.iter().enumerate().any(|(j, b)| {
            j != i && [ri(0), ri(1)].iter().all(|&x| b.eval(x, ri(0)) >= a.eval(x, ri(0)))
                && b != a
        });
        if beaten {
            dominated.push(*a);
        } else {
            bound.push(*a);
        }
    }
    let window = strict_window(&bound, r(3, 2), ri(0), ri(1))
        .ok_or_else(|| Error::Construction("no subconvex window".into()))?;
    let corollary = bound.iter().map(|a| a.scale(r(1, 2))).collect();
    let margins: Vec<Affine> = ledger.constraint_margins()?.into_iter().map(|(_, a)| a).collect();
    let sketch_window = positive_window(&margins, ri(0), ri(1))
        .ok_or_else(|| Error::Construction("sketch constraints inconsistent".into()))?;
    Ok(PlainBoundSummary {
        bound,
        dominated,
        window,
        corollary,
        sketch_window,
    })
}

/// Minimiser of a maximum of affine functions over a box in (xi, eta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub xi: Rational64,
    pub eta: Rational64,
    pub value: Rational64,
    pub unique: bool,
}

fn solve2(a: (Rational64, Rational64, Rational64), b: (Rational64, Rational64, Rational64)) -> Option<(Rational64, Rational64)> {
    // a.0 xi + a.1 eta = a.2, b likewise.
    let det = a.0 * b.1 - a.1 * b.0;
    if det == ri(0) {
        return None;
    }
    Some(((a.2 * b.1 - a.1 * b.2) / det, (a.0 * b.2 - a.2 * b.0) / det))
}

/// Exact min over the box [xi0, xi1] x [eta0, eta1] of max_i terms_i.
///
/// The objective is convex and piecewise affine, so its minimum is attained
/// at a vertex of the arrangement formed by the box edges and the pairwise
/// balance lines of the terms.
pub fn minimize_max_affine(
    terms: &[Affine],
    xi_range: (Rational64, Rational64),
    eta_range: (Rational64, Rational64),
) -> Optimum {
    let mut lines = vec![
        (ri(1), ri(0), xi_range.0),
        (ri(1), ri(0), xi_range.1),
        (ri(0), ri(1), eta_range.0),
        (ri(0), ri(1), eta_range.1),
    ];
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            let d = terms[i].sub(&terms[j]);
            if d.xi != ri(0) || d.eta != ri(0) {
                lines.push((d.xi, d.eta, -d.constant));
            }
        }
    }
    let objective = |x: Rational64, y: Rational64| terms.iter().map(|t| t.eval(x, y)).max().unwrap();
    let inside = |x: Rational64, y: Rational64| {
        x >= xi_range.0 && x <= xi_range.1 && y >= eta_range.0 && y <= eta_range.1
    };
    let mut best: Option<(Rational64, Rational64, Rational64)> = None;
    let mut minimisers: Vec<(Rational64, Rational64)> = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            if let Some((x, y)) = solve2(lines[i], lines[j]) {
                if !inside(x, y) {
                    continue;
                }
                let v = objective(x, y);
                match best {
                    Some((_, _, bv)) if v > bv => {}
                    Some((_, _, bv)) if v == bv => {
                        if !minimisers.contains(&(x, y)) {
                            minimisers.push((x, y));
                        }
                    }
                    _ => {
                        best = Some((x, y, v));
                        minimisers = vec![(x, y)];
                    }
                }
            }
        }
    }
    let (xi, eta, value) = best.expect("box has vertices");
    Optimum {
        xi,
        eta,
        value,
        unique: minimisers.len() == 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedBoundSummary {
    pub terms: Vec<Affine>,
    pub optimum: Optimum,
    /// L exponent divided by K exponent at the optimum.
    pub l_over_k: Rational64,
    pub constraint_margins: Vec<(String, Rational64)>,
}

pub fn averaged_bound_summary() -> Result<AveragedBoundSummary> {
    let ledger = averaged_ledger();
    let terms: Vec<Affine> = ledger.bound_exponents()?.into_iter().map(|(_, a)| a).collect();
    let optimum = minimize_max_affine(&terms, (ri(0), ri(1)), (ri(0), ri(1)));
    let constraint_margins = ledger
        .constraint_margins()?
        .into_iter()
        .map(|(n, a)| (n, a.eval(optimum.xi, optimum.eta)))
        .collect();
    Ok(AveragedBoundSummary {
        l_over_k: optimum.eta / optimum.xi,
        terms,
        optimum,
        constraint_margins,
    })
}

/// Smallest theta in [0, 3] for which the discarded tail T^((3 - theta)/2)
/// does not exceed the main-term prefactor T^(a + b theta), b >= 0.
///
/// For both bounds the prefactor is sqrt(r) N^(1/4) <= T^(3/4) under
/// N r^2 <= T^3, which gives theta = 3/2.
pub fn afe_cutoff_optimize(prefactor: Affine) -> Result<Rational64> {
    let (a, b) = (prefactor.constant, prefactor.xi);
    if b < ri(0) {
        return Err(Error::precondition("prefactor must be nondecreasing in theta"));
    }
    let theta = (ri(3) - ri(2) * a) / (ri(1) + ri(2) * b);
    Ok(theta.max(ri(0)).min(ri(3)))
}

/// Prefactor exponent sqrt(r) N^(1/4) at the extreme N r^2 = T^3.
pub fn afe_prefactor() -> Affine {
    Affine::constant(r(3, 4))
}

pub fn afe_tail_exponent(theta: Rational64) -> Rational64 {
    (ri(3) - theta) / ri(2)
}

pub fn format_rational(x: Rational64) -> String {
    if *x.denom() == 1 {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
