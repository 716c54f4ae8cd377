//! Voronoi transforms: the GL(2) identity checked term by term, the GL(3)
//! kernels in contour and stationary-phase form, and their truncation ranges.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::arith::{gcd, mod_inverse};
use crate::forms::HoloForm;
use crate::oscillatory::{adaptive_integrate, plateau, Bump};
use crate::quad::GaussLegendre;
use crate::special_fn::{bessel_j, gamma_ell_bound, gamma_pm, SpectralParams};
use crate::{e, Complex64, Error, Result, T_EPS};

/// Largest contour height the GL(3) transform may use.
pub const MAX_CONTOUR_HEIGHT: f64 = 1e5;

/// Oscillating factor y^{-i(t3+v)} e(y x / (qQ)) carried by the GL(3) test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub t3: f64,
    pub v: f64,
    pub x: f64,
    pub q: f64,
    pub big_q: f64,
}

impl Twist {
    fn freq(&self) -> f64 {
        self.t3 + self.v
    }

    fn slope(&self) -> f64 {
        self.x / (self.q * self.big_q)
    }
}

/// W(y/N), optionally twisted; supported in N times the bump's support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub weight: Bump,
    pub n: f64,
    pub twist: Option<Twist>,
}

impl TestFunction {
    pub fn new(weight: Bump, n: f64) -> Result<Self> {
        let (a, _) = weight.support();
        if !(n > 0.0) || a <= 0.0 || !n.is_finite() {
            return Err(Error::domain("test function must live in (0, inf)"));
        }
        Ok(TestFunction { weight, n, twist: None })
    }

    pub fn with_twist(mut self, tw: Twist) -> Result<Self> {
        let all = [tw.t3, tw.v, tw.x, tw.q, tw.big_q];
        if all.iter().any(|v| !v.is_finite()) || tw.q <= 0.0 || tw.big_q <= 0.0 {
            return Err(Error::domain("twist parameters must be finite with q, Q > 0"));
        }
        self.twist = Some(tw);
        Ok(self)
    }

    pub fn support(&self) -> (f64, f64) {
        let (a, b) = self.weight.support();
        (a * self.n, b * self.n)
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        let w = self.weight.value(y / self.n);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self.twist {
            None => Complex64::new(w, 0.0),
            Some(tw) => w * Complex64::from_polar(1.0, -tw.freq() * y.ln()) * e(y * tw.slope()),
        }
    }

    /// Mellin transform int psi(y) y^{s-1} dy.
    pub fn mellin(&self, s: Complex64) -> Complex64 {
        let (tv, _) = self.twist_or_zero();
        let (nodes, weights) = self.mellin_nodes((s.im - tv).abs() + 1.0);
        mellin_from_nodes(&nodes, &weights, s)
    }

    /// Nodes with the s-independent part of the integrand folded into the
    /// weights; max_freq bounds the combined frequency of y^{i Im s} and the twist.
    fn mellin_nodes(&self, max_freq: f64) -> (Vec<f64>, Vec<Complex64>) {
        let (a, b) = self.weight.support();
        let mut phase_rate = max_freq / a;
        if let Some(tw) = self.twist {
            phase_rate += TAU * tw.slope().abs() * self.n;
        }
        let panels = 24 + ((b - a) * phase_rate / 4.0).ceil() as usize;
        let (us, ws) = GaussLegendre::standard().composite_points(a, b, panels);
        let mut weights = Vec::with_capacity(us.len());
        for (u, w) in us.iter().zip(&ws) {
            weights.push(*w * self.eval(u * self.n) / u);
        }
        (us.iter().map(|u| u * self.n).collect(), weights)
    }
}

fn mellin_from_nodes(ys: &[f64], ws: &[Complex64], s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (y, w) in ys.iter().zip(ws) {
        acc += w * (s * y.ln()).exp();
    }
    acc
}

/// Which of the two bounds (plain or prime-averaged) a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    First,
    /// The prime-averaged version with sums of length N L.
    Second,
}

/// Parameters of the transformed sums and their derived lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub n1: u64,
    pub n2: u64,
    pub q: u64,
    pub r: u64,
    pub m: u64,
    pub t: [f64; 3],
    pub k: f64,
    pub n: f64,
    pub l: f64,
    pub big_t: f64,
    pub variant: Variant,
}

impl TransformParams {
    pub fn new(q: u64, r: u64, t: SpectralParams, k: f64, n: f64, big_t: f64) -> Result<Self> {
        let p = TransformParams {
            n1: 1,
            n2: 1,
            q,
            r,
            m: 1,
            t: t.as_array(),
            k,
            n,
            l: 1.0,
            big_t,
            variant: Variant::First,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn second(mut self, l: f64) -> Result<Self> {
        self.l = l;
        self.variant = Variant::Second;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let reals = [self.k, self.n, self.l, self.big_t];
        if reals.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::domain("K, N, L, T must be positive and finite"));
        }
        if self.q == 0 || self.r == 0 || self.n1 == 0 || self.n2 == 0 || self.m == 0 {
            return Err(Error::domain("n1, n2, q, r, m must be positive"));
        }
        Ok(())
    }

    pub fn spectral(&self) -> SpectralParams {
        SpectralParams::new(self.t[0], self.t[1])
    }

    /// Length of the sum being transformed: N, or N L for the second variant.
    pub fn length(&self) -> f64 {
        match self.variant {
            Variant::First => self.n,
            Variant::Second => self.n * self.l,
        }
    }

    pub fn big_q(&self) -> f64 {
        (self.length() / self.k).sqrt() * T_EPS
    }

    /// Size of |tau + t3| on the GL(3) side: max(K, N/(qQ)) for the first
    /// variant, N L/(qQ) for the second.
    pub fn n0(&self) -> f64 {
        let base = self.length() / (self.q as f64 * self.big_q());
        match self.variant {
            Variant::First => base.max(self.k),
            Variant::Second => base,
        }
    }

    /// Effective range of n1^2 n2 on the GL(3) dual side.
    pub fn n_tilde(&self) -> f64 {
        n_tilde_at(self.variant, self.r as f64, self.big_q(), self.k, self.big_t, self.n, self.l)
    }

    /// Effective range of m on the GL(2) dual side.
    pub fn m_tilde(&self) -> f64 {
        let (t, q, n, k) = (self.big_t, self.q as f64, self.n, self.k);
        match self.variant {
            Variant::First => (t * t * q * q / n).max(k) * T_EPS,
            Variant::Second => (t * t * q * q / n + k * self.l) * T_EPS,
        }
    }

    /// Range of the Poisson variable n2 for a given n1, q1 and C.
    pub fn n2_range(&self, c: f64, q1: f64) -> f64 {
        self.n2_range_for_block(c, q1, self.n_tilde())
    }

    /// The same range when n1^2 n2 runs over a block of size `block` instead of N~.
    pub fn n2_range_for_block(&self, c: f64, q1: f64, block: f64) -> f64 {
        let (n1, r) = (self.n1 as f64, self.r as f64);
        match self.variant {
            Variant::First => n1 * c * c * self.n0() * r / (q1 * block) * T_EPS,
            Variant::Second => n1 * c * c * self.k * r / (q1 * block) * T_EPS,
        }
    }

    /// Range of n2 in the non-generic case where one |tau + t_i| is small.
    pub fn n_tilde_nongeneric(&self) -> f64 {
        let (r, q, k, t, n) = (self.r as f64, self.big_q(), self.k, self.big_t, self.n);
        r * q.powi(3) * k.powi(3) / (t * n) * T_EPS
    }
}

/// r Q^3 K^2 T/N T^eps for the first variant, r Q^3 K T^2/(N L) T^eps for the second,
/// with Q given explicitly.
pub fn n_tilde_at(variant: Variant, r: f64, big_q: f64, k: f64, big_t: f64, n: f64, l: f64) -> f64 {
    match variant {
        Variant::First => r * big_q.powi(3) * k * k * big_t / n * T_EPS,
        Variant::Second => r * big_q.powi(3) * k * big_t * big_t / (n * l) * T_EPS,
    }
}

// ---------------------------------------------------------------------------
// GL(2)

/// Both sides of the GL(2) Voronoi identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gl2Check {
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// |lhs - rhs| divided by max(|lhs|, (sum |lambda(n) g(n)|^2)^{1/2}).
    pub residual: f64,
    /// Number of dual terms kept.
    pub dual_len: u64,
}

/// Hankel-type transform y -> 2 pi i^k int g(x) J_{k-1}(4 pi sqrt(xy)/q) dx
/// on shared nodes in s = sqrt(x).
pub struct HankelTransform {
    order: u32,
    q: f64,
    factor: Complex64,
    s_lo: f64,
    s_hi: f64,
    tiers: Vec<(usize, Vec<f64>, Vec<Complex64>)>,
    g: TestFunction,
}

impl HankelTransform {
    pub fn new(g: &TestFunction, weight: u32, q: u64) -> Self {
        let (a, b) = g.support();
        let i_k = Complex64::new(0.0, 1.0).powu(weight);
        HankelTransform {
            order: weight - 1,
            q: q as f64,
            factor: TAU * i_k,
            s_lo: a.sqrt(),
            s_hi: b.sqrt(),
            tiers: Vec::new(),
            g: *g,
        }
    }

    fn tier(&mut self, panels: usize) -> usize {
        let p = 16 * panels.div_ceil(16).max(1);
        if let Some(i) = self.tiers.iter().position(|t| t.0 == p) {
            return i;
        }
        let (ss, ws) = GaussLegendre::standard().composite_points(self.s_lo, self.s_hi, p);
        let ws = ss.iter().zip(&ws).map(|(s, w)| w * 2.0 * s * self.g.eval(s * s)).collect();
        self.tiers.push((p, ss, ws));
        self.tiers.len() - 1
    }

    pub fn eval(&mut self, y: f64) -> Complex64 {
        self.eval_with_floor(y).0
    }

    /// The transform and the roundoff level of its quadrature sum.
    pub fn eval_with_floor(&mut self, y: f64) -> (Complex64, f64) {
        let kappa = 4.0 * PI * y.sqrt() / self.q;
        let mut rate = kappa;
        if let Some(tw) = self.g.twist {
            rate += tw.freq().abs() / self.s_lo + TAU * tw.slope().abs() * 2.0 * self.s_hi;
        }
        // Twenty Gauss nodes resolve ten radians of phase to roundoff.
        let i = self.tier(16 + ((self.s_hi - self.s_lo) * rate / 10.0).ceil() as usize);
        let (_, ss, ws) = &self.tiers[i];
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (s, w) in ss.iter().zip(ws) {
            let t = w * bessel_j(self.order, kappa * s);
            mass += t.norm();
            acc += t;
        }
        (self.factor * acc, TAU * mass * 1e-13)
    }
}

/// Checks sum lambda(n) e(an/q) g(n) = (1/q) sum lambda(n) e(-dn/q) h(n).
///
/// The dual sum stops once |h(n)| has stayed below 1e-8 q S / n (or below the
/// roundoff level of its own quadrature) over a window of max(64, n/8)
/// consecutive terms, S being the scale the residual is measured against.
pub fn gl2_voronoi_check(f: &HoloForm, a: i64, q: u64, g: &TestFunction) -> Result<Gl2Check> {
    if q == 0 || gcd(a, q as i64) != 1 {
        return Err(Error::domain(format!("a = {a} and q = {q} are not coprime")));
    }
    let d = mod_inverse(a, q)? as i64;
    let qi = q as i64;
    let (lo, hi) = g.support();
    let mut lhs = Complex64::new(0.0, 0.0);
    let mut norm2 = 0.0;
    for n in (lo.ceil() as u64).max(1)..=(hi.floor() as u64) {
        let t = f.lambda(n)? * g.eval(n as f64);
        lhs += t * e((a * n as i64).rem_euclid(qi) as f64 / q as f64);
        norm2 += t.norm_sqr();
    }
    let scale = lhs.norm().max(norm2.sqrt());
    let mut h = HankelTransform::new(g, f.weight, q);
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut quiet_since = 1u64;
    let mut n = 1u64;
    loop {
        let (hn, floor) = h.eval_with_floor(n as f64);
        if hn.norm() > floor.max(1e-8 * q as f64 * scale / n as f64) {
            quiet_since = n + 1;
        }
        rhs += f.lambda(n)? * hn * e(-((d * n as i64).rem_euclid(qi) as f64) / q as f64);
        if n >= quiet_since + 64.max(quiet_since / 8) {
            break;
        }
        n += 1;
    }
    rhs /= q as f64;
    Ok(Gl2Check { lhs, rhs, residual: (lhs - rhs).norm() / scale, dual_len: n })
}

/// int U(y) y^{i(t3+v)} e(-x L y/(qQ) + sign 2 sqrt(y L m)/q) dy for both signs,
/// with U = 1 on [1, 2] and supported in [1/2, 5/2], L the length of the sum.
pub fn gl2_dual_integral(
    m: f64,
    x: f64,
    q: f64,
    tv: f64,
    length: f64,
    big_q: f64,
) -> Result<[Complex64; 2]> {
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
        let phase = move |y: f64| {
            tv * y.ln() + TAU * (-x * length * y / (q * big_q) + sign * 2.0 * (y * length * m).sqrt() / q)
        };
        let r = adaptive_integrate(
            |y| Complex64::from_polar(dual_window(y), phase(y)),
            phase,
            0.5,
            2.5,
            1e-11,
        )?;
        out[i] = r.value;
    }
    Ok(out)
}

/// The weight U of the GL(2) dual integral.
pub fn dual_window(y: f64) -> f64 {
    plateau(y, 1.0, 2.0, 0.5, 2.5)
}

// ---------------------------------------------------------------------------
// GL(3)

/// Contour integral value with the range actually integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourValue {
    pub value: Complex64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    /// Stirling-bound estimate of the integrand mass beyond the range.
    pub tail: f64,
}

/// The stationary-phase form of the GL(3) kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarValue {
    /// The tau-integral with the W1 window and the Stirling phase.
    pub raw: Complex64,
    /// (1/2 pi) (yN)^{1/2} N^{-i(t3+v)} raw, the approximation to G(y).
    pub transform: Complex64,
    /// The part of the tau-range with some |tau + t_i| < T^eps carries more
    /// than 1% of |raw|.
    pub case2: bool,
    /// |contribution of that part| / |raw|.
    pub case2_share: f64,
    /// Share of |raw| carried by |tau + t3| > 10 N0 when the window is dropped.
    pub outside_window: f64,
}

impl TestFunction {
    /// psi(y) = W(y/N) y^{-i(t3+v)} e(yx/(qQ)) for the given transform parameters.
    pub fn gl3(p: &TransformParams, weight: Bump, x: f64, v: f64) -> Result<Self> {
        TestFunction::new(weight, p.length())?.with_twist(Twist {
            t3: p.t[2],
            v,
            x,
            q: p.q as f64,
            big_q: p.big_q(),
        })
    }

    fn twist_or_zero(&self) -> (f64, f64) {
        self.twist.map_or((0.0, 0.0), |t| (t.freq(), t.slope()))
    }

    /// Range of tau where the Mellin transform at -sigma - i tau is stationary.
    fn stationary_tau_range(&self) -> (f64, f64) {
        let (tv, slope) = self.twist_or_zero();
        let (a, b) = self.support();
        let (lo, hi) = (TAU * slope * a - tv, TAU * slope * b - tv);
        (lo.min(hi), lo.max(hi))
    }
}

/// sum_k w_k exp(-i tau l_k) on fixed nodes.
struct ExpSum {
    logs: Vec<f64>,
    weights: Vec<Complex64>,
    floor: f64,
}

impl ExpSum {
    fn new(logs: Vec<f64>, weights: Vec<Complex64>) -> Self {
        let floor = 1e-15 * weights.iter().map(|w| w.norm()).sum::<f64>();
        ExpSum { logs, weights, floor }
    }

    fn at(&self, tau: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, w) in self.logs.iter().zip(&self.weights) {
            acc += w * Complex64::from_polar(1.0, -tau * l);
        }
        acc
    }

    /// Values at lo + k h for k < count, by rotation with periodic resync.
    fn sweep(&self, lo: f64, h: f64, count: usize) -> Vec<Complex64> {
        let steps: Vec<Complex64> = self.logs.iter().map(|l| Complex64::from_polar(1.0, -h * l)).collect();
        let mut cur: Vec<Complex64> = Vec::new();
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            if k % 256 == 0 {
                let tau = lo + k as f64 * h;
                cur = self
                    .logs
                    .iter()
                    .zip(&self.weights)
                    .map(|(l, w)| w * Complex64::from_polar(1.0, -tau * l))
                    .collect();
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, st) in cur.iter_mut().zip(&steps) {
                acc += *c;
                *c *= st;
            }
            out.push(acc);
        }
        out
    }
}

/// psi~(-sigma - i tau) = int psi(y) y^{-sigma - i tau - 1} dy as an ExpSum in tau.
fn mellin_table(psi: &TestFunction, sigma: f64, tau_lo: f64, tau_hi: f64) -> ExpSum {
    let (tv, _) = psi.twist_or_zero();
    let freq = (tau_lo + tv).abs().max((tau_hi + tv).abs());
    let (ys, ws) = psi.mellin_nodes(freq);
    let weights = ys.iter().zip(&ws).map(|(y, w)| w * y.powf(-sigma)).collect();
    ExpSum::new(ys.iter().map(|y| y.ln()).collect(), weights)
}

/// Upper bound for the phase derivative of y^{-s} gamma(s) psi~(-s) in tau.
fn contour_rate(y: f64, psi: &TestFunction, t: &SpectralParams, tau: f64) -> f64 {
    let (_, b) = psi.support();
    let gamma_rate: f64 = t.as_array().iter().map(|tj| (1.0 + (tau + tj).abs()).ln()).sum();
    y.ln().abs() + gamma_rate + 3.0 * TAU.ln() + b.ln().abs() + 2.0
}

/// (1/2 pi i) int_(sigma) y^{-s} kernel(s) psi~(-s) ds with the tau-range
/// grown until the Stirling bound times |psi~| at both ends is below 1e-9 of
/// the peak.
fn contour_integral<G>(
    y: f64,
    psi: &TestFunction,
    t: &SpectralParams,
    sigma: f64,
    kernel: G,
) -> Result<ContourValue>
where
    G: Fn(Complex64) -> Result<Complex64>,
{
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain("G(y) needs y > 0"));
    }
    let min_sigma = -1.0 + 1e-9;
    if sigma <= min_sigma {
        return Err(Error::domain(format!("sigma = {sigma} crosses the Gamma poles")));
    }
    let (c_lo, c_hi) = psi.stationary_tau_range();
    let stirling = |tau: f64| 2.0 * y.powf(-sigma) * gamma_ell_bound(Complex64::new(sigma, tau), t);
    let mut margin = 40.0 + 0.25 * (c_hi - c_lo);
    let (lo, hi, tab, tail) = loop {
        let (lo, hi) = (c_lo - margin, c_hi + margin);
        if lo.abs().max(hi.abs()) > MAX_CONTOUR_HEIGHT {
            return Err(Error::resource(format!(
                "contour tail not certified below height {MAX_CONTOUR_HEIGHT}"
            )));
        }
        let tab = mellin_table(psi, sigma, lo, hi);
        let peak = (0..=64)
            .map(|i| {
                let tau = c_lo + (c_hi - c_lo) * i as f64 / 64.0;
                stirling(tau) * tab.at(tau).norm()
            })
            .fold(0.0, f64::max);
        let edge = |tau: f64| stirling(tau) * tab.at(tau).norm().max(tab.floor);
        let worst = edge(lo).max(edge(hi));
        let at_floor = tab.at(lo).norm().max(tab.at(hi).norm()) <= tab.floor;
        if worst <= 1e-9 * peak || at_floor {
            break (lo, hi, tab, worst * margin);
        }
        margin *= 1.5;
    };
    // Trapezoid rule: the integrand is analytic in a strip of half-width
    // sigma + 1 around the line, so the error is exp(-2 pi (sigma + 1)/h).
    let rate = [lo, 0.5 * (lo + hi), hi]
        .iter()
        .map(|&tau| contour_rate(y, psi, t, tau))
        .fold(0.0, f64::max);
    let h = (0.5 / rate).min(0.05 * (1.0 + sigma).min(1.0));
    let count = ((hi - lo) / h).ceil() as usize + 1;
    let h = (hi - lo) / (count - 1) as f64;
    let mellin = tab.sweep(lo, h, count);
    let mut acc = Complex64::new(0.0, 0.0);
    let ln_y = y.ln();
    for (k, m) in mellin.iter().enumerate() {
        let s = Complex64::new(sigma, lo + k as f64 * h);
        let wk = if k == 0 || k + 1 == count { 0.5 * h } else { h };
        acc += wk * (-s * ln_y).exp() * kernel(s)? * m;
    }
    Ok(ContourValue { value: acc / TAU, tau_lo: lo, tau_hi: hi, tail })
}

/// G_sign(y) = (1/2 pi i) int_(sigma) y^{-s} gamma_sign(s) psi~(-s) ds, sign = +1 or -1.
pub fn gl3_g_contour(
    y: f64,
    psi: &TestFunction,
    t: &SpectralParams,
    sigma: f64,
    sign: i8,
) -> Result<ContourValue> {
    if sign != 1 && sign != -1 {
        return Err(Error::domain("sign must be +1 or -1"));
    }
    contour_integral(y, psi, t, sigma, |s| gamma_pm(s, t, sign))
}

/// The same contour integral with gamma_ell in place of gamma_sign.
pub fn gl3_g_ell_contour(
    y: f64,
    psi: &TestFunction,
    t: &SpectralParams,
    sigma: f64,
    ell: u8,
) -> Result<ContourValue> {
    contour_integral(y, psi, t, sigma, |s| crate::special_fn::gamma_ell(s, t, ell))
}

/// h0(tau) = -3 tau/(2 pi) + (1/2 pi) sum (tau + t_j) log|tau + t_j|.
pub fn h0(tau: f64, t: &[f64; 3]) -> f64 {
    let mut acc = -3.0 * tau;
    for tj in t {
        let u = tau + tj;
        if u != 0.0 {
            acc += u * u.abs().ln();
        }
    }
    acc / TAU
}

/// d/dtau of h0.
pub fn h0_derivative(tau: f64, t: &[f64; 3]) -> f64 {
    t.iter().map(|tj| (tau + tj).abs().ln()).sum::<f64>() / TAU
}

/// Leading Stirling constant of gamma_sign(-1/2 + i tau) once the phase
/// e(h0(tau) - tau log(8 pi^3)/(2 pi)) is divided out: it depends only on the
/// signs of tau + t_j and has modulus 1 or 0.
pub fn stirling_weight(tau: f64, t: &[f64; 3], sign: i8) -> Complex64 {
    let sgn: f64 = t.iter().map(|tj| (tau + tj).signum()).sum();
    let a = Complex64::from_polar(1.0, -PI * sgn / 4.0);
    let b = Complex64::from_polar(1.0, PI * sgn / 4.0);
    0.5 * (a - Complex64::new(0.0, sign as f64) * b)
}

/// W1 on |tau + t3|/N0: equal to 1 on [0.15, 8] and supported in [1/T^eps, T^eps].
pub fn tau_window(r: f64) -> f64 {
    plateau(r, 0.15, 8.0, 1.0 / T_EPS, T_EPS)
}

/// y1-integral int W(y1) y1^{-i(t3+v)} e(y1 N x/(qQ)) y1^{-1/2-i tau} dy1 as an ExpSum in tau.
fn inner_table(psi: &TestFunction, freq: f64) -> ExpSum {
    let (tv, slope) = psi.twist_or_zero();
    let (a, b) = psi.weight.support();
    let rate = freq / a + TAU * slope.abs() * psi.n;
    let panels = 24 + ((b - a) * rate / 4.0).ceil() as usize;
    let (us, ws) = GaussLegendre::standard().composite_points(a, b, panels);
    let weights = us
        .iter()
        .zip(&ws)
        .map(|(u, w)| {
            w * psi.weight.value(*u) * Complex64::from_polar(1.0, -tv * u.ln()) * e(u * psi.n * slope)
                / u.sqrt()
        })
        .collect();
    ExpSum::new(us.iter().map(|u| u.ln()).collect(), weights)
}

/// Unwindowed tau-integrand of G_star on a uniform grid: (tau_lo, step, values).
fn star_integrand(p: &TransformParams, psi: &TestFunction, y: f64, sign: i8) -> Result<(f64, f64, Vec<Complex64>)> {
    if !(y > 0.0) {
        return Err(Error::domain("G(y) needs y > 0"));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::domain("sign must be +1 or -1"));
    }
    let t = p.t;
    let (tv, _) = psi.twist_or_zero();
    let (c_lo, c_hi) = psi.stationary_tau_range();
    let margin = 1000.0 + c_hi - c_lo;
    let (lo, hi) = (c_lo - margin, c_hi + margin);
    let inner = inner_table(psi, (lo + tv).abs().max((hi + tv).abs()));
    let log_c = (8.0 * PI.powi(3) * y * psi.n).ln();
    let rate = [lo, c_lo, c_hi, hi]
        .iter()
        .map(|&tau| TAU * h0_derivative(tau, &t).abs() + log_c.abs())
        .fold(0.0, f64::max)
        + psi.support().1.ln().abs()
        + 4.0;
    let h = (0.5 / rate).min(0.05);
    let count = ((hi - lo) / h).ceil() as usize + 1;
    let h = (hi - lo) / (count - 1) as f64;
    let vals = inner
        .sweep(lo, h, count)
        .into_iter()
        .enumerate()
        .map(|(k, iv)| {
            let tau = lo + k as f64 * h;
            iv * stirling_weight(tau, &t, sign) * e(h0(tau, &t) - tau * log_c / TAU)
        })
        .collect();
    Ok((lo, h, vals))
}

/// G_star(y) = int W1(|tau+t3|/N0) w(tau) e(h0(tau) - tau log(8 pi^3 y N)/(2 pi)) inner(tau) dtau
/// with the Stirling weight w carried explicitly.
pub fn gl3_g_star(p: &TransformParams, psi: &TestFunction, y: f64, sign: i8) -> Result<StarValue> {
    let (lo, h, vals) = star_integrand(p, psi, y, sign)?;
    let t = p.t;
    let (n0, t3, n) = (p.n0(), t[2], psi.n);
    let (tv, _) = psi.twist_or_zero();
    let mut raw = Complex64::new(0.0, 0.0);
    let mut near = Complex64::new(0.0, 0.0);
    let mut outside = Complex64::new(0.0, 0.0);
    let mut total = 0.0;
    for (k, v) in vals.iter().enumerate() {
        let tau = lo + k as f64 * h;
        let win = tau_window((tau + t3).abs() / n0);
        raw += h * win * v;
        total += h * v.norm();
        if t.iter().any(|tj| (tau + tj).abs() < T_EPS) {
            near += h * win * v;
        }
        if (tau + t3).abs() > T_EPS * n0 {
            outside += h * v;
        }
    }
    let case2_share = if raw.norm() > 0.0 { near.norm() / raw.norm() } else { 0.0 };
    let transform = raw * (y * n).sqrt() * Complex64::from_polar(1.0, -tv * n.ln()) / TAU;
    Ok(StarValue {
        raw,
        transform,
        case2: case2_share > 1e-2,
        case2_share,
        outside_window: if total > 0.0 { outside.norm() / total } else { 0.0 },
    })
}

/// Stationary point of the exact kernel phase against the h0 model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheck {
    /// Zero of the local frequency of gamma(-1/2 + i tau) (yN)^{-i tau}.
    pub tau_exact: f64,
    /// Zero of 2 pi h0'(tau) - log(8 pi^3 y N).
    pub tau_model: f64,
    /// Grid step used for the local frequency.
    pub resolution: f64,
}

/// Locates where the kernel of the contour form stops oscillating on [lo, hi]
/// and where the h0 model says it should.
pub fn phase_check(t: &SpectralParams, y_n: f64, sign: i8, lo: f64, hi: f64) -> Result<PhaseCheck> {
    let ta = t.as_array();
    let step = 1e-2;
    let count = ((hi - lo) / step).ceil() as usize;
    let phase = |tau: f64| -> Result<Complex64> {
        Ok(gamma_pm(Complex64::new(-0.5, tau), t, sign)? * Complex64::from_polar(1.0, -tau * y_n.ln()))
    };
    let mut prev = phase(lo)?;
    let mut prev_freq = f64::NAN;
    let mut tau_exact = f64::NAN;
    for k in 1..=count {
        let tau = lo + k as f64 * step;
        let cur = phase(tau)?;
        let freq = (cur / prev).arg() / step;
        if prev_freq.is_finite() && prev_freq.signum() != freq.signum() {
            let mid = tau - 1.5 * step;
            tau_exact = mid + step * prev_freq / (prev_freq - freq);
            break;
        }
        prev = cur;
        prev_freq = freq;
    }
    if !tau_exact.is_finite() {
        return Err(Error::domain("kernel phase has no stationary point in the range"));
    }
    let target = (8.0 * PI.powi(3) * y_n).ln();
    let f = |tau: f64| TAU * h0_derivative(tau, &ta) - target;
    let (mut a, mut b) = (lo, hi);
    if f(a).signum() == f(b).signum() {
        return Err(Error::domain("h0 model has no stationary point in the range"));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m).signum() == f(a).signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(PhaseCheck { tau_exact, tau_model: 0.5 * (a + b), resolution: step })
}

// ---------------------------------------------------------------------------
// The simplified five-fold integral

/// I(X) = int U(y0(tau)) W1(|tau+t3|/N0) |tau|^{-1/2} X^{-i tau} e(h(tau)) dtau
/// over tau = eta - t3 > 0 on fixed nodes, with
/// h(tau) = -3 tau/(2 pi) + (1/2 pi) sum (tau + t_j) log|tau + t_j| - (tau/pi) log(c tau)
/// and y0(tau) the stationary point of the GL(2) dual integral, which must
/// lie in the support [1/2, 5/2] of U.
pub struct JTransform {
    sum: ExpSum,
    pub c: f64,
    pub n0: f64,
    /// tau-range where the amplitude is non-zero.
    pub range: (f64, f64),
}

impl JTransform {
    /// Nodes resolve X up to x_max.
    pub fn new(p: &TransformParams, m: f64, x_max: f64) -> Result<Self> {
        let n0 = p.n0();
        let t = p.t;
        let t3 = t[2];
        let len = p.length();
        let (q, r) = (p.q as f64, p.r as f64);
        let ell = match p.variant {
            Variant::First => 1.0,
            Variant::Second => p.l,
        };
        // y0(tau) = (tau / scale)^2
        let scale = TAU * (len * m).sqrt() / (q * ell.sqrt());
        let (mut a, mut b) = (scale * 0.5f64.sqrt(), scale * 2.5f64.sqrt());
        // Window |tau + t3| <= T^eps N0.
        let w_hi = n0 * T_EPS;
        a = a.max(-t3 - w_hi);
        b = b.min(-t3 + w_hi);
        let c = (8.0 * PI.powi(3) * len / (q.powi(3) * r)).sqrt() * q * ell.sqrt()
            / (TAU * std::f64::consts::E * (len * m).sqrt());
        if a >= b {
            // The amplitude vanishes identically.
            return Ok(JTransform { sum: ExpSum::new(Vec::new(), Vec::new()), c, n0, range: (a, a) });
        }
        if a < 1e-3 * n0 {
            return Err(Error::domain(format!(
                "|eta - t3| reaches {a:.3e} < N0/1000 inside the window"
            )));
        }
        let h = |tau: f64| {
            let mut acc = -3.0 * tau - 2.0 * tau * (c * tau).ln();
            for tj in &t {
                let u = tau + tj;
                if u != 0.0 {
                    acc += u * u.abs().ln();
                }
            }
            acc / TAU
        };
        let rate = |tau: f64| {
            let d: f64 = t.iter().map(|tj| (tau + tj).abs().ln()).sum::<f64>() - 2.0 * (c * tau).ln() - 2.0;
            d.abs() + x_max.ln().abs() + 4.0
        };
        let r_max = [a, 0.5 * (a + b), b].iter().map(|&x| rate(x)).fold(0.0, f64::max);
        let panels = 16 + ((b - a) * r_max / 8.0).ceil() as usize;
        let (taus, ws) = GaussLegendre::standard().composite_points(a, b, panels);
        let (mut logs, mut weights) = (Vec::new(), Vec::new());
        for (tau, w) in taus.iter().zip(&ws) {
            let amp = tau_window((tau + t3).abs() / n0) * dual_window((tau / scale).powi(2));
            if amp == 0.0 {
                continue;
            }
            logs.push(*tau);
            weights.push(w * amp / tau.sqrt() * e(h(*tau)));
        }
        // Nodes are tau and the variable is log X.
        Ok(JTransform { sum: ExpSum::new(logs, weights), c, n0, range: (a, b) })
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.sum.at(x.ln())
    }

    /// Value of X at which the phase is stationary at the middle of the range.
    pub fn stationary_scale(&self, t: &[f64; 3]) -> f64 {
        let tau = 0.5 * (self.range.0 + self.range.1);
        let d: f64 = t.iter().map(|tj| (tau + tj).abs().ln()).sum::<f64>() - 2.0 * (self.c * tau).ln() - 2.0;
        d.exp()
    }
}

pub fn j_transform(p: &TransformParams, m: f64, n1n2sq: f64) -> Result<Complex64> {
    Ok(JTransform::new(p, m, n1n2sq)?.eval(n1n2sq))
}

/// Quadrature nodes and weights V(y) I_a(S y) conj(I_b(S y)) w on [1, 2],
/// fine enough for twists up to `max_freq`.
fn pair_profile(a: &JTransform, b: &JTransform, scale: f64, max_freq: f64) -> (Vec<f64>, Vec<Complex64>) {
    let v = Bump::on(1.0, 2.0);
    let rate = a
        .sum
        .logs
        .iter()
        .chain(&b.sum.logs)
        .fold(0.0f64, |m, t| m.max(t.abs()))
        * 2.0
        + TAU * max_freq.abs()
        + 10.0;
    let panels = 16 + (rate / 8.0).ceil() as usize;
    let (ys, ws) = GaussLegendre::standard().composite_points(1.0, 2.0, panels);
    let vals = ys
        .iter()
        .zip(&ws)
        .map(|(y, w)| {
            let x = scale * y;
            w * v.value(*y) * a.eval(x) * b.eval(x).conj()
        })
        .collect();
    (ys, vals)
}

/// int V(y) I_a(S y) conj(I_b(S y)) e(-f y) dy with V the standard bump on [1, 2].
pub fn j_pair_integral(a: &JTransform, b: &JTransform, scale: f64, freq: f64) -> Complex64 {
    let (ys, vals) = pair_profile(a, b, scale, freq);
    ys.iter().zip(&vals).map(|(y, v)| v * e(-freq * y)).sum()
}

// ---------------------------------------------------------------------------
// Truncation ranges

/// Smallest x_i such that |v_j| <= level * reference for every j >= i.
pub fn decay_onset(xs: &[f64], vals: &[f64], reference: f64, level: f64) -> Option<f64> {
    let mut onset = None;
    for (x, v) in xs.iter().zip(vals).rev() {
        if *v > level * reference {
            break;
        }
        onset = Some(*x);
    }
    onset
}

/// One row of the truncation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetRow {
    pub name: String,
    pub formula: f64,
    pub measured: f64,
    pub ratio: f64,
    pub within_100: bool,
}

impl OnsetRow {
    pub fn new(name: &str, formula: f64, measured: f64) -> Self {
        let ratio = measured / formula;
        OnsetRow {
            name: name.to_string(),
            formula,
            measured,
            ratio,
            within_100: ratio.is_finite() && (1e-2..=1e2).contains(&ratio),
        }
    }
}

/// Derived lengths of a parameter set as the formulas give them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub params: TransformParams,
    pub big_q: f64,
    pub n0: f64,
    pub n_tilde: f64,
    pub m_tilde: f64,
    pub n_tilde_nongeneric: f64,
    pub rows: Vec<OnsetRow>,
}

impl TruncationReport {
    pub fn flagged(&self) -> Vec<&OnsetRow> {
        self.rows.iter().filter(|r| !r.within_100).collect()
    }
}

pub fn truncation_report(p: &TransformParams) -> TruncationReport {
    TruncationReport {
        params: *p,
        big_q: p.big_q(),
        n0: p.n0(),
        n_tilde: p.n_tilde(),
        m_tilde: p.m_tilde(),
        n_tilde_nongeneric: p.n_tilde_nongeneric(),
        rows: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Onset sweeps

/// |value| along one parameter, with the level that defines the decay onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub name: String,
    /// Name of the swept parameter.
    pub param: String,
    pub points: Vec<(f64, f64)>,
    pub reference: f64,
    pub level: f64,
    pub onset: Option<f64>,
}

impl Sweep {
    fn new(name: &str, param: &str, points: Vec<(f64, f64)>, reference: f64, level: f64) -> Self {
        let (xs, vs): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
        let onset = decay_onset(&xs, &vs, reference, level);
        Sweep { name: name.into(), param: param.into(), points, reference, level, onset }
    }

    /// Row comparing the onset with `formula`; a sweep that never decays gives NaN.
    pub fn row(&self, formula: f64) -> OnsetRow {
        OnsetRow::new(&self.name, formula, self.onset.unwrap_or(f64::NAN))
    }
}

/// Geometric grid from `lo` to at least `hi` with `per_decade` points per decade.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let step = 10f64.powf(1.0 / per_decade as f64);
    let mut out = vec![lo];
    while *out.last().unwrap() < hi {
        let next = out.last().unwrap() * step;
        out.push(next);
    }
    out
}

/// |G_sign(n1^2 n2/(q^3 r))| from the contour form against n1^2 n2; onset where
/// it stays below `level` times the peak.
pub fn n2_contour_sweep(
    p: &TransformParams,
    psi: &TestFunction,
    sign: i8,
    grid: &[f64],
    level: f64,
) -> Result<Sweep> {
    let denom = (p.q as f64).powi(3) * p.r as f64;
    let mut points = Vec::with_capacity(grid.len());
    for &x in grid {
        let v = gl3_g_contour(x / denom, psi, &p.spectral(), -0.5, sign)?;
        points.push((x, v.value.norm()));
    }
    let peak = points.iter().map(|pt| pt.1).fold(0.0, f64::max);
    Ok(Sweep::new("n2 range", "n1^2 n2", points, peak, level))
}

/// q^3 r T^eps max prod |tau + t_j| / N over the stationary tau-range of psi:
/// the range of n1^2 n2 before the bound on the tau-range is inserted.
pub fn n2_instance_bound(p: &TransformParams, psi: &TestFunction) -> f64 {
    let (lo, hi) = psi.stationary_tau_range();
    let prod = (0..=256)
        .map(|i| {
            let tau = lo + (hi - lo) * i as f64 / 256.0;
            p.t.iter().map(|tj| (tau + tj).abs()).product::<f64>()
        })
        .fold(0.0, f64::max);
    (p.q as f64).powi(3) * p.r as f64 * T_EPS * prod / p.length()
}

/// max over both branches of |I'(m)| against m; onset where it stays below
/// `level` times int U.
pub fn m_dual_sweep(p: &TransformParams, x: f64, tv: f64, grid: &[f64], level: f64) -> Result<Sweep> {
    let mut points = Vec::with_capacity(grid.len());
    for &m in grid {
        let v = gl2_dual_integral(m, x, p.q as f64, tv, p.length(), p.big_q())?;
        points.push((m, v[0].norm().max(v[1].norm())));
    }
    Ok(Sweep::new("m range", "m", points, 1.5, level))
}

/// |int V I_m conj(I_{m+dm})| / |int V |I_m|^2| against dm.
pub fn decorrelation_sweep(p: &TransformParams, m: f64, dms: &[f64], level: f64) -> Result<Sweep> {
    let base = JTransform::new(p, m, 1e6)?;
    let scale = base.stationary_scale(&p.t);
    let diag = j_pair_integral(&base, &base, scale, 0.0).norm();
    let mut points = Vec::with_capacity(dms.len());
    for &dm in dms {
        let other = JTransform::new(p, m + dm, 1e6)?;
        points.push((dm, j_pair_integral(&base, &other, scale, 0.0).norm() / diag));
    }
    Ok(Sweep::new("m - m' window", "m' - m", points, 1.0, level))
}

/// Poisson-dual variable n2 with q2 = q2': the y-integral with the extra
/// factor e(-n2 S y/(n1 q1 q2^2 r)), S the size of n1^2 n2, against n2,
/// relative to n2 = 0. Returns the sweep and S.
pub fn twist_sweep(p: &TransformParams, m: f64, q1: f64, q2: f64, n2s: &[f64], level: f64) -> Result<(Sweep, f64)> {
    let j = JTransform::new(p, m, 1e6)?;
    let scale = j.stationary_scale(&p.t);
    let denom = p.n1 as f64 * q1 * q2 * q2 * p.r as f64;
    let max_freq = n2s.iter().fold(0.0f64, |a, n2| a.max(n2.abs())) * scale / denom;
    let (ys, vals) = pair_profile(&j, &j, scale, max_freq);
    let at = |f: f64| ys.iter().zip(&vals).map(|(y, v)| v * e(-f * y)).sum::<Complex64>().norm();
    let diag = at(0.0);
    let points = n2s.iter().map(|&n2| (n2, at(n2 * scale / denom) / diag)).collect();
    Ok((Sweep::new("Poisson n2 range", "n2", points, 1.0, level), scale))
}

/// Share of the unwindowed G_star integrand mass with |tau + t3| > R, against R.
pub fn eta_window_sweep(
    p: &TransformParams,
    psi: &TestFunction,
    y: f64,
    sign: i8,
    radii: &[f64],
    level: f64,
) -> Result<Sweep> {
    let (lo, h, vals) = star_integrand(p, psi, y, sign)?;
    let t3 = p.t[2];
    let total: f64 = vals.iter().map(|v| v.norm()).sum();
    let points = radii
        .iter()
        .map(|&r| {
            let beyond: f64 = vals
                .iter()
                .enumerate()
                .filter(|(k, _)| (lo + *k as f64 * h + t3).abs() > r)
                .map(|(_, v)| v.norm())
                .sum();
            (r, beyond / total)
        })
        .collect();
    Ok(Sweep::new("|eta| window", "|tau + t3|", points, 1.0, level))
}

/// Inputs of the onset sweeps beyond the transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetSetup {
    /// Twist of the GL(3) test function.
    pub x: f64,
    pub v: f64,
    /// Live sign of G.
    pub sign: i8,
    /// |t3 + v| used for the GL(2) dual integral.
    pub dual_freq: f64,
    /// m for the J-transform sweeps.
    pub m: f64,
}

/// Runs all five onset sweeps and fills the report rows.
pub fn truncation_sweeps(p: &TransformParams, setup: &OnsetSetup) -> Result<(TruncationReport, Vec<Sweep>)> {
    let mut report = truncation_report(p);
    let psi = TestFunction::gl3(p, Bump::on(1.0, 2.0), setup.x, setup.v)?;
    let q = p.q as f64;

    let n2 = n2_contour_sweep(p, &psi, setup.sign, &geometric_grid(10.0, 1e7, 4), 1e-6)?;
    report.rows.push(n2.row(p.n_tilde() / (p.n1 * p.n1) as f64));
    let mut inst = n2.row(n2_instance_bound(p, &psi));
    inst.name = "n2 range (instance bound)".into();
    report.rows.push(inst);

    let m = m_dual_sweep(p, setup.x, setup.dual_freq, &geometric_grid(1.0, 10.0 * p.m_tilde(), 48), 1e-6)?;
    report.rows.push(m.row(p.m_tilde()));

    let dm = decorrelation_sweep(p, setup.m, &geometric_grid(0.5, 200.0, 8), 1e-3)?;
    report.rows.push(dm.row(T_EPS * setup.m / p.n0()));

    let (tw, block) = twist_sweep(p, setup.m, 1.0, q, &geometric_grid(1e-2, 10.0, 12), 1e-3)?;
    report.rows.push(tw.row(p.n2_range_for_block(q, 1.0, block)));

    let eta = eta_window_sweep(p, &psi, 1.0, setup.sign, &geometric_grid(1.0, 1e4, 12), 1e-6)?;
    report.rows.push(eta.row(T_EPS * p.n0()));

    Ok((report, vec![n2, m, dm, tw, eta]))
}
