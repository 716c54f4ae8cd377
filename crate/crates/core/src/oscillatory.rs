//! Oscillatory integrals: an adaptive Gauss-Kronrod oracle, the
//! non-stationary phase certificate, stationary phase expansion and the
//! one- and two-dimensional second derivative bounds.

use crate::quad::GaussLegendre;
use crate::{Complex64, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Evaluation budget of the adaptive oracle.
pub const EVAL_BUDGET: usize = 10_000_000;

/// Default exponent in the non-stationary certificate.
pub const CERT_A: i32 = 5;

/// Hypothesis parameter exposed for the stationary phase lemma.
pub const DEFAULT_DELTA: f64 = 0.05;

/// exp(-a / (1 - u^2)) on |u| < 1 with u = (x - center) / halfwidth, times `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub halfwidth: f64,
    pub power: f64,
    pub scale: f64,
}

/// Derivatives of -a/(1-u^2) = -(a/2) (1/(1-u) + 1/(1+u)) of orders 0..=n.
fn exponent_derivatives(a: f64, u: f64, n: usize) -> Vec<f64> {
    let (p, m) = (1.0 / (1.0 - u), 1.0 / (1.0 + u));
    let mut out = Vec::with_capacity(n + 1);
    let (mut pk, mut mk) = (p, m);
    let mut fact = 1.0;
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
            pk *= p;
            mk *= m;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(-0.5 * a * fact * (pk + sign * mk));
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Bump {
    pub fn new(center: f64, halfwidth: f64) -> Self {
        Bump {
            center,
            halfwidth,
            power: 1.0,
            scale: 1.0,
        }
    }

    /// Bump supported on [a, b].
    pub fn on(a: f64, b: f64) -> Self {
        Bump::new(0.5 * (a + b), 0.5 * (b - a))
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }

    /// Same shape rescaled so that its integral is 1.
    pub fn normalized(self) -> Self {
        let i = Bump { scale: 1.0, ..self }.integral();
        self.with_scale(1.0 / i)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.halfwidth;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        self.scale * (-self.power / (1.0 - u * u)).exp()
    }

    /// j-th derivative in x, exact via the Leibniz recurrence for exp(g).
    pub fn derivative(&self, x: f64, j: usize) -> f64 {
        if j == 0 {
            return self.value(x);
        }
        let u = (x - self.center) / self.halfwidth;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let g = exponent_derivatives(self.power, u, j);
        let mut w = vec![g[0].exp()];
        for n in 1..=j {
            let mut s = 0.0;
            for k in 0..n {
                s += binomial(n - 1, k) * g[k + 1] * w[n - 1 - k];
            }
            w.push(s);
        }
        self.scale * w[j] / self.halfwidth.powi(j as i32)
    }

    pub fn integral(&self) -> f64 {
        let (a, b) = self.support();
        GaussLegendre::standard().integrate(|x| self.value(x), a, b, 64)
    }

    pub fn max_value(&self) -> f64 {
        self.scale * (-self.power).exp()
    }
}

/// Smooth step equal to 1 on (-inf, 0] and 0 on [1, inf).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let f = |s: f64| (-1.0 / s).exp();
    let (a, b) = (f(1.0 - t), f(t));
    a / (a + b)
}

/// Smooth function equal to 1 on [lo, hi] and supported in [outer_lo, outer_hi].
pub fn plateau(x: f64, lo: f64, hi: f64, outer_lo: f64, outer_hi: f64) -> f64 {
    if x <= outer_lo || x >= outer_hi {
        return 0.0;
    }
    if x < lo {
        return smooth_step((lo - x) / (lo - outer_lo));
    }
    if x > hi {
        return smooth_step((x - hi) / (outer_hi - hi));
    }
    1.0
}

/// A smooth amplitude with derivative oracles and scale data X, U.
#[derive(Clone)]
pub struct AmplitudeSpec {
    pub f: RealFn,
    /// Derivative oracles of orders 1 and 2.
    pub d1: RealFn,
    pub d2: RealFn,
    pub support: (f64, f64),
    pub x_scale: f64,
    pub u_scale: f64,
}

impl fmt::Debug for AmplitudeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AmplitudeSpec")
            .field("support", &self.support)
            .field("x_scale", &self.x_scale)
            .field("u_scale", &self.u_scale)
            .finish()
    }
}

impl AmplitudeSpec {
    /// Builds the amplitude of a bump, choosing U as the largest scale with
    /// max |w^(j)| <= 10 X / U^j for j <= `orders`.
    pub fn from_bump(b: Bump) -> Self {
        Self::from_bump_orders(b, CERT_A as usize)
    }

    pub fn from_bump_orders(b: Bump, orders: usize) -> Self {
        let x_scale = b.max_value();
        let (lo, hi) = b.support();
        let mut u = b.halfwidth;
        for j in 1..=orders {
            let m = (1..2000)
                .map(|i| b.derivative(lo + (hi - lo) * i as f64 / 2000.0, j).abs())
                .fold(0.0, f64::max);
            if m > 0.0 {
                u = u.min((10.0 * x_scale / m).powf(1.0 / j as f64));
            }
        }
        AmplitudeSpec {
            f: Arc::new(move |x| b.value(x)),
            d1: Arc::new(move |x| b.derivative(x, 1)),
            d2: Arc::new(move |x| b.derivative(x, 2)),
            support: (lo, hi),
            x_scale,
            u_scale: u,
        }
    }

    /// Amplitude from a closure; derivatives by central differences.
    pub fn from_fn(f: RealFn, support: (f64, f64), x_scale: f64, u_scale: f64) -> Self {
        let h = 1e-4 * (support.1 - support.0);
        let f1 = f.clone();
        let f2 = f.clone();
        AmplitudeSpec {
            d1: Arc::new(move |x| (f1(x + h) - f1(x - h)) / (2.0 * h)),
            d2: Arc::new(move |x| (f2(x + h) - 2.0 * f2(x) + f2(x - h)) / (h * h)),
            f,
            support,
            x_scale,
            u_scale,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// |w(b)| + int |w'|, the variation entering second derivative bounds.
    pub fn variation(&self) -> f64 {
        let (a, b) = self.support;
        let d1 = self.d1.clone();
        self.eval(b).abs() + GaussLegendre::standard().integrate(|x| d1(x).abs(), a, b, 200)
    }
}

/// A real phase with derivative oracles and scale data Y, Q, R.
#[derive(Clone)]
pub struct PhaseSpec {
    pub h: RealFn,
    pub d1: RealFn,
    pub d2: RealFn,
    pub d3: RealFn,
    pub y_scale: f64,
    pub q_scale: f64,
    pub r_scale: f64,
}

impl fmt::Debug for PhaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSpec")
            .field("y_scale", &self.y_scale)
            .field("q_scale", &self.q_scale)
            .field("r_scale", &self.r_scale)
            .finish()
    }
}

impl PhaseSpec {
    /// h(t) = lambda t. With Q = lambda and Y = lambda^2 every derivative
    /// condition h^(j) << Y / Q^j holds.
    pub fn linear(lambda: f64) -> Self {
        PhaseSpec {
            h: Arc::new(move |t| lambda * t),
            d1: Arc::new(move |_| lambda),
            d2: Arc::new(|_| 0.0),
            d3: Arc::new(|_| 0.0),
            y_scale: lambda * lambda,
            q_scale: lambda,
            r_scale: lambda.abs(),
        }
    }

    /// h(t) = lambda (t - c)^2, with Y = lambda and Q = 1.
    pub fn quadratic(lambda: f64, c: f64) -> Self {
        PhaseSpec {
            h: Arc::new(move |t| lambda * (t - c) * (t - c)),
            d1: Arc::new(move |t| 2.0 * lambda * (t - c)),
            d2: Arc::new(move |_| 2.0 * lambda),
            d3: Arc::new(|_| 0.0),
            y_scale: lambda.abs(),
            q_scale: 1.0,
            r_scale: 0.0,
        }
    }

    pub fn new(h: RealFn, d1: RealFn, d2: RealFn, d3: RealFn, y: f64, q: f64, r: f64) -> Self {
        PhaseSpec {
            h,
            d1,
            d2,
            d3,
            y_scale: y,
            q_scale: q,
            r_scale: r,
        }
    }

    /// Largest relative mismatch between the derivative oracles and
    /// central differences at `n` points of [a, b].
    pub fn derivative_mismatch(&self, a: f64, b: f64, n: usize) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let t = a + (b - a) * (i as f64 + 0.5) / n as f64;
            let step = 1e-5 * (1.0 + t.abs());
            let pairs: [(&RealFn, &RealFn); 3] = [(&self.h, &self.d1), (&self.d1, &self.d2), (&self.d2, &self.d3)];
            for (f, df) in pairs {
                let fd = (f(t + step) - f(t - step)) / (2.0 * step);
                let exact = df(t);
                let scale = exact.abs().max(1e-8 * (1.0 + f(t).abs()));
                worst = worst.max((fd - exact).abs() / scale.max(1e-300));
            }
        }
        worst
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Adaptive G7-K15 integration of a complex integrand on [a, b].
///
/// Panels are first split so that the supplied phase varies by at most pi/2
/// on each, then bisected depth-first until the Kronrod error estimate is
/// below tol times the panel's share of the interval.
pub fn adaptive_integrate<F, P>(f: F, phase: P, a: f64, b: f64, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
    P: Fn(f64) -> f64,
{
    let tol = tol.max(1e-15);
    let total = b - a;
    if total <= 0.0 {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let samples = 512;
    let mut breaks = vec![a];
    let mut last = phase(a);
    let mut prev_t = a;
    for i in 1..=samples {
        let t = a + total * i as f64 / samples as f64;
        let v = phase(t);
        let pieces = ((v - last).abs() / FRAC_PI_2).ceil().max(1.0) as usize;
        for k in 1..pieces {
            breaks.push(prev_t + (t - prev_t) * k as f64 / pieces as f64);
        }
        if pieces > 1 || i == samples || i % 64 == 0 {
            breaks.push(t);
        }
        last = v;
        prev_t = t;
    }
    breaks.dedup();
    let mut stack: Vec<(f64, f64)> = breaks.windows(2).rev().map(|w| (w[0], w[1])).collect();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        evals += 15;
        let local_tol = tol * (hi - lo) / total;
        if e <= local_tol || (hi - lo) < 1e-13 * total.max(1.0) {
            value += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
        if evals > EVAL_BUDGET {
            return Err(Error::Resource {
                what: format!("adaptive quadrature exceeded {EVAL_BUDGET} evaluations"),
                partial_re: value.re,
                partial_im: value.im,
            });
        }
    }
    Ok(QuadResult {
        value,
        error_estimate: err,
        evaluations: evals,
    })
}

/// int w(t) e^{i h(t)} dt over the support of w.
pub fn integrate_oscillatory(w: &AmplitudeSpec, h: &PhaseSpec, tol: f64) -> Result<Complex64> {
    integrate_oscillatory_detailed(w, h, tol).map(|r| r.value)
}

pub fn integrate_oscillatory_detailed(w: &AmplitudeSpec, h: &PhaseSpec, tol: f64) -> Result<QuadResult> {
    if tol < 1e-12 {
        return Err(Error::domain("tolerance must be at least 1e-12"));
    }
    let (a, b) = w.support;
    let (wf, hf) = (w.f.clone(), h.h.clone());
    adaptive_integrate(
        move |t| Complex64::from_polar(wf(t), hf(t)),
        |t| (h.h)(t),
        a,
        b,
        tol,
    )
}

fn sample_points(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * (i as f64 + 0.5) / n as f64)
}

/// (b - a) X ((Q R / sqrt(Y))^-A + (R U)^-A) with R the sampled min |h'|.
pub fn nonstationary_certificate(w: &AmplitudeSpec, h: &PhaseSpec) -> Result<f64> {
    nonstationary_certificate_with(w, h, CERT_A)
}

pub fn nonstationary_certificate_with(w: &AmplitudeSpec, h: &PhaseSpec, a_exp: i32) -> Result<f64> {
    let (a, b) = w.support;
    let mut r_min = f64::INFINITY;
    let mut signs = (false, false);
    for t in sample_points(a, b, 4000) {
        let d = (h.d1)(t);
        r_min = r_min.min(d.abs());
        if d > 0.0 {
            signs.0 = true;
        } else if d < 0.0 {
            signs.1 = true;
        }
    }
    if r_min <= 0.0 || (signs.0 && signs.1) {
        return Err(Error::precondition("h' vanishes on the support"));
    }
    let r = if h.r_scale > 0.0 { h.r_scale.min(r_min) } else { r_min };
    let t1 = (h.q_scale * r / h.y_scale.sqrt()).powi(-a_exp);
    let t2 = (r * w.u_scale).powi(-a_exp);
    Ok((b - a) * w.x_scale * (t1 + t2))
}

/// Locates the unique zero of h' on [a, b].
pub fn find_stationary_point(h: &PhaseSpec, a: f64, b: f64) -> Result<f64> {
    let n = 4000;
    let mut roots = Vec::new();
    let mut prev_t = a;
    let mut prev = (h.d1)(a);
    for i in 1..=n {
        let t = a + (b - a) * i as f64 / n as f64;
        let v = (h.d1)(t);
        if v == 0.0 {
            roots.push((t, t));
        } else if prev != 0.0 && prev.signum() != v.signum() {
            roots.push((prev_t, t));
        }
        prev = v;
        prev_t = t;
    }
    roots.dedup_by(|x, y| (x.0 - y.1).abs() < 1e-15);
    match roots.len() {
        0 => Err(Error::domain("no stationary point in the support")),
        1 => {
            let (mut lo, mut hi) = roots[0];
            let flo = (h.d1)(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = (h.d1)(mid);
                if fm == 0.0 {
                    return Ok(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
        _ => Err(Error::domain("several stationary points in the support")),
    }
}

/// Central difference of even order 2 or 4 with one Richardson step.
fn even_derivative<F: Fn(f64) -> Complex64>(g: &F, t: f64, order: usize, step: f64) -> Complex64 {
    let d = |s: f64| match order {
        0 => g(t),
        2 => (g(t + s) - g(t) * 2.0 + g(t - s)) / (s * s),
        4 => {
            (g(t + 2.0 * s) - g(t + s) * 4.0 + g(t) * 6.0 - g(t - s) * 4.0 + g(t - 2.0 * s))
                / s.powi(4)
        }
        _ => unreachable!("orders above 4 are not supported"),
    };
    if order == 0 {
        return d(step);
    }
    (d(step / 2.0) * 4.0 - d(step)) / 3.0
}

/// Stationary phase expansion with n_terms <= 3 terms.
pub fn stationary_phase_expand(w: &AmplitudeSpec, h: &PhaseSpec, n_terms: usize) -> Result<Complex64> {
    if n_terms == 0 || n_terms > 3 {
        return Err(Error::domain("n_terms must be 1, 2 or 3"));
    }
    let (a, b) = w.support;
    let t0 = find_stationary_point(h, a, b)?;
    let h2 = (h.d2)(t0);
    if h2 == 0.0 {
        return Err(Error::domain("degenerate stationary point"));
    }
    if h2 < 0.0 {
        let neg = PhaseSpec {
            h: {
                let f = h.h.clone();
                Arc::new(move |t| -f(t))
            },
            d1: {
                let f = h.d1.clone();
                Arc::new(move |t| -f(t))
            },
            d2: {
                let f = h.d2.clone();
                Arc::new(move |t| -f(t))
            },
            d3: {
                let f = h.d3.clone();
                Arc::new(move |t| -f(t))
            },
            ..h.clone()
        };
        return stationary_phase_expand(w, &neg, n_terms).map(|z| z.conj());
    }
    let h0 = (h.h)(t0);
    let (wf, hf) = (w.f.clone(), h.h.clone());
    let g = move |t: f64| {
        let big_h = hf(t) - h0 - 0.5 * h2 * (t - t0) * (t - t0);
        Complex64::from_polar(wf(t), big_h)
    };
    let step = w.u_scale * 1e-2;
    let i = Complex64::new(0.0, 1.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut fact = 1.0;
    for n in 0..n_terms {
        if n > 0 {
            fact *= n as f64;
        }
        let gd = even_derivative(&g, t0, 2 * n, step);
        let coef = (i / (2.0 * h2)).powi(n as i32) / fact;
        sum += coef * gd;
    }
    let lead = (2.0 * PI).sqrt() * Complex64::from_polar(1.0, FRAC_PI_4);
    Ok(Complex64::from_polar(1.0, h0) / h2.sqrt() * lead * sum)
}

/// 8 Var(w) / sqrt(lambda_2) where |h''| >= lambda_2 on the support.
pub fn second_derivative_bound_1d(w: &AmplitudeSpec, h: &PhaseSpec) -> Result<f64> {
    let (a, b) = w.support;
    let mut lo = f64::INFINITY;
    let (mut pos, mut neg) = (false, false);
    for t in sample_points(a, b, 4000) {
        let d = (h.d2)(t);
        lo = lo.min(d.abs());
        if d > 0.0 {
            pos = true;
        } else if d < 0.0 {
            neg = true;
        }
    }
    if (pos && neg) || lo <= 0.0 {
        return Err(Error::precondition("h'' changes sign or vanishes on the support"));
    }
    Ok(8.0 * w.variation() / lo.sqrt())
}

/// A smooth amplitude on a rectangle with its mixed derivative.
#[derive(Clone)]
pub struct Amplitude2D {
    pub g: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub g_xy: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub rect: (f64, f64, f64, f64),
}

impl Amplitude2D {
    pub fn tensor_bump(bx: Bump, by: Bump) -> Self {
        let (a, b) = bx.support();
        let (c, d) = by.support();
        Amplitude2D {
            g: Arc::new(move |x, y| bx.value(x) * by.value(y)),
            g_xy: Arc::new(move |x, y| bx.derivative(x, 1) * by.derivative(y, 1)),
            rect: (a, b, c, d),
        }
    }

    pub fn variation(&self) -> f64 {
        let (a, b, c, d) = self.rect;
        let gl = GaussLegendre::standard();
        let gxy = self.g_xy.clone();
        gl.integrate(|x| gl.integrate(|y| gxy(x, y).abs(), c, d, 40), a, b, 40)
    }
}

#[derive(Clone)]
pub struct Phase2D {
    pub f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub f_xx: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub f_yy: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub f_xy: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Phase2D {
    /// f(x, y) = lambda (x^2 + y^2).
    pub fn radial(lambda: f64) -> Self {
        Phase2D {
            f: Arc::new(move |x, y| lambda * (x * x + y * y)),
            f_xx: Arc::new(move |_, _| 2.0 * lambda),
            f_yy: Arc::new(move |_, _| 2.0 * lambda),
            f_xy: Arc::new(|_, _| 0.0),
        }
    }
}

/// Tensor Gauss-Legendre value of the double integral of g e^{i f}.
pub fn integrate_2d(g: &Amplitude2D, f: &Phase2D, panels: usize) -> Complex64 {
    let (a, b, c, d) = g.rect;
    let gl = GaussLegendre::standard();
    let (xs, wx) = gl.composite_points(a, b, panels);
    let (ys, wy) = gl.composite_points(c, d, panels);
    let mut s = Complex64::new(0.0, 0.0);
    for (x, wxi) in xs.iter().zip(&wx) {
        let mut row = Complex64::new(0.0, 0.0);
        for (y, wyi) in ys.iter().zip(&wy) {
            let amp = (g.g)(*x, *y);
            if amp != 0.0 {
                row += Complex64::from_polar(amp, (f.f)(*x, *y)) * *wyi;
            }
        }
        s += row * *wxi;
    }
    s
}

/// ((1 + log((b-a)(d-c)) + log L1 + log L2) / (L1 L2) + r / L2) Var(g).
pub fn second_derivative_bound_2d(
    g: &Amplitude2D,
    f: &Phase2D,
    lambda1: f64,
    lambda2: f64,
    r: f64,
) -> Result<f64> {
    let (a, b, c, d) = g.rect;
    let n = 40;
    for i in 0..n {
        for j in 0..n {
            let x = a + (b - a) * (i as f64 + 0.5) / n as f64;
            let y = c + (d - c) * (j as f64 + 0.5) / n as f64;
            let (fxx, fyy, fxy) = ((f.f_xx)(x, y), (f.f_yy)(x, y), (f.f_xy)(x, y));
            let l1 = lambda1 * lambda1;
            let l2 = lambda2 * lambda2;
            let ok = (fxx.abs() >= l1 / 10.0 && fxx.abs() <= 10.0 * l1)
                && (fyy.abs() >= l2 / 10.0 && fyy.abs() <= 10.0 * l2)
                && fxy.abs() <= 10.0 * lambda1 * lambda2
                && (fxx * fyy - fxy * fxy).abs() >= l1 * l2 / 10.0;
            if !ok {
                return Err(Error::precondition(format!(
                    "Hessian condition fails at ({x:.3}, {y:.3})"
                )));
            }
        }
    }
    let area = ((b - a) * (d - c)).ln();
    let lead = (1.0 + area + lambda1.ln() + lambda2.ln()) / (lambda1 * lambda2) + r / lambda2;
    Ok(lead * g.variation())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump::new(1.5, 0.5).with_power(2.0);
        for x in [1.1, 1.4, 1.5, 1.8] {
            for j in 1..4 {
                let s = 1e-5;
                let fd = (b.derivative(x + s, j - 1) - b.derivative(x - s, j - 1)) / (2.0 * s);
                let ex = b.derivative(x, j);
                assert!((fd - ex).abs() <= 1e-5 * (1.0 + ex.abs()), "x = {x}, j = {j}");
            }
        }
        assert_eq!(b.value(0.9), 0.0);
        assert_eq!(b.derivative(2.1, 3), 0.0);
    }

    #[test]
    fn normalized_bump() {
        let b = Bump::on(1.0, 2.0).normalized();
        assert!((b.integral() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(1.5, 1.0, 2.0, 0.5, 2.5), 1.0);
        assert_eq!(plateau(0.5, 1.0, 2.0, 0.5, 2.5), 0.0);
        let v = plateau(0.75, 1.0, 2.0, 0.5, 2.5);
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_integral() {
        let w = AmplitudeSpec::from_bump(Bump::on(1.0, 2.0));
        let h = PhaseSpec::new(
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            1.0,
            1.0,
            0.0,
        );
        let v = integrate_oscillatory(&w, &h, 1e-12).unwrap();
        assert!((v.re - Bump::on(1.0, 2.0).integral()).abs() < 1e-10);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn linear_phase_decay() {
        let w = AmplitudeSpec::from_bump(Bump::on(1.0, 2.0));
        let v = integrate_oscillatory(&w, &PhaseSpec::linear(200.0), 1e-12).unwrap();
        assert!(v.norm() <= 10.0 / 200f64.powi(2));
    }

    #[test]
    fn certificate_precondition() {
        let w = AmplitudeSpec::from_bump(Bump::on(-1.0, 1.0));
        assert!(nonstationary_certificate(&w, &PhaseSpec::quadratic(10.0, 0.0)).is_err());
        assert!(stationary_phase_expand(&w, &PhaseSpec::linear(10.0), 1).is_err());
    }

    #[test]
    fn tolerance_floor() {
        let w = AmplitudeSpec::from_bump(Bump::on(1.0, 2.0));
        assert!(integrate_oscillatory(&w, &PhaseSpec::linear(1.0), 1e-13).is_err());
    }
}
