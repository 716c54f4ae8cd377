//! The Duke-Friedlander-Iwaniec expansion of the Kronecker delta.
//!
//! With a weight w supported on [C, 2C], C = sqrt(L), and normalised by
//! sum_{d >= 1} w(d) = 1, every n satisfies
//!
//! ```text
//! delta(n) = sum_{d | n} (w(d) - w(|n|/d))
//!          = sum_{q <= Q} sum*_{a mod q} e(an/q) sum_r (w(qr) - w(|n|/(qr))) / (qr).
//! ```
//!
//! The inner r-sum is rewritten as (qQ)^{-1} times the Fourier transform of
//! g(q, x) = g_reg(x) + D_q delta_0(x) at n/(qQ), where
//!
//! ```text
//! g_reg(x) = I_w - (Q/|x|) sum_{k >= 1} w(kQ/|x|),
//! D_q      = Q (sum_r w(qr)/r - int w(t)/t dt),
//! ```
//!
//! and I_w is the integral of w. The regular part is independent of q and
//! tends to 1 as x -> 0 and to 0 rapidly for |x| > 2.

use crate::arith::{ramanujan_sum, ramanujan_sum_direct};
use crate::forms::{GL3Coeffs, GL3Model, HoloForm};
use crate::oscillatory::{plateau, Bump};
use crate::quad::GaussLegendre;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

pub const MAX_L: u64 = 1_000_000;

/// Largest phase increment 2 pi y h allowed on a 20-point panel of width h.
const PANEL_PHASE: f64 = 8.0;
const MIN_LEVEL: u32 = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Level {
    nodes: Vec<f64>,
    /// quadrature weight times V(x) g_reg(x)
    weighted: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaExpansion {
    pub l: u64,
    pub c: f64,
    pub q: f64,
    pub seed: Bump,
    /// Normalising constant: the seed is seed_raw / z.
    z: f64,
    pub i_w: f64,
    /// D_q for q = 1..=floor(Q), index q - 1.
    pub atoms: Vec<f64>,
    /// V = 1 on [-v_plateau, v_plateau], supported in [-v_support, v_support].
    pub v_plateau: f64,
    pub v_support: f64,
    levels: Vec<Level>,
}

impl DeltaExpansion {
    pub fn q_max(&self) -> u64 {
        self.q.floor() as u64
    }

    /// w(t), normalised so that its integer samples sum to 1.
    pub fn weight(&self, t: f64) -> f64 {
        self.seed.value(t) / self.z
    }

    /// The regular part of g(q, x); it does not depend on q.
    pub fn g_reg(&self, x: f64) -> f64 {
        let x = x.abs();
        if x <= 0.0 {
            return self.i_w;
        }
        // w(kQ/x) != 0 needs C < kQ/x < 2C.
        let k_lo = (self.c * x / self.q).floor().max(1.0) as u64;
        let k_hi = (2.0 * self.c * x / self.q).ceil() as u64;
        let mut s = 0.0;
        for k in k_lo..=k_hi {
            s += self.weight(k as f64 * self.q / x);
        }
        self.i_w - self.q / x * s
    }

    /// g(q, x) - 1 away from the atom at x = 0.
    pub fn h(&self, x: f64) -> f64 {
        self.g_reg(x) - 1.0
    }

    pub fn atom(&self, q: u64) -> f64 {
        self.atoms[(q - 1) as usize]
    }

    pub fn v(&self, x: f64) -> f64 {
        plateau(x.abs(), -1.0, self.v_plateau, -2.0, self.v_support)
    }

    fn level_for(&self, y: f64) -> usize {
        let h_needed = PANEL_PHASE / (TAU * y.abs().max(1e-300));
        let mut j = 0;
        while j + 1 < self.levels.len() && 0.5f64.powi((MIN_LEVEL as usize + j) as i32) > h_needed {
            j += 1;
        }
        j
    }

    /// int V(x) g_reg(x) e(xy) dx over the real line (real by evenness).
    pub fn regular_transform(&self, y: f64) -> f64 {
        let lv = &self.levels[self.level_for(y)];
        let w = TAU * y;
        let mut s = 0.0;
        for (x, g) in lv.nodes.iter().zip(&lv.weighted) {
            s += g * (w * x).cos();
        }
        2.0 * s
    }

    /// Same integral restricted to |x| > cut.
    pub fn regular_transform_tail(&self, y: f64, cut: f64) -> f64 {
        let lv = &self.levels[self.level_for(y)];
        let w = TAU * y;
        let mut s = 0.0;
        for (x, g) in lv.nodes.iter().zip(&lv.weighted) {
            if *x > cut {
                s += g * (w * x).cos();
            }
        }
        2.0 * s
    }

    /// (1/Q) (1/q) c_q(n) int V g(q, x) e(nx/(qQ)) dx, the q-th term.
    pub fn term(&self, q: u64, n: i64) -> f64 {
        let c = ramanujan_sum(q, n);
        if c == 0 {
            return 0.0;
        }
        let y = n as f64 / (q as f64 * self.q);
        c as f64 * (self.atom(q) + self.regular_transform(y)) / (q as f64 * self.q)
    }

    /// term(q, n) for n = 0..=n_max in one pass.
    ///
    /// The integrand is smooth and even, so the trapezoid rule on [0, support]
    /// converges spectrally; the error is aliasing from frequency 1/h - y,
    /// which is negligible once 1/h exceeds the largest y by 100.
    pub fn term_row(&self, q: u64, n_max: u64) -> Vec<f64> {
        let scale = q as f64 * self.q;
        let y_max = n_max as f64 / scale;
        let steps = (self.v_support * (y_max + 100.0)).ceil() as usize;
        let h = self.v_support / steps as f64;
        let len = n_max as usize + 1;
        let mut acc = vec![0.0; len];
        for j in 0..steps {
            let x = j as f64 * h;
            let f = if j == 0 { 0.5 } else { 1.0 } * h * self.v(x) * self.g_reg(x);
            if f == 0.0 {
                continue;
            }
            let c1 = (TAU * x / scale).cos();
            let (mut prev, mut cur) = (c1, 1.0);
            for a in acc.iter_mut() {
                *a += f * cur;
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
        }
        let atom = self.atom(q);
        acc.iter()
            .enumerate()
            .map(|(n, s)| {
                let c = ramanujan_sum(q, n as i64);
                if c == 0 {
                    0.0
                } else {
                    c as f64 * (atom + 2.0 * s) / scale
                }
            })
            .collect()
    }

    /// The truncated expansion sum_q term(q, n) for n = 0..=n_max.
    pub fn delta_row(&self, n_max: u64) -> Vec<f64> {
        let mut out = vec![0.0; n_max as usize + 1];
        for q in 1..=self.q_max() {
            for (o, t) in out.iter_mut().zip(self.term_row(q, n_max)) {
                *o += t;
            }
        }
        out
    }
}

fn seed_for(l: u64, shape: &Bump) -> (f64, Bump) {
    let c = (l as f64).sqrt();
    let seed = Bump::new(1.5 * c, 0.5 * c).with_power(shape.power);
    (c, seed)
}

/// Builds the expansion for |n| <= 2L. Only the power of `omega` is used;
/// the seed is rescaled to [sqrt(L), 2 sqrt(L)] = [Q/2, Q].
pub fn build_g(l: u64, omega: Bump) -> Result<DeltaExpansion> {
    if !(4..=MAX_L).contains(&l) {
        return Err(Error::domain(format!("L must lie in [4, {MAX_L}]")));
    }
    let (c, seed) = seed_for(l, &omega);
    let q = 2.0 * c;
    let z: f64 = (1..=(2.0 * c).ceil() as u64).map(|d| seed.value(d as f64)).sum();
    let gl = GaussLegendre::standard();
    let (lo, hi) = seed.support();
    let panels = 200;
    let i_w = gl.integrate(|t| seed.value(t) / z, lo, hi, panels);
    let i_wt = gl.integrate(|t| seed.value(t) / z / t, lo, hi, panels);

    let q_max = q.floor() as u64;
    let atoms = (1..=q_max)
        .map(|qq| {
            let s: f64 = (1..=(q / qq as f64).ceil() as u64 + 1)
                .map(|r| seed.value((qq * r) as f64) / z / r as f64)
                .sum();
            q * (s - i_wt)
        })
        .collect();

    let mut exp = DeltaExpansion {
        l,
        c,
        q,
        seed,
        z,
        i_w,
        atoms,
        v_plateau: 60.0,
        v_support: 100.0,
        levels: Vec::new(),
    };

    let residual = ((1..=(2.0 * c).ceil() as u64).map(|d| exp.weight(d as f64)).sum::<f64>() - 1.0).abs();
    if residual > 1e-6 {
        return Err(Error::Construction(format!("normalisation residual {residual:e}")));
    }

    // Largest frequency is 2L/Q = C at q = 1.
    let h_needed = PANEL_PHASE / (TAU * c);
    let mut top = MIN_LEVEL;
    while 0.5f64.powi(top as i32) > h_needed {
        top += 1;
    }
    for j in MIN_LEVEL..=top {
        let panels = (exp.v_support * 2f64.powi(j as i32)).round() as usize;
        let (nodes, weights) = gl.composite_points(0.0, exp.v_support, panels);
        let weighted = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| w * exp.v(*x) * exp.g_reg(*x))
            .collect();
        exp.levels.push(Level { nodes, weighted });
    }
    Ok(exp)
}

/// (1/Q) sum_{q <= Q} (1/q) sum*_a e(na/q) int V(x) g(q, x) e(nx/(qQ)) dx.
pub fn delta_eval(exp: &DeltaExpansion, n: i64) -> Result<f64> {
    if n.unsigned_abs() > 2 * exp.l {
        return Err(Error::domain(format!("|n| = {} exceeds 2L = {}", n.abs(), 2 * exp.l)));
    }
    Ok((1..=exp.q_max()).map(|q| exp.term(q, n)).sum())
}

/// Largest |direct a-sum - c_q(n)| over q <= Q.
pub fn inner_sum_defect(exp: &DeltaExpansion, n: i64) -> f64 {
    (1..=exp.q_max())
        .map(|q| {
            let d = ramanujan_sum_direct(q, n);
            (d.re - ramanujan_sum(q, n) as f64).abs().max(d.im.abs())
        })
        .fold(0.0, f64::max)
}

/// Share of the expansion at n carried by |x| > cut.
pub fn tail_fraction(exp: &DeltaExpansion, n: i64, cut: f64) -> f64 {
    let mut tail = 0.0;
    let mut total = 0.0;
    for q in 1..=exp.q_max() {
        let c = ramanujan_sum(q, n) as f64;
        if c == 0.0 {
            continue;
        }
        let y = n as f64 / (q as f64 * exp.q);
        let scale = c.abs() / (q as f64 * exp.q);
        tail += scale * exp.regular_transform_tail(y, cut).abs();
        total += scale * (exp.atom(q) + exp.regular_transform(y)).abs();
    }
    tail / total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPropertiesReport {
    /// max |h(x)| / (10 (Q/q)(q/Q + |x|)^2)
    pub h_bound: f64,
    /// max |x^j g^(j)(x)| / (log Q min(Q/q, 1/|x|)) for j = 1, 2
    pub deriv: [f64; 2],
    /// max |g(x)| |x|^2 / 10 over |x| >= 2
    pub tail: f64,
    /// jump of min(Q/q, 1/|x|) across |x| = q/Q at q = Q
    pub branch_gap: f64,
}

pub fn g_properties_check(exp: &DeltaExpansion) -> GPropertiesReport {
    let q_big = exp.q;
    let qs: Vec<u64> = {
        let mut v: Vec<u64> = std::iter::successors(Some(1u64), |q| Some(q * 2))
            .take_while(|q| *q <= exp.q_max())
            .collect();
        v.push(exp.q_max());
        v
    };
    let xs: Vec<f64> = (0..=600).map(|i| 10f64.powf(-2.0 + 3.7 * i as f64 / 600.0)).collect();
    let step = 1e-3;
    let mut rep = GPropertiesReport {
        h_bound: 0.0,
        deriv: [0.0; 2],
        tail: 0.0,
        branch_gap: 0.0,
    };
    for &x in &xs {
        let g0 = exp.g_reg(x);
        let s = step * x.max(0.1);
        let (gp, gm) = (exp.g_reg(x + s), exp.g_reg((x - s).max(0.0)));
        let d1 = (gp - gm) / (2.0 * s);
        let d2 = (gp - 2.0 * g0 + gm) / (s * s);
        for &q in &qs {
            let qf = q as f64;
            let hb = 10.0 * (q_big / qf) * (qf / q_big + x).powi(2);
            rep.h_bound = rep.h_bound.max((g0 - 1.0).abs() / hb);
            let m = (q_big / qf).min(1.0 / x) * q_big.ln();
            rep.deriv[0] = rep.deriv[0].max(x * d1.abs() / m);
            rep.deriv[1] = rep.deriv[1].max(x * x * d2.abs() / m);
        }
        if x >= 2.0 {
            rep.tail = rep.tail.max(g0.abs() * x * x / 10.0);
        }
    }
    let at = |x: f64| (q_big / exp.q_max() as f64).min(1.0 / x);
    let x0 = exp.q_max() as f64 / q_big;
    rep.branch_gap = (at(x0 * (1.0 + 1e-12)) - at(x0 * (1.0 - 1e-12))).abs();
    rep
}

/// Writes rows q, x, re g, im g of the regular part on a grid; the atoms D_q
/// are written with x = 0 in a second block flagged by the column name.
pub fn export_g_csv<W: Write>(exp: &DeltaExpansion, q_list: &[u64], xs: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "x", "re", "im"]).map_err(|e| Error::Io(e.to_string()))?;
    for &q in q_list {
        for &x in xs {
            w.serialize((q, x, exp.g_reg(x), 0.0))
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    w.write_record(["q", "atom", "re", "im"]).map_err(|e| Error::Io(e.to_string()))?;
    for &q in q_list {
        w.serialize((q, 0.0, exp.atom(q), 0.0))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// t3 of the GL(3) model; the symmetric square is treated as t3 = 0.
pub fn model_t3(c: &GL3Coeffs) -> f64 {
    match &c.model {
        GL3Model::Sym2(_) => 0.0,
        GL3Model::Eisenstein(t) => t.t3,
    }
}

/// The v-window (1/K) W(v/K) with W a unit-mass bump on [1, 2].
pub fn v_window() -> Bump {
    Bump::on(1.0, 2.0).normalized()
}

/// |(1/K) int W(v/K) (m/n)^{iv} dv|.
pub fn v_damping(n: u64, m: u64, k: f64) -> f64 {
    let w = v_window();
    let phase = k * (m as f64 / n as f64).ln();
    GaussLegendre::standard()
        .integrate_complex(|u| crate::Complex64::from_polar(w.value(u), phase * u), 1.0, 2.0, 8)
        .norm()
}

/// Largest damping over n in [N, 2N] and m in [N/2, 5N/2] with |n - m| >= factor N / K.
pub fn v_damping_worst(n_scale: u64, k: f64, factor: f64) -> f64 {
    let gap = (factor * n_scale as f64 / k).ceil() as u64;
    let stride = (n_scale / 100).max(1);
    let mut worst = 0.0f64;
    for n in (n_scale..=2 * n_scale).step_by(stride as usize) {
        for m in (n_scale / 2).max(1)..=(5 * n_scale / 2) {
            if n.abs_diff(m) >= gap {
                worst = worst.max(v_damping(n, m, k));
            }
        }
    }
    worst
}

/// The diagonal sum with and without the averaged twist (m/n)^{i(t3 + v)}.
///
/// W(n/N) is the unit-mass bump on [1, 2] and U(m/N) the plateau equal to 1
/// on [1, 2] and supported in [1/2, 5/2].
pub fn conductor_lowering_check(
    f: &HoloForm,
    c: &GL3Coeffs,
    n_scale: f64,
    k: f64,
    r: u64,
) -> Result<(f64, f64)> {
    if n_scale > 1e4 {
        return Err(Error::domain("N must be at most 1e4"));
    }
    let w = v_window();
    let u = |x: f64| plateau(x, 1.0, 2.0, 0.5, 2.5);
    let t3 = model_t3(c);
    let gl = GaussLegendre::standard();
    let (vs, vw) = gl.composite_points(k, 2.0 * k, 64);
    let mut lhs = crate::Complex64::new(0.0, 0.0);
    let mut rhs = crate::Complex64::new(0.0, 0.0);
    let hi = (2.0 * n_scale).floor() as u64;
    for n in (n_scale.ceil() as u64).max(1)..=hi {
        let x = n as f64 / n_scale;
        let wu = w.value(x) * u(x);
        if wu == 0.0 {
            continue;
        }
        let m = n;
        let base = c.coeff(r, n)? * f.lambda(m)? * wu;
        lhs += base;
        let log_ratio = (m as f64 / n as f64).ln();
        let avg: crate::Complex64 = vs
            .iter()
            .zip(&vw)
            .map(|(v, wt)| crate::Complex64::from_polar(wt * w.value(v / k) / k, (t3 + v) * log_ratio))
            .sum();
        rhs += base * avg;
    }
    Ok((lhs.re, rhs.re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_range() {
        assert!(build_g(1, Bump::new(0.0, 1.0)).is_err());
        let e = build_g(100, Bump::new(0.0, 1.0).with_power(4.0)).unwrap();
        assert!(delta_eval(&e, 201).is_err());
        assert!(delta_eval(&e, -200).is_ok());
    }

    #[test]
    fn regular_part_shape() {
        let e = build_g(1000, Bump::new(0.0, 1.0).with_power(4.0)).unwrap();
        assert!((e.i_w - 1.0).abs() < 5e-8, "{}", e.i_w - 1.0);
        assert_eq!(e.g_reg(0.5), e.i_w);
        assert!(e.g_reg(30.0).abs() < 1e-4);
    }

    #[test]
    fn divisor_form_agrees() {
        // The q-th term equals c_q(n) sum_r (w(qr) - w(|n|/(qr)))/(qr).
        let e = build_g(1000, Bump::new(0.0, 1.0).with_power(4.0)).unwrap();
        for (q, n) in [(1u64, 0i64), (3, 0), (7, 5), (20, 0), (50, 13), (63, 100), (10, 2000)] {
            let mut direct = 0.0;
            for r in 1..=4000u64 {
                let d = (q * r) as f64;
                direct += (e.weight(d) - e.weight(n.unsigned_abs() as f64 / d)) / d;
            }
            direct *= ramanujan_sum(q, n) as f64;
            assert!((direct - e.term(q, n)).abs() < 1e-8, "q = {q}, n = {n}");
        }
    }
}
