//! Desk-scale experiments: the direct sum S_r(N), its smooth dyadic
//! decomposition, and the delta-decomposed form with the averaged twist.
//!
//! Config files are flat `key = value` lines; `#` starts a comment.
//!
//! ```text
//! model   = sym2            # or eisenstein:t1,t2
//! n       = 50
//! k       = 10
//! l       = 5
//! r       = 1
//! t       = 300
//! weight  = 12
//! seed    = 1
//! tol.decomposition = 1e-3
//! report  = out/report.json
//! csv     = out/sweep.csv
//! unsafe_scale = false
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::primes_up_to;
use crate::delta_method::{build_g, model_t3, v_window, MAX_L};
use crate::exponents::{afe_cutoff_optimize, afe_prefactor, afe_tail_exponent};
use crate::forms::{delta_eigenvalues, GL3Coeffs, HoloForm};
use crate::oscillatory::{plateau, Bump};
use crate::special_fn::SpectralParams;
use crate::{Complex64, Error, Result};

pub use crate::suites::{run_suite, SUITES};

/// Largest N for the direct sum.
pub const DIRECT_CAP: f64 = 1e5;
/// Largest range for the dyadic recomposition.
pub const DYADIC_CAP: f64 = 1e5;
/// Largest N, K and L for the delta-decomposed sum.
pub const DECOMPOSED_CAP: (f64, f64, f64) = (400.0, 20.0, 10.0);

/// Nodes of the trapezoid rule for the v-average; the window vanishes to all
/// orders at both ends, so this is accurate to about 1e-14.
const V_NODES: usize = 256;

/// Worker count from SUBCONV_WORKERS, or the rayon default.
pub fn worker_count() -> usize {
    std::env::var("SUBCONV_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Runs `f` on a pool sized by [`worker_count`].
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::resource(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelChoice {
    /// Symmetric-square lift of the weight-12 discriminant form.
    Sym2Delta,
    Eisenstein { t1: f64, t2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub n: f64,
    pub k: f64,
    pub l: f64,
    pub r: u64,
    pub big_t: f64,
    pub weight: u32,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub report_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
    pub unsafe_scale: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelChoice::Sym2Delta,
            n: 50.0,
            k: 10.0,
            l: 5.0,
            r: 1,
            big_t: 300.0,
            weight: 12,
            seed: 1,
            tolerances: BTreeMap::new(),
            report_path: None,
            csv_path: None,
            unsafe_scale: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => {
                self.model = match value.split_once(':') {
                    None if value == "sym2" => ModelChoice::Sym2Delta,
                    Some(("eisenstein", ts)) => {
                        let (a, b) = ts
                            .split_once(',')
                            .ok_or_else(|| Error::Config("expected eisenstein:t1,t2".into()))?;
                        ModelChoice::Eisenstein {
                            t1: parse_num(key, a.trim())?,
                            t2: parse_num(key, b.trim())?,
                        }
                    }
                    _ => return Err(Error::Config(format!("unknown model {value:?}"))),
                }
            }
            "n" => self.n = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "l" => self.l = parse_num(key, value)?,
            "r" => self.r = parse_num(key, value)?,
            "t" => self.big_t = parse_num(key, value)?,
            "weight" => self.weight = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "report" => self.report_path = Some(PathBuf::from(value)),
            "csv" => self.csv_path = Some(PathBuf::from(value)),
            "unsafe_scale" => self.unsafe_scale = parse_bool(key, value)?,
            _ => match key.strip_prefix("tol.") {
                Some(name) if !name.is_empty() => {
                    self.tolerances.insert(name.to_string(), parse_num(key, value)?);
                }
                _ => return Err(Error::Config(format!("unknown key {key:?}"))),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight != 12 {
            return Err(Error::Config("only the weight-12 discriminant form is available".into()));
        }
        if !(self.n > 0.0 && self.k > 0.0 && self.l >= 1.0 && self.r >= 1 && self.big_t > 0.0) {
            return Err(Error::Config("need n > 0, k > 0, l >= 1, r >= 1, t > 0".into()));
        }
        if self.tolerances.values().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn coeffs(&self, n_max: u64) -> Result<GL3Coeffs> {
        Ok(match self.model {
            ModelChoice::Sym2Delta => GL3Coeffs::sym2(delta_eigenvalues(n_max.max(2) as usize)?),
            ModelChoice::Eisenstein { t1, t2 } => GL3Coeffs::eisenstein(SpectralParams::new(t1, t2)),
        })
    }

    fn cap(&self, what: &str, value: f64, cap: f64) -> Result<()> {
        if value > cap && !self.unsafe_scale {
            return Err(Error::resource(format!(
                "{what} = {value} exceeds the desk-scale cap {cap}; pass --unsafe-scale to proceed"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    AtMost,
    AtLeast,
    Equal,
    /// Recorded for information; always passes.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
    /// Free-form value that is not a float, such as an exact fraction.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, bound: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => measured <= bound,
            Relation::AtLeast => measured >= bound,
            Relation::Equal => measured == bound,
            Relation::Info => true,
        };
        Check {
            name: name.into(),
            measured,
            bound,
            relation,
            pass,
            detail: None,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, Relation::AtMost, bound)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, Relation::AtLeast, bound)
    }

    pub fn equal(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Self::new(name, measured, Relation::Equal, expected)
    }

    /// A value recorded for information; it always passes.
    pub fn info(name: impl Into<String>, measured: f64) -> Self {
        Self::new(name, measured, Relation::Info, 0.0)
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    /// A failed check carrying an error message.
    pub fn error(name: impl Into<String>, e: &Error) -> Self {
        let mut c = Self::new(name, 1.0, Relation::AtMost, 0.0);
        c.detail = Some(e.to_string());
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl Report {
    pub fn new(name: impl Into<String>, config: &ExperimentConfig) -> Self {
        Report {
            name: name.into(),
            config: config.clone(),
            checks: Vec::new(),
            pass: true,
            wall_time_s: 0.0,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        for c in other.checks {
            self.push(Check {
                name: format!("{}/{}", other.name, c.name),
                ..c
            });
        }
    }

    /// Recomputes every pass flag from the stored numbers.
    pub fn verify_flags(&self) -> bool {
        let each = self.checks.iter().all(|c| {
            let again = Check::new(c.name.clone(), c.measured, c.relation, c.bound).pass;
            again == c.pass
        });
        each && self.pass == self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::resource(format!("json: {e}")))
    }

    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{}  ({:.1} s)", self.name, self.wall_time_s);
        let _ = writeln!(out, "{:width$}  {:>12}  {:>2}  {:>12}  {}", "check", "measured", "", "bound", "");
        for c in &self.checks {
            let rel = match c.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
                Relation::Equal => "==",
                Relation::Info => "",
            };
            let bound = if c.relation == Relation::Info { String::new() } else { format!("{:.4e}", c.bound) };
            let verdict = match (c.relation, c.pass) {
                (Relation::Info, _) => "info",
                (_, true) => "pass",
                (_, false) => "FAIL",
            };
            let _ = writeln!(
                out,
                "{:width$}  {:>12.4e}  {rel:2}  {:>12}  {}{}",
                c.name,
                c.measured,
                bound,
                verdict,
                c.detail.as_deref().map(|d| format!("  {d}")).unwrap_or_default()
            );
        }
        let _ = writeln!(out, "{}", if self.pass { "PASS" } else { "FAIL" });
        out
    }
}

/// Unit-mass bump on [1, 2], the weight of the summed variable.
pub fn sum_weight() -> Bump {
    v_window()
}

/// Plateau equal to 1 on [1, 2] and supported in [1/2, 5/2].
pub fn dual_weight(x: f64) -> f64 {
    plateau(x, 1.0, 2.0, 0.5, 2.5)
}

/// Plateau equal to 1 on [1, 4] and supported in [1/2, 9/2].
pub fn long_weight(x: f64) -> f64 {
    plateau(x, 1.0, 4.0, 0.5, 4.5)
}

fn need_lambda(f: &HoloForm, n: u64) -> Result<()> {
    if (f.n_max() as u64) < n {
        return Err(Error::resource(format!("eigenvalues cached to {} but {n} needed", f.n_max())));
    }
    Ok(())
}

fn need_coeffs(c: &GL3Coeffs, n: u64) -> Result<()> {
    if c.budget() < n {
        return Err(Error::resource(format!("coefficients cached to {} but {n} needed", c.budget())));
    }
    Ok(())
}

fn integer_range(lo: f64, hi: f64) -> (u64, u64) {
    ((lo.max(1.0)).ceil() as u64, hi.floor() as u64)
}

/// sum_n A(r, n) lambda_f(n) W(n/N), terms in increasing n.
pub fn direct_sum(c: &GL3Coeffs, f: &HoloForm, r: u64, n_scale: f64) -> Result<Complex64> {
    direct_terms(c, f, r, n_scale).map(|t| t.iter().sum())
}

/// The individual terms of [`direct_sum`].
pub fn direct_terms(c: &GL3Coeffs, f: &HoloForm, r: u64, n_scale: f64) -> Result<Vec<Complex64>> {
    let w = sum_weight();
    let (lo, hi) = integer_range(n_scale, 2.0 * n_scale);
    if lo > hi {
        return Ok(Vec::new());
    }
    need_lambda(f, hi)?;
    need_coeffs(c, r * hi)?;
    let mut out = Vec::with_capacity((hi - lo + 1) as usize);
    for n in lo..=hi {
        let wt = w.value(n as f64 / n_scale);
        if wt != 0.0 {
            out.push(c.coeff(r, n)? * f.lambda(n)? * wt);
        }
    }
    Ok(out)
}

pub fn compute_s_direct(cfg: &ExperimentConfig) -> Result<Complex64> {
    cfg.validate()?;
    cfg.cap("N", cfg.n, DIRECT_CAP)?;
    let hi = (2.0 * cfg.n).floor() as u64;
    let c = cfg.coeffs(cfg.r * hi)?;
    let f = delta_eigenvalues(hi.max(2) as usize)?;
    direct_sum(&c, &f, cfg.r, cfg.n)
}

/// |S| / sqrt(sum |A lambda W|^2): about 1 under square-root cancellation.
pub fn cancellation_ratio(c: &GL3Coeffs, f: &HoloForm, r: u64, n_scale: f64) -> Result<f64> {
    let t = direct_terms(c, f, r, n_scale)?;
    let s: Complex64 = t.iter().sum();
    let l2: f64 = t.iter().map(|z| z.norm_sqr()).sum();
    Ok(if l2 > 0.0 { s.norm() / l2.sqrt() } else { 0.0 })
}

/// Smooth step equal to 1 on (-inf, 1] and to 0 on [sqrt 2, inf).
fn step(x: f64) -> f64 {
    plateau(x, -1.0, 1.0, -2.0, std::f64::consts::SQRT_2)
}

/// Dyadic piece U(x) = step(x / sqrt 2) - step(x), supported in [1, 2].
pub fn dyadic_piece(x: f64) -> f64 {
    step(x / std::f64::consts::SQRT_2) - step(x)
}

/// Centres R = 2^(alpha/2), alpha = -1, 0, 1, ..., whose pieces U(n/R)
/// cover [1, x_max].
pub fn dyadic_centres(x_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut alpha = -1i32;
    loop {
        let r = 2f64.powf(alpha as f64 / 2.0);
        if r > x_max {
            break;
        }
        out.push(r);
        alpha += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicCheck {
    pub pieces: usize,
    /// max over n of |sum_R U(n/R) - 1|.
    pub partition_defect: f64,
    pub undecomposed: Complex64,
    pub recomposed: Complex64,
    pub relative: f64,
}

/// Compares sum_n a_n V(n/X) with sum_R sum_n a_n V(n/X) U(n/R), where
/// a_n = seq[n - 1] and V is 1 on [0, 1] and vanishes beyond 2.
pub fn dyadic_recompose(seq: &[Complex64], range: f64) -> DyadicCheck {
    let cut = |x: f64| plateau(x, -1.0, 1.0, -2.0, 2.0);
    let n_max = ((2.0 * range).floor() as usize).min(seq.len());
    let centres = dyadic_centres(n_max as f64);
    let mut defect = 0.0f64;
    let mut undecomposed = Complex64::new(0.0, 0.0);
    for n in 1..=n_max {
        let x = n as f64;
        let s: f64 = centres.iter().map(|r| dyadic_piece(x / r)).sum();
        defect = defect.max((s - 1.0).abs());
        undecomposed += seq[n - 1] * cut(x / range);
    }
    let mut recomposed = Complex64::new(0.0, 0.0);
    for r in &centres {
        let (lo, hi) = integer_range(*r, (2.0 * r).min(n_max as f64));
        let mut block = Complex64::new(0.0, 0.0);
        for n in lo..=hi {
            let x = n as f64;
            block += seq[n as usize - 1] * (cut(x / range) * dyadic_piece(x / r));
        }
        recomposed += block;
    }
    let scale = seq[..n_max].iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    DyadicCheck {
        pieces: centres.len(),
        partition_defect: defect,
        undecomposed,
        recomposed,
        relative: (recomposed - undecomposed).norm() / scale,
    }
}

pub fn dyadic_decompose_check(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let range = cfg.n;
    cfg.cap("range", range, DYADIC_CAP)?;
    let n_max = (2.0 * range).floor() as u64;
    let c = cfg.coeffs(cfg.r * n_max)?;
    let f = delta_eigenvalues(n_max.max(2) as usize)?;
    let seq: Vec<Complex64> = (1..=n_max)
        .map(|n| Ok(c.coeff(cfg.r, n)? * f.lambda(n)?))
        .collect::<Result<_>>()?;
    let mut rep = Report::new("dyadic", cfg);
    let d = dyadic_recompose(&seq, range);
    rep.push(Check::at_most("partition of unity", d.partition_defect, cfg.tol("partition", 1e-10)));
    rep.push(Check::at_most("recomposition", d.relative, cfg.tol("recomposition", 1e-9)));
    let ones = vec![Complex64::new(1.0, 0.0); n_max as usize];
    let d1 = dyadic_recompose(&ones, range);
    rep.push(Check::at_most("recomposition of a constant", d1.relative, cfg.tol("recomposition", 1e-9)));
    let theta = afe_cutoff_optimize(afe_prefactor())?;
    let tail = afe_tail_exponent(theta);
    rep.push(
        Check::equal("discarded tail exponent", *tail.numer() as f64 / *tail.denom() as f64, 0.75)
            .with_detail(format!("theta = {theta}, tail T^{tail}")),
    );
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub direct: Complex64,
    pub decomposed: Complex64,
    pub residual: f64,
    /// Length covered by the delta expansion, which detects |n| <= 2 L.
    pub delta_length: u64,
    pub pairs: u64,
}

/// The averaged twist (1/K) int W(v/K) rho^{i(t3 + v)} dv for rho = e^{log_ratio}.
struct TwistAverage {
    weights: Vec<f64>,
    k: f64,
    t3: f64,
}

impl TwistAverage {
    fn new(k: f64, t3: f64) -> Self {
        let w = v_window();
        let weights = (1..V_NODES)
            .map(|j| w.value(1.0 + j as f64 / V_NODES as f64) / V_NODES as f64)
            .collect();
        TwistAverage { weights, k, t3 }
    }

    fn eval(&self, log_ratio: f64) -> Complex64 {
        let xi = self.k * log_ratio;
        let step = Complex64::from_polar(1.0, xi / V_NODES as f64);
        let mut z = Complex64::from_polar(1.0, xi);
        let mut s = Complex64::new(0.0, 0.0);
        for w in &self.weights {
            z *= step;
            s += z * *w;
        }
        s * Complex64::from_polar(1.0, self.t3 * log_ratio)
    }
}

/// Inputs of the delta-decomposed sum
///
/// ```text
/// sum_l w_l sum_{n, m} a_n b_m (1/K) int W(v/K) (m l / n)^{i(t3 + v)} dv delta(n - m l)
/// ```
///
/// with the n- and m-supports given as inclusive ranges.
pub struct DecompositionInput<'a> {
    pub a: &'a dyn Fn(u64) -> Result<Complex64>,
    pub n_range: (u64, u64),
    pub b: &'a dyn Fn(u64) -> Result<f64>,
    pub m_range: (u64, u64),
    pub shifts: Vec<(u64, Complex64)>,
    pub k: f64,
    pub t3: f64,
}

/// Evaluates both sides; delta(k) comes from the DFI expansion with every
/// (q, a) and the x-integral from the tables in `delta_method`.
pub fn decompose(inp: &DecompositionInput) -> Result<Decomposition> {
    let (n_lo, n_hi) = inp.n_range;
    let (m_lo, m_hi) = inp.m_range;
    if n_lo > n_hi || m_lo > m_hi || inp.shifts.is_empty() {
        return Ok(Decomposition {
            direct: Complex64::new(0.0, 0.0),
            decomposed: Complex64::new(0.0, 0.0),
            residual: 0.0,
            delta_length: 0,
            pairs: 0,
        });
    }
    let l_max = inp.shifts.iter().map(|s| s.0).max().unwrap_or(1);
    let l_min = inp.shifts.iter().map(|s| s.0).min().unwrap_or(1);
    let spread = (n_hi as i64 - (m_lo * l_min) as i64)
        .abs()
        .max(((m_hi * l_max) as i64 - n_lo as i64).abs()) as u64;
    let delta_length = spread.div_ceil(2).max(4);
    if delta_length > MAX_L {
        return Err(Error::resource(format!("delta length {delta_length} exceeds {MAX_L}")));
    }
    let exp = build_g(delta_length, Bump::new(0.0, 1.0).with_power(4.0))?;
    let delta = exp.delta_row(spread);

    let a: Vec<Complex64> = (n_lo..=n_hi).map(inp.a).collect::<Result<_>>()?;
    let b: Vec<(u64, f64)> = (m_lo..=m_hi)
        .map(|m| Ok((m, (inp.b)(m)?)))
        .filter(|r: &Result<(u64, f64)>| r.as_ref().map_or(true, |x| x.1 != 0.0))
        .collect::<Result<_>>()?;
    let twist = TwistAverage::new(inp.k, inp.t3);
    let a_at = |n: u64| -> Complex64 {
        if (n_lo..=n_hi).contains(&n) {
            a[(n - n_lo) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    };

    let mut direct = Complex64::new(0.0, 0.0);
    let mut decomposed = Complex64::new(0.0, 0.0);
    for &(ell, w) in &inp.shifts {
        let rows: Vec<(Complex64, Complex64)> = b
            .par_iter()
            .map(|&(m, bm)| {
                let target = m * ell;
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, an) in a.iter().enumerate() {
                    if an.norm_sqr() == 0.0 {
                        continue;
                    }
                    let n = n_lo + i as u64;
                    let d = delta[n.abs_diff(target) as usize];
                    if d == 0.0 {
                        continue;
                    }
                    let rho = (target as f64 / n as f64).ln();
                    acc += an * twist.eval(rho) * d;
                }
                (a_at(target) * bm, acc * bm)
            })
            .collect();
        let (mut dir, mut dec) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (x, y) in rows {
            dir += x;
            dec += y;
        }
        direct += w * dir;
        decomposed += w * dec;
    }
    let pairs = b.len() as u64 * a.len() as u64 * inp.shifts.len() as u64;
    Ok(Decomposition {
        direct,
        decomposed,
        residual: (decomposed - direct).norm() / direct.norm().max(1e-300),
        delta_length,
        pairs,
    })
}

/// Which sum the decomposition detects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineVariant {
    /// n = m with n ~ N.
    Plain,
    /// n = m l over primes l in [L, 2L], n ~ N L.
    PrimeAveraged,
}

/// The m-side sequence: Hecke eigenvalues, or the indicator of one index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualSequence<'a> {
    Form(&'a HoloForm),
    Indicator(u64),
}

impl DualSequence<'_> {
    fn at(&self, m: u64) -> Result<f64> {
        match self {
            DualSequence::Form(f) => f.lambda(m),
            DualSequence::Indicator(m0) => Ok(if m == *m0 { 1.0 } else { 0.0 }),
        }
    }
}

/// Primes in [L, 2L] with weights conj(A(1, l)) / sum |A(1, l)|^2.
pub fn prime_shifts(c: &GL3Coeffs, l: f64) -> Result<Vec<(u64, Complex64)>> {
    let primes: Vec<u64> = primes_up_to((2.0 * l).floor() as u64)
        .into_iter()
        .filter(|&p| p as f64 >= l)
        .collect();
    let coeffs: Vec<Complex64> = primes.iter().map(|&p| c.coeff(1, p)).collect::<Result<_>>()?;
    let mass: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    if primes.is_empty() || mass == 0.0 {
        return Err(Error::domain("no prime l in [L, 2L] with A(1, l) != 0"));
    }
    Ok(primes.into_iter().zip(coeffs).map(|(p, a)| (p, a.conj() / mass)).collect())
}

/// Delta-decomposed S_r(N) for explicit coefficients.
pub fn decomposed_sum(
    c: &GL3Coeffs,
    lambda: DualSequence,
    variant: PipelineVariant,
    r: u64,
    n_scale: f64,
    k: f64,
    l: f64,
) -> Result<Decomposition> {
    let w = sum_weight();
    let t3 = model_t3(c);
    let m_range = integer_range(n_scale / 2.0, 2.5 * n_scale);
    match variant {
        PipelineVariant::Plain => {
            let n_range = integer_range(n_scale, 2.0 * n_scale);
            need_coeffs(c, r * n_range.1)?;
            if let DualSequence::Form(f) = lambda {
                need_lambda(f, m_range.1)?;
            }
            let a = |n: u64| -> Result<Complex64> {
                let wt = w.value(n as f64 / n_scale);
                Ok(if wt == 0.0 { Complex64::new(0.0, 0.0) } else { c.coeff(r, n)? * wt })
            };
            let b = |m: u64| -> Result<f64> {
                let u = dual_weight(m as f64 / n_scale);
                Ok(if u == 0.0 { 0.0 } else { lambda.at(m)? * u })
            };
            decompose(&DecompositionInput {
                a: &a,
                n_range,
                b: &b,
                m_range,
                shifts: vec![(1, Complex64::new(1.0, 0.0))],
                k,
                t3,
            })
        }
        PipelineVariant::PrimeAveraged => {
            let long = n_scale * l;
            let n_range = integer_range(0.5 * long, 4.5 * long);
            let m_range = integer_range(n_scale, 2.0 * n_scale);
            need_coeffs(c, r * n_range.1)?;
            if let DualSequence::Form(f) = lambda {
                need_lambda(f, m_range.1)?;
            }
            let shifts = prime_shifts(c, l)?;
            let a = |n: u64| -> Result<Complex64> {
                let wt = long_weight(n as f64 / long);
                Ok(if wt == 0.0 { Complex64::new(0.0, 0.0) } else { c.coeff(r, n)? * wt })
            };
            let b = |m: u64| -> Result<f64> {
                let u = w.value(m as f64 / n_scale);
                Ok(if u == 0.0 { 0.0 } else { lambda.at(m)? * u })
            };
            decompose(&DecompositionInput {
                a: &a,
                n_range,
                b: &b,
                m_range,
                shifts,
                k,
                t3,
            })
        }
    }
}

pub fn delta_decomposed_s(cfg: &ExperimentConfig, variant: PipelineVariant) -> Result<Decomposition> {
    cfg.validate()?;
    let (nc, kc, lc) = DECOMPOSED_CAP;
    cfg.cap("N", cfg.n, nc)?;
    cfg.cap("K", cfg.k, kc)?;
    if variant == PipelineVariant::PrimeAveraged {
        cfg.cap("L", cfg.l, lc)?;
    }
    let n_max = match variant {
        PipelineVariant::Plain => 3.0 * cfg.n,
        PipelineVariant::PrimeAveraged => 4.5 * cfg.n * cfg.l,
    };
    let n_max = n_max.ceil() as u64 * cfg.r;
    let c = cfg.coeffs(n_max)?;
    let f = delta_eigenvalues(n_max.max(2) as usize)?;
    with_workers(|| decomposed_sum(&c, DualSequence::Form(&f), variant, cfg.r, cfg.n, cfg.k, cfg.l))?
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepQuantity {
    Decomposition(PipelineVariant),
    Cancellation,
}

/// A config plus one swept key.
///
/// ```text
/// n = 50
/// sweep.k = 5, 10, 20
/// quantity = plain        # plain | prime-averaged | cancellation
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub key: String,
    pub values: Vec<String>,
    pub quantity: SweepQuantity,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rest = String::new();
        let mut swept = None;
        let mut quantity = SweepQuantity::Decomposition(PipelineVariant::Plain);
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            match line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                Some((k, v)) if k.starts_with("sweep.") => {
                    let values: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    swept = Some((k["sweep.".len()..].to_string(), values));
                }
                Some(("quantity", v)) => {
                    quantity = match v {
                        "plain" => SweepQuantity::Decomposition(PipelineVariant::Plain),
                        "prime-averaged" => SweepQuantity::Decomposition(PipelineVariant::PrimeAveraged),
                        "cancellation" => SweepQuantity::Cancellation,
                        _ => return Err(Error::Config(format!("unknown quantity {v:?}"))),
                    }
                }
                _ => {
                    rest.push_str(line);
                    rest.push('\n');
                }
            }
        }
        let base = ExperimentConfig::parse(&rest)?;
        let (key, values) = swept.ok_or_else(|| Error::Config("no sweep.<key> line".into()))?;
        if values.is_empty() {
            return Err(Error::Config("empty sweep".into()));
        }
        let mut probe = base.clone();
        for v in &values {
            probe.set(&key, v)?;
            probe.validate()?;
        }
        Ok(SweepSpec { base, key, values, quantity })
    }

    pub fn header(&self) -> Vec<String> {
        let cols: &[&str] = match self.quantity {
            SweepQuantity::Decomposition(_) => {
                &["direct_re", "direct_im", "decomposed_re", "decomposed_im", "residual", "delta_length"]
            }
            SweepQuantity::Cancellation => &["s_re", "s_im", "ratio"],
        };
        std::iter::once(self.key.clone()).chain(cols.iter().map(|s| s.to_string())).collect()
    }

    /// One row per value; the swept key must be numeric.
    pub fn run(&self) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for v in &self.values {
            let mut cfg = self.base.clone();
            cfg.set(&self.key, v)?;
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("swept value {v:?} is not numeric")))?;
            let row = match self.quantity {
                SweepQuantity::Decomposition(variant) => {
                    let d = delta_decomposed_s(&cfg, variant)?;
                    vec![
                        x,
                        d.direct.re,
                        d.direct.im,
                        d.decomposed.re,
                        d.decomposed.im,
                        d.residual,
                        d.delta_length as f64,
                    ]
                }
                SweepQuantity::Cancellation => {
                    cfg.cap("N", cfg.n, DIRECT_CAP)?;
                    let hi = (2.0 * cfg.n).floor() as u64;
                    let c = cfg.coeffs(cfg.r * hi)?;
                    let f = delta_eigenvalues(hi.max(2) as usize)?;
                    let s = direct_sum(&c, &f, cfg.r, cfg.n)?;
                    vec![x, s.re, s.im, cancellation_ratio(&c, &f, cfg.r, cfg.n)?]
                }
            };
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Writes rows of `(x, y...)` with a header to CSV.
pub fn write_csv<W: std::io::Write, S: AsRef<[u8]>>(header: &[S], rows: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::resource(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io)?;
    }
    w.flush().map_err(|e| Error::resource(format!("csv: {e}")))?;
    Ok(())
}
