//! Singular free-energy densities and numerical checks of the structural
//! assumptions the separation argument relies on.
//!
//! The built-in density is the convex part of the Flory–Huggins entropy,
//! `F(s) = (θ/2)[(1+s)ln(1+s) + (1−s)ln(1−s)]` on `[-1, 1]`. Custom densities
//! are supplied as tabulated samples of `F`, `F'` and `F''`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest δ sampled by [`check_assumptions`].
pub const DELTA_MIN: f64 = 1e-8;

/// Constants entering assumptions (A1)–(A3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    /// Uniform convexity lower bound `F'' ≥ θ`.
    pub theta: f64,
    /// Width of the end zone where `F''` is monotone.
    pub eps0: f64,
    /// Range `0 < δ ≤ ε₁` on which the growth ratios are controlled.
    pub eps1: f64,
    /// Growth constant `C_F ≥ 1`.
    pub c_f: f64,
}

impl PotentialParams {
    pub fn new(theta: f64, eps0: f64, eps1: f64, c_f: f64) -> Result<Self> {
        let p = Self {
            theta,
            eps0,
            eps1,
            c_f,
        };
        p.validate()?;
        Ok(p)
    }

    /// Flory–Huggins parameters with `C_F` set to the closed-form supremum of
    /// the (A3) ratios on `(0, ε₁]`.
    pub fn flory_huggins(theta: f64, eps0: f64, eps1: f64) -> Result<Self> {
        let c_f = flory_huggins_c_f(theta, eps1);
        Self::new(theta, eps0, eps1, c_f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Validation(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::Validation(format!("eps0 must lie in (0,1), got {}", self.eps0)));
        }
        if !(self.eps1 > 0.0 && self.eps1 < 0.5) {
            return Err(Error::Validation(format!("eps1 must lie in (0,1/2), got {}", self.eps1)));
        }
        if !(self.c_f >= 1.0 && self.c_f.is_finite()) {
            return Err(Error::Validation(format!("c_f must be >= 1, got {}", self.c_f)));
        }
        Ok(())
    }
}

/// Supremum over `0 < δ ≤ ε₁` of the Flory–Huggins (A3) ratios.
///
/// `1/(δ F''(1−2δ)) = 4(1−δ)/θ` increases to `4/θ` as δ → 0, and
/// `|ln δ| / F'(1−2δ) = 2|ln δ| / (θ ln((1−δ)/δ))` is increasing in δ.
pub fn flory_huggins_c_f(theta: f64, eps1: f64) -> f64 {
    let growth = 2.0 * eps1.ln().abs() / (theta * ((1.0 - eps1) / eps1).ln());
    (4.0 / theta).max(growth).max(1.0)
}

/// `1 − s²` without cancellation near `|s| = 1` and never above 1.
#[inline]
fn one_minus_sq(s: f64) -> f64 {
    let a = s.abs();
    if a < 0.5 {
        1.0 - s * s
    } else {
        (1.0 - a) * (1.0 + a)
    }
}

#[inline]
fn xlogx_1p(s: f64) -> f64 {
    // (1+s) ln(1+s), with the 0·ln 0 = 0 limit
    if s <= -1.0 {
        0.0
    } else {
        (1.0 + s) * s.ln_1p()
    }
}

/// Flory–Huggins energy density. Accepts the endpoints `|s| = 1`.
pub fn eval_f(s: f64, p: &PotentialParams) -> Result<f64> {
    if !(s.abs() <= 1.0) {
        return Err(Error::Domain(format!("F undefined at s = {s}")));
    }
    Ok(0.5 * p.theta * (xlogx_1p(s) + xlogx_1p(-s)))
}

/// `F'(s) = (θ/2) ln((1+s)/(1−s))`.
pub fn eval_df(s: f64, p: &PotentialParams) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(Error::Domain(format!("F' undefined at s = {s}")));
    }
    Ok(s.signum() * p.theta * s.abs().atanh())
}

/// `F''(s) = θ/(1−s²)`.
pub fn eval_ddf(s: f64, p: &PotentialParams) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(Error::Domain(format!("F'' undefined at s = {s}")));
    }
    Ok(p.theta / one_minus_sq(s))
}

/// `F'''(s) = 2θs/(1−s²)²`.
pub fn eval_d3f(s: f64, p: &PotentialParams) -> Result<f64> {
    if !(s.abs() < 1.0) {
        return Err(Error::Domain(format!("F''' undefined at s = {s}")));
    }
    let q = one_minus_sq(s);
    Ok(2.0 * p.theta * s / (q * q))
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes, which
/// preserves monotonicity of the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Validation(
                "monotone cubic needs >= 2 nodes and matching value count".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("interpolation nodes must be strictly increasing".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Validation("interpolation data must be finite".into()));
        }
        let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            m[i] = if a * b <= 0.0 { 0.0 } else { 0.5 * (a + b) };
        }
        for i in 0..n - 1 {
            let d = secants[i];
            if d == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let (a, b) = (m[i] / d, m[i + 1] / d);
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                m[i] = t * a * d;
                m[i + 1] = t * b * d;
            }
        }
        Ok(Self { x, y, m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return None;
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= self.x.len() => self.x.len() - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        Some(h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1])
    }
}

/// A user-supplied density given by samples of `F`, `F'` and `F''`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPotential {
    f: MonotoneCubic,
    df: MonotoneCubic,
    ddf: MonotoneCubic,
}

impl TabulatedPotential {
    pub fn new(s: Vec<f64>, f: Vec<f64>, df: Vec<f64>, ddf: Vec<f64>) -> Result<Self> {
        if s.first().is_some_and(|&v| v < -1.0) || s.last().is_some_and(|&v| v > 1.0) {
            return Err(Error::Validation("tabulated potential nodes must lie in [-1,1]".into()));
        }
        Ok(Self {
            f: MonotoneCubic::new(s.clone(), f)?,
            df: MonotoneCubic::new(s.clone(), df)?,
            ddf: MonotoneCubic::new(s, ddf)?,
        })
    }

    /// Samples `F`, `F'`, `F''` from closures on `n` uniform nodes of `[lo, hi]`.
    pub fn sample(
        lo: f64,
        hi: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        ddf: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation("need at least two samples".into()));
        }
        let s: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let fv = s.iter().map(|&v| f(v)).collect();
        let dfv = s.iter().map(|&v| df(v)).collect();
        let ddfv = s.iter().map(|&v| ddf(v)).collect();
        Self::new(s, fv, dfv, ddfv)
    }
}

/// Selects the density `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    FloryHuggins,
    Tabulated(TabulatedPotential),
}

/// A density together with its assumption constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub params: PotentialParams,
}

fn table_eval(t: &MonotoneCubic, s: f64, what: &str) -> Result<f64> {
    t.eval(s)
        .ok_or_else(|| Error::Domain(format!("{what} outside tabulated range at s = {s}")))
}

impl Potential {
    pub fn flory_huggins(params: PotentialParams) -> Self {
        Self {
            kind: PotentialKind::FloryHuggins,
            params,
        }
    }

    pub fn tabulated(table: TabulatedPotential, params: PotentialParams) -> Self {
        Self {
            kind: PotentialKind::Tabulated(table),
            params,
        }
    }

    pub fn theta(&self) -> f64 {
        self.params.theta
    }

    pub fn f(&self, s: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::FloryHuggins => eval_f(s, &self.params),
            PotentialKind::Tabulated(t) => table_eval(&t.f, s, "F"),
        }
    }

    pub fn df(&self, s: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::FloryHuggins => eval_df(s, &self.params),
            PotentialKind::Tabulated(t) => {
                if !(s.abs() < 1.0) {
                    return Err(Error::Domain(format!("F' undefined at s = {s}")));
                }
                table_eval(&t.df, s, "F'")
            }
        }
    }

    pub fn ddf(&self, s: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::FloryHuggins => eval_ddf(s, &self.params),
            PotentialKind::Tabulated(t) => {
                if !(s.abs() < 1.0) {
                    return Err(Error::Domain(format!("F'' undefined at s = {s}")));
                }
                table_eval(&t.ddf, s, "F''")
            }
        }
    }

    /// Third derivative; only available for the built-in density.
    pub fn d3f(&self, s: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::FloryHuggins => eval_d3f(s, &self.params),
            PotentialKind::Tabulated(_) => Err(Error::Validation(
                "F''' is not available for tabulated potentials".into(),
            )),
        }
    }
}

/// Outcome of [`check_assumptions`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a3_ok: bool,
    /// Smallest `C_F` for which both growth bounds hold on the sample set.
    pub c_f_estimate: f64,
    /// Sample δ attaining the largest ratio.
    pub worst_delta: f64,
    /// Smallest sampled `F''`, the empirical uniform-convexity margin.
    pub min_ddf: f64,
    pub n_samples: usize,
}

/// Samples `δ` log-uniformly in `(DELTA_MIN, ε₁]` (largest sample is `ε₁`).
pub fn delta_samples(eps1: f64, n: usize) -> Vec<f64> {
    let (a, b) = (DELTA_MIN.ln(), eps1.ln());
    (1..=n).map(|k| (a + (b - a) * k as f64 / n as f64).exp()).collect()
}

/// Checks (A1)–(A3) for `pot` on sample sets of size `n_samples`.
///
/// (A1): `F'' ≥ θ` on a symmetric grid of `(-1, 1)` refined toward the ends.
/// (A2): `F''` non-decreasing on `[1−ε₀, 1)` and non-increasing on `(−1, −1+ε₀]`.
/// (A3): both growth ratios at both ends, `c_f_estimate` being the max ratio.
pub fn check_assumptions(pot: &Potential, n_samples: usize) -> Result<AssumptionReport> {
    if n_samples < 2 {
        return Err(Error::Validation("n_samples must be >= 2".into()));
    }
    let p = pot.params;
    let deltas = delta_samples(p.eps1, n_samples);

    // (A1)
    let mut grid: Vec<f64> = (0..n_samples)
        .map(|j| -1.0 + (2 * j + 1) as f64 / n_samples as f64)
        .collect();
    for &d in &deltas {
        grid.push(1.0 - d);
        grid.push(-1.0 + d);
    }
    let mut a1_ok = true;
    let mut min_ddf = f64::INFINITY;
    for &s in &grid {
        match pot.ddf(s) {
            Ok(v) => {
                min_ddf = min_ddf.min(v);
                if !(v >= p.theta) {
                    a1_ok = false;
                }
            }
            Err(_) => a1_ok = false,
        }
    }

    // (A2): walk from the inner edge of the end zone toward ±1.
    let mut a2_ok = true;
    let ln_lo = DELTA_MIN.ln();
    let ln_hi = p.eps0.ln();
    let gaps: Vec<f64> = (0..=n_samples)
        .map(|k| (ln_hi + (ln_lo - ln_hi) * k as f64 / n_samples as f64).exp())
        .collect();
    for sign in [1.0, -1.0] {
        let mut prev: Option<f64> = None;
        for &g in &gaps {
            let s = sign * (1.0 - g);
            match pot.ddf(s) {
                Ok(v) => {
                    if let Some(pv) = prev {
                        if v < pv {
                            a2_ok = false;
                        }
                    }
                    prev = Some(v);
                }
                Err(_) => a2_ok = false,
            }
        }
    }

    // (A3)
    let mut c_f_estimate = 1.0_f64;
    let mut worst_delta = p.eps1;
    for &d in &deltas {
        let ln_abs = d.ln().abs();
        for s in [1.0 - 2.0 * d, -1.0 + 2.0 * d] {
            let growth = match pot.df(s) {
                Ok(v) if v != 0.0 && v.signum() == s.signum() => ln_abs / v.abs(),
                _ => f64::INFINITY,
            };
            let convex = match pot.ddf(s) {
                Ok(v) if v > 0.0 => 1.0 / (d * v),
                _ => f64::INFINITY,
            };
            let r = growth.max(convex);
            if r > c_f_estimate || r.is_nan() {
                c_f_estimate = if r.is_nan() { f64::INFINITY } else { r };
                worst_delta = d;
            }
        }
    }
    let a3_ok = c_f_estimate <= p.c_f;
    Ok(AssumptionReport {
        a1_ok,
        a2_ok,
        a3_ok,
        c_f_estimate,
        worst_delta,
        min_ddf,
        n_samples,
    })
}
