//! The fast geometric convergence lemma for `y_{n+1} ≤ C bⁿ y_n^{1+ε}`.
//!
//! With `L_n = ln y_n` the extremal recursion is
//! `L_{n+1} = ln C + n ln b + (1+ε) L_n`, and the claim `y_n ≤ y₀ b^{−n/ε}`
//! reads `D_n := L_n − L₀ + n ln b/ε ≤ 0`. The slack obeys
//! `D_{n+1} = (1+ε) D_n + ε (L₀ − L*)` with `D₀ = 0` and the threshold
//! `L* = −ln C/ε − ln b/ε²`, so `L₀ ≤ L*` forces `D_n ≤ 0` for every `n` with
//! no rounding involved: each step adds non-positive terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterLemmaReport {
    pub c: f64,
    pub b: f64,
    pub eps: f64,
    pub y0: f64,
    /// `ln(C^{−1/ε} b^{−1/ε²})`.
    pub ln_threshold: f64,
    pub threshold: f64,
    pub precondition: bool,
    /// `ln y_n`, `n = 0..=n_max`, of the extremal recursion.
    pub ln_y: Vec<f64>,
    /// `ln y_n − ln(y₀ b^{−n/ε})` via the slack recursion.
    pub slack: Vec<f64>,
    /// First `n` with positive slack, if any.
    pub first_violation: Option<usize>,
    pub conclusion: bool,
}

pub fn ln_threshold(c: f64, b: f64, eps: f64) -> f64 {
    -c.ln() / eps - b.ln() / (eps * eps)
}

pub fn iter_lemma_check(c: f64, b: f64, eps: f64, y0: f64, n_max: usize) -> Result<IterLemmaReport> {
    if !(y0 >= 0.0 && y0.is_finite()) {
        return Err(Error::Validation(format!("need y0 >= 0, got {y0}")));
    }
    iter_lemma_check_ln(c, b, eps, y0.ln(), n_max)
}

/// Same as [`iter_lemma_check`] with `y₀` given as `ln y₀` (`−∞` for zero),
/// so thresholds below the f64 range stay representable.
pub fn iter_lemma_check_ln(c: f64, b: f64, eps: f64, ln_y0: f64, n_max: usize) -> Result<IterLemmaReport> {
    if !(c > 0.0 && c.is_finite() && b > 1.0 && b.is_finite() && eps > 0.0 && eps.is_finite()) {
        return Err(Error::Validation(format!(
            "need C > 0, b > 1, eps > 0 (got C = {c}, b = {b}, eps = {eps})"
        )));
    }
    if ln_y0.is_nan() || ln_y0 == f64::INFINITY {
        return Err(Error::Validation(format!("need finite y0, got ln y0 = {ln_y0}")));
    }
    let lt = ln_threshold(c, b, eps);
    let l0 = ln_y0;
    let zero = l0 == f64::NEG_INFINITY;
    let (ln_c, ln_b) = (c.ln(), b.ln());
    let mut ln_y = vec![l0];
    let mut slack = vec![0.0];
    let gap = l0 - lt;
    for n in 0..n_max {
        let l = ln_y[n];
        ln_y.push(if zero { l } else { ln_c + n as f64 * ln_b + (1.0 + eps) * l });
        let d = slack[n];
        slack.push(if zero { 0.0 } else { (1.0 + eps) * d + eps * gap });
    }
    let first_violation = slack.iter().position(|&d| d > 0.0);
    Ok(IterLemmaReport {
        c,
        b,
        eps,
        y0: l0.exp(),
        ln_threshold: lt,
        threshold: lt.exp(),
        precondition: l0 <= lt,
        ln_y,
        slack,
        first_violation,
        conclusion: first_violation.is_none(),
    })
}
