//! Scaling of `sup_{t ≥ τ}` norms against `τ` and the mixed `L^q(L^p)` bounds.

use serde::{Deserialize, Serialize};

use crate::diagnostics::holder::holder_estimate;
use crate::diagnostics::separation::mu_bound_check;
use crate::diagnostics::separation_profile;
use crate::dynamics::{chemical_potential, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{magnitude, Field, Norm};
use crate::kernel::Kernel;
use crate::potential::Potential;

/// Exponent pairs with `(3p − 6)/(2p) = 2/q`; `q = ∞` is stored as infinity.
pub const ADMISSIBLE_PAIRS: [(f64, f64); 3] = [(2.0, f64::INFINITY), (4.0, 8.0 / 3.0), (6.0, 2.0)];

pub fn is_admissible(p: f64, q: f64) -> bool {
    let lhs = (3.0 * p - 6.0) / (2.0 * p);
    let rhs = if q.is_infinite() { 0.0 } else { 2.0 / q };
    (2.0..=6.0).contains(&p) && (lhs - rhs).abs() <= 1e-12
}

/// `sup_{t ≥ τ} ≈ C₀ τ^{−β}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub quantity: String,
    pub taus: Vec<f64>,
    pub sups: Vec<f64>,
    pub beta: f64,
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqLpEntry {
    pub p: f64,
    /// `None` encodes `q = ∞`.
    pub q: Option<f64>,
    pub grad_mu: f64,
    pub grad_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// Largest `C₀` among the fitted quantities.
    pub c0_fit: f64,
    /// Largest `β` among the fitted quantities.
    pub beta_fit: f64,
    pub fits: Vec<ScalingFit>,
    pub c1_mu_inf: f64,
    pub c2_dtmu: f64,
    pub c3_holder: f64,
    pub alpha_holder: f64,
    pub lqlp_norms: Vec<LqLpEntry>,
}

/// Largest accepted scaling exponent for `‖μ‖_{H¹}` and the `∂tφ` proxy.
pub const BETA_BOUND: f64 = 0.6;

pub const DTPHI_L2_WINDOW: &str = "dtphi_l2_window";
pub const DTPHI_DUAL: &str = "dtphi_dual";
pub const MU_H1: &str = "mu_h1";
pub const PHI_H1: &str = "phi_h1";
pub const DF_H1: &str = "dfphi_h1";

fn fit_power(taus: &[f64], sups: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(sups)
        .filter(|(_, s)| **s > 0.0)
        .map(|(t, s)| (t.ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return (0.0, sups.iter().cloned().fold(0.0, f64::max));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = num / den;
    (-slope, (my - slope * mx).exp())
}

/// Per-snapshot quantities of one run.
struct Sampled {
    times: Vec<f64>,
    dual: Vec<f64>,
    mu_h1: Vec<f64>,
    phi_h1: Vec<f64>,
    df_h1: Vec<f64>,
    grad_mu: Vec<Field>,
    grad_phi: Vec<Field>,
}

fn sample(traj: &Trajectory, kernel: &Kernel, pot: &Potential) -> Result<Sampled> {
    let mut s = Sampled {
        times: vec![],
        dual: vec![],
        mu_h1: vec![],
        phi_h1: vec![],
        df_h1: vec![],
        grad_mu: vec![],
        grad_phi: vec![],
    };
    for snap in &traj.snapshots {
        let mu = chemical_potential(&snap.phi, kernel, pot)?;
        let mut df = Vec::with_capacity(snap.phi.values().len());
        for &v in snap.phi.values() {
            df.push(pot.df(v)?);
        }
        let df = Field::new(snap.phi.domain().clone(), df)?;
        s.times.push(snap.time);
        // ‖Δμ‖_{(H¹)'} = ‖∇μ‖_{L²} for Neumann or periodic μ
        s.dual.push(mu.grad_inner(&mu).sqrt());
        s.mu_h1.push(mu.norm(Norm::H1)?);
        s.phi_h1.push(snap.phi.norm(Norm::H1)?);
        s.df_h1.push(df.norm(Norm::H1)?);
        s.grad_mu.push(magnitude(&mu.gradient()).expect("dim >= 1"));
        s.grad_phi.push(magnitude(&snap.phi.gradient()).expect("dim >= 1"));
    }
    Ok(s)
}

/// `sup_{t ≥ τ} (∫_t^{t+w} ‖∂tφ‖²)^{1/2}` from the per-step series, with
/// `w = min(1, T − τ)`.
fn dtphi_window_sup(traj: &Trajectory, tau: f64) -> f64 {
    let rows = &traj.series;
    if rows.len() < 2 {
        return 0.0;
    }
    let t_end = rows.last().expect("rows").time;
    let w = (t_end - tau).min(1.0);
    // prefix sums of ‖∂tφ‖² dt, row i covering (t_{i−1}, t_i]
    let mut prefix = vec![0.0; rows.len()];
    for i in 1..rows.len() {
        prefix[i] = prefix[i - 1] + rows[i].l2_dtphi.powi(2) * (rows[i].time - rows[i - 1].time);
    }
    let mut best: f64 = 0.0;
    let mut j = 0;
    for i in 0..rows.len() {
        if rows[i].time < tau - 1e-12 {
            continue;
        }
        let end = rows[i].time + w;
        if end > t_end + 1e-9 {
            break;
        }
        while j + 1 < rows.len() && rows[j + 1].time <= end + 1e-9 {
            j += 1;
        }
        best = best.max((prefix[j] - prefix[i]).max(0.0).sqrt());
    }
    best
}

fn sup_after(times: &[f64], vals: &[f64], tau: f64) -> f64 {
    times
        .iter()
        .zip(vals)
        .filter(|(t, _)| **t >= tau - 1e-12)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max)
}

/// `sup_{t ≥ τ} ‖g‖_{L^q(t,t+w;L^p)}` over snapshot-started windows, with the
/// time integral as a left-endpoint sum over snapshot intervals.
fn lqlp_sup(times: &[f64], fields: &[Field], tau: f64, p: f64, q: f64) -> Result<f64> {
    let t_end = *times.last().expect("snapshots");
    let w = (t_end - tau).min(1.0);
    let norms: Vec<f64> = fields
        .iter()
        .map(|f| f.norm(Norm::Lp(p)))
        .collect::<Result<_>>()?;
    let mut best: f64 = 0.0;
    for (i, &t0) in times.iter().enumerate() {
        if t0 < tau - 1e-12 || t0 + w > t_end + 1e-9 {
            continue;
        }
        let end = t0 + w;
        let val = if q.is_infinite() {
            times
                .iter()
                .zip(&norms)
                .filter(|(t, _)| **t >= t0 && **t <= end + 1e-9)
                .map(|(_, n)| *n)
                .fold(0.0, f64::max)
        } else {
            let mut acc = 0.0;
            for k in i..times.len() - 1 {
                if times[k] >= end - 1e-12 {
                    break;
                }
                let len = times[k + 1].min(end) - times[k];
                acc += norms[k].powf(q) * len;
            }
            acc.powf(1.0 / q)
        };
        best = best.max(val);
    }
    Ok(best)
}

/// Fits `sup_{t ≥ τ}` of the regularity norms against `τ` over all runs.
pub fn regularity_scaling(
    runs: &[Trajectory],
    taus: &[f64],
    kernel: &Kernel,
    pot: &Potential,
) -> Result<RegularityReport> {
    if taus.len() < 3 {
        return Err(Error::Validation(format!(
            "regularity scaling needs at least 3 tau values, got {}",
            taus.len()
        )));
    }
    if runs.is_empty() {
        return Err(Error::Validation("no runs given".into()));
    }
    let lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0 && hi / lo >= 10.0 * (1.0 - 1e-12)) {
        return Err(Error::Validation("taus must be positive and span at least one decade".into()));
    }
    for r in runs {
        if hi > r.t_end() {
            return Err(Error::Range(format!("tau = {hi} exceeds a run ending at {}", r.t_end())));
        }
    }
    let sampled: Vec<Sampled> = runs.iter().map(|r| sample(r, kernel, pot)).collect::<Result<_>>()?;

    let names = [DTPHI_L2_WINDOW, DTPHI_DUAL, MU_H1, PHI_H1, DF_H1];
    let mut table = vec![vec![0.0f64; taus.len()]; names.len()];
    for (ti, &tau) in taus.iter().enumerate() {
        for (run, s) in runs.iter().zip(&sampled) {
            let series_mu = run
                .series
                .iter()
                .filter(|r| r.time >= tau - 1e-12)
                .map(|r| r.h1_mu)
                .fold(0.0, f64::max);
            let vals = [
                dtphi_window_sup(run, tau),
                sup_after(&s.times, &s.dual, tau),
                sup_after(&s.times, &s.mu_h1, tau).max(series_mu),
                sup_after(&s.times, &s.phi_h1, tau),
                sup_after(&s.times, &s.df_h1, tau),
            ];
            for (q, v) in vals.iter().enumerate() {
                table[q][ti] = table[q][ti].max(*v);
            }
        }
    }
    let fits: Vec<ScalingFit> = names
        .iter()
        .zip(&table)
        .map(|(name, sups)| {
            let (beta, c0) = fit_power(taus, sups);
            ScalingFit {
                quantity: name.to_string(),
                taus: taus.to_vec(),
                sups: sups.clone(),
                beta,
                c0,
            }
        })
        .collect();

    let mut lqlp_norms = Vec::new();
    for &(p, q) in &ADMISSIBLE_PAIRS {
        let mut entry = LqLpEntry {
            p,
            q: q.is_finite().then_some(q),
            grad_mu: 0.0,
            grad_phi: 0.0,
        };
        for s in &sampled {
            entry.grad_mu = entry.grad_mu.max(lqlp_sup(&s.times, &s.grad_mu, lo, p, q)?);
            entry.grad_phi = entry.grad_phi.max(lqlp_sup(&s.times, &s.grad_phi, lo, p, q)?);
        }
        lqlp_norms.push(entry);
    }

    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    let mut c3: f64 = 0.0;
    let mut alpha: f64 = 1.0;
    for run in runs {
        let delta = separation_profile(run, lo)?.delta_emp;
        let mb = mu_bound_check(run, lo, delta, kernel, pot)?;
        c1 = c1.max(mb.mu_sup.iter().map(|m| m.1).fold(0.0, f64::max));
        c2 = c2.max(mb.c2_estimate);
        let t_end = run.t_end();
        let h = holder_estimate(run, ((t_end - 1.0).max(lo), t_end))?;
        c3 = c3.max(h.global.c3);
        alpha = alpha.min(h.global.alpha);
    }

    let beta_fit = fits.iter().map(|f| f.beta).fold(f64::NEG_INFINITY, f64::max);
    let c0_fit = fits.iter().map(|f| f.c0).fold(0.0, f64::max);
    Ok(RegularityReport {
        c0_fit,
        beta_fit,
        fits,
        c1_mu_inf: c1,
        c2_dtmu: c2,
        c3_holder: c3,
        alpha_holder: alpha,
        lqlp_norms,
    })
}

impl RegularityReport {
    pub fn fit(&self, quantity: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }

    /// `β ≤ BETA_BOUND` for both `‖μ‖_{H¹}` and `‖∂tφ‖_{L²(t,t+1;L²)}`.
    pub fn within_bound(&self) -> bool {
        [MU_H1, DTPHI_L2_WINDOW]
            .iter()
            .all(|q| self.fit(q).is_some_and(|f| f.beta <= BETA_BOUND))
    }
}
