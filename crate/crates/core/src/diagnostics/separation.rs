//! Empirical separation depth and the constants derived from it.

use serde::{Deserialize, Serialize};

use crate::dynamics::{chemical_potential, Trajectory};
use crate::error::{Error, Result};
use crate::grid::Norm;
use crate::kernel::Kernel;
use crate::potential::Potential;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationProfile {
    pub tau: f64,
    /// `(t, 1 − sup|φ(t)|)` over snapshots and series rows, time-sorted.
    pub min_gap: Vec<(f64, f64)>,
    /// `inf_{t ≥ τ} (1 − sup|φ(t)|)`.
    pub delta_emp: f64,
}

fn check_range(traj: &Trajectory, t: f64) -> Result<()> {
    if traj.snapshots.is_empty() {
        return Err(Error::Range("empty trajectory".into()));
    }
    if !(t <= traj.t_end()) {
        return Err(Error::Range(format!(
            "time {t} is beyond the trajectory end {}",
            traj.t_end()
        )));
    }
    Ok(())
}

pub fn separation_profile(traj: &Trajectory, tau: f64) -> Result<SeparationProfile> {
    check_range(traj, tau)?;
    let mut min_gap: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .map(|s| (s.time, 1.0 - s.phi.sup_abs()))
        .chain(traj.series.iter().map(|r| (r.time, r.min_gap)))
        .collect();
    min_gap.sort_by(|a, b| a.0.total_cmp(&b.0));
    let delta_emp = min_gap
        .iter()
        .filter(|(t, _)| *t >= tau)
        .map(|&(_, g)| g)
        .fold(f64::INFINITY, f64::min);
    Ok(SeparationProfile {
        tau,
        min_gap,
        delta_emp,
    })
}

/// `sup_{t ≥ τ/2} ‖F'(φ(t))‖_{L¹}` over snapshots.
pub fn energy_constant_estimate(traj: &Trajectory, tau: f64, pot: &Potential) -> Result<f64> {
    check_range(traj, tau / 2.0)?;
    let mut best: f64 = 0.0;
    for s in traj.snapshots.iter().filter(|s| s.time >= tau / 2.0) {
        let vol = s.phi.domain().cell_volume();
        let mut l1 = 0.0;
        for &v in s.phi.values() {
            l1 += pot.df(v)?.abs();
        }
        best = best.max(l1 * vol);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuBoundReport {
    pub tau: f64,
    pub delta: f64,
    /// `|F'(1−δ)| + ‖J‖_{L¹(B_{M₁})}`.
    pub c1: f64,
    /// `(t, ‖μ(t)‖_∞)` for snapshots with `t ≥ τ`.
    pub mu_sup: Vec<(f64, f64)>,
    pub holds: bool,
    /// `sup_t ‖∂tμ‖_{L²(t,t+1;L²)}` from snapshot differences.
    pub c2_estimate: f64,
    /// Length of the windows used for `c2_estimate` (1, or less on short runs).
    pub c2_window: f64,
}

/// Checks `‖μ(t)‖_∞ ≤ C₁` on every snapshot after `τ` and estimates `C₂`.
pub fn mu_bound_check(
    traj: &Trajectory,
    tau: f64,
    delta: f64,
    kernel: &Kernel,
    pot: &Potential,
) -> Result<MuBoundReport> {
    let profile = separation_profile(traj, tau)?;
    if !(delta > 0.0 && delta <= profile.delta_emp) {
        return Err(Error::Validation(format!(
            "delta = {delta} exceeds the measured separation {} after tau = {tau}",
            profile.delta_emp
        )));
    }
    let c1 = pot.df(1.0 - delta)?.abs() + kernel.l1_j();
    let mut mus = Vec::new();
    let mut mu_sup = Vec::new();
    for s in traj.snapshots.iter().filter(|s| s.time >= tau) {
        let mu = chemical_potential(&s.phi, kernel, pot)?;
        mu_sup.push((s.time, mu.sup_abs()));
        mus.push((s.time, mu));
    }
    let holds = mu_sup.iter().all(|&(_, m)| m <= c1);

    // piecewise-constant ∂tμ between consecutive snapshots
    let mut rates: Vec<(f64, f64, f64)> = Vec::new();
    for w in mus.windows(2) {
        let (t0, t1) = (w[0].0, w[1].0);
        let d = w[1].1.zip_map(&w[0].1, |a, b| (a - b) / (t1 - t0));
        rates.push((t0, t1, d.norm(Norm::L2)?.powi(2)));
    }
    let t_last = mus.last().map_or(tau, |m| m.0);
    let c2_window = (t_last - tau).min(1.0);
    let mut c2: f64 = 0.0;
    for &(start, _) in &mu_sup {
        let end = start + c2_window;
        if end > t_last * (1.0 + 1e-12) {
            break;
        }
        let mut acc = 0.0;
        for &(a, b, r) in &rates {
            let overlap = b.min(end) - a.max(start);
            if overlap > 0.0 {
                acc += r * overlap;
            }
        }
        c2 = c2.max(acc.sqrt());
    }
    Ok(MuBoundReport {
        tau,
        delta,
        c1,
        mu_sup,
        holds,
        c2_estimate: c2,
        c2_window,
    })
}
