//! Space–time Hölder estimate
//! `|φ(x₁,t₁) − φ(x₂,t₂)| ≤ C₃ (|x₁−x₂|^α + |t₁−t₂|^{α/2})`.
//!
//! Space increments are maximized over every cell and axis for the lattice
//! shifts `r = 2^j h`; time increments over every cell for snapshot lags of
//! `2^j` snapshot spacings. `α` is the smaller of the spatial slope and twice
//! the temporal slope (log-log least squares over the four finest scales),
//! clipped to `[0, 1]`, and `C₃` the largest ratio of an increment to its
//! scale weight.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::grid::Domain;

/// Fraction of each extent excluded next to the boundary for interior values.
pub const INTERIOR_MARGIN: f64 = 0.1;

const FIT_SCALES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub alpha: f64,
    pub c3: f64,
    /// Spatial slope, `None` when all spatial increments vanish.
    pub alpha_space: Option<f64>,
    /// Twice the temporal slope, `None` when all temporal increments vanish.
    pub alpha_time: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub window: (f64, f64),
    pub snapshots: usize,
    pub global: HolderFit,
    pub interior: HolderFit,
}

/// `(scale, max increment)` pairs.
#[derive(Clone, Debug, Default)]
struct Increments {
    space: Vec<(f64, f64)>,
    time: Vec<(f64, f64)>,
}

fn interior_mask(domain: &Domain) -> Vec<bool> {
    (0..domain.len())
        .map(|i| {
            let c = domain.center(i);
            c.iter()
                .zip(domain.extents())
                .all(|(x, l)| *x >= INTERIOR_MARGIN * l && *x <= (1.0 - INTERIOR_MARGIN) * l)
        })
        .collect()
}

fn increments(snaps: &[&Snapshot], mask: Option<&[bool]>) -> Increments {
    let domain = snaps[0].phi.domain();
    let ok = |i: usize| mask.is_none_or(|m| m[i]);
    let mut inc = Increments::default();
    let max_cells = domain.cells().iter().copied().max().unwrap_or(1);
    let mut shift = 1;
    while shift < max_cells {
        for axis in 0..domain.dim() {
            let n = domain.cells()[axis];
            if shift >= n {
                continue;
            }
            let stride = domain.stride(axis);
            let mut best: f64 = 0.0;
            for s in snaps {
                let v = s.phi.values();
                for i in 0..v.len() {
                    let pos = (i / stride) % n;
                    if pos + shift < n {
                        let j = i + shift * stride;
                        if ok(i) && ok(j) {
                            best = best.max((v[j] - v[i]).abs());
                        }
                    }
                }
            }
            let r = shift as f64 * domain.spacing(axis);
            if let Some(e) = inc.space.iter_mut().find(|e| (e.0 - r).abs() <= 1e-12 * r) {
                e.1 = e.1.max(best);
            } else {
                inc.space.push((r, best));
            }
        }
        shift *= 2;
    }
    inc.space.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut lag = 1;
    while lag < snaps.len() {
        let mut best: f64 = 0.0;
        let mut dt = f64::INFINITY;
        for w in 0..snaps.len() - lag {
            let (a, b) = (snaps[w], snaps[w + lag]);
            dt = dt.min(b.time - a.time);
            for (i, (x, y)) in a.phi.values().iter().zip(b.phi.values()).enumerate() {
                if ok(i) {
                    best = best.max((y - x).abs());
                }
            }
        }
        inc.time.push((dt, best));
        lag *= 2;
    }
    inc
}

/// Least-squares slope of `ln s` against `ln r` over the finest points with
/// `s > 0`.
fn slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .take(FIT_SCALES)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(num / den)
}

fn constant_at(inc: &Increments, alpha: f64) -> f64 {
    let s = inc.space.iter().map(|&(r, v)| v / r.powf(alpha));
    let t = inc.time.iter().map(|&(d, v)| v / d.powf(alpha / 2.0));
    s.chain(t).fold(0.0, f64::max)
}

fn fit(inc: &Increments) -> HolderFit {
    let alpha_space = slope(&inc.space);
    let alpha_time = slope(&inc.time).map(|s| 2.0 * s);
    let alpha = match (alpha_space, alpha_time) {
        (None, None) => 1.0,
        (Some(a), None) | (None, Some(a)) => a,
        (Some(a), Some(b)) => a.min(b),
    }
    .clamp(0.0, 1.0);
    HolderFit {
        alpha,
        c3: constant_at(inc, alpha),
        alpha_space,
        alpha_time,
    }
}

fn window_snapshots(traj: &Trajectory, window: (f64, f64)) -> Result<Vec<&Snapshot>> {
    let snaps: Vec<&Snapshot> = traj.snapshots_between(window.0, window.1).collect();
    if snaps.len() < 4 {
        return Err(Error::Validation(format!(
            "holder window [{}, {}] holds {} snapshot(s); need at least 4",
            window.0,
            window.1,
            snaps.len()
        )));
    }
    Ok(snaps)
}

pub fn holder_estimate(traj: &Trajectory, window: (f64, f64)) -> Result<HolderReport> {
    let snaps = window_snapshots(traj, window)?;
    let mask = interior_mask(snaps[0].phi.domain());
    Ok(HolderReport {
        window,
        snapshots: snaps.len(),
        global: fit(&increments(&snaps, None)),
        interior: fit(&increments(&snaps, Some(&mask))),
    })
}

/// Smallest global `C₃` valid for a prescribed exponent.
pub fn holder_constant(traj: &Trajectory, window: (f64, f64), alpha: f64) -> Result<f64> {
    let snaps = window_snapshots(traj, window)?;
    Ok(constant_at(&increments(&snaps, None), alpha))
}
