//! De Giorgi level-set sequences on a time window `[T − 3τ̃, T]`.
//!
//! With `t₋₁ = T − 3τ̃`, `t_n = t_{n−1} + τ̃/2ⁿ` and `k_n = 1 − δ − δ/2ⁿ`,
//! level `n` measures `y_n = ∫_{I_n} |A_n(t)| dt` where `I_n = [t_{n−1}, T]`
//! and `A_n(t) = {φ(·,t) ≥ k_n}`. `|A_n(t)|` is known at snapshots only and
//! is integrated as its piecewise-linear interpolant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelSign {
    /// Upper sets `{φ ≥ k_n}`.
    Plus,
    /// Lower sets `{φ ≤ −k_n}`.
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiParams {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub tau_tilde: f64,
    pub delta: f64,
    pub n_levels: usize,
    pub sign: LevelSign,
}

impl DeGiorgiParams {
    pub fn validate(&self, pot: &Potential) -> Result<()> {
        let p = &pot.params;
        if !(self.tau_tilde > 0.0) {
            return Err(Error::Validation("tau_tilde must be > 0".into()));
        }
        if !(self.delta > 0.0 && self.delta < (p.eps0 / 2.0).min(p.eps1)) {
            return Err(Error::Validation(format!(
                "delta = {} must lie in (0, min(eps0/2, eps1))",
                self.delta
            )));
        }
        if self.n_levels < 1 {
            return Err(Error::Validation("n_levels must be >= 1".into()));
        }
        if !(self.t_final - 3.0 * self.tau_tilde >= 0.0) {
            return Err(Error::Validation("window start T − 3·tau_tilde is negative".into()));
        }
        Ok(())
    }

    /// `t_{n−1}` for `n = 0..=n_levels` (so `t₋₁` first).
    pub fn window_starts(&self) -> Vec<f64> {
        let mut t = self.t_final - 3.0 * self.tau_tilde;
        let mut out = vec![t];
        for n in 0..self.n_levels {
            t += self.tau_tilde / 2f64.powi(n as i32);
            out.push(t);
        }
        out
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..=self.n_levels)
            .map(|n| 1.0 - self.delta - self.delta / 2f64.powi(n as i32))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiReport {
    pub params: DeGiorgiParams,
    /// `t_n` for `n = 0..=n_levels`.
    pub t_n: Vec<f64>,
    pub k_n: Vec<f64>,
    pub y_n: Vec<f64>,
    pub x_n: Vec<f64>,
    pub sup_phi_window: f64,
    pub decayed: bool,
    /// Largest `(φ − k_n)₊` seen in the window, per level.
    pub max_excess: Vec<f64>,
    /// `0 ≤ (φ − k_n)₊ ≤ 2δ` at every point of the window.
    pub po_holds: bool,
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of `(t_j, f_j)`.
fn integrate_linear(times: &[f64], f: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..times.len() - 1 {
        let (t0, t1) = (times[j], times[j + 1]);
        let lo = t0.max(a);
        let hi = t1.min(b);
        if hi <= lo {
            continue;
        }
        let w = |t: f64| ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let at = |t: f64| (1.0 - w(t)) * f[j] + w(t) * f[j + 1];
        acc += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    acc
}

/// Computes `t_n, k_n, y_n, X_n` and the truncation check on the window.
pub fn degiorgi_sequences(
    traj: &Trajectory,
    dp: &DeGiorgiParams,
    l1_grad_j: f64,
    pot: &Potential,
) -> Result<DeGiorgiReport> {
    dp.validate(pot)?;
    let starts = dp.window_starts();
    let levels = dp.levels();
    let t0 = starts[0];
    let first = traj.t_start();
    let last = traj.t_end();
    let slack = 1e-12 * dp.t_final.abs().max(1.0);
    if t0 < first - slack || dp.t_final > last + slack {
        return Err(Error::Range(format!(
            "window [{t0}, {}] is not covered by the trajectory [{first}, {last}]",
            dp.t_final
        )));
    }
    for (n, &s) in starts.iter().enumerate() {
        let inside = traj.snapshots_between(s - slack, dp.t_final + slack).count();
        if inside < 2 {
            return Err(Error::Validation(format!(
                "I_{n} = [{s}, {}] contains {inside} snapshot(s); need at least 2",
                dp.t_final
            )));
        }
    }

    // snapshots touching the window (including the bracketing ones)
    let lo = traj
        .snapshots
        .iter()
        .rposition(|s| s.time <= t0)
        .unwrap_or(0);
    let hi = traj
        .snapshots
        .iter()
        .position(|s| s.time >= dp.t_final)
        .unwrap_or(traj.snapshots.len() - 1);
    let used = &traj.snapshots[lo..=hi];
    let times: Vec<f64> = used.iter().map(|s| s.time).collect();
    let sgn = match dp.sign {
        LevelSign::Plus => 1.0,
        LevelSign::Minus => -1.0,
    };

    let vol = traj.domain().cell_volume();
    let mut y_n = Vec::with_capacity(levels.len());
    let mut max_excess = vec![0.0f64; levels.len()];
    let mut sup_phi_window = f64::NEG_INFINITY;
    let mut sup_abs = 0.0f64;
    for s in used.iter().filter(|s| s.time >= t0 - slack && s.time <= dp.t_final + slack) {
        for &v in s.phi.values() {
            sup_phi_window = sup_phi_window.max(sgn * v);
            sup_abs = sup_abs.max(v.abs());
        }
    }
    for (n, &k) in levels.iter().enumerate() {
        let measure: Vec<f64> = used
            .iter()
            .map(|s| s.phi.values().iter().filter(|&&v| sgn * v >= k).count() as f64 * vol)
            .collect();
        y_n.push(integrate_linear(&times, &measure, starts[n], dp.t_final));
        max_excess[n] = (sup_phi_window - k).max(0.0);
    }
    let po_holds = sup_abs > 1.0 || max_excess.iter().all(|&e| e <= 2.0 * dp.delta);

    let ddf = pot.ddf(1.0 - 2.0 * dp.delta)?;
    let factor = (l1_grad_j * l1_grad_j / ddf).max(16.0 * dp.delta * dp.delta / dp.tau_tilde);
    let x_n = y_n
        .iter()
        .enumerate()
        .map(|(n, y)| 2f64.powi(n as i32) * factor * y)
        .collect();
    let y0 = y_n[0];
    let decayed = y0 == 0.0 || *y_n.last().expect("levels") <= 1e-12 * y0;
    Ok(DeGiorgiReport {
        params: *dp,
        t_n: starts
            .iter()
            .enumerate()
            .map(|(n, s)| s + dp.tau_tilde / 2f64.powi(n as i32))
            .collect(),
        k_n: levels,
        y_n,
        x_n,
        sup_phi_window,
        decayed,
        max_excess,
        po_holds,
    })
}

#[derive(Serialize)]
struct CsvRow {
    n: usize,
    t_n: f64,
    k_n: f64,
    y_n: f64,
    x_n: f64,
}

/// Writes `n,t_n,k_n,y_n,x_n`.
pub fn write_degiorgi_csv(path: &Path, report: &DeGiorgiReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for n in 0..report.y_n.len() {
        w.serialize(CsvRow {
            n,
            t_n: report.t_n[n],
            k_n: report.k_n[n],
            y_n: report.y_n[n],
            x_n: report.x_n[n],
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Snapshot;
    use crate::grid::{BoundaryMode, Domain, Field};
    use crate::potential::PotentialParams;
    use proptest::prelude::*;

    fn fh() -> Potential {
        Potential::flory_huggins(PotentialParams::flory_huggins(1.0, 0.5, 0.25).unwrap())
    }

    fn traj_from(fields: Vec<Field>, dt: f64) -> Trajectory {
        Trajectory {
            dt,
            snapshots: fields
                .into_iter()
                .enumerate()
                .map(|(i, phi)| Snapshot {
                    step: i as u64,
                    time: i as f64 * dt,
                    phi,
                })
                .collect(),
            series: vec![],
        }
    }

    fn params(t: f64, tau: f64, delta: f64) -> DeGiorgiParams {
        DeGiorgiParams {
            t_final: t,
            tau_tilde: tau,
            delta,
            n_levels: 12,
            sign: LevelSign::Plus,
        }
    }

    #[test]
    fn sequences_match_definitions() {
        let p = params(1.0, 0.2, 0.1);
        let t = p.window_starts();
        assert!((t[0] - 0.4).abs() < 1e-15);
        assert!((t[1] - 0.6).abs() < 1e-15);
        assert!((t[2] - 0.7).abs() < 1e-15);
        let k = p.levels();
        assert!((k[0] - 0.8).abs() < 1e-15);
        assert!((k[1] - 0.85).abs() < 1e-15);
    }

    #[test]
    fn constant_field_fills_every_level() {
        let d = Domain::new(vec![2.0], vec![32], BoundaryMode::Neumann).unwrap();
        let delta = 0.05;
        let fields = vec![Field::constant(&d, 1.0 - delta / 2.0); 41];
        let traj = traj_from(fields, 0.025);
        let p = params(1.0, 0.25, delta);
        let r = degiorgi_sequences(&traj, &p, 1.0, &fh()).unwrap();
        let starts = p.window_starts();
        for (n, y) in r.y_n.iter().enumerate() {
            let expected = d.measure() * (1.0 - starts[n]);
            assert!((y - expected).abs() <= 1e-12, "{n}: {y} vs {expected}");
        }
        assert!(!r.decayed);
        assert!(r.po_holds);
    }

    #[test]
    fn separated_window_is_empty() {
        let d = Domain::unit_1d(16, BoundaryMode::Neumann).unwrap();
        let fields = vec![Field::constant(&d, 0.7); 11];
        let r = degiorgi_sequences(&traj_from(fields, 0.1), &params(1.0, 0.3, 0.1), 2.0, &fh()).unwrap();
        assert!(r.y_n.iter().all(|&y| y == 0.0));
        assert!(r.decayed);
    }

    #[test]
    fn thin_window_is_rejected() {
        let d = Domain::unit_1d(16, BoundaryMode::Neumann).unwrap();
        let fields = vec![Field::constant(&d, 0.0); 3];
        let r = degiorgi_sequences(&traj_from(fields, 0.5), &params(1.0, 0.1, 0.1), 1.0, &fh());
        assert!(matches!(r, Err(Error::Validation(ref m)) if m.contains("I_0")));
        let fields = vec![Field::constant(&d, 0.0); 3];
        let r = degiorgi_sequences(&traj_from(fields, 0.5), &params(5.0, 0.1, 0.1), 1.0, &fh());
        assert!(matches!(r, Err(Error::Range(_))));
    }

    #[test]
    fn minus_sign_mirrors_plus() {
        let d = Domain::unit_1d(16, BoundaryMode::Neumann).unwrap();
        let f: Vec<Field> = (0..21)
            .map(|i| Field::from_fn(&d, |x| 0.9 * (6.0 * x[0] + 0.1 * i as f64).sin()))
            .collect();
        let neg: Vec<Field> = f.iter().map(|g| g.map(|v| -v)).collect();
        let p = params(1.0, 0.3, 0.08);
        let a = degiorgi_sequences(&traj_from(f, 0.05), &p, 1.0, &fh()).unwrap();
        let b = degiorgi_sequences(
            &traj_from(neg, 0.05),
            &DeGiorgiParams {
                sign: LevelSign::Minus,
                ..p
            },
            1.0,
            &fh(),
        )
        .unwrap();
        assert_eq!(a.y_n, b.y_n);
    }

    #[test]
    fn csv_header() {
        let d = Domain::unit_1d(16, BoundaryMode::Neumann).unwrap();
        let r = degiorgi_sequences(
            &traj_from(vec![Field::constant(&d, 0.0); 11], 0.1),
            &params(1.0, 0.3, 0.1),
            1.0,
            &fh(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("degiorgi.csv");
        write_degiorgi_csv(&path, &r).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("n,t_n,k_n,y_n,x_n\n"));
        assert_eq!(text.lines().count(), 14);
    }

    proptest! {
        #[test]
        fn nesting(seed in 0u64..1000, delta in 0.01f64..0.12, amp in 0.5f64..1.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = Domain::unit_1d(24, BoundaryMode::Neumann).unwrap();
            let n_snap = rng.gen_range(40..80);
            let fields: Vec<Field> = (0..n_snap)
                .map(|_| Field::new(d.clone(), (0..24).map(|_| rng.gen_range(-amp..amp)).collect()).unwrap())
                .collect();
            let dt = 1.0 / (n_snap - 1) as f64;
            let p = params(1.0, rng.gen_range(0.15..0.33), delta);
            let r = degiorgi_sequences(&traj_from(fields, dt), &p, 1.0, &fh()).unwrap();
            for w in r.y_n.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            prop_assert!(r.y_n.iter().all(|&y| y >= 0.0));
            prop_assert!(r.po_holds);
        }
    }
}
