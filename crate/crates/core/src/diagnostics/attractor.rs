//! Ensemble probe of uniform separation and Hölder bounds at long times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{simulate, InitialCondition, RunConfig};
use crate::diagnostics::holder::{holder_constant, holder_estimate};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// One initial datum of the ensemble; `seed` feeds random data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeDatum {
    pub phi0: InitialCondition,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeMember {
    pub index: usize,
    pub mean: f64,
    pub final_min_gap: Option<f64>,
    pub alpha: Option<f64>,
    pub c3: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub m: f64,
    pub t_long: f64,
    /// Hölder window `[t_long − 1, t_long]` (clipped at 0).
    pub window: (f64, f64),
    pub members: Vec<ProbeMember>,
    /// Smallest final gap over the ensemble.
    pub delta_ens: f64,
    /// Smallest Hölder exponent over the ensemble.
    pub alpha_ens: f64,
    /// Constant valid for every member at exponent `alpha_ens`.
    pub c_ens: f64,
    /// Every run finished with a positive common gap and a finite common bound.
    pub common_bound: bool,
}

fn member_config(template: &RunConfig, datum: &ProbeDatum, t_long: f64) -> RunConfig {
    RunConfig {
        phi0: datum.phi0.clone(),
        seed: datum.seed,
        t_end: t_long,
        ..template.clone()
    }
}

/// Runs every datum to `t_long` (in parallel) and collects common bounds.
///
/// Data whose mean lies outside `[−1+m, 1−m]` are rejected up front.
pub fn attractor_probe(template: &RunConfig, data: &[ProbeDatum], m: f64, t_long: f64) -> Result<ProbeReport> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::Config(format!("m must lie in (0, 1], got {m}")));
    }
    if !(t_long > 0.0) {
        return Err(Error::Config(format!("t_long must be > 0, got {t_long}")));
    }
    if data.is_empty() {
        return Err(Error::Config("empty ensemble".into()));
    }
    let domain = template.build_domain()?;
    let mut means = Vec::with_capacity(data.len());
    for (i, d) in data.iter().enumerate() {
        let mean = d.phi0.build(&domain, d.seed)?.mean();
        if !(mean >= -1.0 + m && mean <= 1.0 - m) {
            return Err(Error::Config(format!(
                "datum {i} has mean {mean} outside [{}, {}]",
                -1.0 + m,
                1.0 - m
            )));
        }
        means.push(mean);
    }
    let window = ((t_long - 1.0).max(0.0), t_long);
    let runs: Vec<Result<Trajectory>> = data
        .par_iter()
        .map(|d| simulate(&member_config(template, d, t_long)))
        .collect();

    let mut members = Vec::with_capacity(data.len());
    let mut finished = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        let mut member = ProbeMember {
            index: i,
            mean: means[i],
            final_min_gap: None,
            alpha: None,
            c3: None,
            error: None,
        };
        match run.and_then(|t| holder_estimate(&t, window).map(|h| (t, h))) {
            Ok((traj, h)) => {
                let last = traj.snapshots.last().expect("snapshots");
                member.final_min_gap = Some(1.0 - last.phi.sup_abs());
                member.alpha = Some(h.global.alpha);
                member.c3 = Some(h.global.c3);
                finished.push((i, traj));
            }
            Err(e) => member.error = Some(e.to_string()),
        }
        members.push(member);
    }

    let delta_ens = members
        .iter()
        .filter_map(|m| m.final_min_gap)
        .fold(f64::INFINITY, f64::min);
    let alpha_ens = members.iter().filter_map(|m| m.alpha).fold(1.0, f64::min);
    let mut c_ens: f64 = 0.0;
    for (_, traj) in &finished {
        c_ens = c_ens.max(holder_constant(traj, window, alpha_ens)?);
    }
    let all_ran = members.iter().all(|m| m.error.is_none());
    Ok(ProbeReport {
        m,
        t_long,
        window,
        members,
        delta_ens,
        alpha_ens,
        c_ens,
        common_bound: all_ran && delta_ens > 0.0 && alpha_ens > 0.0 && c_ens.is_finite(),
    })
}
