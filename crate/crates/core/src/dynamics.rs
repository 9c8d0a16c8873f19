//! Time integration of `∂tφ = Δμ`, `μ = F'(φ) − J∗φ` with homogeneous
//! Neumann (or periodic) boundary conditions.
//!
//! Each step solves the convex-splitting relation
//!
//! ```text
//! φⁿ⁺¹ − dt·Δ F'(φⁿ⁺¹) = φⁿ − dt·Δ (J∗φⁿ)
//! ```
//!
//! by Newton's method. With `D = diag(F''(φ))` the Newton correction `δ`
//! satisfies `(I − dt·Δ D) δ = −R`; substituting `δ = D⁻¹w` gives the SPD
//! system `(D⁻¹ − dt·Δ) w = −R`, solved by Jacobi-preconditioned CG. The
//! update is halved until the iterate stays inside `(−1, 1)`.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Field, Norm};
use crate::kernel::Kernel;
use crate::potential::Potential;

/// Inputs equal to ±1 are pulled inside by this margin before integration.
pub const INITIAL_CLAMP: f64 = 1e-12;

/// Newton and CG settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Newton stops when the residual L² norm drops to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Times a failing step may be split in half before the run aborts.
    pub max_halvings: usize,
    /// Floor of the relative residual tolerance of the inner CG solve.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 10,
            cg_tol: 1e-12,
            cg_max_iter: 20_000,
        }
    }
}

/// Energy bookkeeping at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub time: f64,
    /// `−½∬J(x−y)φ(x)φ(y) + ∫F(φ)`.
    pub energy_form1: f64,
    /// `¼∬J(x−y)|φ(x)−φ(y)|² + ∫(F(φ) − aφ²/2)`.
    pub energy_form2: f64,
    /// Mean value `|Ω|⁻¹∫φ`.
    pub mass: f64,
    pub sup_abs_phi: f64,
    /// `1 − sup|φ|`.
    pub min_gap: f64,
}

/// One row of `series.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    pub energy_form1: f64,
    pub energy_form2: f64,
    pub mass: f64,
    pub sup_abs_phi: f64,
    pub min_gap: f64,
    pub l2_mu: f64,
    pub h1_mu: f64,
    /// `‖(φⁿ⁺¹ − φⁿ)/dt‖_{L²}`; zero on the initial row.
    pub l2_dtphi: f64,
}

impl SeriesRow {
    pub fn energy(&self) -> EnergySample {
        EnergySample {
            time: self.time,
            energy_form1: self.energy_form1,
            energy_form2: self.energy_form2,
            mass: self.mass,
            sup_abs_phi: self.sup_abs_phi,
            min_gap: self.min_gap,
        }
    }
}

/// State carried between steps.
#[derive(Clone, Debug)]
pub struct SimState {
    pub phi: Field,
    pub time: f64,
    pub step_index: u64,
    /// Chemical potential of `phi`.
    pub mu: Field,
    conv: Field,
}

impl SimState {
    /// Wraps an admissible field (`sup|φ| < 1`) and computes `μ`.
    pub fn new(phi: Field, time: f64, kernel: &Kernel, pot: &Potential) -> Result<Self> {
        let conv = kernel.convolve(&phi)?;
        let mu = mu_from_conv(&phi, &conv, pot)?;
        Ok(Self {
            phi,
            time,
            step_index: 0,
            mu,
            conv,
        })
    }

    /// `J∗φ` of the current state.
    pub fn convolution(&self) -> &Field {
        &self.conv
    }
}

fn check_strict(phi: &Field) -> Result<()> {
    if let Some(i) = phi.values().iter().position(|v| !(v.abs() < 1.0)) {
        return Err(Error::State(format!(
            "|phi| >= 1 at cell {i} (value {})",
            phi.values()[i]
        )));
    }
    Ok(())
}

fn mu_from_conv(phi: &Field, conv: &Field, pot: &Potential) -> Result<Field> {
    check_strict(phi)?;
    let mut values = Vec::with_capacity(phi.values().len());
    for (&p, &c) in phi.values().iter().zip(conv.values()) {
        values.push(pot.df(p)? - c);
    }
    Field::new(phi.domain().clone(), values)
}

/// `μ = F'(φ) − J∗φ`.
pub fn chemical_potential(phi: &Field, kernel: &Kernel, pot: &Potential) -> Result<Field> {
    check_strict(phi)?;
    let conv = kernel.convolve(phi)?;
    mu_from_conv(phi, &conv, pot)
}

fn energy_from_conv(phi: &Field, conv: &Field, a: &Field, pot: &Potential) -> Result<EnergySample> {
    let vol = phi.domain().cell_volume();
    let mut f_int = 0.0;
    let mut a_int = 0.0;
    for (&p, &ai) in phi.values().iter().zip(a.values()) {
        f_int += pot.f(p)?;
        a_int += ai * p * p;
    }
    f_int *= vol;
    a_int *= vol;
    let j_int = conv.inner(phi);
    let form1 = -0.5 * j_int + f_int;
    // ¼∬J|φ(x)−φ(y)|² = ½⟨aφ,φ⟩ − ½⟨J∗φ,φ⟩
    let quarter_double = 0.5 * a_int - 0.5 * j_int;
    let form2 = quarter_double + (f_int - 0.5 * a_int);
    let sup = phi.sup_abs();
    Ok(EnergySample {
        time: 0.0,
        energy_form1: form1,
        energy_form2: form2,
        mass: phi.mean(),
        sup_abs_phi: sup,
        min_gap: 1.0 - sup,
    })
}

/// Both forms of the nonlocal free energy (with `time = 0`).
pub fn energy(phi: &Field, kernel: &Kernel, pot: &Potential) -> Result<EnergySample> {
    if let Some(v) = phi.values().iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::State(format!("|phi| > 1 in energy evaluation ({v})")));
    }
    let conv = kernel.convolve(phi)?;
    energy_from_conv(phi, &conv, kernel.self_interaction(), pot)
}

/// Jacobi-preconditioned CG for `(diag(d) − dt·Δ) w = b`.
fn solve_newton_system(
    domain: &Domain,
    d: &[f64],
    dt: f64,
    b: &[f64],
    rel_tol: f64,
    cfg: &SolverConfig,
    lap_diag: &[f64],
) -> (Vec<f64>, usize, f64) {
    let n = b.len();
    let mut lap = vec![0.0; n];
    let mut apply = |v: &[f64], out: &mut [f64]| {
        domain.apply_laplacian(v, &mut lap);
        for i in 0..n {
            out[i] = d[i] * v[i] - dt * lap[i];
        }
    };
    let precond: Vec<f64> = d.iter().zip(lap_diag).map(|(di, li)| 1.0 / (di + dt * li)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    let mut ap = vec![0.0; n];
    for it in 0..cfg.cg_max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= rel_tol {
            return (x, it + 1, rel);
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, cfg.cg_max_iter, rel)
}

fn residual(phi: &[f64], rhs: &[f64], dt: f64, domain: &Domain, pot: &Potential) -> Result<Vec<f64>> {
    let mut fp = Vec::with_capacity(phi.len());
    for &p in phi {
        fp.push(pot.df(p)?);
    }
    let lap = Field::new(domain.clone(), fp)?.laplacian();
    Ok(phi
        .iter()
        .zip(lap.values())
        .zip(rhs)
        .map(|((p, l), r)| p - dt * l - r)
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn l2(v: &[f64], vol: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * vol).sqrt()
}

/// Solves `φ − dt·ΔF'(φ) = rhs` by Newton iteration starting from `guess`.
pub fn solve_implicit(
    guess: &Field,
    rhs: &Field,
    dt: f64,
    pot: &Potential,
    cfg: &SolverConfig,
) -> Result<Field> {
    let domain = guess.domain();
    let vol = domain.cell_volume();
    let lap_diag = Field::neg_laplacian_diagonal(domain);
    let mut phi = guess.values().to_vec();
    let mut res = residual(&phi, rhs.values(), dt, domain, pot)?;
    let mut res_norm = l2(&res, vol);
    for it in 0..=cfg.max_iter {
        if res_norm <= cfg.tol {
            debug!("newton converged in {it} iterations (residual {res_norm:e})");
            return Field::new(domain.clone(), phi);
        }
        if it == cfg.max_iter {
            break;
        }
        let mut d = Vec::with_capacity(phi.len());
        for &p in &phi {
            d.push(1.0 / pot.ddf(p)?);
        }
        let b: Vec<f64> = res.iter().map(|r| -r).collect();
        // inexact Newton: solve only as accurately as the outer iteration needs
        let forcing = (0.1 * cfg.tol / res_norm).max(res_norm.min(0.1)).max(cfg.cg_tol);
        let (w, cg_iters, cg_rel) = solve_newton_system(domain, &d, dt, &b, forcing, cfg, &lap_diag);
        if cg_rel > forcing {
            warn!("cg stopped at relative residual {cg_rel:e} after {cg_iters} iterations");
        }
        let mut delta: Vec<f64> = w.iter().zip(&d).map(|(wi, di)| wi * di).collect();
        // the exact correction has mean −mean(R); restore it against CG error
        let shift = -mean(&res) - mean(&delta);
        delta.iter_mut().for_each(|v| *v += shift);

        // stay strictly inside (−1, 1)
        let mut lambda = 1.0;
        let inside = |l: f64| phi.iter().zip(&delta).all(|(p, dp)| (p + l * dp).abs() < 1.0);
        let mut guard = 0;
        while !inside(lambda) {
            lambda *= 0.5;
            guard += 1;
            if guard > 60 {
                return Err(Error::Step {
                    iterations: it,
                    residual: res_norm,
                    dt,
                });
            }
        }
        // then prefer a non-increasing residual
        let mut trial: Vec<f64>;
        let mut trial_res;
        let mut trial_norm;
        let mut backtracks = 0;
        loop {
            trial = phi.iter().zip(&delta).map(|(p, dp)| p + lambda * dp).collect();
            trial_res = residual(&trial, rhs.values(), dt, domain, pot)?;
            trial_norm = l2(&trial_res, vol);
            if trial_norm <= res_norm || backtracks >= 20 {
                break;
            }
            lambda *= 0.5;
            backtracks += 1;
        }
        phi = trial;
        res = trial_res;
        res_norm = trial_norm;
    }
    Err(Error::Step {
        iterations: cfg.max_iter,
        residual: res_norm,
        dt,
    })
}

/// One convex-splitting step of size `dt`.
pub fn step(
    state: &SimState,
    dt: f64,
    kernel: &Kernel,
    pot: &Potential,
    cfg: &SolverConfig,
) -> Result<SimState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("dt must be > 0, got {dt}")));
    }
    let explicit = state.conv.laplacian();
    let rhs = state.phi.zip_map(&explicit, |p, l| p - dt * l);
    let phi = solve_implicit(&state.phi, &rhs, dt, pot, cfg)?;
    check_strict(&phi)?;
    let conv = kernel.convolve(&phi)?;
    let mu = mu_from_conv(&phi, &conv, pot)?;
    Ok(SimState {
        phi,
        time: state.time + dt,
        step_index: state.step_index + 1,
        mu,
        conv,
    })
}

/// Advances by `dt`, splitting the step in halves on Newton failure.
pub fn step_with_halving(
    state: &SimState,
    dt: f64,
    kernel: &Kernel,
    pot: &Potential,
    cfg: &SolverConfig,
) -> Result<SimState> {
    fn go(
        state: &SimState,
        dt: f64,
        depth: usize,
        kernel: &Kernel,
        pot: &Potential,
        cfg: &SolverConfig,
    ) -> Result<SimState> {
        match step(state, dt, kernel, pot, cfg) {
            Err(Error::Step { .. }) if depth < cfg.max_halvings => {
                debug!("halving dt to {:e}", dt / 2.0);
                let mid = go(state, dt / 2.0, depth + 1, kernel, pot, cfg)?;
                go(&mid, dt / 2.0, depth + 1, kernel, pot, cfg)
            }
            other => other,
        }
    }
    let mut next = go(state, dt, 0, kernel, pot, cfg)?;
    next.step_index = state.step_index + 1;
    Ok(next)
}

/// A stored field at one time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: u64,
    pub time: f64,
    pub phi: Field,
}

/// Snapshots plus the per-step scalar series of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub series: Vec<SeriesRow>,
}

impl Trajectory {
    pub fn domain(&self) -> &Domain {
        self.snapshots[0].phi.domain()
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.time)
    }

    pub fn t_start(&self) -> f64 {
        self.snapshots.first().map_or(0.0, |s| s.time)
    }

    /// Snapshots with `t0 ≤ time ≤ t1`.
    pub fn snapshots_between(&self, t0: f64, t1: f64) -> impl Iterator<Item = &Snapshot> {
        self.snapshots
            .iter()
            .filter(move |s| s.time >= t0 && s.time <= t1)
    }

    /// Keeps every `k`-th snapshot (always the first one).
    pub fn thinned(&self, k: usize) -> Trajectory {
        Trajectory {
            dt: self.dt,
            snapshots: self.snapshots.iter().step_by(k.max(1)).cloned().collect(),
            series: self.series.clone(),
        }
    }
}

/// Time stepping settings of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub solver: SolverConfig,
}

impl RunSettings {
    /// `floor(t_end/dt)`, robust to the representation error of `dt`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt * (1.0 + 1e-12)).floor() as u64
    }
}

/// Maps values equal to ±1 to `±(1 − INITIAL_CLAMP)`; rejects `|φ₀| > 1`
/// and inadmissible means.
pub fn admissible_initial(phi0: Field) -> Result<Field> {
    if let Some(v) = phi0.values().iter().find(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Config(format!("initial datum violates |phi0| <= 1 ({v})")));
    }
    let m = phi0.mean();
    if !(m.abs() < 1.0 - 4.0 * f64::EPSILON) {
        return Err(Error::Config(format!(
            "initial mean {m} is inadmissible (need |mean| < 1)"
        )));
    }
    let clamped = phi0.map(|v| {
        if v.abs() >= 1.0 - INITIAL_CLAMP {
            v.signum() * (1.0 - INITIAL_CLAMP)
        } else {
            v
        }
    });
    let m = clamped.mean();
    if !(m.abs() < 1.0) {
        return Err(Error::Config(format!("clamped initial mean {m} is inadmissible")));
    }
    Ok(clamped)
}

fn series_row(state: &SimState, prev: Option<&Field>, dt: f64, kernel: &Kernel, pot: &Potential) -> Result<SeriesRow> {
    let e = energy_from_conv(&state.phi, &state.conv, kernel.self_interaction(), pot)?;
    let l2_dtphi = match prev {
        Some(p) => state.phi.zip_map(p, |a, b| (a - b) / dt).norm(Norm::L2)?,
        None => 0.0,
    };
    Ok(SeriesRow {
        time: state.time,
        energy_form1: e.energy_form1,
        energy_form2: e.energy_form2,
        mass: e.mass,
        sup_abs_phi: e.sup_abs_phi,
        min_gap: e.min_gap,
        l2_mu: state.mu.norm(Norm::L2)?,
        h1_mu: state.mu.norm(Norm::H1)?,
        l2_dtphi,
    })
}

/// Integrates from `phi0` to `t_end`; records every step in the series and
/// every `snapshot_every` steps (plus the first and last) as snapshots.
pub fn run(phi0: Field, kernel: &Kernel, pot: &Potential, settings: &RunSettings) -> Result<Trajectory> {
    if !(settings.dt > 0.0 && settings.t_end >= 0.0) {
        return Err(Error::Config("dt must be > 0 and t_end >= 0".into()));
    }
    if settings.snapshot_every == 0 {
        return Err(Error::Config("snapshot_every must be >= 1".into()));
    }
    let phi0 = admissible_initial(phi0)?;
    let n_steps = settings.n_steps();
    let mut state = SimState::new(phi0, 0.0, kernel, pot)?;
    let mut series = Vec::with_capacity(n_steps as usize + 1);
    series.push(series_row(&state, None, settings.dt, kernel, pot)?);
    let mut snapshots = vec![Snapshot {
        step: 0,
        time: 0.0,
        phi: state.phi.clone(),
    }];
    for n in 1..=n_steps {
        let mut next = step_with_halving(&state, settings.dt, kernel, pot, &settings.solver)?;
        next.time = n as f64 * settings.dt;
        series.push(series_row(&next, Some(&state.phi), settings.dt, kernel, pot)?);
        if n % settings.snapshot_every as u64 == 0 || n == n_steps {
            snapshots.push(Snapshot {
                step: n,
                time: next.time,
                phi: next.phi.clone(),
            });
        }
        state = next;
    }
    Ok(Trajectory {
        dt: settings.dt,
        snapshots,
        series,
    })
}
