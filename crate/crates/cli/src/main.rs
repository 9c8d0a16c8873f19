//! `nlch`: runs and diagnostics from JSON configs.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 validation error, 3 numeric
//! failure.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use nlch_core::config::InitialCondition;
use nlch_core::diagnostics::{
    attractor_probe, c_j_from_grad, check_certificate, degiorgi_sequences, delta_certificate,
    energy_constant_estimate, gn_battery, iter_lemma_check, regularity_scaling, separation_profile,
    write_degiorgi_csv, CertificateConstants, DeGiorgiParams, LevelSign, ProbeDatum,
};
use nlch_core::io::{read_manifest, read_trajectory, write_trajectory};
use nlch_core::potential::PotentialParams;
use nlch_core::{check_assumptions, check_bounds, simulate, Error, Potential, RunConfig, Trajectory};

#[derive(Parser, Debug)]
#[command(name = "nlch", version, about = "Nonlocal Cahn–Hilliard simulator and separation diagnostics")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for trajectories and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel commands.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sign {
    Plus,
    Minus,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a config and write the trajectory directory.
    Simulate,
    /// De Giorgi sequences on a stored trajectory.
    Degiorgi {
        #[arg(long)]
        traj: PathBuf,
        /// Window end (default: trajectory end).
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        tau_tilde: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        n_levels: usize,
        #[arg(long, value_enum, default_value_t = Sign::Plus)]
        sign: Sign,
        /// Fail unless `y_n` decays to zero.
        #[arg(long)]
        require_decay: bool,
    },
    /// `(δ, τ̃)` certificate in log space.
    Certify {
        /// Estimate missing constants from this trajectory (and its config).
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        c_f: Option<f64>,
        #[arg(long)]
        c_omega: Option<f64>,
        #[arg(long)]
        c_j: Option<f64>,
        #[arg(long)]
        l1_grad_j: Option<f64>,
        #[arg(long)]
        energy_constant: Option<f64>,
        #[arg(long)]
        eps0: Option<f64>,
        #[arg(long)]
        eps1: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
    /// Check (A1)–(A3) for Flory–Huggins (or the config's potential).
    CheckPotential {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.5)]
        eps0: f64,
        #[arg(long, default_value_t = 0.25)]
        eps1: f64,
        #[arg(long, default_value_t = 2000)]
        n_samples: usize,
    },
    /// Convolution bounds and FFT/direct agreement for the config's kernel.
    CheckKernel {
        #[arg(long, default_value_t = 100)]
        n_fields: usize,
    },
    /// Fast geometric convergence lemma on the extremal recursion.
    IterLemma {
        #[arg(long = "C")]
        c: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Ensemble of runs to `t_long` with common separation and Hölder bounds.
    ProbeAttractor {
        /// JSON list of `{phi0, seed}`; default: seeded random data.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        members: usize,
        #[arg(long, default_value_t = 0.4)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.5)]
        m: f64,
        #[arg(long, default_value_t = 20.0)]
        t_long: f64,
    },
    /// `sup_{t ≥ τ}` scaling and mixed-norm table.
    Regularity {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.1, 1.0])]
        taus: Vec<f64>,
        /// Stored trajectories; default: run the config once per seed.
        #[arg(long)]
        traj: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
}

/// Result of a command: pass/fail of its assertions.
type Outcome = Result<bool, Error>;

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Config from `--config`, else the echo in the trajectory's manifest.
fn config_for_traj(cli: &Cli, traj: &Path) -> Result<RunConfig, Error> {
    if cli.config.is_some() {
        return load_config(cli);
    }
    read_manifest(traj)?
        .config
        .ok_or_else(|| Error::Config(format!("{}: manifest has no config; pass --config", traj.display())))
}

/// Prints a line, ignoring a closed pipe on the reader side.
fn print_line(text: &str) -> Result<(), Error> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit<T: Serialize>(cli: &Cli, name: &str, report: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report)?;
    print_line(&text)?;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{name}.json")), text)?;
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("output_dir: no output directory (set output_dir or --out)".into()))?;
    let traj = simulate(&cfg)?;
    let manifest = write_trajectory(&dir, &traj, Some(&cfg))?;
    info!("wrote {} ({} snapshots)", dir.display(), traj.snapshots.len());
    print_line(&manifest.content_hash)?;
    Ok(true)
}

fn cmd_degiorgi(cli: &Cli, traj_dir: &Path, dp: DeGiorgiParams, require_decay: bool) -> Outcome {
    let cfg = config_for_traj(cli, traj_dir)?;
    let traj = read_trajectory(traj_dir)?;
    let domain = cfg.build_domain()?;
    let kernel = cfg.build_kernel(&domain)?;
    let pot = cfg.potential.build()?;
    let report = degiorgi_sequences(&traj, &dp, kernel.l1_grad_j(), &pot)?;
    emit(cli, "degiorgi", &report)?;
    if let Some(dir) = &cli.out {
        write_degiorgi_csv(&dir.join("degiorgi.csv"), &report)?;
    }
    Ok(report.po_holds && (!require_decay || report.decayed))
}

#[derive(Serialize)]
struct CertifyReport {
    certificate: nlch_core::diagnostics::SeparationCertificate,
    check: nlch_core::diagnostics::certificate::CertificateCheck,
    /// Measured gap after `τ`, reported beside the certified one.
    delta_emp: Option<f64>,
}

struct Overrides {
    c_f: Option<f64>,
    c_omega: Option<f64>,
    c_j: Option<f64>,
    l1_grad_j: Option<f64>,
    energy_constant: Option<f64>,
    eps0: Option<f64>,
    eps1: Option<f64>,
}

fn cmd_certify(cli: &Cli, traj_dir: Option<&Path>, o: Overrides, tau: f64) -> Outcome {
    let mut constants = CertificateConstants {
        c_f: 1.0,
        c_omega: 1.0,
        c_j: 1.0,
        l1_grad_j: 1.0,
        energy_constant: 1.0,
        eps0: 1.0,
        eps1: 1.0,
    };
    let mut delta_emp = None;
    if let Some(dir) = traj_dir {
        let cfg = config_for_traj(cli, dir)?;
        let traj = read_trajectory(dir)?;
        let domain = cfg.build_domain()?;
        let kernel = cfg.build_kernel(&domain)?;
        let pot = cfg.potential.build()?;
        let p = pot.params;
        constants = CertificateConstants {
            c_f: p.c_f,
            c_omega: gn_battery(&domain, 32, cfg.seed)?.c_omega_default,
            c_j: c_j_from_grad(kernel.l1_grad_j()),
            l1_grad_j: kernel.l1_grad_j(),
            energy_constant: energy_constant_estimate(&traj, tau, &pot)?,
            eps0: p.eps0,
            eps1: p.eps1,
        };
        delta_emp = Some(separation_profile(&traj, tau)?.delta_emp);
    }
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut constants.c_f, o.c_f);
    set(&mut constants.c_omega, o.c_omega);
    set(&mut constants.l1_grad_j, o.l1_grad_j);
    constants.c_j = match (o.c_j, o.l1_grad_j) {
        (Some(c), _) => c,
        (None, Some(g)) if traj_dir.is_some() => c_j_from_grad(g),
        _ => constants.c_j,
    };
    set(&mut constants.energy_constant, o.energy_constant);
    set(&mut constants.eps0, o.eps0);
    set(&mut constants.eps1, o.eps1);
    let certificate = delta_certificate(&constants, tau)?;
    let report = CertifyReport {
        check: check_certificate(&certificate),
        certificate,
        delta_emp,
    };
    emit(cli, "certificate", &report)?;
    Ok(report.certificate.feasible)
}

fn cmd_check_potential(cli: &Cli, theta: f64, eps0: f64, eps1: f64, n: usize) -> Outcome {
    let pot = match &cli.config {
        Some(_) => load_config(cli)?.potential.build()?,
        None => Potential::flory_huggins(PotentialParams::flory_huggins(theta, eps0, eps1)?),
    };
    let report = check_assumptions(&pot, n)?;
    emit(cli, "assumptions", &report)?;
    Ok(report.a1_ok && report.a2_ok && report.a3_ok)
}

fn cmd_check_kernel(cli: &Cli, n_fields: usize) -> Outcome {
    let cfg = load_config(cli)?;
    let domain = cfg.build_domain()?;
    let kernel = cfg.build_kernel(&domain)?;
    let report = check_bounds(&kernel, n_fields, cfg.seed)?;
    emit(cli, "kernel", &report)?;
    Ok(report.all())
}

fn cmd_iter_lemma(cli: &Cli, c: f64, b: f64, eps: f64, y0: f64, n: usize) -> Outcome {
    let report = iter_lemma_check(c, b, eps, y0, n)?;
    emit(cli, "iter_lemma", &report)?;
    Ok(!report.precondition || report.conclusion)
}

fn default_ensemble(members: usize, amplitude: f64, m: f64, seed: u64) -> Vec<ProbeDatum> {
    // means spread over 90% of the admissible band so sampling noise stays inside
    let half_band = 0.9 * (1.0 - m);
    (0..members)
        .map(|i| {
            let frac = if members > 1 {
                i as f64 / (members - 1) as f64
            } else {
                0.5
            };
            ProbeDatum {
                phi0: InitialCondition::Random {
                    amplitude,
                    mean: -half_band + 2.0 * half_band * frac,
                },
                seed: seed + i as u64,
            }
        })
        .collect()
}

fn cmd_probe(cli: &Cli, data: Option<&Path>, members: usize, amplitude: f64, m: f64, t_long: f64) -> Outcome {
    let template = load_config(cli)?;
    let data = match data {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => default_ensemble(members, amplitude, m, template.seed),
    };
    let report = attractor_probe(&template, &data, m, t_long)?;
    emit(cli, "attractor", &report)?;
    Ok(report.common_bound)
}

fn cmd_regularity(cli: &Cli, taus: &[f64], dirs: &[PathBuf], seeds: &[u64]) -> Outcome {
    let cfg = match (&cli.config, dirs.first()) {
        (None, Some(dir)) => config_for_traj(cli, dir)?,
        _ => load_config(cli)?,
    };
    let runs: Vec<Trajectory> = if dirs.is_empty() {
        let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds.to_vec() };
        let t_max = taus.iter().cloned().fold(0.0, f64::max);
        seeds
            .par_iter()
            .map(|&seed| {
                simulate(&RunConfig {
                    seed,
                    t_end: cfg.t_end.max(t_max),
                    ..cfg.clone()
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        dirs.iter().map(|d| read_trajectory(d)).collect::<Result<_, _>>()?
    };
    let domain = cfg.build_domain()?;
    let kernel = cfg.build_kernel(&domain)?;
    let pot = cfg.potential.build()?;
    let report = regularity_scaling(&runs, taus, &kernel, &pot)?;
    emit(cli, "regularity", &report)?;
    Ok(report.within_bound())
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Simulate => cmd_simulate(cli),
        Command::Degiorgi {
            traj,
            t_final,
            tau_tilde,
            delta,
            n_levels,
            sign,
            require_decay,
        } => {
            let t_final = match t_final {
                Some(t) => *t,
                None => read_trajectory(traj)?.t_end(),
            };
            let dp = DeGiorgiParams {
                t_final,
                tau_tilde: *tau_tilde,
                delta: *delta,
                n_levels: *n_levels,
                sign: match sign {
                    Sign::Plus => LevelSign::Plus,
                    Sign::Minus => LevelSign::Minus,
                },
            };
            cmd_degiorgi(cli, traj, dp, *require_decay)
        }
        Command::Certify {
            traj,
            c_f,
            c_omega,
            c_j,
            l1_grad_j,
            energy_constant,
            eps0,
            eps1,
            tau,
        } => cmd_certify(
            cli,
            traj.as_deref(),
            Overrides {
                c_f: *c_f,
                c_omega: *c_omega,
                c_j: *c_j,
                l1_grad_j: *l1_grad_j,
                energy_constant: *energy_constant,
                eps0: *eps0,
                eps1: *eps1,
            },
            *tau,
        ),
        Command::CheckPotential {
            theta,
            eps0,
            eps1,
            n_samples,
        } => cmd_check_potential(cli, *theta, *eps0, *eps1, *n_samples),
        Command::CheckKernel { n_fields } => cmd_check_kernel(cli, *n_fields),
        Command::IterLemma { c, b, eps, y0, n } => cmd_iter_lemma(cli, *c, *b, *eps, *y0, *n),
        Command::ProbeAttractor {
            data,
            members,
            amplitude,
            m,
            t_long,
        } => cmd_probe(cli, data.as_deref(), *members, *amplitude, *m, *t_long),
        Command::Regularity { taus, traj, seeds } => cmd_regularity(cli, taus, traj, seeds),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NLCH_LOG", "error")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("assertion failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
