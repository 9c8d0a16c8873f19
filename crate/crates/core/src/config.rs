//! JSON run configuration.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, RunSettings, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Domain, Field};
use crate::io;
use crate::kernel::{ConvolutionMode, Kernel, KernelSpec};
use crate::potential::{flory_huggins_c_f, Potential, PotentialParams, TabulatedPotential};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    pub cells: Vec<usize>,
    pub extents: Vec<f64>,
    #[serde(default = "default_boundary")]
    pub boundary_mode: BoundaryMode,
}

fn default_boundary() -> BoundaryMode {
    BoundaryMode::Neumann
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain> {
        if self.cells.len() != self.dim || self.extents.len() != self.dim {
            return Err(Error::Config(format!(
                "domain.dim = {} but cells has {} and extents {} entries",
                self.dim,
                self.cells.len(),
                self.extents.len()
            )));
        }
        Domain::new(self.extents.clone(), self.cells.clone(), self.boundary_mode)
            .map_err(|e| Error::Config(e.to_string()))
    }
}

/// Density selection. `c_f` defaults to the closed-form Flory–Huggins value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    FloryHuggins {
        theta: f64,
        eps0: f64,
        eps1: f64,
        #[serde(default)]
        c_f: Option<f64>,
    },
    /// CSV with header `s,f,df,ddf`, nodes increasing.
    Tabulated {
        path: PathBuf,
        theta: f64,
        eps0: f64,
        eps1: f64,
        c_f: f64,
    },
}

#[derive(Debug, Deserialize)]
struct PotentialRow {
    s: f64,
    f: f64,
    df: f64,
    ddf: f64,
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        match self {
            PotentialConfig::FloryHuggins {
                theta,
                eps0,
                eps1,
                c_f,
            } => {
                let c_f = c_f.unwrap_or_else(|| flory_huggins_c_f(*theta, *eps1));
                let params = PotentialParams::new(*theta, *eps0, *eps1, c_f)?;
                Ok(Potential::flory_huggins(params))
            }
            PotentialConfig::Tabulated {
                path,
                theta,
                eps0,
                eps1,
                c_f,
            } => {
                let params = PotentialParams::new(*theta, *eps0, *eps1, *c_f)?;
                let mut reader = csv::Reader::from_path(path)?;
                let (mut s, mut f, mut df, mut ddf) = (vec![], vec![], vec![], vec![]);
                for row in reader.deserialize() {
                    let row: PotentialRow = row?;
                    s.push(row.s);
                    f.push(row.f);
                    df.push(row.df);
                    ddf.push(row.ddf);
                }
                Ok(Potential::tabulated(TabulatedPotential::new(s, f, df, ddf)?, params))
            }
        }
    }

    pub fn params(&self) -> Result<PotentialParams> {
        Ok(self.build()?.params)
    }
}

/// Initial datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · Π cos(π k_i x_i / L_i)` (a Neumann eigenfunction);
    /// `modes` defaults to 1 along the first axis and 0 elsewhere.
    Sine {
        amplitude: f64,
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        modes: Option<Vec<u32>>,
    },
    /// `amplitude · tanh((x₀ − center)/width)` along the first axis.
    Tanh {
        amplitude: f64,
        #[serde(default = "half")]
        center: f64,
        width: f64,
    },
    /// i.i.d. uniform values in `mean ± amplitude`, drawn from the run seed.
    Random {
        amplitude: f64,
        #[serde(default)]
        mean: f64,
    },
    /// Flat little-endian f64 field on the configured lattice.
    File {
        path: PathBuf,
    },
}

fn half() -> f64 {
    0.5
}

impl InitialCondition {
    pub fn build(&self, domain: &Domain, seed: u64) -> Result<Field> {
        match self {
            InitialCondition::Constant { value } => Ok(Field::constant(domain, *value)),
            InitialCondition::Sine {
                amplitude,
                mean,
                modes,
            } => {
                let modes = match modes {
                    Some(m) if m.len() == domain.dim() => m.clone(),
                    Some(m) => {
                        return Err(Error::Config(format!(
                            "phi0.modes has {} entries for a {}-d domain",
                            m.len(),
                            domain.dim()
                        )))
                    }
                    None => (0..domain.dim()).map(|i| u32::from(i == 0)).collect(),
                };
                let ext = domain.extents().to_vec();
                Ok(Field::from_fn(domain, |x| {
                    let prod: f64 = x
                        .iter()
                        .zip(&modes)
                        .zip(&ext)
                        .map(|((xi, &k), l)| (PI * k as f64 * xi / l).cos())
                        .product();
                    mean + amplitude * prod
                }))
            }
            InitialCondition::Tanh {
                amplitude,
                center,
                width,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::Config("phi0.width must be > 0".into()));
                }
                Ok(Field::from_fn(domain, |x| amplitude * ((x[0] - center) / width).tanh()))
            }
            InitialCondition::Random { amplitude, mean } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values = (0..domain.len())
                    .map(|_| mean + amplitude * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                Field::new(domain.clone(), values)
            }
            InitialCondition::File { path } => {
                let values = io::read_f64_file(path)?;
                Field::new(domain.clone(), values).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}

fn one() -> usize {
    1
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub convolution: ConvolutionMode,
    pub potential: PotentialConfig,
    pub phi0: InitialCondition,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Built objects of a run config.
#[derive(Debug)]
pub struct Setup {
    pub domain: Domain,
    pub kernel: Kernel,
    pub potential: Potential,
    pub phi0: Field,
    pub settings: RunSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            solver: self.solver,
        }
    }

    pub fn build_domain(&self) -> Result<Domain> {
        self.domain.build()
    }

    pub fn build_kernel(&self, domain: &Domain) -> Result<Kernel> {
        Kernel::build(&self.kernel, domain, self.convolution)
    }

    /// Builds every object and validates the initial datum.
    pub fn setup(&self) -> Result<Setup> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        let domain = self.build_domain()?;
        let kernel = self.build_kernel(&domain)?;
        let potential = self.potential.build()?;
        let phi0 = dynamics::admissible_initial(self.phi0.build(&domain, self.seed)?)?;
        Ok(Setup {
            domain,
            kernel,
            potential,
            phi0,
            settings: self.settings(),
        })
    }
}

/// Runs a configuration to `t_end`.
pub fn simulate(config: &RunConfig) -> Result<Trajectory> {
    let setup = config.setup()?;
    dynamics::run(setup.phi0, &setup.kernel, &setup.potential, &setup.settings)
}
