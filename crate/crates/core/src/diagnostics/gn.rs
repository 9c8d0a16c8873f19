//! Gagliardo–Nirenberg ratio `‖f‖_{10/3} / (‖f‖₂^{2/5} ‖f‖_{H¹}^{3/5})`.
//!
//! The exponents are the three-dimensional ones; on 1D/2D lattices the same
//! ratio is reported as an empirical quantity.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Field, Norm};

pub fn gn_ratio(f: &Field) -> Result<f64> {
    let l2 = f.norm(Norm::L2)?;
    if l2 == 0.0 {
        return Err(Error::Validation("gn_ratio of the zero field".into()));
    }
    let lp = f.norm(Norm::Lp(10.0 / 3.0))?;
    let h1 = f.norm(Norm::H1)?;
    Ok(lp / (l2.powf(0.4) * h1.powf(0.6)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnEstimate {
    pub max_ratio: f64,
    pub argmax: String,
    pub samples: usize,
    /// Default `C_Ω` for the certificate: twice the empirical maximum.
    pub c_omega_default: f64,
    /// Whether the lattice is three-dimensional (the exponents' native setting).
    pub native_dimension: bool,
}

/// Maximizes the ratio over constants, bumps of several widths, cosine modes
/// and seeded random fields.
pub fn gn_battery(domain: &Domain, n_random: usize, seed: u64) -> Result<GnEstimate> {
    let mut candidates: Vec<(String, Field)> = vec![("constant".into(), Field::constant(domain, 1.0))];
    let ext = domain.extents().to_vec();
    let h_min = domain.spacings().into_iter().fold(f64::INFINITY, f64::min);
    let mut width = ext.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    while width >= h_min {
        for corner in [false, true] {
            let c: Vec<f64> = ext.iter().map(|l| if corner { 0.0 } else { l / 2.0 }).collect();
            let w = width;
            candidates.push((
                format!("bump(width={w:.3e},corner={corner})"),
                Field::from_fn(domain, |x| {
                    let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-r2 / (2.0 * w * w)).exp()
                }),
            ));
        }
        width /= 2.0;
    }
    let max_mode = domain.cells().iter().copied().max().unwrap_or(1);
    let mut k = 1;
    while k < max_mode {
        candidates.push((
            format!("cosine(k={k})"),
            Field::from_fn(domain, |x| (PI * k as f64 * x[0] / ext[0]).cos()),
        ));
        k *= 2;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_random {
        let values = (0..domain.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        candidates.push((format!("random#{i}"), Field::new(domain.clone(), values)?));
    }
    let mut best = (f64::NEG_INFINITY, String::new());
    for (label, f) in &candidates {
        let r = gn_ratio(f)?;
        if r > best.0 {
            best = (r, label.clone());
        }
    }
    Ok(GnEstimate {
        max_ratio: best.0,
        argmax: best.1,
        samples: candidates.len(),
        c_omega_default: 2.0 * best.0,
        native_dimension: domain.dim() == 3,
    })
}
