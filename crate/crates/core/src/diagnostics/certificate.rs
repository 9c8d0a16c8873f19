//! Choice of `(δ, τ̃)` satisfying
//!
//! ```text
//! 2⁴δ / (C_F g²)  ≤  τ̃  ≤  δ|ln δ| / (3·2^{77/4} C_Ω^{3/2} C_F⁵ C_J^{3/2} C)
//! ```
//!
//! with `g = ‖∇J‖_{L¹(B_{M₁})}` and `C = C(E_NL(φ₀), τ)`. The two sides meet
//! when `|ln δ| = K := 3·2^{93/4} C_Ω^{3/2} C_F⁴ C_J^{3/2} C / g²`. Everything
//! is carried in log space: realistic constants give `ln δ ≈ −10⁷`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateConstants {
    pub c_f: f64,
    pub c_omega: f64,
    pub c_j: f64,
    pub l1_grad_j: f64,
    /// `C(E_NL(φ₀), τ)`.
    pub energy_constant: f64,
    pub eps0: f64,
    pub eps1: f64,
}

impl CertificateConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_f,
            self.c_omega,
            self.c_j,
            self.l1_grad_j,
            self.energy_constant,
            self.eps0,
            self.eps1,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation(format!(
                "certificate constants must be finite and > 0: {self:?}"
            )));
        }
        if self.c_f < 1.0 {
            return Err(Error::Validation(format!("c_f must be >= 1, got {}", self.c_f)));
        }
        Ok(())
    }
}

/// `max(g^{10/3}, g^{4/3})`.
pub fn c_j_from_grad(g: f64) -> f64 {
    g.powf(10.0 / 3.0).max(g.powf(4.0 / 3.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub ln_delta: f64,
    /// `exp(ln_tau_tilde)`; may underflow to zero.
    pub tau_tilde: f64,
    pub ln_tau_tilde: f64,
    /// `ln K`.
    pub ln_k: f64,
    pub feasible: bool,
    pub tau: f64,
    pub constants_used: CertificateConstants,
}

/// `ln K` with `K = 3·2^{93/4} C_Ω^{3/2} C_F⁴ C_J^{3/2} C / g²`.
pub fn ln_feasibility_constant(c: &CertificateConstants) -> f64 {
    3f64.ln() + 93.0 / 4.0 * LN_2 + 1.5 * c.c_omega.ln() + 4.0 * c.c_f.ln() + 1.5 * c.c_j.ln()
        + c.energy_constant.ln()
        - 2.0 * c.l1_grad_j.ln()
}

/// `ln` of the lower side `2⁴δ/(C_F g²)`.
pub fn ln_lower(c: &CertificateConstants, ln_delta: f64) -> f64 {
    4.0 * LN_2 + ln_delta - c.c_f.ln() - 2.0 * c.l1_grad_j.ln()
}

/// `ln` of the upper side `δ|ln δ|/(3·2^{77/4} C_Ω^{3/2} C_F⁵ C_J^{3/2} C)`.
pub fn ln_upper(c: &CertificateConstants, ln_delta: f64) -> f64 {
    ln_delta + (-ln_delta).ln()
        - 3f64.ln()
        - 77.0 / 4.0 * LN_2
        - 1.5 * c.c_omega.ln()
        - 5.0 * c.c_f.ln()
        - 1.5 * c.c_j.ln()
        - c.energy_constant.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub window_ok: bool,
}

impl CertificateCheck {
    pub fn all(&self) -> bool {
        self.lower_ok && self.upper_ok && self.window_ok
    }
}

/// Re-evaluates both sides of the sandwich and `τ̃ ≤ τ/5` in log space.
pub fn check_certificate(cert: &SeparationCertificate) -> CertificateCheck {
    let c = &cert.constants_used;
    CertificateCheck {
        lower_ok: ln_lower(c, cert.ln_delta) <= cert.ln_tau_tilde,
        upper_ok: cert.ln_tau_tilde <= ln_upper(c, cert.ln_delta),
        window_ok: cert.ln_tau_tilde <= (cert.tau / 5.0).ln(),
    }
}

/// `ln δ = min(−K, ln(ε₀/2), ln ε₁) − ln 2`, `τ̃` at the lower side, then
/// `δ` reduced until `τ̃ ≤ τ/5`.
pub fn delta_certificate(constants: &CertificateConstants, tau: f64) -> Result<SeparationCertificate> {
    constants.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Validation(format!("tau must be > 0, got {tau}")));
    }
    let ln_k = ln_feasibility_constant(constants);
    let k = ln_k.exp();
    let mut ln_delta = (-k).min((constants.eps0 / 2.0).ln()).min(constants.eps1.ln()) - LN_2;
    let ln_cap = (tau / 5.0).ln();
    let mut ln_tau_tilde = ln_lower(constants, ln_delta);
    if ln_tau_tilde > ln_cap {
        ln_delta -= ln_tau_tilde - ln_cap;
        ln_tau_tilde = ln_lower(constants, ln_delta);
    }
    // absorb rounding in the cap
    let mut guard = 0;
    while ln_tau_tilde > ln_cap && guard < 64 {
        ln_delta -= (ln_tau_tilde - ln_cap).max(f64::EPSILON * ln_delta.abs());
        ln_tau_tilde = ln_lower(constants, ln_delta);
        guard += 1;
    }
    let mut cert = SeparationCertificate {
        ln_delta,
        tau_tilde: ln_tau_tilde.exp(),
        ln_tau_tilde,
        ln_k,
        feasible: false,
        tau,
        constants_used: *constants,
    };
    // at huge K one ulp of ln δ outweighs the ln 2 margin on the upper side;
    // widen the margin with geometrically growing relative steps
    let mut guard = 0;
    while k.is_finite() && !check_certificate(&cert).all() && guard < 60 {
        cert.ln_delta -= 4.0 * f64::EPSILON * 2f64.powi(guard) * cert.ln_delta.abs().max(1.0);
        cert.ln_tau_tilde = ln_lower(constants, cert.ln_delta);
        cert.tau_tilde = cert.ln_tau_tilde.exp();
        guard += 1;
    }
    cert.feasible = k.is_finite() && check_certificate(&cert).all();
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones() -> CertificateConstants {
        CertificateConstants {
            c_f: 1.0,
            c_omega: 1.0,
            c_j: 1.0,
            l1_grad_j: 1.0,
            energy_constant: 1.0,
            eps0: 1.0,
            eps1: 1.0,
        }
    }

    #[test]
    fn all_ones() {
        let c = delta_certificate(&ones(), 1.0).unwrap();
        let k = 3.0 * 2f64.powf(93.0 / 4.0);
        assert!((c.ln_delta - (-k - LN_2)).abs() <= 1e-12 * k);
        assert!(c.feasible);
        assert_eq!(c.tau_tilde, 0.0);
    }

    #[test]
    fn sandwich_collapses_at_k() {
        // at |ln δ| = K both sides agree
        let c = ones();
        let k = ln_feasibility_constant(&c).exp();
        let lo = ln_lower(&c, -k);
        let hi = ln_upper(&c, -k);
        assert!((lo - hi).abs() <= 1e-9 * k);
    }

    #[test]
    fn doubling_energy_constant_doubles_k() {
        let a = delta_certificate(&ones(), 1.0).unwrap();
        let b = delta_certificate(
            &CertificateConstants {
                energy_constant: 2.0,
                ..ones()
            },
            1.0,
        )
        .unwrap();
        assert!((b.ln_k - a.ln_k - LN_2).abs() < 1e-12);
        assert!(b.ln_delta < a.ln_delta);
    }

    #[test]
    fn window_cap_binds_for_tiny_constants() {
        // huge gradient norm makes the lower side tiny unless τ is tinier
        let c = CertificateConstants {
            l1_grad_j: 1e-3,
            energy_constant: 1e-30,
            ..ones()
        };
        let cert = delta_certificate(&c, 1e-9).unwrap();
        assert!(cert.ln_tau_tilde <= (1e-9f64 / 5.0).ln());
        assert!(check_certificate(&cert).all());
    }

    #[test]
    fn c_j_branches() {
        assert_eq!(c_j_from_grad(1.0), 1.0);
        assert!((c_j_from_grad(8.0) - 8f64.powf(10.0 / 3.0)).abs() < 1e-9);
        assert!((c_j_from_grad(0.125) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(delta_certificate(&CertificateConstants { c_f: 0.5, ..ones() }, 1.0).is_err());
        assert!(delta_certificate(&CertificateConstants { c_j: 0.0, ..ones() }, 1.0).is_err());
        assert!(delta_certificate(&ones(), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn sound_for_random_constants(
            c_f in 1.0f64..10.0, c_omega in 0.1f64..10.0, g in 0.01f64..100.0,
            e in 1e-6f64..1e3, eps0 in 0.01f64..1.0, eps1 in 0.01f64..0.5, tau in 1e-4f64..10.0
        ) {
            let c = CertificateConstants {
                c_f, c_omega, c_j: c_j_from_grad(g), l1_grad_j: g, energy_constant: e, eps0, eps1,
            };
            let cert = delta_certificate(&c, tau).unwrap();
            prop_assert!(cert.feasible);
            prop_assert!(cert.ln_delta < (eps0 / 2.0).ln().min(eps1.ln()));
        }
    }
}
