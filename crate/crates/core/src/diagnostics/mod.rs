//! Runnable counterparts of the separation analysis: empirical gaps, De Giorgi
//! sequences, the iteration lemma, the `(δ, τ̃)` certificate and regularity
//! estimators. All functions read immutable trajectories.

pub mod attractor;
pub mod certificate;
pub mod degiorgi;
pub mod gn;
pub mod holder;
pub mod iteration;
pub mod regularity;
pub mod separation;

pub use attractor::{attractor_probe, ProbeDatum, ProbeMember, ProbeReport};
pub use certificate::{
    c_j_from_grad, check_certificate, delta_certificate, CertificateConstants, SeparationCertificate,
};
pub use degiorgi::{degiorgi_sequences, write_degiorgi_csv, DeGiorgiParams, DeGiorgiReport, LevelSign};
pub use gn::{gn_battery, gn_ratio, GnEstimate};
pub use holder::{holder_constant, holder_estimate, HolderFit, HolderReport};
pub use iteration::{iter_lemma_check, iter_lemma_check_ln, ln_threshold, IterLemmaReport};
pub use regularity::{
    regularity_scaling, BETA_BOUND, DTPHI_L2_WINDOW, MU_H1, LqLpEntry, RegularityReport, ScalingFit};
pub use separation::{
    energy_constant_estimate, mu_bound_check, separation_profile, MuBoundReport, SeparationProfile,
};
