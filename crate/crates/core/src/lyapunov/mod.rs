//! Exact drift evaluation for the three Lyapunov families.

pub mod power;
pub mod profile;
pub mod recurrence;

pub use power::{find_phi_params, log_drift, phi_drift, phi_tilde, scan_phi_drift, DriftScan, PhiCertificate, PhiParams};
pub use profile::{build_radial_profile, target_curve, RadialProfile, DEFAULT_KNOTS};
pub use recurrence::{
    f_value, find_gamma_alpha, gamma_walk_drift, gamma_walk_drift_with, ratio_radius, rho, scan_gamma_shell,
    GammaCertificate, ShellScan,
};

use crate::error::{Error, Result};
use crate::quadrature::regularized_incomplete_beta;

/// `2 / I_{1/2}((d−1)/2, ½)`: a lower bound on the number of caps of angular radius `< π/4` covering the sphere.
pub fn cap_count_lower_bound(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need d >= 2, got {d}")));
    }
    let i = regularized_incomplete_beta(0.5, (d as f64 - 1.0) / 2.0, 0.5)?;
    Ok(2.0 / i)
}
