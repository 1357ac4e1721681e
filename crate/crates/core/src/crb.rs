//! Fisher information and Cramér–Rao bounds for a single target,
//! parameter order ω = [a, ψ, r, u].

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::config::{RadarConfig, Target};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherInfo {
    pub matrix: [[f64; 4]; 4],
    pub sigma: f64,
    pub config: RadarConfig,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrbResult {
    /// m.
    pub sigma_r: f64,
    /// rad.
    pub sigma_theta: f64,
    pub fim: FisherInfo,
}

/// Power sums Σ_{i<len} iᵖ for p = 0..2.
fn power_sums(len: usize) -> [f64; 3] {
    let n = len as f64;
    [n, n * (n - 1.0) / 2.0, n * (n - 1.0) * (2.0 * n - 1.0) / 6.0]
}

/// Closed-form Fisher information from grid power sums.
///
/// With κ = B/(cN) and L = 1/λ the per-sample terms are polynomials in
/// (n, m), so every entry reduces to products of Σnᵖ and Σmᵖ. Only a and σ
/// enter; ψ, r and u do not.
pub fn fisher_matrix(config: &RadarConfig, target: &Target, sigma: f64) -> Result<FisherInfo> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma must be > 0, got {sigma}")));
    }
    if !(target.a > 0.0) || !target.a.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be > 0, got {}", target.a)));
    }
    let a = target.a;
    let kappa = config.beat_scale();
    let l = 1.0 / config.wavelength();
    let [n0, n1, n2] = power_sums(config.samples());
    let [m0, m1, m2] = power_sums(config.virtual_elements());
    let s = 2.0 / (sigma * sigma);
    let tau = 2.0 * PI;

    let i11 = s * m0 * n0;
    let i22 = s * a * a * m0 * n0;
    let i23 = s * 2.0 * tau * a * a * kappa * m0 * n1;
    let i24 = s * tau * a * a * (l * m1 * n0 + kappa * m1 * n1);
    let i33 = s * (2.0 * tau * a * kappa).powi(2) * m0 * n2;
    let i34 = s * 2.0 * (tau * a).powi(2) * kappa * (l * m1 * n1 + kappa * m1 * n2);
    let i44 = s * (tau * a).powi(2) * (l * l * m2 * n0 + 2.0 * l * kappa * m2 * n1 + kappa * kappa * m2 * n2);

    Ok(FisherInfo {
        matrix: [
            [i11, 0.0, 0.0, 0.0],
            [0.0, i22, i23, i24],
            [0.0, i23, i33, i34],
            [0.0, i24, i34, i44],
        ],
        sigma,
        config: *config,
        target: *target,
    })
}

/// σ_r = √[I⁻¹]₃₃ and σ_θ = √[I⁻¹]₄₄ / (d·cosθ), from cofactors of the
/// decoupled (ψ, r, u) block.
pub fn crb_range_angle(fim: &FisherInfo, theta: f64) -> Result<CrbResult> {
    let i = &fim.matrix;
    // Unit-diagonal scaling keeps the cofactors well conditioned.
    let d = [i[1][1].sqrt(), i[2][2].sqrt(), i[3][3].sqrt()];
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::SingularFim("a zero-information diagonal entry".into()));
    }
    let c = |p: usize, q: usize| i[p + 1][q + 1] / (d[p] * d[q]);
    let (p12, p13, p23) = (c(0, 1), c(0, 2), c(1, 2));
    let det = 1.0 + 2.0 * p12 * p13 * p23 - p12 * p12 - p13 * p13 - p23 * p23;
    if !(det > 1e-14) {
        return Err(Error::SingularFim(null_direction(p12, p13, p23)));
    }
    let inv_rr = (1.0 - p13 * p13) / det / (d[1] * d[1]);
    let inv_uu = (1.0 - p12 * p12) / det / (d[2] * d[2]);
    let cos = theta.cos();
    if !(cos > 0.0) {
        return Err(Error::InvalidArgument(format!("angle {theta} rad is outside (-pi/2, pi/2)")));
    }
    Ok(CrbResult {
        sigma_r: inv_rr.sqrt(),
        sigma_theta: inv_uu.sqrt() / (fim.config.spacing() * cos),
        fim: *fim,
    })
}

fn null_direction(p12: f64, p13: f64, p23: f64) -> String {
    let block = nalgebra::Matrix3::new(1.0, p12, p13, p12, 1.0, p23, p13, p23, 1.0);
    let eig = block.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, &v)| if v < best.1 { (j, v) } else { best });
    let v = eig.eigenvectors.column(idx);
    format!("(psi, r, u) ~ ({:.3}, {:.3}, {:.3})", v[0], v[1], v[2])
}

/// CRB for the target at the noise level giving `snr_db`.
pub fn crb_at_snr(config: &RadarConfig, target: &Target, snr_db: f64) -> Result<CrbResult> {
    let sigma = config.sigma_for_snr(target.a, snr_db);
    crb_range_angle(&fisher_matrix(config, target, sigma)?, target.theta)
}

/// `snr_db,sigma_r_m,sigma_theta_deg` rows.
pub fn write_crb_csv<W: Write>(mut w: W, rows: &[(f64, CrbResult)]) -> std::io::Result<()> {
    writeln!(w, "snr_db,sigma_r_m,sigma_theta_deg")?;
    for (snr, c) in rows {
        writeln!(w, "{snr},{},{}", c.sigma_r, c.sigma_theta.to_degrees())?;
    }
    Ok(())
}
