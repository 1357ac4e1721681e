//! Frame-to-frame registration of scatterer clouds.
//!
//! Clouds S(i) = {x_k} and S(i+1) = {z_l} live in consecutive vehicle
//! frames and are related by z ≈ R(Δθ)·x + ΔX_V.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{rotation, PointCloud, Vec2};
use crate::error::{Error, Result};

/// Relative pose (Δθ, ΔX_V) between consecutive vehicle frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidMotion {
    /// rad.
    pub dtheta: f64,
    /// m, vehicle frame.
    pub dx: f64,
    pub dy: f64,
}

impl RigidMotion {
    pub fn new(dtheta: f64, translation: Vec2) -> Self {
        RigidMotion {
            dtheta,
            dx: translation.x,
            dy: translation.y,
        }
    }

    pub fn translation(&self) -> Vec2 {
        Vec2::new(self.dx, self.dy)
    }

    /// R(Δθ)·x + ΔX_V.
    pub fn apply(&self, x: &Vec2) -> Vec2 {
        rotation(self.dtheta) * x + self.translation()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpSettings {
    pub max_iters: usize,
    /// Convergence threshold on the translation change, m.
    pub eps_translation: f64,
    /// Convergence threshold on the rotation change, rad.
    pub eps_rotation: f64,
    /// Welsch scale, m.
    pub robust_c: f64,
    pub init: RigidMotion,
}

impl Default for IcpSettings {
    fn default() -> Self {
        IcpSettings {
            max_iters: 50,
            eps_translation: 1e-12,
            eps_rotation: 1e-12,
            robust_c: 0.1,
            init: RigidMotion::default(),
        }
    }
}

impl IcpSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.eps_translation > 0.0
            && self.eps_rotation > 0.0
            && self.robust_c > 0.0
            && self.robust_c.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("ICP settings must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcpDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Weighted objective at the returned pose.
    pub objective: f64,
    /// Σw at the returned pose; small values mean most pairs were rejected.
    pub weight_sum: f64,
}

/// For every x_k in `prev`, the index of the z_l in `next` minimizing
/// ‖(z_l − ΔX_V) − R(Δθ)·x_k‖. Not a bijection.
pub fn icp_associate(prev: &PointCloud, next: &PointCloud, motion: &RigidMotion) -> Result<Vec<usize>> {
    if prev.points.is_empty() || next.points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    // Clouds hold tens of points, so an exhaustive scan is cheapest.
    Ok(prev
        .points
        .iter()
        .map(|x| {
            let p = motion.apply(x);
            let mut best = (0, f64::INFINITY);
            for (l, z) in next.points.iter().enumerate() {
                let d = (z - p).norm_squared();
                if d < best.1 {
                    best = (l, d);
                }
            }
            best.0
        })
        .collect())
}

/// Σ w_k ‖(z_k − ΔX_V) − R(Δθ)·x_k‖².
pub fn rigid_objective(pairs: &[(Vec2, Vec2)], weights: &[f64], motion: &RigidMotion) -> f64 {
    pairs
        .iter()
        .zip(weights)
        .map(|((x, z), w)| w * (z - motion.apply(x)).norm_squared())
        .sum()
}

/// Weighted 2D Procrustes fit of `(x, z)` pairs.
///
/// When the weighted cross-covariance vanishes (all x or all z coincide)
/// the rotation is unobservable and Δθ = 0 is returned with the
/// centroid translation.
pub fn icp_solve_rigid(pairs: &[(Vec2, Vec2)], weights: &[f64]) -> Result<RigidMotion> {
    if pairs.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} pairs but {} weights",
            pairs.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if pairs.is_empty() || !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "total pair weight {total} over {} pairs",
            pairs.len()
        )));
    }
    let mut cx = Vec2::zeros();
    let mut cz = Vec2::zeros();
    for ((x, z), w) in pairs.iter().zip(weights) {
        cx += x * *w;
        cz += z * *w;
    }
    cx /= total;
    cz /= total;
    let (mut dot, mut cross, mut spread) = (0.0, 0.0, 0.0);
    for ((x, z), w) in pairs.iter().zip(weights) {
        let (a, b) = (x - cx, z - cz);
        dot += w * a.dot(&b);
        cross += w * (a.x * b.y - a.y * b.x);
        spread += w * (a.norm_squared() + b.norm_squared());
    }
    let dtheta = if dot.hypot(cross) <= 1e-15 * spread.max(f64::MIN_POSITIVE) || spread == 0.0 {
        0.0
    } else {
        cross.atan2(dot)
    };
    Ok(RigidMotion::new(dtheta, cz - rotation(dtheta) * cx))
}

/// Welsch weight exp(−ρ²/c²).
pub fn welsch_weight(residual: f64, c: f64) -> f64 {
    (-(residual / c).powi(2)).exp()
}

/// Alternates association and weighted rigid fits until the pose change
/// drops below the thresholds. Non-convergence is flagged in the
/// diagnostics and the last iterate returned.
pub fn icp(prev: &PointCloud, next: &PointCloud, settings: &IcpSettings) -> Result<(RigidMotion, IcpDiagnostics)> {
    settings.validate()?;
    let mut motion = settings.init;
    let mut diag = IcpDiagnostics {
        iterations: 0,
        converged: false,
        objective: f64::NAN,
        weight_sum: 0.0,
    };
    for it in 1..=settings.max_iters {
        let (pairs, weights) = weighted_pairs(prev, next, &motion, settings.robust_c)?;
        let new = icp_solve_rigid(&pairs, &weights)?;
        let step_t = (new.translation() - motion.translation()).norm();
        let step_r = (new.dtheta - motion.dtheta).abs();
        motion = new;
        diag.iterations = it;
        if step_t < settings.eps_translation && step_r < settings.eps_rotation {
            diag.converged = true;
            break;
        }
    }
    let (pairs, weights) = weighted_pairs(prev, next, &motion, settings.robust_c)?;
    diag.objective = rigid_objective(&pairs, &weights, &motion);
    diag.weight_sum = weights.iter().sum();
    Ok((motion, diag))
}

fn weighted_pairs(
    prev: &PointCloud,
    next: &PointCloud,
    motion: &RigidMotion,
    c: f64,
) -> Result<(Vec<(Vec2, Vec2)>, Vec<f64>)> {
    let assoc = icp_associate(prev, next, motion)?;
    let pairs: Vec<_> = prev
        .points
        .iter()
        .zip(&assoc)
        .map(|(x, &l)| (*x, next.points[l]))
        .collect();
    let weights = pairs
        .iter()
        .map(|(x, z)| welsch_weight((z - motion.apply(x)).norm(), c))
        .collect();
    Ok((pairs, weights))
}

/// Maps a relative pose to the ground frame:
/// Δψ = −Δθ and ΔX_G = R(ψ(i+1) − π/2)·(−ΔX_V).
pub fn to_ground(motion: &RigidMotion, psi_next: f64) -> (f64, Vec2) {
    (
        -motion.dtheta,
        rotation(psi_next - FRAC_PI_2) * (-motion.translation()),
    )
}
