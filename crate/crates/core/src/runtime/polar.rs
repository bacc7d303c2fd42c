use glam::{DMat3, DQuat};
use thiserror::Error;

use crate::math::canonical_quat;

pub const POLAR_MAX_ITERATIONS: usize = 30;
pub const POLAR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OrientationError {
    #[error("singular linear part (det {0:e})")]
    Singular(f64),
    #[error("linear part contains a reflection (det {0:e})")]
    Reflection(f64),
}

/// Rotation factor of the polar decomposition `M = R S`, as a canonical unit
/// quaternion.
///
/// Iterates `X <- (X + X^-T) / 2` until successive iterates differ by less
/// than 1e-9 in Frobenius norm (at most 30 steps).
pub fn extract_rotation(m: DMat3) -> Result<DQuat, OrientationError> {
    let det = m.determinant();
    if !(det.abs() >= crate::binding::SINGULAR_DET) {
        return Err(OrientationError::Singular(det));
    }
    let mut x = m;
    for _ in 0..POLAR_MAX_ITERATIONS {
        let next = (x + x.inverse().transpose()) * 0.5;
        let diff = next - x;
        x = next;
        if frobenius_sq(&diff) < POLAR_TOLERANCE * POLAR_TOLERANCE {
            break;
        }
    }
    let det = x.determinant();
    if det < 0.0 {
        return Err(OrientationError::Reflection(det));
    }
    Ok(canonical_quat(DQuat::from_mat3(&x).normalize()))
}

fn frobenius_sq(m: &DMat3) -> f64 {
    m.x_axis.length_squared() + m.y_axis.length_squared() + m.z_axis.length_squared()
}
