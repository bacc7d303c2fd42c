//! Small numeric helpers shared across modules.

use glam::{DMat3, DMat4, DQuat, DVec3, Quat, Vec3};

/// Returns `q` normalized with a non-negative `w`.
pub fn canonical_quat(q: DQuat) -> DQuat {
    let q = q.normalize();
    if q.w < 0.0 {
        -q
    } else {
        q
    }
}

pub fn canonical_quat_f32(q: Quat) -> Quat {
    canonical_quat(q.as_dquat()).as_quat()
}

/// Angle between two rotations, in radians, ignoring the double cover.
pub fn quat_angle(a: DQuat, b: DQuat) -> f64 {
    let d = a.dot(b).abs().min(1.0);
    2.0 * d.acos()
}

/// Distance between two unit quaternions modulo sign: `min(|a - b|, |a + b|)`.
pub fn quat_distance(a: Quat, b: Quat) -> f32 {
    let a = a.as_dquat();
    let b = b.as_dquat();
    let minus = (a - b).length();
    let plus = (a + b).length();
    minus.min(plus) as f32
}

pub fn rot_y(angle: f64) -> DQuat {
    DQuat::from_rotation_y(angle)
}

/// Index into an ascending sample array for the nearest-rank percentile,
/// `rank = ceil(p * n)` clamped to `[min_rank, n]` (1-based).
pub fn nearest_rank_index(n: usize, p: f64, min_rank: usize) -> usize {
    debug_assert!(n > 0);
    let rank = (p * n as f64).ceil() as usize;
    rank.max(min_rank).max(1).min(n) - 1
}

/// Sorts `values` ascending with ties resolved by original index and returns
/// the value at the nearest-rank percentile.
pub fn percentile(values: &[f32], p: f64, min_rank: usize) -> f32 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    values[idx[nearest_rank_index(values.len(), p, min_rank)]]
}

/// Upper 3x3 block of an affine matrix.
pub fn linear_part(m: &DMat4) -> DMat3 {
    DMat3::from_cols(m.x_axis.truncate(), m.y_axis.truncate(), m.z_axis.truncate())
}

pub fn to_dvec(v: Vec3) -> DVec3 {
    v.as_dvec3()
}

pub fn arr3(v: Vec3) -> [f32; 3] {
    v.to_array()
}

/// Bitwise equality of two float slices (distinguishes `-0.0` and NaN payloads).
pub fn bits_eq(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_flips_negative_w() {
        let q = DQuat::from_xyzw(0.0, 0.0, 0.6, -0.8);
        let c = canonical_quat(q);
        assert!(c.w > 0.0);
        assert!(quat_angle(q, c) < 1e-12);
    }

    #[test]
    fn rank_clamps() {
        assert_eq!(nearest_rank_index(100, 0.01, 2), 1);
        assert_eq!(nearest_rank_index(1000, 0.01, 2), 9);
        assert_eq!(nearest_rank_index(5, 0.99, 1), 4);
        assert_eq!(nearest_rank_index(3, 0.0, 1), 0);
    }

    #[test]
    fn percentile_is_order_statistic() {
        let v: Vec<f32> = (0..100).rev().map(|i| i as f32 * 0.01).collect();
        assert_eq!(percentile(&v, 0.01, 2), 1.0f32 * 0.01);
        assert_eq!(percentile(&v, 0.99, 1), 98.0f32 * 0.01);
    }
}
