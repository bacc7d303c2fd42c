use glam::Vec3;
use thiserror::Error;

use crate::binding::Group;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SortError {
    #[error("camera forward must be unit length (|f| = {0})")]
    CameraForward(f32),
    #[error("orders differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("order is not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error("depth array has {depths} entries for {splats} splats")]
    DepthLength { depths: usize, splats: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraState {
    pub position: Vec3,
    /// Unit viewing direction.
    pub forward: Vec3,
}

impl CameraState {
    pub fn new(position: Vec3, forward: Vec3) -> Result<Self, SortError> {
        let len = forward.length();
        if !((len - 1.0).abs() <= 1e-6) {
            return Err(SortError::CameraForward(len));
        }
        Ok(Self { position, forward })
    }

    pub fn look_at(position: Vec3, target: Vec3) -> Self {
        let forward = (target.as_dvec3() - position.as_dvec3()).normalize().as_vec3();
        Self { position, forward }
    }

    /// Camera on a horizontal circle around `center`, looking at it.
    pub fn orbit(center: Vec3, radius: f32, height: f32, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let position = center + Vec3::new(radius * s as f32, height, radius * c as f32);
        Self::look_at(position, center)
    }

    /// Signed distance of `p` along the viewing direction.
    #[inline]
    pub fn depth(&self, p: Vec3) -> f32 {
        let d = p - self.position;
        // explicit operation order keeps depth bit-stable across targets
        let v = d.x * self.forward.x + d.y * self.forward.y + d.z * self.forward.z;
        v + 0.0
    }
}

/// Back-to-front permutation of splat indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DrawOrder {
    pub indices: Vec<u32>,
}

impl DrawOrder {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.indices.len()];
        self.indices.iter().all(|&i| {
            let i = i as usize;
            i < seen.len() && !std::mem::replace(&mut seen[i], true)
        })
    }
}

#[inline]
fn descending_key(depth: f32) -> u32 {
    let bits = (depth + 0.0).to_bits();
    let ascending = if bits & 0x8000_0000 != 0 { !bits } else { bits | 0x8000_0000 };
    !ascending
}

pub fn depths(positions: &[Vec3], camera: &CameraState) -> Vec<f32> {
    positions.iter().map(|&p| camera.depth(p)).collect()
}

/// Per-splat sort: depth descending, ties by ascending index.
pub fn full_sort(positions: &[Vec3], camera: &CameraState) -> DrawOrder {
    let mut keys: Vec<u64> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| ((descending_key(camera.depth(p)) as u64) << 32) | i as u64)
        .collect();
    keys.sort_unstable();
    DrawOrder { indices: keys.into_iter().map(|k| k as u32).collect() }
}

/// Centroid of the current positions in `[start, end)`.
pub fn group_centroid(positions: &[Vec3], group: &Group) -> Vec3 {
    let slice = &positions[group.start as usize..group.end as usize];
    let mut sum = [0f64; 3];
    for p in slice {
        sum[0] += p.x as f64;
        sum[1] += p.y as f64;
        sum[2] += p.z as f64;
    }
    let n = slice.len().max(1) as f64;
    Vec3::new((sum[0] / n) as f32, (sum[1] / n) as f32, (sum[2] / n) as f32)
}

/// Group keys (centroid depths) in group-id order.
pub fn group_keys(positions: &[Vec3], groups: &[Group], camera: &CameraState) -> Vec<f32> {
    groups.iter().map(|g| camera.depth(group_centroid(positions, g))).collect()
}

/// Group-level sort: groups ordered by centroid depth (descending, ties by
/// group id), each group's splats emitted in bundle order.
pub fn group_sort(positions: &[Vec3], groups: &[Group], camera: &CameraState) -> DrawOrder {
    let keys = group_keys(positions, groups, camera);
    let mut ranked: Vec<u64> =
        keys.iter().enumerate().map(|(g, &d)| ((descending_key(d) as u64) << 32) | g as u64).collect();
    ranked.sort_unstable();
    let mut indices = Vec::with_capacity(positions.len());
    for k in ranked {
        let g = &groups[k as u32 as usize];
        indices.extend(g.start..g.end);
    }
    DrawOrder { indices }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Divergence {
    /// Fraction of splat pairs whose relative order differs.
    pub inversion_fraction: f64,
    /// Largest depth gap among pairs adjacent in `order_a` but reversed in `order_b`.
    pub max_depth_error: f64,
}

fn inverse_permutation(order: &DrawOrder) -> Result<Vec<u32>, SortError> {
    let n = order.len();
    let mut inv = vec![u32::MAX; n];
    for (k, &i) in order.indices.iter().enumerate() {
        let slot = inv.get_mut(i as usize).ok_or(SortError::NotPermutation(n))?;
        if *slot != u32::MAX {
            return Err(SortError::NotPermutation(n));
        }
        *slot = k as u32;
    }
    Ok(inv)
}

/// Kendall distance between two draw orders plus the worst adjacent depth error.
pub fn order_divergence(order_a: &DrawOrder, order_b: &DrawOrder, depths: &[f32]) -> Result<Divergence, SortError> {
    if order_a.len() != order_b.len() {
        return Err(SortError::LengthMismatch { a: order_a.len(), b: order_b.len() });
    }
    if depths.len() != order_a.len() {
        return Err(SortError::DepthLength { depths: depths.len(), splats: order_a.len() });
    }
    inverse_permutation(order_a)?;
    let pos_b = inverse_permutation(order_b)?;
    let mut seq: Vec<u32> = order_a.indices.iter().map(|&i| pos_b[i as usize]).collect();
    let mut max_depth_error = 0f64;
    for w in order_a.indices.windows(2) {
        if pos_b[w[0] as usize] > pos_b[w[1] as usize] {
            let gap = (depths[w[0] as usize] as f64 - depths[w[1] as usize] as f64).abs();
            max_depth_error = max_depth_error.max(gap);
        }
    }
    let n = seq.len() as u64;
    let pairs = n * n.saturating_sub(1) / 2;
    let inversions = count_inversions(&mut seq);
    Ok(Divergence {
        inversion_fraction: if pairs == 0 { 0.0 } else { inversions as f64 / pairs as f64 },
        max_depth_error,
    })
}

/// Number of pairs `i < j` with `v[i] > v[j]`; sorts `v` as a side effect.
pub fn count_inversions(v: &mut [u32]) -> u64 {
    let mut buf = vec![0u32; v.len()];
    merge_count(v, &mut buf)
}

fn merge_count(v: &mut [u32], buf: &mut [u32]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}
