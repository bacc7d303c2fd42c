//! Rule-based separation of the scanned subject from its surroundings, and
//! position/scale normalization of the result.
//!
//! Three rules run in a fixed order and every rejected splat is charged to
//! the first rule that rejects it:
//!
//! 1. `opacity`: nearly transparent splats are dropped.
//! 2. `vertical`: splats on or below the floor, or well above the top of the
//!    densest vertical band of the cloud, are dropped.
//! 3. `horizontal`: splats outside a vertical cylinder around the
//!    opacity-weighted horizontal centroid are dropped.

use std::collections::BTreeMap;

use glam::{DVec2, DVec3, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::percentile;
use crate::splat_io::SplatCloud;

/// Height of one bin of the vertical occupancy histogram, in meters.
pub const BAND_BIN: f32 = 0.05;
/// Share of opaque splats a histogram bin needs to count as occupied.
pub const BAND_MIN_SHARE: f64 = 0.01;
/// Default cylinder radius as a fraction of the estimated subject height.
pub const CYLINDER_HEIGHT_RATIO: f32 = 0.6;

pub const RULE_OPACITY: &str = "opacity";
pub const RULE_VERTICAL: &str = "vertical";
pub const RULE_HORIZONTAL: &str = "horizontal";

#[derive(Debug, Error)]
pub enum IsolationError {
    #[error("need at least {needed} splats, got {count}")]
    TooFewSplats { count: usize, needed: usize },
    #[error("ground estimation needs at least {needed} opaque splats, got {count}")]
    TooFewOpaque { count: usize, needed: usize },
    #[error("no splat survived subject filtering ({} removed)", .0.input_count)]
    NoSurvivors(Box<FilterReport>),
    #[error("subject height {height:.4} m is too small to normalize")]
    DegenerateHeight { height: f64 },
    #[error("invalid filter parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Cylinder radius in meters; `None` derives it from the subject height.
    pub cylinder_radius: Option<f32>,
    pub floor_epsilon: f32,
    pub opacity_min: f32,
    pub head_margin: f32,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { cylinder_radius: None, floor_epsilon: 0.02, opacity_min: 0.05, head_margin: 0.15 }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), IsolationError> {
        let bad = |what: &str| Err(IsolationError::InvalidParams(what.to_string()));
        if let Some(r) = self.cylinder_radius {
            if !(r > 0.0) {
                return bad("cylinder_radius must be positive");
            }
        }
        if !(self.floor_epsilon > 0.0) {
            return bad("floor_epsilon must be positive");
        }
        if !(self.opacity_min > 0.0 && self.opacity_min < 1.0) {
            return bad("opacity_min must lie in (0, 1)");
        }
        if !(self.head_margin > 0.0) {
            return bad("head_margin must be positive");
        }
        Ok(())
    }

    /// Reads `key = value` lines; missing keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self, IsolationError> {
        let params: Self =
            toml::from_str(text).map_err(|e| IsolationError::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_kv_string(&self) -> String {
        toml::to_string(self).expect("flat struct always serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub removed_by_rule: BTreeMap<String, usize>,
    pub ground_height: f32,
    /// Top of the densest vertical band, before the head margin is added.
    pub band_top: f32,
    pub cylinder_radius: f32,
    /// Horizontal `(x, z)` center of the cylinder rule.
    pub subject_axis: [f64; 2],
}

impl FilterReport {
    pub fn removed_total(&self) -> usize {
        self.removed_by_rule.values().sum()
    }
}

/// A similarity that maps `p` to `uniform_scale * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub translation: [f64; 3],
    pub uniform_scale: f64,
}

impl NormalizationTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        (p.as_dvec3() * self.uniform_scale + DVec3::from_array(self.translation)).as_vec3()
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        ((p.as_dvec3() - DVec3::from_array(self.translation)) / self.uniform_scale).as_vec3()
    }
}

const MIN_SPLATS: usize = 10;

/// Robust floor height: the nearest-rank 1st percentile of `y` over splats
/// with `opacity >= opacity_min`, never taking the single lowest sample.
pub fn estimate_ground_height(cloud: &SplatCloud, opacity_min: f32) -> Result<f32, IsolationError> {
    let ys: Vec<f32> = cloud
        .splats
        .iter()
        .filter(|s| s.opacity >= opacity_min)
        .map(|s| s.position.y)
        .collect();
    if ys.len() < MIN_SPLATS {
        return Err(IsolationError::TooFewOpaque { count: ys.len(), needed: MIN_SPLATS });
    }
    Ok(percentile(&ys, 0.01, 2))
}

/// Upper edge of the longest contiguous run of histogram bins that each hold
/// at least 1% of the samples. Ties prefer the run with more samples, then
/// the lower one.
fn densest_band_top(ys: &[f32]) -> f32 {
    let lo = ys.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = ys.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let bins = (((hi - lo) / BAND_BIN).floor() as usize) + 1;
    let mut counts = vec![0usize; bins];
    for &y in ys {
        let b = (((y - lo) / BAND_BIN).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let occupied = |c: usize| c as f64 >= BAND_MIN_SHARE * ys.len() as f64;

    // (length, mass, end bin)
    let mut best: Option<(usize, usize, usize)> = None;
    let mut run_start = None;
    for b in 0..=bins {
        let occ = b < bins && occupied(counts[b]);
        match (occ, run_start) {
            (true, None) => run_start = Some(b),
            (false, Some(start)) => {
                let len = b - start;
                let mass: usize = counts[start..b].iter().sum();
                let better = match best {
                    None => true,
                    Some((bl, bm, _)) => len > bl || (len == bl && mass > bm),
                };
                if better {
                    best = Some((len, mass, b - 1));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    match best {
        Some((_, _, end)) => lo + (end + 1) as f32 * BAND_BIN,
        None => hi,
    }
}

fn weighted_horizontal_centroid<'a>(
    items: impl Iterator<Item = (Vec3, f32)> + 'a,
) -> Option<DVec2> {
    let mut sum = DVec2::ZERO;
    let mut w = 0.0f64;
    let mut plain = DVec2::ZERO;
    let mut n = 0usize;
    for (p, o) in items {
        let xz = DVec2::new(p.x as f64, p.z as f64);
        sum += xz * o as f64;
        w += o as f64;
        plain += xz;
        n += 1;
    }
    if n == 0 {
        None
    } else if w > 0.0 {
        Some(sum / w)
    } else {
        Some(plain / n as f64)
    }
}

/// Removes splats that do not belong to the subject. Kept splats are
/// returned unchanged and in their original relative order.
pub fn filter_subject(
    cloud: &SplatCloud,
    params: &FilterParams,
) -> Result<(SplatCloud, FilterReport), IsolationError> {
    params.validate()?;
    let n = cloud.len();
    if n < MIN_SPLATS {
        return Err(IsolationError::TooFewSplats { count: n, needed: MIN_SPLATS });
    }

    let opaque: Vec<bool> = cloud.splats.iter().map(|s| s.opacity >= params.opacity_min).collect();
    let opaque_ys: Vec<f32> =
        cloud.splats.iter().zip(&opaque).filter(|(_, &o)| o).map(|(s, _)| s.position.y).collect();

    let mut removed = BTreeMap::from([
        (RULE_OPACITY.to_string(), 0usize),
        (RULE_VERTICAL.to_string(), 0),
        (RULE_HORIZONTAL.to_string(), 0),
    ]);

    if opaque_ys.is_empty() {
        removed.insert(RULE_OPACITY.to_string(), n);
        return Err(IsolationError::NoSurvivors(Box::new(FilterReport {
            input_count: n,
            kept_count: 0,
            removed_by_rule: removed,
            ground_height: f32::NAN,
            band_top: f32::NAN,
            cylinder_radius: f32::NAN,
            subject_axis: [f64::NAN; 2],
        })));
    }

    let ground = estimate_ground_height(cloud, params.opacity_min)?;
    let band_top = densest_band_top(&opaque_ys);
    let (y_lo, y_hi) = (ground + params.floor_epsilon, band_top + params.head_margin);

    let vertical_ok: Vec<bool> = cloud
        .splats
        .iter()
        .zip(&opaque)
        .map(|(s, &o)| o && s.position.y >= y_lo && s.position.y <= y_hi)
        .collect();

    let axis = weighted_horizontal_centroid(
        cloud
            .splats
            .iter()
            .zip(&vertical_ok)
            .filter(|(_, &ok)| ok)
            .map(|(s, _)| (s.position, s.opacity)),
    )
    .unwrap_or(DVec2::ZERO);
    let radius = params
        .cylinder_radius
        .unwrap_or(CYLINDER_HEIGHT_RATIO * (band_top - ground).max(0.0));

    let mut keep = vec![false; n];
    for (i, s) in cloud.splats.iter().enumerate() {
        let rule = if !opaque[i] {
            RULE_OPACITY
        } else if !vertical_ok[i] {
            RULE_VERTICAL
        } else {
            let d = DVec2::new(s.position.x as f64, s.position.z as f64).distance(axis);
            if d <= radius as f64 {
                keep[i] = true;
                continue;
            }
            RULE_HORIZONTAL
        };
        *removed.get_mut(rule).unwrap() += 1;
    }

    let kept = cloud.subset(&keep);
    let report = FilterReport {
        input_count: n,
        kept_count: kept.len(),
        removed_by_rule: removed,
        ground_height: ground,
        band_top,
        cylinder_radius: radius,
        subject_axis: axis.to_array(),
    };
    if kept.is_empty() {
        return Err(IsolationError::NoSurvivors(Box::new(report)));
    }
    Ok((kept, report))
}

/// Moves the subject so its weighted horizontal centroid sits on the Y axis
/// and its floor on `y = 0`, then scales it uniformly so that the distance
/// from floor to the 99th-percentile height equals `target_height`.
/// Splat standard deviations are scaled along with the positions.
pub fn normalize_cloud(
    cloud: &SplatCloud,
    target_height: f64,
) -> Result<(SplatCloud, NormalizationTransform), IsolationError> {
    if !(target_height > 0.0) {
        return Err(IsolationError::InvalidParams("target_height must be positive".into()));
    }
    if cloud.len() < MIN_SPLATS {
        return Err(IsolationError::TooFewSplats { count: cloud.len(), needed: MIN_SPLATS });
    }
    let ys: Vec<f32> = cloud.splats.iter().map(|s| s.position.y).collect();
    let ground = percentile(&ys, 0.01, 2) as f64;
    let top = percentile(&ys, 0.99, 1) as f64;
    let height = top - ground;
    if height <= 0.01 {
        return Err(IsolationError::DegenerateHeight { height });
    }
    let center = weighted_horizontal_centroid(cloud.splats.iter().map(|s| (s.position, s.opacity)))
        .expect("non-empty cloud");

    let scale = target_height / height;
    let origin = DVec3::new(center.x, ground, center.y);
    let transform = NormalizationTransform {
        translation: (-origin * scale).to_array(),
        uniform_scale: scale,
    };

    let mut out = cloud.clone();
    for s in &mut out.splats {
        s.position = ((s.position.as_dvec3() - origin) * scale).as_vec3();
        s.scale = (s.scale.as_dvec3() * scale).as_vec3();
    }
    Ok((out, transform))
}

/// Nearest-rank 99th-percentile height above the 1st-percentile floor.
pub fn subject_height(cloud: &SplatCloud) -> f64 {
    let ys: Vec<f32> = cloud.splats.iter().map(|s| s.position.y).collect();
    percentile(&ys, 0.99, 1) as f64 - percentile(&ys, 0.01, 2) as f64
}
