//! Placing the template rig over a normalized subject: front axis from the
//! horizontal covariance, then a chamfer-driven search over yaw, scale and the
//! four limb abduction angles.

use glam::{DQuat, DVec3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::binding::SpatialIndex;
use crate::math::percentile;
use crate::rig::humanoid::{HumanoidJoints, Limb, LimbAngles};
use crate::rig::{skin_vertices, Pose, RigError, SkinnedRig};
use crate::splat_io::SplatCloud;

pub const GOLDEN_ITERATIONS: usize = 20;
pub const YAW_STEP_DEG: f64 = 15.0;
pub const YAW_HALF_RANGE_DEG: f64 = 45.0;
/// Half-width of the per-axis translation refinement, as a fraction of height.
pub const TRANSLATION_REFINE: f64 = 0.03;
pub const SCALE_REFINE: f64 = 0.05;
pub const MAX_OBJECTIVE: f64 = 0.15;
pub const MIN_EIGEN_RATIO: f64 = 1.2;
pub const FEET_FRACTION: f64 = 0.15;
pub const LIMB_PASSES: usize = 2;
/// Rounds of alternating scale and translation refinement.
pub const REFINE_ROUNDS: usize = 3;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("cannot fit against an empty point set")]
    Empty,
    #[error(
        "front direction is ambiguous (horizontal eigenvalue ratio {ratio:.3} < {MIN_EIGEN_RATIO}); \
         pass a manual yaw"
    )]
    AmbiguousOrientation { ratio: f64 },
    #[error("fit objective {objective:.4} m exceeds {MAX_OBJECTIVE} m")]
    PoorFit { objective: f64, best: Box<FitResult> },
    #[error(transparent)]
    Rig(#[from] RigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Rotation about +Y, radians.
    pub yaw: f64,
    pub translation: DVec3,
    pub uniform_scale: f64,
    /// Template pose with fitted limb abduction (bind pose before limb fitting).
    pub limb_pose: Pose,
    /// `None` for rigs without the humanoid limb joints.
    pub limb_angles: Option<LimbAngles>,
    /// Final one-sided chamfer distance, meters.
    pub objective: f64,
    /// Objective after every accepted step, in order.
    pub trace: Vec<f64>,
}

impl FitResult {
    /// Identity placement in the bind pose.
    pub fn identity(rig: &SkinnedRig) -> Self {
        Self {
            yaw: 0.0,
            translation: DVec3::ZERO,
            uniform_scale: 1.0,
            limb_pose: Pose::bind(rig),
            limb_angles: HumanoidJoints::resolve(rig).ok().map(|h| h.bind_angles()),
            objective: 0.0,
            trace: Vec::new(),
        }
    }

    pub fn report(&self) -> FitReport {
        FitReport {
            yaw_deg: self.yaw.to_degrees(),
            translation: self.translation.to_array(),
            uniform_scale: self.uniform_scale,
            limb_angles_deg: self.limb_angles.map(|a| LimbAngles {
                left_shoulder: a.left_shoulder.to_degrees(),
                right_shoulder: a.right_shoulder.to_degrees(),
                left_hip: a.left_hip.to_degrees(),
                right_hip: a.right_hip.to_degrees(),
            }),
            objective: self.objective,
            objective_trace: self.trace.clone(),
        }
    }

    fn accept(&mut self, objective: f64) {
        debug_assert!(self.trace.last().is_none_or(|&last| objective <= last));
        self.objective = objective;
        self.trace.push(objective);
    }
}

/// Human-readable fit summary (degrees) for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub yaw_deg: f64,
    pub translation: [f64; 3],
    pub uniform_scale: f64,
    pub limb_angles_deg: Option<LimbAngles>,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
}

/// Nearest-splat lookup for chamfer evaluation.
#[derive(Debug, Clone)]
pub struct ChamferTarget {
    index: SpatialIndex,
}

impl ChamferTarget {
    pub fn new(cloud: &SplatCloud) -> Result<Self, FitError> {
        if cloud.is_empty() {
            return Err(FitError::Empty);
        }
        let pts: Vec<DVec3> = cloud.splats.iter().map(|s| s.position.as_dvec3()).collect();
        Ok(Self { index: SpatialIndex::build(&pts) })
    }

    /// Mean distance from each query to its nearest splat.
    pub fn mean_distance(&self, queries: &[DVec3]) -> f64 {
        if queries.is_empty() {
            return 0.0;
        }
        let d: Vec<f64> = queries.par_iter().map(|&q| self.index.nearest(q).1.sqrt()).collect();
        // sequential sum keeps the result independent of the thread count
        d.iter().sum::<f64>() / queries.len() as f64
    }
}

/// One-sided chamfer distance from `query_points` to the splat positions.
pub fn chamfer_distance(query_points: &[DVec3], target: &SplatCloud) -> Result<f64, FitError> {
    if query_points.is_empty() {
        return Err(FitError::Empty);
    }
    Ok(ChamferTarget::new(target)?.mean_distance(query_points))
}

/// Yaw of the subject's front direction: the minor axis of the opacity-weighted
/// horizontal covariance, signed toward the feet's offset from the centroid.
pub fn estimate_front_axis(cloud: &SplatCloud) -> Result<f64, FitError> {
    if cloud.is_empty() {
        return Err(FitError::Empty);
    }
    let (mut wsum, mut cx, mut cz) = (0f64, 0f64, 0f64);
    for s in &cloud.splats {
        let w = s.opacity as f64;
        wsum += w;
        cx += w * s.position.x as f64;
        cz += w * s.position.z as f64;
    }
    if !(wsum > 0.0) {
        return Err(FitError::Empty);
    }
    let (cx, cz) = (cx / wsum, cz / wsum);
    let (mut sxx, mut sxz, mut szz) = (0f64, 0f64, 0f64);
    for s in &cloud.splats {
        let w = s.opacity as f64;
        let dx = s.position.x as f64 - cx;
        let dz = s.position.z as f64 - cz;
        sxx += w * dx * dx;
        sxz += w * dx * dz;
        szz += w * dz * dz;
    }
    let (sxx, sxz, szz) = (sxx / wsum, sxz / wsum, szz / wsum);
    let mean = 0.5 * (sxx + szz);
    let radius = (0.25 * (sxx - szz) * (sxx - szz) + sxz * sxz).sqrt();
    let (big, small) = (mean + radius, mean - radius);
    let ratio = if small > 0.0 { big / small } else { f64::INFINITY };
    if !(ratio >= MIN_EIGEN_RATIO) {
        return Err(FitError::AmbiguousOrientation { ratio });
    }
    // eigenvector of the smaller eigenvalue, (x, z)
    let (mut ex, mut ez) = if sxz.abs() > 1e-300 {
        (small - szz, sxz)
    } else if sxx <= szz {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let len = (ex * ex + ez * ez).sqrt();
    ex /= len;
    ez /= len;

    let mut by_height: Vec<usize> = (0..cloud.len()).collect();
    by_height.sort_by(|&a, &b| cloud.splats[a].position.y.total_cmp(&cloud.splats[b].position.y).then(a.cmp(&b)));
    let k = ((cloud.len() as f64 * FEET_FRACTION).ceil() as usize).clamp(1, cloud.len());
    let (mut fw, mut fx, mut fz) = (0f64, 0f64, 0f64);
    for &i in &by_height[..k] {
        let s = &cloud.splats[i];
        let w = (s.opacity as f64).max(1e-12);
        fw += w;
        fx += w * s.position.x as f64;
        fz += w * s.position.z as f64;
    }
    let toe = (fx / fw - cx) * ex + (fz / fw - cz) * ez;
    if toe < 0.0 {
        ex = -ex;
        ez = -ez;
    }
    Ok(ex.atan2(ez))
}

/// Golden-section minimization over `[lo, hi]` with a fixed iteration count.
/// Returns the best evaluated point (ties go to the smaller argument).
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iterations: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd < fc { (d, fd) } else { (c, fc) };
    for _ in 0..iterations {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 || (fc == best.1 && c < best.0) {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 || (fd == best.1 && d < best.0) {
                best = (d, fd);
            }
        }
    }
    best
}

fn height_of(ys: &[f32]) -> f64 {
    percentile(ys, 0.99, 1) as f64 - percentile(ys, 0.01, 2) as f64
}

fn weighted_centroid(cloud: &SplatCloud) -> DVec3 {
    let mut sum = DVec3::ZERO;
    let mut w = 0.0;
    for s in &cloud.splats {
        let o = s.opacity as f64;
        sum += s.position.as_dvec3() * o;
        w += o;
    }
    if w > 0.0 {
        sum / w
    } else {
        cloud.splats.iter().map(|s| s.position.as_dvec3()).sum::<DVec3>() / cloud.len() as f64
    }
}

/// Objective of placing `posed` (rig-space vertices) with yaw and scale, the
/// translation chosen so the vertex centroid lands on `anchor`.
struct Placement<'a> {
    target: &'a ChamferTarget,
    posed: &'a [DVec3],
    posed_centroid: DVec3,
    anchor: DVec3,
}

impl Placement<'_> {
    fn translation(&self, yaw: f64, scale: f64) -> DVec3 {
        self.anchor - DQuat::from_rotation_y(yaw) * self.posed_centroid * scale
    }

    fn objective(&self, yaw: f64, scale: f64) -> f64 {
        self.objective_at(yaw, scale, self.translation(yaw, scale))
    }

    fn objective_at(&self, yaw: f64, scale: f64, t: DVec3) -> f64 {
        let r = DQuat::from_rotation_y(yaw);
        let q: Vec<DVec3> = self.posed.iter().map(|&p| t + r * p * scale).collect();
        self.target.mean_distance(&q)
    }
}

fn mean(points: &[DVec3]) -> DVec3 {
    points.iter().copied().sum::<DVec3>() / points.len().max(1) as f64
}

/// Similarity fit (yaw, translation, uniform scale) of the bind-pose rig.
///
/// Yaw is searched on a 15° grid over `yaw_init ± 45°` and refined by golden
/// section within ±15° of the best candidate; scale starts at the height ratio
/// and is refined within ±5%. The translation always aligns the vertex
/// centroid with the cloud's opacity-weighted centroid.
pub fn fit_similarity(cloud: &SplatCloud, rig: &SkinnedRig, yaw_init: f64) -> Result<FitResult, FitError> {
    let target = ChamferTarget::new(cloud)?;
    let fit = similarity_search(&target, cloud, rig, yaw_init, &Pose::bind(rig))?;
    if fit.objective > MAX_OBJECTIVE {
        return Err(FitError::PoorFit { objective: fit.objective, best: Box::new(fit) });
    }
    Ok(fit)
}

fn similarity_search(
    target: &ChamferTarget,
    cloud: &SplatCloud,
    rig: &SkinnedRig,
    yaw_init: f64,
    limb_pose: &Pose,
) -> Result<FitResult, FitError> {
    let posed = skin_vertices(rig, limb_pose)?;
    let rig_ys: Vec<f32> = posed.iter().map(|p| p.y as f32).collect();
    let cloud_ys: Vec<f32> = cloud.splats.iter().map(|s| s.position.y).collect();
    let rig_height = height_of(&rig_ys);
    let scale0 = if rig_height > 0.0 { height_of(&cloud_ys) / rig_height } else { 1.0 };
    let scale0 = if scale0 > 0.0 && scale0.is_finite() { scale0 } else { 1.0 };

    let place = Placement { target, posed: &posed, posed_centroid: mean(&posed), anchor: weighted_centroid(cloud) };

    let steps = (YAW_HALF_RANGE_DEG / YAW_STEP_DEG).round() as i32;
    let candidates: Vec<f64> =
        (-steps..=steps).map(|k| yaw_init + (k as f64 * YAW_STEP_DEG).to_radians()).collect();
    let scores: Vec<f64> = candidates.par_iter().map(|&y| place.objective(y, scale0)).collect();
    let (mut yaw, mut best) = candidates
        .iter()
        .zip(&scores)
        .map(|(&y, &s)| (y, s))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .unwrap();
    let mut fit = FitResult {
        yaw,
        translation: place.translation(yaw, scale0),
        uniform_scale: scale0,
        limb_pose: limb_pose.clone(),
        limb_angles: HumanoidJoints::resolve(rig).ok().map(|h| h.bind_angles()),
        objective: best,
        trace: Vec::new(),
    };
    fit.accept(best);

    let half = YAW_STEP_DEG.to_radians();
    let (y, v) = golden_section(|y| place.objective(y, scale0), yaw - half, yaw + half, GOLDEN_ITERATIONS);
    if v < best {
        yaw = y;
        best = v;
        fit.yaw = yaw;
        fit.translation = place.translation(yaw, scale0);
        fit.accept(best);
    }

    // Alternate scale and per-axis translation refinement. The correction
    // found for the centroid alignment is kept in rig units so it scales
    // with the next scale candidate.
    let ry = DQuat::from_rotation_y(yaw);
    let mut offset = DVec3::ZERO;
    let translation_at = |s: f64, offset: DVec3| place.translation(yaw, s) + ry * offset * s;
    let reach = TRANSLATION_REFINE * scale0 * rig_height;
    for _ in 0..REFINE_ROUNDS {
        let center = fit.uniform_scale;
        let (s, v) = golden_section(
            |s| place.objective_at(yaw, s, translation_at(s, offset)),
            center * (1.0 - SCALE_REFINE),
            center * (1.0 + SCALE_REFINE),
            GOLDEN_ITERATIONS,
        );
        if v < best {
            best = v;
            fit.uniform_scale = s;
            fit.translation = translation_at(s, offset);
            fit.accept(v);
        }

        for axis in [DVec3::Y, DVec3::X, DVec3::Z] {
            let t0 = fit.translation;
            let (d, v) =
                golden_section(|d| place.objective_at(yaw, fit.uniform_scale, t0 + axis * d), -reach, reach, GOLDEN_ITERATIONS);
            if v < best {
                best = v;
                fit.translation = t0 + axis * d;
                fit.accept(v);
            }
        }
        offset = ry.inverse() * (fit.translation - place.translation(yaw, fit.uniform_scale)) / fit.uniform_scale;
    }
    fit.yaw = wrap_angle(fit.yaw);
    Ok(fit)
}

/// Wraps to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Refines shoulder and hip abduction by per-limb golden-section search on the
/// chamfer distance of that limb's vertices. A new angle is kept only if the
/// full objective does not get worse.
pub fn fit_limb_angles(cloud: &SplatCloud, rig: &SkinnedRig, base: &FitResult) -> Result<FitResult, FitError> {
    let target = ChamferTarget::new(cloud)?;
    let joints = HumanoidJoints::resolve(rig)?;
    let limb_vertices: Vec<Vec<usize>> = Limb::ALL.iter().map(|&l| joints.limb_vertices(rig, l)).collect();
    let r = DQuat::from_rotation_y(base.yaw);
    let place = |verts: &[DVec3]| -> Vec<DVec3> {
        verts.iter().map(|&p| base.translation + r * p * base.uniform_scale).collect()
    };
    let pose_for = |angles: &LimbAngles| joints.apply(rig, &base.limb_pose, angles);
    let full_objective = |angles: &LimbAngles| -> Result<f64, FitError> {
        Ok(target.mean_distance(&place(&skin_vertices(rig, &pose_for(angles))?)))
    };

    let mut fit = base.clone();
    let start_angles = base.limb_angles.unwrap_or_else(|| joints.bind_angles());
    let mut angles = start_angles;
    // never accept anything worse than the incoming fit
    let mut current = full_objective(&angles)?.min(base.objective);

    for _ in 0..LIMB_PASSES {
        for (k, limb) in Limb::ALL.into_iter().enumerate() {
            let verts = &limb_vertices[k];
            if verts.is_empty() {
                continue;
            }
            let partial = |a: f64| -> f64 {
                let mut trial = angles;
                trial.set(limb, a);
                match skin_vertices(rig, &pose_for(&trial)) {
                    Ok(all) => {
                        let subset: Vec<DVec3> = verts.iter().map(|&v| all[v]).collect();
                        target.mean_distance(&place(&subset))
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            let (lo, hi) = limb.range();
            let start = partial(angles.get(limb));
            let (a, v) = golden_section(&partial, lo, hi, GOLDEN_ITERATIONS);
            if v < start {
                let mut trial = angles;
                trial.set(limb, a);
                let total = full_objective(&trial)?;
                if total <= current {
                    angles = trial;
                    current = total;
                }
            }
        }
    }

    fit.limb_angles = Some(angles);
    if angles != start_angles {
        fit.limb_pose = pose_for(&angles);
        fit.accept(current);
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::build_template_humanoid;
    use crate::splat_io::Splat;
    use crate::synth::{sample_subject, SubjectParams};
    use glam::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_chamfer(q: &[DVec3], cloud: &SplatCloud) -> f64 {
        q.iter()
            .map(|p| cloud.splats.iter().map(|s| (s.position.as_dvec3() - *p).length()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / q.len() as f64
    }

    #[test]
    fn chamfer_basics() {
        let cloud = SplatCloud::new(vec![Splat::at(Vec3::ZERO)]);
        assert_eq!(chamfer_distance(&[DVec3::X], &cloud).unwrap(), 1.0);
        assert_eq!(chamfer_distance(&[DVec3::ZERO], &cloud).unwrap(), 0.0);
        assert!(matches!(chamfer_distance(&[], &cloud), Err(FitError::Empty)));
        assert!(matches!(chamfer_distance(&[DVec3::X], &SplatCloud::default()), Err(FitError::Empty)));
    }

    #[test]
    fn chamfer_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut r = || rng.random_range(-1.0f32..1.0);
        let cloud = SplatCloud::new((0..1000).map(|_| Splat::at(Vec3::new(r(), r(), r()))).collect());
        let q: Vec<DVec3> = (0..100).map(|_| DVec3::new(r() as f64, r() as f64, r() as f64) * 1.2).collect();
        let got = chamfer_distance(&q, &cloud).unwrap();
        assert!((got - brute_chamfer(&q, &cloud)).abs() < 1e-6);
    }

    fn slab(yaw_deg: f64) -> SplatCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = DQuat::from_rotation_y(yaw_deg.to_radians());
        let mut pts = Vec::new();
        for _ in 0..4000 {
            pts.push(DVec3::new(rng.random_range(-0.25..0.25), rng.random_range(0.1..1.0), rng.random_range(-0.1..0.1)));
        }
        // toes poke forward at the bottom
        for _ in 0..600 {
            pts.push(DVec3::new(rng.random_range(-0.2..0.2), rng.random_range(0.0..0.1), rng.random_range(0.0..0.2)));
        }
        SplatCloud::new(pts.into_iter().map(|p| Splat::at((r * p).as_vec3())).collect())
    }

    #[test]
    fn front_axis_of_slab() {
        let y0 = estimate_front_axis(&slab(0.0)).unwrap();
        assert!(y0.to_degrees().abs() < 2.0, "{}", y0.to_degrees());
        let y90 = estimate_front_axis(&slab(90.0)).unwrap();
        assert!((y90.to_degrees() - 90.0).abs() < 2.0, "{}", y90.to_degrees());
        let y200 = estimate_front_axis(&slab(-160.0)).unwrap();
        assert!((wrap_angle(y200 - (-160f64).to_radians())).to_degrees().abs() < 2.0);
    }

    #[test]
    fn cylinder_is_ambiguous() {
        let cloud = SplatCloud::new(
            (0..720)
                .map(|i| {
                    let a = (i as f64).to_radians() * 0.5;
                    Splat::at(Vec3::new(0.2 * a.sin() as f32, (i % 10) as f32 * 0.1, 0.2 * a.cos() as f32))
                })
                .collect(),
        );
        assert!(matches!(estimate_front_axis(&cloud), Err(FitError::AmbiguousOrientation { .. })));
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden_section(|x| (x - 0.3) * (x - 0.3), -1.0, 1.0, 40);
        assert!((x - 0.3).abs() < 1e-6 && v < 1e-12);
    }

    #[test]
    fn rig_vertices_fit_at_identity() {
        let rig = build_template_humanoid(1.0).unwrap();
        let cloud = SplatCloud::new(rig.vertices().iter().map(|&v| Splat::at(v)).collect());
        let fit = fit_similarity(&cloud, &rig, 0.0).unwrap();
        assert!(fit.objective < 1e-6, "{}", fit.objective);
        assert!(fit.yaw.abs() < 1e-3 && (fit.uniform_scale - 1.0).abs() < 1e-3);
        assert!(fit.translation.length() < 1e-3);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn recovers_known_placement() {
        let rig = build_template_humanoid(1.0).unwrap();
        let params = SubjectParams {
            yaw: 30f64.to_radians(),
            scale: 1.1,
            translation: DVec3::new(0.2, 0.0, -0.1),
            noise: 0.001,
            ..SubjectParams::default()
        };
        let cloud = sample_subject(1.0, &params, 20_000, 4).unwrap();
        let fit = fit_similarity(&cloud, &rig, 25f64.to_radians()).unwrap();
        assert!((fit.yaw.to_degrees() - 30.0).abs() < 2.0, "yaw {}", fit.yaw.to_degrees());
        assert!((fit.uniform_scale / 1.1 - 1.0).abs() < 0.02, "scale {}", fit.uniform_scale);
        assert!((fit.translation - params.translation).length() < 0.01, "t {}", fit.translation);
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
        let limbs = fit_limb_angles(&cloud, &rig, &fit).unwrap();
        assert!(limbs.objective <= fit.objective);
        let a = limbs.limb_angles.unwrap();
        assert!((a.left_shoulder.to_degrees() - 45.0).abs() < 3.0);
        assert!((a.right_shoulder.to_degrees() - 45.0).abs() < 3.0);
    }

    #[test]
    fn recovers_raised_arms() {
        let rig = build_template_humanoid(1.0).unwrap();
        let params = SubjectParams { shoulder_deg: 60.0, noise: 0.001, ..SubjectParams::default() };
        let cloud = sample_subject(1.0, &params, 20_000, 8).unwrap();
        let base = fit_similarity(&cloud, &rig, 0.0).unwrap();
        let fit = fit_limb_angles(&cloud, &rig, &base).unwrap();
        let a = fit.limb_angles.unwrap();
        assert!((a.left_shoulder.to_degrees() - 60.0).abs() < 3.0, "{}", a.left_shoulder.to_degrees());
        assert!((a.right_shoulder.to_degrees() - 60.0).abs() < 3.0, "{}", a.right_shoulder.to_degrees());
        assert!(fit.objective <= base.objective);
    }

    #[test]
    fn fit_is_deterministic() {
        let rig = build_template_humanoid(1.0).unwrap();
        let cloud = sample_subject(1.0, &SubjectParams::default(), 5000, 2).unwrap();
        let a = fit_similarity(&cloud, &rig, 0.1).unwrap();
        let b = fit_similarity(&cloud, &rig, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn far_away_cloud_is_a_poor_fit() {
        let rig = build_template_humanoid(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // a flat horizontal sheet: nothing like a standing person
        let cloud = SplatCloud::new(
            (0..3000)
                .map(|_| Splat::at(Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(0.0..0.02), rng.random_range(-3.0..3.0))))
                .collect(),
        );
        match fit_similarity(&cloud, &rig, 0.0) {
            Err(FitError::PoorFit { objective, best }) => {
                assert!(objective > MAX_OBJECTIVE);
                assert_eq!(best.objective, objective);
            }
            other => panic!("expected poor fit, got {other:?}"),
        }
    }
}
