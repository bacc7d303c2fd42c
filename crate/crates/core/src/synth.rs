//! Seeded synthetic subjects, scenes and clips for tests, demos and benchmarks.

use glam::{DQuat, DVec3, Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::binding::{assign_groups, build_bundle, compute_bindings, AvatarBundle, BindError, GroupTable};
use crate::fit::FitResult;
use crate::math::canonical_quat_f32;
use crate::rig::humanoid::{HumanoidJoints, LimbAngles};
use crate::rig::template::HumanoidShape;
use crate::rig::{blend_influences, compute_skin_matrices, AnimationClip, Keyframe, Pose, RigError, SkinnedRig};
use crate::splat_io::{snap_to_storage, Splat, SplatCloud};

/// Placement and limb pose of a synthetic subject relative to the template.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectParams {
    pub yaw: f64,
    pub scale: f64,
    pub translation: DVec3,
    /// Abduction of both arms, degrees.
    pub shoulder_deg: f64,
    /// Abduction of both legs, degrees.
    pub hip_deg: f64,
    /// Standard deviation of isotropic position noise, meters.
    pub noise: f64,
}

impl Default for SubjectParams {
    fn default() -> Self {
        Self { yaw: 0.0, scale: 1.0, translation: DVec3::ZERO, shoulder_deg: 45.0, hip_deg: 5.0, noise: 0.0 }
    }
}

impl SubjectParams {
    pub fn limb_angles(&self) -> LimbAngles {
        let s = self.shoulder_deg.to_radians();
        let h = self.hip_deg.to_radians();
        LimbAngles { left_shoulder: s, right_shoulder: s, left_hip: h, right_hip: h }
    }

    /// The world pose of the template under these parameters.
    pub fn pose(&self, rig: &SkinnedRig) -> Result<Pose, RigError> {
        let joints = HumanoidJoints::resolve(rig)?;
        Ok(joints.apply(rig, &Pose::bind(rig), &self.limb_angles()).placed(rig, self.yaw, self.translation, self.scale))
    }
}

fn part_color(joint: usize) -> Vec3 {
    const PALETTE: [[f32; 3]; 6] = [
        [0.80, 0.62, 0.52],
        [0.20, 0.35, 0.65],
        [0.25, 0.25, 0.30],
        [0.70, 0.20, 0.20],
        [0.35, 0.55, 0.30],
        [0.85, 0.80, 0.40],
    ];
    Vec3::from_array(PALETTE[joint % PALETTE.len()])
}

/// `n` splats sampled uniformly from the template surface of the given
/// height, posed and placed by `params`.
pub fn sample_subject(height: f64, params: &SubjectParams, n: usize, seed: u64) -> Result<SplatCloud, RigError> {
    let shape = HumanoidShape::new(height)?;
    let rig = shape.build_rig()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = shape.sample_surface(n, &mut rng);
    let mats = compute_skin_matrices(&rig, &params.pose(&rig)?)?;
    let noise = Normal::new(0.0, params.noise.max(0.0)).expect("finite noise");
    let base_scale = (0.004 * height * params.scale) as f32;
    let splats = samples
        .into_iter()
        .map(|(p, inf)| {
            let mut pos = blend_influences(&inf, &mats).transform_point3(p);
            if params.noise > 0.0 {
                pos += DVec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let rotation = if axis.length_squared() > 1e-6 {
                Quat::from_axis_angle(axis.normalize(), rng.random_range(0.0..std::f32::consts::PI))
            } else {
                Quat::IDENTITY
            };
            let stretch = Vec3::new(rng.random_range(0.6..1.6), rng.random_range(0.6..1.6), rng.random_range(0.2..0.6));
            let shade = rng.random_range(0.9f32..1.1);
            let mut splat = Splat {
                position: pos.as_vec3(),
                rotation: canonical_quat_f32(rotation.normalize()),
                scale: stretch * base_scale,
                opacity: rng.random_range(0.6..1.0),
                color: (part_color(inf.dominant()) * shade).clamp(Vec3::ZERO, Vec3::ONE),
                sh_rest: Vec::new(),
            };
            snap_to_storage(&mut splat);
            splat
        })
        .collect();
    Ok(SplatCloud::new(splats))
}

/// Background clutter around a subject standing at the origin on `y = 0`:
/// a floor disc, a back wall, sparse floaters and near-transparent haze.
pub fn scene_background(n: usize, seed: u64) -> SplatCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let splat = |position: Vec3, opacity: f32, color: Vec3| {
        let mut s = Splat {
            position,
            rotation: Quat::IDENTITY,
            scale: Vec3::new(0.02, 0.005, 0.02),
            opacity,
            color,
            sh_rest: Vec::new(),
        };
        snap_to_storage(&mut s);
        s
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = match k % 10 {
            0..=4 => {
                let r = 2.5 * rng.random_range(0.0f32..1.0).sqrt();
                let a = rng.random_range(0.0..std::f32::consts::TAU);
                let y = rng.random_range(-0.01..0.005);
                splat(Vec3::new(r * a.cos(), y, r * a.sin()), rng.random_range(0.5..1.0), Vec3::new(0.45, 0.4, 0.35))
            }
            5..=7 => splat(
                Vec3::new(rng.random_range(-2.5..2.5), rng.random_range(0.0..2.4), -2.0 + rng.random_range(-0.02..0.02)),
                rng.random_range(0.5..1.0),
                Vec3::new(0.9, 0.9, 0.85),
            ),
            8 => splat(
                Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(0.0..3.0), rng.random_range(-2.0..2.0)),
                rng.random_range(0.2..0.9),
                Vec3::splat(0.6),
            ),
            _ => splat(
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0), rng.random_range(-1.0..1.0)),
                rng.random_range(0.0..0.04),
                Vec3::splat(0.8),
            ),
        };
        out.push(s);
    }
    SplatCloud::new(out)
}

/// Subject plus background, subject splats first.
pub fn synthetic_scene(height: f64, subject_splats: usize, background_splats: usize, seed: u64) -> Result<SplatCloud, RigError> {
    let params = SubjectParams { noise: 0.001, ..SubjectParams::default() };
    let mut cloud = sample_subject(height, &params, subject_splats, seed)?;
    cloud.splats.extend(scene_background(background_splats, seed.wrapping_add(1)).splats);
    Ok(cloud)
}

/// A bound avatar together with the inputs it was built from.
#[derive(Debug, Clone)]
pub struct AvatarFixture {
    pub rig: SkinnedRig,
    pub cloud: SplatCloud,
    pub groups: GroupTable,
    pub bundle: AvatarBundle,
}

/// Binds `n` template-surface splats in the bind pose with the exact
/// (identity) placement, skipping filtering and fitting.
pub fn avatar_fixture(height: f64, n: usize, seed: u64) -> Result<AvatarFixture, BindError> {
    let rig = HumanoidShape::new(height)?.build_rig()?;
    let cloud = sample_subject(height, &SubjectParams::default(), n, seed)?;
    let set = compute_bindings(&cloud, &rig, &FitResult::identity(&rig))?;
    let groups = assign_groups(&set, &rig);
    let bundle = build_bundle(&set, &groups, &cloud);
    Ok(AvatarFixture { rig, cloud, groups, bundle })
}

/// A looping two-second walk cycle layered on top of `base`.
///
/// The first key of every track equals the base rotation, so sampling at
/// `t = 0` returns `base` exactly.
pub fn walk_clip(rig: &SkinnedRig, base: &Pose) -> Result<AnimationClip, RigError> {
    const DURATION: f32 = 2.0;
    const KEYS: usize = 8;
    let swing: &[(&str, DVec3, f64, f64)] = &[
        // (joint, axis, amplitude deg, phase in cycles)
        ("leftUpperArm", DVec3::X, 25.0, 0.5),
        ("rightUpperArm", DVec3::X, 25.0, 0.0),
        ("leftLowerArm", DVec3::X, -15.0, 0.5),
        ("rightLowerArm", DVec3::X, -15.0, 0.0),
        ("leftUpperLeg", DVec3::X, 25.0, 0.0),
        ("rightUpperLeg", DVec3::X, 25.0, 0.5),
        ("leftLowerLeg", DVec3::X, 20.0, 0.25),
        ("rightLowerLeg", DVec3::X, 20.0, 0.75),
        ("spine", DVec3::Y, 6.0, 0.0),
        ("head", DVec3::Y, -4.0, 0.0),
    ];
    let mut tracks = vec![Vec::new(); rig.joint_count()];
    for &(name, axis, amplitude, phase) in swing {
        let j = rig.joint_index(name).ok_or_else(|| RigError::MissingJoint(name.into()))?;
        let start = (std::f64::consts::TAU * phase).sin();
        tracks[j] = (0..=KEYS)
            .map(|k| {
                let u = k as f64 / KEYS as f64;
                let angle = amplitude.to_radians() * ((std::f64::consts::TAU * (u + phase)).sin() - start);
                let q = if k == 0 || k == KEYS { base.rotations[j] } else { base.rotations[j] * DQuat::from_axis_angle(axis, angle) };
                Keyframe { time: DURATION * u as f32, rotation: q.normalize().as_quat() }
            })
            .collect();
    }
    for (j, track) in tracks.iter_mut().enumerate() {
        if track.is_empty() {
            *track = vec![Keyframe { time: 0.0, rotation: base.rotations[j].as_quat() }];
        }
    }
    let clip = AnimationClip { duration: DURATION, looping: true, tracks, root_translation: Vec::new() };
    clip.validate(rig)?;
    Ok(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::build_template_humanoid;

    #[test]
    fn subject_is_deterministic_and_sized() {
        let a = sample_subject(1.0, &SubjectParams::default(), 2000, 5).unwrap();
        let b = sample_subject(1.0, &SubjectParams::default(), 2000, 5).unwrap();
        assert!(a.bit_eq(&b));
        let back = crate::splat_io::parse_splat_ply(&crate::splat_io::write_splat_ply(&a).unwrap()).unwrap();
        assert!(back.bit_eq(&a));
        let (lo, hi) = a.splats.iter().fold((f32::MAX, f32::MIN), |(l, h), s| (l.min(s.position.y), h.max(s.position.y)));
        assert!(lo > -0.01 && lo < 0.02, "{lo}");
        assert!((hi - 1.0).abs() < 0.03, "{hi}");
        assert!(a.splats.iter().all(|s| (s.rotation.length() - 1.0).abs() < 1e-5 && s.rotation.w >= 0.0));
    }

    #[test]
    fn placement_moves_subject() {
        let p = SubjectParams { translation: DVec3::new(1.0, 0.0, 0.0), scale: 2.0, ..SubjectParams::default() };
        let c = sample_subject(1.0, &p, 1000, 1).unwrap();
        let mean_x: f32 = c.splats.iter().map(|s| s.position.x).sum::<f32>() / 1000.0;
        let top = c.splats.iter().map(|s| s.position.y).fold(f32::MIN, f32::max);
        assert!((mean_x - 1.0).abs() < 0.05 && (top - 2.0).abs() < 0.06);
    }

    #[test]
    fn walk_clip_starts_at_base() {
        let rig = build_template_humanoid(1.0).unwrap();
        let base = Pose::bind(&rig);
        let clip = walk_clip(&rig, &base).unwrap();
        let p0 = clip.sample(&rig, 0.0).unwrap();
        for (a, b) in p0.rotations.iter().zip(&base.rotations) {
            assert!(crate::math::quat_angle(*a, *b) < 1e-6);
        }
        let mid = clip.sample(&rig, 0.5).unwrap();
        assert!(mid.rotations.iter().zip(&base.rotations).any(|(a, b)| crate::math::quat_angle(*a, *b) > 0.1));
        assert_eq!(clip.sample(&rig, 2.5).unwrap(), clip.sample(&rig, 0.5).unwrap());
    }
}
