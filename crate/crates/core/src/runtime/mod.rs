//! The per-frame loop: pose the rig, move every splat from its binding, then
//! produce a back-to-front draw order.

mod polar;
mod sort;

use std::str::FromStr;

use glam::{Affine3A, DAffine3, Quat, Vec3};
use rayon::prelude::*;
use thiserror::Error;

pub use polar::{extract_rotation, OrientationError, POLAR_MAX_ITERATIONS, POLAR_TOLERANCE};
pub use sort::{
    count_inversions, depths, full_sort, group_centroid, group_keys, group_sort, order_divergence, CameraState,
    Divergence, DrawOrder, SortError,
};

use crate::binding::{AvatarBundle, BundleError};
use crate::rig::{blend_vertex_matrix, compute_skin_matrices, AnimationClip, Pose, RigError, SkinnedRig};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("bundle is not compatible with this rig: {0}")]
    Incompatible(#[from] BundleError),
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error("vertex {vertex}: {source}")]
    Orientation { vertex: usize, source: OrientationError },
    #[error(transparent)]
    Sort(#[from] SortError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortMode {
    Group,
    Full,
}

impl SortMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SortMode::Group => "group",
            SortMode::Full => "full",
        }
    }
}

impl std::fmt::Display for SortMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "group" => Ok(SortMode::Group),
            "full" => Ok(SortMode::Full),
            other => Err(format!("unknown sort mode '{other}' (expected group or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePacket {
    pub frame_id: u64,
    /// World positions in bundle order.
    pub positions: Vec<Vec3>,
    /// World orientations in bundle order.
    pub rotations: Vec<Quat>,
    pub order: DrawOrder,
    /// Multiplier from bundle splat scales to world scales.
    pub scale_factor: f32,
}

/// Blended skinning matrix of every vertex at `pose`.
pub fn vertex_frames(rig: &SkinnedRig, pose: &Pose) -> Result<Vec<DAffine3>, RigError> {
    let mats = compute_skin_matrices(rig, pose)?;
    Ok((0..rig.vertex_count()).into_par_iter().map(|v| blend_vertex_matrix(rig, &mats, v)).collect())
}

/// Per-vertex single-precision frame used by the splat update.
#[derive(Debug, Clone, Copy)]
struct VertexFrame {
    affine: Affine3A,
    rotation: Quat,
}

impl VertexFrame {
    const IDENTITY: Self = Self { affine: Affine3A::IDENTITY, rotation: Quat::IDENTITY };
}

/// Reusable per-avatar state: validated inputs and the set of referenced vertices.
#[derive(Debug)]
pub struct AvatarRuntime<'a> {
    bundle: &'a AvatarBundle,
    rig: &'a SkinnedRig,
    used: Vec<bool>,
    frames: Vec<VertexFrame>,
    next_frame: u64,
}

impl<'a> AvatarRuntime<'a> {
    pub fn new(bundle: &'a AvatarBundle, rig: &'a SkinnedRig) -> Result<Self, RuntimeError> {
        bundle.check_rig(rig)?;
        bundle.validate()?;
        let mut used = vec![false; rig.vertex_count()];
        for s in &bundle.splats {
            used[s.vertex as usize] = true;
        }
        Ok(Self { bundle, rig, used, frames: vec![VertexFrame::IDENTITY; rig.vertex_count()], next_frame: 0 })
    }

    pub fn bundle(&self) -> &AvatarBundle {
        self.bundle
    }

    pub fn rig(&self) -> &SkinnedRig {
        self.rig
    }

    /// Moves every splat for an animation `pose` (placed by the bundle's fit).
    /// Returns the world scale factor for splat scales.
    pub fn update(&mut self, pose: &Pose, positions: &mut Vec<Vec3>, rotations: &mut Vec<Quat>) -> Result<f32, RuntimeError> {
        let world = self.bundle.fit.place(self.rig, pose);
        let mats = compute_skin_matrices(self.rig, &world)?;
        let rig = self.rig;
        let used = &self.used;
        self.frames
            .par_iter_mut()
            .enumerate()
            .filter(|(v, _)| used[*v])
            .try_for_each(|(v, slot)| {
                let m = blend_vertex_matrix(rig, &mats, v);
                let rotation = extract_rotation(m.matrix3)
                    .map_err(|source| RuntimeError::Orientation { vertex: v, source })?;
                *slot = VertexFrame {
                    affine: Affine3A::from_mat3_translation(m.matrix3.as_mat3(), m.translation.as_vec3()),
                    rotation: rotation.as_quat(),
                };
                Ok::<(), RuntimeError>(())
            })?;

        let n = self.bundle.splats.len();
        positions.resize(n, Vec3::ZERO);
        rotations.resize(n, Quat::IDENTITY);
        let frames = &self.frames;
        positions
            .par_iter_mut()
            .zip(rotations.par_iter_mut())
            .zip(self.bundle.splats.par_iter())
            .with_min_len(4096)
            .for_each(|((p, r), s)| {
                let f = &frames[s.vertex as usize];
                *p = f.affine.transform_point3(s.rel_position);
                let q = f.rotation * s.rel_rotation;
                *r = if q.w < 0.0 { -q } else { q };
            });
        Ok(world.root_scale as f32)
    }

    pub fn sort(&self, positions: &[Vec3], camera: &CameraState, mode: SortMode) -> DrawOrder {
        match mode {
            SortMode::Group => group_sort(positions, &self.bundle.groups, camera),
            SortMode::Full => full_sort(positions, camera),
        }
    }

    /// One frame: sample, skin, update, sort.
    pub fn frame(
        &mut self,
        clip: &AnimationClip,
        t: f64,
        camera: &CameraState,
        mode: SortMode,
    ) -> Result<FramePacket, RuntimeError> {
        let pose = clip.sample(self.rig, t)?;
        let mut positions = Vec::new();
        let mut rotations = Vec::new();
        let scale_factor = self.update(&pose, &mut positions, &mut rotations)?;
        let order = self.sort(&positions, camera, mode);
        let frame_id = self.next_frame;
        self.next_frame += 1;
        Ok(FramePacket { frame_id, positions, rotations, order, scale_factor })
    }
}

/// Splat positions and orientations for an animation `pose`, in bundle order.
pub fn update_splats(bundle: &AvatarBundle, rig: &SkinnedRig, pose: &Pose) -> Result<(Vec<Vec3>, Vec<Quat>), RuntimeError> {
    let mut rt = AvatarRuntime::new(bundle, rig)?;
    let (mut p, mut r) = (Vec::new(), Vec::new());
    rt.update(pose, &mut p, &mut r)?;
    Ok((p, r))
}

/// Single-shot frame with `frame_id` 0; use [`AvatarRuntime`] for sequences.
pub fn run_frame(
    bundle: &AvatarBundle,
    rig: &SkinnedRig,
    clip: &AnimationClip,
    t: f64,
    camera: &CameraState,
    mode: SortMode,
) -> Result<FramePacket, RuntimeError> {
    AvatarRuntime::new(bundle, rig)?.frame(clip, t, camera, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binding::{assign_groups, build_bundle, compute_bindings};
    use crate::fit::FitResult;
    use crate::math::quat_distance;
    use crate::rig::{build_template_humanoid, Influences, Joint};
    use crate::splat_io::{Splat, SplatCloud};
    use glam::{DQuat, DVec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud_near_vertices(rig: &SkinnedRig, n: usize, seed: u64) -> SplatCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SplatCloud::new(
            (0..n)
                .map(|_| {
                    let v = rig.vertices()[rng.random_range(0..rig.vertex_count())];
                    let jitter = Vec3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
                    let mut s = Splat::at(v + jitter);
                    s.rotation = Quat::from_rotation_x(rng.random_range(0.0..3.0)) * Quat::from_rotation_y(rng.random_range(0.0..3.0));
                    s.rotation = crate::math::canonical_quat_f32(s.rotation);
                    s
                })
                .collect(),
        )
    }

    fn bundle_for(rig: &SkinnedRig, fit: &FitResult, cloud: &SplatCloud) -> AvatarBundle {
        let set = compute_bindings(cloud, rig, fit).unwrap();
        let groups = assign_groups(&set, rig);
        build_bundle(&set, &groups, cloud)
    }

    #[test]
    fn root_translation_shifts_rigidly() {
        let rig = build_template_humanoid(1.0).unwrap();
        let mut fit = FitResult::identity(&rig);
        fit.uniform_scale = 1.25;
        fit.yaw = 0.3;
        let cloud = cloud_near_vertices(&rig, 500, 1);
        let bundle = bundle_for(&rig, &fit, &cloud);
        let base = bundle.fit.limb_pose();
        let (p0, r0) = update_splats(&bundle, &rig, &base).unwrap();
        let t = DVec3::new(0.2, -0.1, 0.3);
        let mut moved = base.clone();
        moved.root_translation = t;
        let (p1, r1) = update_splats(&bundle, &rig, &moved).unwrap();
        let shift = (DQuat::from_rotation_y(bundle.fit.yaw as f64) * t * bundle.fit.scale as f64).as_vec3();
        for k in 0..p0.len() {
            assert!((p1[k] - p0[k] - shift).length() < 1e-5);
            assert!(quat_distance(r0[k], r1[k]) < 1e-6);
        }
    }

    /// Two-bone chain along +Y with single-influence vertices.
    fn elbow_rig() -> SkinnedRig {
        let joints = vec![
            Joint { name: "upper".into(), parent: None, bind_rotation: Quat::IDENTITY, bind_translation: Vec3::ZERO },
            Joint {
                name: "lower".into(),
                parent: Some(0),
                bind_rotation: Quat::IDENTITY,
                bind_translation: Vec3::new(0.0, 1.0, 0.0),
            },
        ];
        let mut vertices = Vec::new();
        let mut skin = Vec::new();
        for i in 0..20 {
            let y = i as f32 * 0.1;
            vertices.push(Vec3::new(0.05, y, 0.0));
            skin.push(Influences::single(if y < 1.0 { 0 } else { 1 }));
        }
        SkinnedRig::new(vertices, vec![], joints, skin).unwrap()
    }

    #[test]
    fn elbow_bend_matches_forward_kinematics() {
        let rig = elbow_rig();
        let fit = FitResult::identity(&rig);
        let cloud = SplatCloud::new((11..20).map(|i| Splat::at(Vec3::new(0.07, i as f32 * 0.1 + 0.01, 0.02))).collect());
        let bundle = bundle_for(&rig, &fit, &cloud);
        let mut pose = Pose::bind(&rig);
        let bend = DQuat::from_rotation_z(std::f64::consts::FRAC_PI_2);
        pose.rotations[1] = bend;
        let (p, r) = update_splats(&bundle, &rig, &pose).unwrap();
        let elbow = DVec3::new(0.0, 1.0, 0.0);
        for (k, s) in cloud.splats.iter().enumerate() {
            let expect = elbow + bend * (s.position.as_dvec3() - elbow);
            assert!((p[k].as_dvec3() - expect).length() < 1e-4, "{} vs {expect}", p[k]);
            assert!(quat_distance(r[k], crate::math::canonical_quat(bend).as_quat()) < 1e-4);
        }
    }

    #[test]
    fn incompatible_rig_is_rejected() {
        let rig = build_template_humanoid(1.0).unwrap();
        let other = build_template_humanoid(1.2).unwrap();
        let cloud = cloud_near_vertices(&rig, 10, 2);
        let bundle = bundle_for(&rig, &FitResult::identity(&rig), &cloud);
        assert!(matches!(update_splats(&bundle, &other, &Pose::bind(&other)), Err(RuntimeError::Incompatible(_))));
    }

    #[test]
    fn frame_at_fit_pose_reproduces_bind_positions() {
        let rig = build_template_humanoid(1.0).unwrap();
        let mut fit = FitResult::identity(&rig);
        fit.translation = DVec3::new(0.5, 0.0, 0.1);
        let cloud = cloud_near_vertices(&rig, 800, 3);
        let set = compute_bindings(&cloud, &rig, &fit).unwrap();
        let groups = assign_groups(&set, &rig);
        let bundle = build_bundle(&set, &groups, &cloud);
        let clip = AnimationClip::from_pose(&bundle.fit.limb_pose());
        let cam = CameraState::orbit(Vec3::new(0.5, 0.9, 0.1), 3.0, 0.5, 1.0);
        let mut rt = AvatarRuntime::new(&bundle, &rig).unwrap();
        let a = rt.frame(&clip, 0.0, &cam, SortMode::Group).unwrap();
        let b = rt.frame(&clip, 0.0, &cam, SortMode::Full).unwrap();
        assert_eq!((a.frame_id, b.frame_id), (0, 1));
        assert_eq!(a.positions, b.positions);
        assert!(a.order.is_permutation() && b.order.is_permutation());
        for (k, &i) in groups.order.iter().enumerate() {
            assert!((a.positions[k] - cloud.splats[i as usize].position).length() < 1e-5);
        }
        assert!((a.scale_factor - 1.0).abs() < 1e-7);
    }

    #[test]
    fn sort_mode_parsing() {
        assert_eq!("group".parse::<SortMode>().unwrap(), SortMode::Group);
        assert_eq!(SortMode::Full.to_string(), "full");
        assert!("fast".parse::<SortMode>().is_err());
    }
}
