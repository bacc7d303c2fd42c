//! Nearest-vertex binding of splats to the fitted rig, bone-level grouping and
//! the avatar bundle.

mod bundle;
mod kdtree;

use glam::{DAffine3, DQuat, Quat, Vec3};
use rayon::prelude::*;
use thiserror::Error;

pub use bundle::{
    export_bundle, hex, import_bundle, AvatarBundle, BundleError, BundleSplat, FitBlock, Group, BUNDLE_MAGIC,
    BUNDLE_VERSION,
};
pub use kdtree::{brute_force_nearest, squared_distance, SpatialIndex};

use crate::fit::FitResult;
use crate::math::canonical_quat;
use crate::rig::{RigError, SkinnedRig};
use crate::runtime::{extract_rotation, vertex_frames};
use crate::splat_io::SplatCloud;

/// Determinant magnitude below which a vertex frame cannot be inverted.
pub const SINGULAR_DET: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum BindError {
    #[error("cannot bind an empty cloud")]
    Empty,
    #[error("cloud of {0} splats exceeds the bundle's 32-bit index range")]
    TooLarge(usize),
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error("{} splats bound to singular vertex frames (first: {:?})", .splats.len(), &.splats[..splats.len().min(8)])]
    Singular { splats: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatBinding {
    pub vertex: u32,
    /// Splat position in the vertex's blended skinning frame.
    pub rel_position: Vec3,
    /// Splat orientation relative to the frame's rotation factor.
    pub rel_rotation: Quat,
    /// Bind-time scale divided by the fit scale.
    pub splat_scale: Vec3,
}

#[derive(Debug, Clone)]
pub struct BindingSet {
    /// In the cloud's splat order.
    pub bindings: Vec<SplatBinding>,
    /// Distance from each splat to its bound (skinned) vertex, meters.
    pub distances: Vec<f64>,
    pub fit: FitBlock,
    pub rig_hash: [u8; 32],
    pub vertex_count: u32,
}

impl BindingSet {
    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

/// Binds every splat to its nearest vertex of the rig skinned into the fit pose.
pub fn compute_bindings(cloud: &SplatCloud, rig: &SkinnedRig, fit: &FitResult) -> Result<BindingSet, BindError> {
    bind_to_block(cloud, rig, FitBlock::from_fit(fit))
}

/// Like [`compute_bindings`] but with an already-quantized fit block; the
/// runtime reconstructs frames from exactly this block.
pub fn bind_to_block(cloud: &SplatCloud, rig: &SkinnedRig, fit: FitBlock) -> Result<BindingSet, BindError> {
    if cloud.is_empty() {
        return Err(BindError::Empty);
    }
    if cloud.len() >= u32::MAX as usize {
        return Err(BindError::TooLarge(cloud.len()));
    }
    let pose = fit.world_pose(rig);
    let frames = vertex_frames(rig, &pose)?;
    let skinned: Vec<_> = rig
        .vertices()
        .par_iter()
        .zip(&frames)
        .map(|(v, m)| m.transform_point3(v.as_dvec3()))
        .collect();
    let index = SpatialIndex::build(&skinned);

    // Per-vertex inverse frame and rotation factor; `None` marks singular frames.
    let inverses: Vec<Option<(DAffine3, DQuat)>> = frames
        .par_iter()
        .map(|m| {
            if m.matrix3.determinant().abs() < SINGULAR_DET {
                return None;
            }
            let q = extract_rotation(m.matrix3).ok()?;
            Some((m.inverse(), q))
        })
        .collect();

    let scale_div = fit.scale as f64;
    let results: Vec<Result<(SplatBinding, f64), usize>> = cloud
        .splats
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let p = s.position.as_dvec3();
            let (v, d2) = index.nearest(p);
            let (inv, q_v) = inverses[v].ok_or(i)?;
            let rel_rotation = canonical_quat(q_v.inverse() * s.rotation.as_dquat()).normalize();
            Ok((
                SplatBinding {
                    vertex: v as u32,
                    rel_position: inv.transform_point3(p).as_vec3(),
                    rel_rotation: rel_rotation.as_quat(),
                    splat_scale: (s.scale.as_dvec3() / scale_div).as_vec3(),
                },
                d2.sqrt(),
            ))
        })
        .collect();

    let singular: Vec<usize> = results.iter().filter_map(|r| r.as_ref().err().copied()).collect();
    if !singular.is_empty() {
        return Err(BindError::Singular { splats: singular });
    }
    let (bindings, distances) = results.into_iter().map(|r| r.unwrap()).unzip();
    Ok(BindingSet {
        bindings,
        distances,
        fit,
        rig_hash: rig.content_hash(),
        vertex_count: rig.vertex_count() as u32,
    })
}

/// Bone groups and the stable reordering that makes them contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTable {
    /// Group id per splat, in the original splat order.
    pub group_of_splat: Vec<u32>,
    /// Ranges are over bundle order.
    pub groups: Vec<Group>,
    /// `order[k]` is the original index of the splat stored at bundle slot `k`.
    pub order: Vec<u32>,
}

/// Groups splats by the dominant joint of their bound vertex.
///
/// Groups appear in joint-index order; only joints that own at least one splat
/// get a group. Within a group the original splat order is kept.
pub fn assign_groups(bindings: &BindingSet, rig: &SkinnedRig) -> GroupTable {
    let joints = rig.joint_count();
    let bone_of: Vec<usize> = bindings.bindings.iter().map(|b| rig.skin()[b.vertex as usize].dominant()).collect();
    let mut counts = vec![0usize; joints];
    for &j in &bone_of {
        counts[j] += 1;
    }
    let mut group_id = vec![u32::MAX; joints];
    let mut groups = Vec::new();
    let mut start = 0u32;
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            group_id[j] = groups.len() as u32;
            groups.push(Group { bone: j as u32, start, end: start + c as u32 });
            start += c as u32;
        }
    }
    // counting sort: stable by construction
    let mut cursor: Vec<u32> = groups.iter().map(|g| g.start).collect();
    let mut order = vec![0u32; bone_of.len()];
    let mut group_of_splat = Vec::with_capacity(bone_of.len());
    for (i, &j) in bone_of.iter().enumerate() {
        let g = group_id[j];
        group_of_splat.push(g);
        order[cursor[g as usize] as usize] = i as u32;
        cursor[g as usize] += 1;
    }
    GroupTable { group_of_splat, groups, order }
}

/// Assembles the bundle: splats reordered into group-contiguous order with
/// their degree-0 appearance.
pub fn build_bundle(bindings: &BindingSet, groups: &GroupTable, cloud: &SplatCloud) -> AvatarBundle {
    assert_eq!(bindings.len(), cloud.len(), "bindings and cloud differ in length");
    let splats = groups
        .order
        .iter()
        .map(|&i| {
            let b = &bindings.bindings[i as usize];
            let s = &cloud.splats[i as usize];
            BundleSplat {
                vertex: b.vertex,
                rel_position: b.rel_position,
                rel_rotation: b.rel_rotation,
                scale: b.splat_scale,
                color: s.color,
                opacity: s.opacity,
            }
        })
        .collect();
    AvatarBundle {
        vertex_count: bindings.vertex_count,
        rig_hash: bindings.rig_hash,
        fit: bindings.fit.clone(),
        splats,
        groups: groups.groups.clone(),
    }
}

impl FitBlock {
    /// Quantizes a fit to the persisted single-precision form.
    pub fn from_fit(fit: &FitResult) -> Self {
        Self {
            yaw: fit.yaw as f32,
            translation: fit.translation.as_vec3(),
            scale: fit.uniform_scale as f32,
            limb_rotations: fit.limb_pose.rotations.iter().map(|q| q.as_quat()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::quat_distance;
    use crate::rig::{build_template_humanoid, Influences, Joint, Pose};
    use crate::runtime::update_splats;
    use crate::splat_io::Splat;
    use glam::DVec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_fit(rig: &SkinnedRig) -> FitResult {
        FitResult::identity(rig)
    }

    fn random_cloud(n: usize, seed: u64) -> SplatCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SplatCloud::new(
            (0..n)
                .map(|_| {
                    let mut s = Splat::at(Vec3::new(
                        rng.random_range(-0.5..0.5),
                        rng.random_range(0.0..1.0),
                        rng.random_range(-0.2..0.2),
                    ));
                    s.rotation = crate::math::canonical_quat_f32(
                        Quat::from_xyzw(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )
                        .normalize(),
                    );
                    s
                })
                .collect(),
        )
    }

    #[test]
    fn nearest_vertices_match_brute_force() {
        let rig = build_template_humanoid(1.0).unwrap();
        let cloud = random_cloud(2000, 3);
        let set = compute_bindings(&cloud, &rig, &identity_fit(&rig)).unwrap();
        let verts: Vec<DVec3> = rig.vertices().iter().map(|v| v.as_dvec3()).collect();
        for (s, b) in cloud.splats.iter().zip(&set.bindings) {
            assert_eq!(b.vertex as usize, brute_force_nearest(&verts, s.position.as_dvec3()).0);
        }
    }

    #[test]
    fn reconstruction_at_fit_pose() {
        let rig = build_template_humanoid(1.0).unwrap();
        let mut fit = identity_fit(&rig);
        fit.yaw = 0.4;
        fit.uniform_scale = 1.07;
        fit.translation = DVec3::new(0.1, 0.0, -0.05);
        let cloud = random_cloud(3000, 5);
        let set = compute_bindings(&cloud, &rig, &fit).unwrap();
        let groups = assign_groups(&set, &rig);
        let bundle = build_bundle(&set, &groups, &cloud);
        let (pos, rot) = update_splats(&bundle, &rig, &bundle.fit.limb_pose()).unwrap();
        for (k, &i) in groups.order.iter().enumerate() {
            let s = &cloud.splats[i as usize];
            assert!((pos[k] - s.position).length() < 1e-5);
            assert!(quat_distance(rot[k], s.rotation) < 1e-4);
        }
    }

    #[test]
    fn splat_on_vertex_has_zero_distance() {
        let rig = build_template_humanoid(1.0).unwrap();
        let v = rig.vertices()[123];
        let cloud = SplatCloud::new(vec![Splat::at(v)]);
        let set = compute_bindings(&cloud, &rig, &identity_fit(&rig)).unwrap();
        assert_eq!(set.distances[0], 0.0);
        // skin matrices are identity at bind pose
        assert!((set.bindings[0].rel_position - v).length() < 1e-6);
    }

    fn two_bone_rig() -> SkinnedRig {
        let joints = vec![
            Joint { name: "a".into(), parent: None, bind_rotation: Quat::IDENTITY, bind_translation: Vec3::ZERO },
            Joint {
                name: "b".into(),
                parent: Some(0),
                bind_rotation: Quat::IDENTITY,
                bind_translation: Vec3::new(0.0, 1.0, 0.0),
            },
        ];
        let vertices = vec![Vec3::ZERO, Vec3::new(0.0, 0.5, 0.0), Vec3::new(0.0, 1.5, 0.0), Vec3::new(0.0, 2.0, 0.0)];
        let skin = vec![
            Influences::single(0),
            Influences::from_pairs(&[(0, 0.5), (1, 0.5)]),
            Influences::single(1),
            Influences::single(1),
        ];
        SkinnedRig::new(vertices, vec![], joints, skin).unwrap()
    }

    #[test]
    fn groups_are_stable_partitions() {
        let rig = two_bone_rig();
        let cloud = SplatCloud::new(
            [1.9, 0.1, 1.6, 0.2, 2.0, 0.0].iter().map(|&y| Splat::at(Vec3::new(0.0, y, 0.0))).collect(),
        );
        let set = compute_bindings(&cloud, &rig, &identity_fit(&rig)).unwrap();
        let table = assign_groups(&set, &rig);
        assert_eq!(table.groups, vec![Group { bone: 0, start: 0, end: 3 }, Group { bone: 1, start: 3, end: 6 }]);
        assert_eq!(table.order, vec![1, 3, 5, 0, 2, 4]);
        assert_eq!(table.group_of_splat, vec![1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn tie_on_equal_weights_picks_smaller_joint() {
        let rig = two_bone_rig();
        let cloud = SplatCloud::new(vec![Splat::at(Vec3::new(0.0, 0.5, 0.0))]);
        let set = compute_bindings(&cloud, &rig, &identity_fit(&rig)).unwrap();
        assert_eq!(set.bindings[0].vertex, 1);
        assert_eq!(assign_groups(&set, &rig).groups[0].bone, 0);
    }

    #[test]
    fn single_joint_means_single_group() {
        let rig = two_bone_rig();
        let cloud = SplatCloud::new((0..10).map(|i| Splat::at(Vec3::new(0.0, 1.8 + i as f32 * 0.01, 0.0))).collect());
        let set = compute_bindings(&cloud, &rig, &identity_fit(&rig)).unwrap();
        let table = assign_groups(&set, &rig);
        assert_eq!(table.groups, vec![Group { bone: 1, start: 0, end: 10 }]);
        assert_eq!(table.order, (0..10).collect::<Vec<u32>>());
    }

    #[test]
    fn singular_frame_reports_splats() {
        let rig = two_bone_rig();
        let mut fit = identity_fit(&rig);
        // collapse joint b's frame to a plane
        fit.limb_pose = Pose::bind(&rig);
        let mut bad = fit.clone();
        bad.uniform_scale = 1e-4;
        let cloud = SplatCloud::new(vec![Splat::at(Vec3::ZERO)]);
        let err = compute_bindings(&cloud, &rig, &bad).unwrap_err();
        assert!(matches!(err, BindError::Singular { ref splats } if splats == &vec![0]));
        assert!(compute_bindings(&cloud, &rig, &fit).is_ok());
    }

    #[test]
    fn scale_is_divided_by_fit_scale() {
        let rig = two_bone_rig();
        let mut fit = identity_fit(&rig);
        fit.uniform_scale = 2.0;
        let cloud = SplatCloud::new(vec![Splat::at(Vec3::new(0.0, 1.0, 0.0))]);
        let set = compute_bindings(&cloud, &rig, &fit).unwrap();
        assert_eq!(set.bindings[0].splat_scale, Vec3::splat(0.005));
    }
}
