//! The skinned "background mesh": joint hierarchy, linear blend skinning,
//! poses and keyframed animation.

mod anim;
mod file;
pub mod humanoid;
pub mod template;

use glam::{DAffine3, DMat3, DQuat, DVec3, Quat, Vec3};
use rayon::prelude::*;
use thiserror::Error;

pub use anim::{slerp_shortest, AnimationClip, Keyframe};
pub use file::{rig_content_hash, RigFile};
pub use humanoid::{HumanoidJoints, LimbAngles};
pub use template::build_template_humanoid;

/// Maximum number of joint influences per vertex.
pub const MAX_INFLUENCES: usize = 4;

#[derive(Debug, Error)]
pub enum RigError {
    #[error("invalid rig: {0}")]
    Invalid(String),
    #[error("pose has {got} joint rotations, rig has {expected} joints")]
    PoseMismatch { expected: usize, got: usize },
    #[error("vertex {vertex}: skin weights sum to {sum}, expected 1")]
    WeightSum { vertex: usize, sum: f64 },
    #[error("invalid animation: {0}")]
    Animation(String),
    #[error("animation time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("rig is missing humanoid joint `{0}`")]
    MissingJoint(String),
    #[error("template height {0} m is outside [0.5, 2.5]")]
    HeightOutOfRange(f64),
    #[error("malformed file: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// `None` only for the root, which is always joint 0.
    pub parent: Option<usize>,
    pub bind_rotation: Quat,
    pub bind_translation: Vec3,
}

/// Up to four `(joint, weight)` pairs; only the first `count` are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Influences {
    pub joints: [u16; MAX_INFLUENCES],
    pub weights: [f32; MAX_INFLUENCES],
    pub count: u8,
}

impl Influences {
    pub fn single(joint: usize) -> Self {
        Self::from_pairs(&[(joint, 1.0)])
    }

    pub fn from_pairs(pairs: &[(usize, f32)]) -> Self {
        assert!(pairs.len() <= MAX_INFLUENCES, "too many influences");
        let mut inf = Self { joints: [0; MAX_INFLUENCES], weights: [0.0; MAX_INFLUENCES], count: 0 };
        for (k, &(j, w)) in pairs.iter().enumerate() {
            inf.joints[k] = j as u16;
            inf.weights[k] = w;
        }
        inf.count = pairs.len() as u8;
        inf
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f32)> + '_ {
        (0..self.count as usize).map(|k| (self.joints[k] as usize, self.weights[k]))
    }

    /// Joint with the largest weight; ties go to the smaller joint index.
    pub fn dominant(&self) -> usize {
        self.iter()
            .fold(None::<(usize, f32)>, |best, (j, w)| match best {
                Some((bj, bw)) if bw > w || (bw == w && bj < j) => Some((bj, bw)),
                _ => Some((j, w)),
            })
            .map(|(j, _)| j)
            .unwrap_or(0)
    }
}

/// Skinned mesh with a topologically ordered joint hierarchy.
#[derive(Debug, Clone)]
pub struct SkinnedRig {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    joints: Vec<Joint>,
    skin: Vec<Influences>,
    inverse_bind: Vec<DAffine3>,
    hash: [u8; 32],
}

fn local_transform(translation: Vec3, rotation: DQuat) -> DAffine3 {
    DAffine3::from_rotation_translation(rotation, translation.as_dvec3())
}

impl SkinnedRig {
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        joints: Vec<Joint>,
        skin: Vec<Influences>,
    ) -> Result<Self, RigError> {
        let invalid = |m: String| Err(RigError::Invalid(m));
        if joints.is_empty() {
            return invalid("rig has no joints".into());
        }
        if vertices.is_empty() {
            return invalid("rig has no vertices".into());
        }
        if skin.len() != vertices.len() {
            return invalid(format!("{} skin entries for {} vertices", skin.len(), vertices.len()));
        }
        if joints.len() > u16::MAX as usize {
            return invalid("too many joints".into());
        }
        for (j, joint) in joints.iter().enumerate() {
            match (j, joint.parent) {
                (0, None) => {}
                (0, Some(_)) => return invalid("joint 0 must be the root".into()),
                (_, None) => return invalid(format!("joint {j} `{}` is a second root", joint.name)),
                (_, Some(p)) if p >= j => {
                    return invalid(format!("joint {j} has parent {p}; parents must precede children"))
                }
                _ => {}
            }
            let n2 = joint.bind_rotation.as_dquat().length_squared();
            if (n2.sqrt() - 1.0).abs() > 1e-4 {
                return invalid(format!("joint {j} bind rotation is not unit"));
            }
        }
        if let Some(v) = vertices.iter().position(|v| !v.is_finite()) {
            return invalid(format!("vertex {v} is not finite"));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= vertices.len()) {
                return invalid(format!("triangle {t} references a missing vertex"));
            }
        }
        let mut referenced = vec![false; joints.len()];
        for (v, inf) in skin.iter().enumerate() {
            if inf.count == 0 || inf.count as usize > MAX_INFLUENCES {
                return invalid(format!("vertex {v} has {} influences", inf.count));
            }
            let mut sum = 0.0f64;
            for (j, w) in inf.iter() {
                if j >= joints.len() {
                    return invalid(format!("vertex {v} references joint {j}"));
                }
                if !(w >= 0.0) {
                    return invalid(format!("vertex {v} has a negative weight"));
                }
                referenced[j] = true;
                sum += w as f64;
            }
            if (sum - 1.0).abs() > 1e-4 {
                return Err(RigError::WeightSum { vertex: v, sum });
            }
        }
        if let Some(j) = referenced.iter().position(|r| !r) {
            return invalid(format!("joint {j} `{}` influences no vertex", joints[j].name));
        }

        let mut rig = Self {
            vertices,
            triangles,
            joints,
            skin,
            inverse_bind: Vec::new(),
            hash: [0; 32],
        };
        let global = rig.global_bind();
        rig.inverse_bind = global.iter().map(|g| g.inverse()).collect();
        for (j, (g, inv)) in global.iter().zip(&rig.inverse_bind).enumerate() {
            let id = *inv * *g;
            let err = (id.matrix3 - DMat3::IDENTITY).to_cols_array().iter().map(|v| v.abs()).fold(0.0, f64::max)
                .max(id.translation.abs().max_element());
            if err > 1e-5 {
                return invalid(format!("joint {j} bind transform is not invertible"));
            }
        }
        rig.hash = file::rig_content_hash(&rig);
        Ok(rig)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn skin(&self) -> &[Influences] {
        &self.skin
    }

    pub fn inverse_bind(&self) -> &[DAffine3] {
        &self.inverse_bind
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// SHA-256 of the rig's canonical binary encoding.
    pub fn content_hash(&self) -> [u8; 32] {
        self.hash
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn children(&self, joint: usize) -> impl Iterator<Item = usize> + '_ {
        self.joints.iter().enumerate().filter(move |(_, j)| j.parent == Some(joint)).map(|(i, _)| i)
    }

    /// Global joint transforms in the bind pose.
    pub fn global_bind(&self) -> Vec<DAffine3> {
        let mut global: Vec<DAffine3> = Vec::with_capacity(self.joints.len());
        for joint in &self.joints {
            let local = local_transform(joint.bind_translation, joint.bind_rotation.as_dquat());
            let g = match joint.parent {
                Some(p) => global[p] * local,
                None => local,
            };
            global.push(g);
        }
        global
    }

    /// Bind-pose joint positions in model space.
    pub fn bind_joint_positions(&self) -> Vec<DVec3> {
        self.global_bind().iter().map(|g| g.translation).collect()
    }
}

/// Absolute local joint rotations plus a root placement.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotations: Vec<DQuat>,
    pub root_translation: DVec3,
    pub root_scale: f64,
}

impl Pose {
    /// The bind pose: every local rotation equals its bind rotation.
    pub fn bind(rig: &SkinnedRig) -> Self {
        Self {
            rotations: rig.joints.iter().map(|j| j.bind_rotation.as_dquat()).collect(),
            root_translation: DVec3::ZERO,
            root_scale: 1.0,
        }
    }

    /// Places this pose in the world with the similarity
    /// `x -> translation + scale * R_y(yaw) * x`.
    ///
    /// The result is again a `Pose`: yaw is folded into the root rotation and
    /// the translation is re-expressed in the scaled root frame.
    pub fn placed(&self, rig: &SkinnedRig, yaw: f64, translation: DVec3, scale: f64) -> Pose {
        let ry = DQuat::from_rotation_y(yaw);
        let root_bind = rig.joints[0].bind_translation.as_dvec3();
        let total_scale = scale * self.root_scale;
        let mut rotations = self.rotations.clone();
        rotations[0] = ry * rotations[0];
        Pose {
            rotations,
            root_translation: translation / total_scale
                + ry * (self.root_translation + root_bind)
                - root_bind,
            root_scale: total_scale,
        }
    }
}

/// Per-joint skinning transforms `global(pose) * inverse_bind`.
pub fn compute_skin_matrices(rig: &SkinnedRig, pose: &Pose) -> Result<Vec<DAffine3>, RigError> {
    if pose.rotations.len() != rig.joints.len() {
        return Err(RigError::PoseMismatch { expected: rig.joints.len(), got: pose.rotations.len() });
    }
    let mut global: Vec<DAffine3> = Vec::with_capacity(rig.joints.len());
    for (joint, &rotation) in rig.joints.iter().zip(&pose.rotations) {
        let local = local_transform(joint.bind_translation, rotation);
        let g = match joint.parent {
            Some(p) => global[p] * local,
            None => {
                DAffine3::from_scale(DVec3::splat(pose.root_scale))
                    * DAffine3::from_translation(pose.root_translation)
                    * local
            }
        };
        global.push(g);
    }
    Ok(global.iter().zip(&rig.inverse_bind).map(|(g, inv)| *g * *inv).collect())
}

/// Linear blend of the skin matrices influencing `vertex`.
#[inline]
pub fn blend_vertex_matrix(rig: &SkinnedRig, skin_matrices: &[DAffine3], vertex: usize) -> DAffine3 {
    blend_influences(&rig.skin[vertex], skin_matrices)
}

pub fn blend_influences(inf: &Influences, skin_matrices: &[DAffine3]) -> DAffine3 {
    let mut m = DMat3::ZERO;
    let mut t = DVec3::ZERO;
    for (j, w) in inf.iter() {
        let w = w as f64;
        m += skin_matrices[j].matrix3 * w;
        t += skin_matrices[j].translation * w;
    }
    DAffine3 { matrix3: m, translation: t }
}

/// Bind-pose vertices deformed into `pose`.
pub fn skin_vertices(rig: &SkinnedRig, pose: &Pose) -> Result<Vec<DVec3>, RigError> {
    let mats = compute_skin_matrices(rig, pose)?;
    Ok((0..rig.vertices.len())
        .into_par_iter()
        .map(|v| blend_vertex_matrix(rig, &mats, v).transform_point3(rig.vertices[v].as_dvec3()))
        .collect())
}
