//! Named humanoid joints and the four limb abduction angles used for fitting.

use glam::{DQuat, DVec3};

use super::{Pose, RigError, SkinnedRig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Limb {
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
}

impl Limb {
    pub const ALL: [Limb; 4] = [Limb::LeftArm, Limb::RightArm, Limb::LeftLeg, Limb::RightLeg];

    fn root_name(self) -> &'static str {
        match self {
            Limb::LeftArm => "leftUpperArm",
            Limb::RightArm => "rightUpperArm",
            Limb::LeftLeg => "leftUpperLeg",
            Limb::RightLeg => "rightUpperLeg",
        }
    }

    fn child_name(self) -> &'static str {
        match self {
            Limb::LeftArm => "leftLowerArm",
            Limb::RightArm => "rightLowerArm",
            Limb::LeftLeg => "leftLowerLeg",
            Limb::RightLeg => "rightLowerLeg",
        }
    }

    /// +1 for limbs on the +X (left) side.
    fn side(self) -> f64 {
        match self {
            Limb::LeftArm | Limb::LeftLeg => 1.0,
            Limb::RightArm | Limb::RightLeg => -1.0,
        }
    }

    /// Admissible abduction range in radians.
    pub fn range(self) -> (f64, f64) {
        match self {
            Limb::LeftArm | Limb::RightArm => (20f64.to_radians(), 80f64.to_radians()),
            Limb::LeftLeg | Limb::RightLeg => (0.0, 20f64.to_radians()),
        }
    }
}

/// Abduction from the downward vertical, in radians.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LimbAngles {
    pub left_shoulder: f64,
    pub right_shoulder: f64,
    pub left_hip: f64,
    pub right_hip: f64,
}

impl LimbAngles {
    pub fn get(&self, limb: Limb) -> f64 {
        match limb {
            Limb::LeftArm => self.left_shoulder,
            Limb::RightArm => self.right_shoulder,
            Limb::LeftLeg => self.left_hip,
            Limb::RightLeg => self.right_hip,
        }
    }

    pub fn set(&mut self, limb: Limb, value: f64) {
        match limb {
            Limb::LeftArm => self.left_shoulder = value,
            Limb::RightArm => self.right_shoulder = value,
            Limb::LeftLeg => self.left_hip = value,
            Limb::RightLeg => self.right_hip = value,
        }
    }
}

/// Joint indices of the humanoid limbs, resolved by VRM bone name.
#[derive(Debug, Clone)]
pub struct HumanoidJoints {
    limb_roots: [usize; 4],
    bind_angles: LimbAngles,
    /// Rotation part of each limb root's parent global bind transform.
    parent_rotations: [DQuat; 4],
    /// Per limb, the joints in its subtree.
    subtrees: [Vec<usize>; 4],
}

impl HumanoidJoints {
    pub fn resolve(rig: &SkinnedRig) -> Result<Self, RigError> {
        let find = |name: &str| rig.joint_index(name).ok_or_else(|| RigError::MissingJoint(name.into()));
        let global = rig.global_bind();
        let mut limb_roots = [0usize; 4];
        let mut parent_rotations = [DQuat::IDENTITY; 4];
        let mut bind_angles = LimbAngles { left_shoulder: 0.0, right_shoulder: 0.0, left_hip: 0.0, right_hip: 0.0 };
        let mut subtrees: [Vec<usize>; 4] = Default::default();
        for (k, limb) in Limb::ALL.into_iter().enumerate() {
            let root = find(limb.root_name())?;
            let child = find(limb.child_name())?;
            let dir = global[child].translation - global[root].translation;
            bind_angles.set(limb, abduction(dir, limb.side()));
            limb_roots[k] = root;
            let parent = rig.joints()[root].parent.expect("limb root is not the rig root");
            parent_rotations[k] = DQuat::from_mat3(&global[parent].matrix3).normalize();
            // joints are topologically ordered, so one forward pass collects the subtree
            let mut inside = vec![false; rig.joint_count()];
            inside[root] = true;
            for (j, joint) in rig.joints().iter().enumerate().skip(root + 1) {
                if joint.parent.is_some_and(|p| inside[p]) {
                    inside[j] = true;
                }
            }
            subtrees[k] = (0..rig.joint_count()).filter(|&j| inside[j]).collect();
        }
        Ok(Self { limb_roots, bind_angles, parent_rotations, subtrees })
    }

    pub fn bind_angles(&self) -> LimbAngles {
        self.bind_angles
    }

    pub fn limb_root(&self, limb: Limb) -> usize {
        self.limb_roots[limb as usize]
    }

    pub fn subtree(&self, limb: Limb) -> &[usize] {
        &self.subtrees[limb as usize]
    }

    /// Sets the limb roots of `base` so each limb is abducted to `angles`.
    /// The change is a rotation about world +Z applied on top of the bind
    /// orientation of each limb root.
    pub fn apply(&self, rig: &SkinnedRig, base: &Pose, angles: &LimbAngles) -> Pose {
        let mut pose = base.clone();
        for (k, limb) in Limb::ALL.into_iter().enumerate() {
            let root = self.limb_roots[k];
            let delta = limb.side() * (angles.get(limb) - self.bind_angles.get(limb));
            let parent = self.parent_rotations[k];
            let world = DQuat::from_rotation_z(delta);
            pose.rotations[root] =
                (parent.inverse() * world * parent * rig.joints()[root].bind_rotation.as_dquat()).normalize();
        }
        pose
    }

    /// Vertices whose dominant joint belongs to `limb`.
    pub fn limb_vertices(&self, rig: &SkinnedRig, limb: Limb) -> Vec<usize> {
        let mut member = vec![false; rig.joint_count()];
        for &j in self.subtree(limb) {
            member[j] = true;
        }
        rig.skin()
            .iter()
            .enumerate()
            .filter(|(_, inf)| member[inf.dominant()])
            .map(|(v, _)| v)
            .collect()
    }
}

fn abduction(dir: DVec3, side: f64) -> f64 {
    (side * dir.x).atan2(-dir.y)
}
