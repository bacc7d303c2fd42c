//! Shared fixtures for the criterion benches.

use splatrig_core::glam::Vec3;
use splatrig_core::synth::{avatar_fixture, walk_clip, AvatarFixture};
use splatrig_core::{AnimationClip, CameraState, Pose};

pub const HEIGHT: f64 = 1.7;

pub struct Scenario {
    pub avatar: AvatarFixture,
    pub clip: AnimationClip,
}

impl Scenario {
    pub fn new(splats: usize) -> Self {
        let avatar = avatar_fixture(HEIGHT, splats, 42).expect("fixture binds");
        let clip = walk_clip(&avatar.rig, &Pose::bind(&avatar.rig)).expect("walk clip");
        Self { avatar, clip }
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        self.clip.sample(&self.avatar.rig, t).expect("clip samples")
    }

    pub fn camera(&self, angle: f64) -> CameraState {
        CameraState::orbit(Vec3::new(0.0, 0.5 * HEIGHT as f32, 0.0), 3.0, 0.5, angle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_is_consistent() {
        let sc = Scenario::new(2_000);
        assert_eq!(sc.avatar.bundle.splat_count(), 2_000);
        let camera = sc.camera(1.0);
        assert!((camera.forward.length() - 1.0).abs() < 1e-6);
        assert_eq!(sc.pose_at(0.5).rotations.len(), sc.avatar.rig.joint_count());
    }
}
