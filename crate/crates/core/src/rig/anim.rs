//! Keyframed joint-rotation clips and their sampling.

use std::collections::BTreeMap;

use glam::{DQuat, DVec3, Quat, Vec3};
use serde::{Deserialize, Serialize};

use super::{Pose, RigError, SkinnedRig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub time: f32,
    pub rotation: Quat,
}

/// Rotation tracks indexed by joint, resolved against a rig.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationClip {
    pub duration: f32,
    pub looping: bool,
    /// One (possibly empty) track per rig joint.
    pub tracks: Vec<Vec<Keyframe>>,
    pub root_translation: Vec<(f32, Vec3)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    t: f32,
    rotation: [f32; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslationKeyFile {
    t: f32,
    translation: [f32; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipFile {
    duration: f32,
    #[serde(rename = "loop", default)]
    looping: bool,
    tracks: BTreeMap<String, Vec<KeyFile>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    root_translation: Vec<TranslationKeyFile>,
}

fn anim_err(m: impl Into<String>) -> RigError {
    RigError::Animation(m.into())
}

fn check_times(times: impl Iterator<Item = f32>, what: &str, duration: f32) -> Result<(), RigError> {
    let mut prev: Option<f32> = None;
    for t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(anim_err(format!("{what}: key time {t} is invalid")));
        }
        if let Some(p) = prev {
            if t <= p {
                return Err(anim_err(format!("{what}: key times must strictly increase")));
            }
        }
        prev = Some(t);
    }
    if let Some(last) = prev {
        if last > duration {
            return Err(anim_err(format!("{what}: key at {last} s exceeds duration {duration} s")));
        }
    }
    Ok(())
}

impl AnimationClip {
    /// A clip with a single key per joint holding `pose`'s rotations.
    pub fn from_pose(pose: &Pose) -> Self {
        Self {
            duration: 0.0,
            looping: false,
            tracks: pose
                .rotations
                .iter()
                .map(|q| vec![Keyframe { time: 0.0, rotation: q.as_quat() }])
                .collect(),
            root_translation: Vec::new(),
        }
    }

    pub fn validate(&self, rig: &SkinnedRig) -> Result<(), RigError> {
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(anim_err("duration must be a non-negative number"));
        }
        if self.tracks.len() != rig.joint_count() {
            return Err(anim_err(format!(
                "{} tracks for {} joints",
                self.tracks.len(),
                rig.joint_count()
            )));
        }
        for (j, track) in self.tracks.iter().enumerate() {
            let name = &rig.joints()[j].name;
            check_times(track.iter().map(|k| k.time), name, self.duration)?;
            for k in track {
                let n = k.rotation.as_dquat().length();
                if !(n - 1.0).abs().le(&1e-4) {
                    return Err(anim_err(format!("{name}: rotation at {} s is not unit", k.time)));
                }
            }
        }
        check_times(self.root_translation.iter().map(|k| k.0), "root_translation", self.duration)?;
        Ok(())
    }

    /// Parses the clip file and resolves track names against `rig`.
    pub fn from_json(text: &str, rig: &SkinnedRig) -> Result<Self, RigError> {
        let file: ClipFile = serde_json::from_str(text)?;
        let mut tracks = vec![Vec::new(); rig.joint_count()];
        for (name, keys) in file.tracks {
            let j = rig
                .joint_index(&name)
                .ok_or_else(|| anim_err(format!("track for unknown joint `{name}`")))?;
            tracks[j] = keys
                .into_iter()
                .map(|k| Keyframe { time: k.t, rotation: Quat::from_array(k.rotation) })
                .collect();
        }
        let clip = Self {
            duration: file.duration,
            looping: file.looping,
            tracks,
            root_translation: file
                .root_translation
                .into_iter()
                .map(|k| (k.t, Vec3::from_array(k.translation)))
                .collect(),
        };
        clip.validate(rig)?;
        Ok(clip)
    }

    pub fn to_json(&self, rig: &SkinnedRig) -> String {
        let file = ClipFile {
            duration: self.duration,
            looping: self.looping,
            tracks: self
                .tracks
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.is_empty())
                .map(|(j, t)| {
                    (
                        rig.joints()[j].name.clone(),
                        t.iter().map(|k| KeyFile { t: k.time, rotation: k.rotation.to_array() }).collect(),
                    )
                })
                .collect(),
            root_translation: self
                .root_translation
                .iter()
                .map(|(t, v)| TranslationKeyFile { t: *t, translation: v.to_array() })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("clip serializes")
    }

    /// Samples every track at `t` seconds. Keys are interpolated by
    /// shortest-arc slerp and held constant outside the keyed range; looping
    /// clips wrap `t` modulo the duration. Joints without keys stay at their
    /// bind rotation.
    pub fn sample(&self, rig: &SkinnedRig, t: f64) -> Result<Pose, RigError> {
        if !(t >= 0.0) {
            return Err(RigError::NegativeTime(t));
        }
        if self.tracks.len() != rig.joint_count() {
            return Err(RigError::PoseMismatch { expected: rig.joint_count(), got: self.tracks.len() });
        }
        let t = if self.looping && self.duration > 0.0 && t > self.duration as f64 {
            t % self.duration as f64
        } else {
            t
        };
        let rotations = self
            .tracks
            .iter()
            .zip(rig.joints())
            .map(|(track, joint)| {
                if track.is_empty() {
                    joint.bind_rotation.as_dquat()
                } else {
                    sample_track(track, t)
                }
            })
            .collect();
        let root_translation = sample_translation(&self.root_translation, t);
        Ok(Pose { rotations, root_translation, root_scale: 1.0 })
    }
}

/// Index `i` such that `keys[i].0 <= t < keys[i + 1].0`, or the clamped end.
fn bracket(times: impl Fn(usize) -> f32, len: usize, t: f64) -> Result<usize, (usize, usize, f64)> {
    if t <= times(0) as f64 {
        return Ok(0);
    }
    if t >= times(len - 1) as f64 {
        return Ok(len - 1);
    }
    // first key strictly after t
    let (mut lo, mut hi) = (0usize, len - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if times(mid) as f64 <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if times(lo) as f64 == t {
        return Ok(lo);
    }
    let (t0, t1) = (times(lo) as f64, times(hi) as f64);
    Err((lo, hi, (t - t0) / (t1 - t0)))
}

fn sample_track(track: &[Keyframe], t: f64) -> DQuat {
    match bracket(|i| track[i].time, track.len(), t) {
        Ok(i) => track[i].rotation.as_dquat(),
        Err((a, b, u)) => slerp_shortest(track[a].rotation.as_dquat(), track[b].rotation.as_dquat(), u),
    }
}

fn sample_translation(keys: &[(f32, Vec3)], t: f64) -> DVec3 {
    if keys.is_empty() {
        return DVec3::ZERO;
    }
    match bracket(|i| keys[i].0, keys.len(), t) {
        Ok(i) => keys[i].1.as_dvec3(),
        Err((a, b, u)) => keys[a].1.as_dvec3().lerp(keys[b].1.as_dvec3(), u),
    }
}

/// Spherical interpolation along the shorter arc; result is unit length.
pub fn slerp_shortest(a: DQuat, b: DQuat, u: f64) -> DQuat {
    let mut b = b;
    let mut dot = a.dot(b);
    if dot < 0.0 {
        b = -b;
        dot = -dot;
    }
    if dot > 0.9995 {
        return (a * (1.0 - u) + b * u).normalize();
    }
    let theta = dot.min(1.0).acos();
    let s = theta.sin();
    let wa = ((1.0 - u) * theta).sin() / s;
    let wb = (u * theta).sin() / s;
    (a * wa + b * wb).normalize()
}
