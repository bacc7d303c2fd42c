//! Avatar bundle: the portable output of preprocessing.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! "GSAB"  u32 version  u32 splat_count  u32 vertex_count  u32 group_count  [u8; 32] rig_hash
//! fit:    f32 yaw  f32[3] translation  f32 scale  u32 joint_count  f32[4] x joint_count (xyzw)
//! splats: splat_count records of
//!         u32 vertex  f32[3] rel_position  f32[4] rel_rotation (xyzw)  f32[3] scale  f32[3] color  f32 opacity
//! groups: group_count records of u32 bone  u32 start  u32 end
//! ```

use glam::{DQuat, DVec3, Quat, Vec3};
use thiserror::Error;

use crate::rig::{Pose, SkinnedRig};

pub const BUNDLE_MAGIC: [u8; 4] = *b"GSAB";
pub const BUNDLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 32;
const SPLAT_RECORD_LEN: usize = 4 + 4 * (3 + 4 + 3 + 3 + 1);
const GROUP_RECORD_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bad magic: not an avatar bundle")]
    BadMagic,
    #[error("unsupported version {found} (max supported {max})")]
    UnsupportedVersion { found: u32, max: u32 },
    #[error("bundle truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

/// Fit placement and limb pose as persisted (single precision).
#[derive(Debug, Clone, PartialEq)]
pub struct FitBlock {
    pub yaw: f32,
    pub translation: Vec3,
    pub scale: f32,
    /// Local joint rotations of the fitted limb pose.
    pub limb_rotations: Vec<Quat>,
}

impl FitBlock {
    pub fn limb_pose(&self) -> Pose {
        Pose {
            rotations: self.limb_rotations.iter().map(|q| q.as_dquat()).collect(),
            root_translation: DVec3::ZERO,
            root_scale: 1.0,
        }
    }

    /// Applies this block's similarity to an animation pose.
    pub fn place(&self, rig: &SkinnedRig, pose: &Pose) -> Pose {
        pose.placed(rig, self.yaw as f64, self.translation.as_dvec3(), self.scale as f64)
    }

    /// The pose in which splats were bound.
    pub fn world_pose(&self, rig: &SkinnedRig) -> Pose {
        self.place(rig, &self.limb_pose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleSplat {
    pub vertex: u32,
    pub rel_position: Vec3,
    pub rel_rotation: Quat,
    /// Standard deviations in rig units; multiply by the pose's root scale.
    pub scale: Vec3,
    pub color: Vec3,
    pub opacity: f32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Group {
    pub bone: u32,
    pub start: u32,
    pub end: u32,
}

impl Group {
    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvatarBundle {
    pub vertex_count: u32,
    pub rig_hash: [u8; 32],
    pub fit: FitBlock,
    /// In bundle (group-contiguous) order.
    pub splats: Vec<BundleSplat>,
    pub groups: Vec<Group>,
}

impl AvatarBundle {
    pub fn splat_count(&self) -> usize {
        self.splats.len()
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        use crate::math::bits_eq;
        let splat_eq = |a: &BundleSplat, b: &BundleSplat| {
            a.vertex == b.vertex
                && bits_eq(&a.rel_position.to_array(), &b.rel_position.to_array())
                && bits_eq(&a.rel_rotation.to_array(), &b.rel_rotation.to_array())
                && bits_eq(&a.scale.to_array(), &b.scale.to_array())
                && bits_eq(&a.color.to_array(), &b.color.to_array())
                && a.opacity.to_bits() == b.opacity.to_bits()
        };
        self.vertex_count == other.vertex_count
            && self.rig_hash == other.rig_hash
            && self.fit.yaw.to_bits() == other.fit.yaw.to_bits()
            && bits_eq(&self.fit.translation.to_array(), &other.fit.translation.to_array())
            && self.fit.scale.to_bits() == other.fit.scale.to_bits()
            && self.fit.limb_rotations.len() == other.fit.limb_rotations.len()
            && self
                .fit
                .limb_rotations
                .iter()
                .zip(&other.fit.limb_rotations)
                .all(|(a, b)| bits_eq(&a.to_array(), &b.to_array()))
            && self.splats.len() == other.splats.len()
            && self.splats.iter().zip(&other.splats).all(|(a, b)| splat_eq(a, b))
            && self.groups == other.groups
    }

    /// Checks counts, vertex indices and that groups tile the splat array.
    pub fn validate(&self) -> Result<(), BundleError> {
        let bad = |m: String| Err(BundleError::Inconsistent(m));
        if self.fit.limb_rotations.is_empty() {
            return bad("fit block has no joints".into());
        }
        if let Some((i, s)) = self.splats.iter().enumerate().find(|(_, s)| s.vertex >= self.vertex_count) {
            return bad(format!("splat {i} references vertex {} of {}", s.vertex, self.vertex_count));
        }
        if self.groups.len() > self.fit.limb_rotations.len() {
            return bad(format!(
                "{} groups for {} joints",
                self.groups.len(),
                self.fit.limb_rotations.len()
            ));
        }
        let mut cursor = 0u32;
        for (g, group) in self.groups.iter().enumerate() {
            if group.start != cursor || group.end < group.start {
                return bad(format!("group {g} range [{}, {}) does not continue at {cursor}", group.start, group.end));
            }
            if group.bone as usize >= self.fit.limb_rotations.len() {
                return bad(format!("group {g} references bone {}", group.bone));
            }
            cursor = group.end;
        }
        if cursor as usize != self.splats.len() {
            return bad(format!("groups cover {cursor} of {} splats", self.splats.len()));
        }
        Ok(())
    }

    /// Ensures `rig` is the rig this bundle was bound against.
    pub fn check_rig(&self, rig: &SkinnedRig) -> Result<(), BundleError> {
        if rig.content_hash() != self.rig_hash {
            return Err(BundleError::Inconsistent(format!(
                "rig hash mismatch: bundle expects {}, rig is {}",
                hex(&self.rig_hash),
                hex(&rig.content_hash())
            )));
        }
        if rig.vertex_count() != self.vertex_count as usize || rig.joint_count() != self.fit.limb_rotations.len() {
            return Err(BundleError::Inconsistent("rig dimensions differ from bundle".into()));
        }
        Ok(())
    }

    /// Splat rotations at bind time, reconstructed without a rig (testing aid).
    pub fn rel_rotations(&self) -> Vec<DQuat> {
        self.splats.iter().map(|s| s.rel_rotation.as_dquat()).collect()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn export_bundle(bundle: &AvatarBundle) -> Result<Vec<u8>, BundleError> {
    bundle.validate()?;
    let joints = bundle.fit.limb_rotations.len();
    let mut w = Writer(Vec::with_capacity(
        HEADER_LEN + 24 + joints * 16 + bundle.splats.len() * SPLAT_RECORD_LEN + bundle.groups.len() * GROUP_RECORD_LEN,
    ));
    w.0.extend_from_slice(&BUNDLE_MAGIC);
    w.u32(BUNDLE_VERSION);
    w.u32(bundle.splats.len() as u32);
    w.u32(bundle.vertex_count);
    w.u32(bundle.groups.len() as u32);
    w.0.extend_from_slice(&bundle.rig_hash);

    w.f32s(&[bundle.fit.yaw]);
    w.f32s(&bundle.fit.translation.to_array());
    w.f32s(&[bundle.fit.scale]);
    w.u32(joints as u32);
    for q in &bundle.fit.limb_rotations {
        w.f32s(&q.to_array());
    }
    for s in &bundle.splats {
        w.u32(s.vertex);
        w.f32s(&s.rel_position.to_array());
        w.f32s(&s.rel_rotation.to_array());
        w.f32s(&s.scale.to_array());
        w.f32s(&s.color.to_array());
        w.f32s(&[s.opacity]);
    }
    for g in &bundle.groups {
        w.u32(g.bone);
        w.u32(g.start);
        w.u32(g.end);
    }
    Ok(w.0)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self) -> u32 {
        let v = u32::from_le_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v
    }
    fn f32(&mut self) -> f32 {
        f32::from_bits(self.u32())
    }
    fn vec3(&mut self) -> Vec3 {
        Vec3::new(self.f32(), self.f32(), self.f32())
    }
    fn quat(&mut self) -> Quat {
        Quat::from_xyzw(self.f32(), self.f32(), self.f32(), self.f32())
    }
}

pub fn import_bundle(bytes: &[u8]) -> Result<AvatarBundle, BundleError> {
    let truncated = |expected: usize| BundleError::Truncated { expected, actual: bytes.len() };
    if bytes.len() < 4 {
        return Err(truncated(HEADER_LEN));
    }
    if bytes[..4] != BUNDLE_MAGIC {
        return Err(BundleError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(truncated(HEADER_LEN));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32();
    if version != BUNDLE_VERSION {
        return Err(BundleError::UnsupportedVersion { found: version, max: BUNDLE_VERSION });
    }
    // header + fit block up to joint_count
    let fixed = HEADER_LEN + 4 * 5 + 4;
    if bytes.len() < fixed {
        return Err(truncated(fixed));
    }
    let splat_count = r.u32() as usize;
    let vertex_count = r.u32();
    let group_count = r.u32() as usize;
    let mut rig_hash = [0u8; 32];
    rig_hash.copy_from_slice(&bytes[r.pos..r.pos + 32]);
    r.pos += 32;
    let yaw = r.f32();
    let translation = r.vec3();
    let scale = r.f32();
    let joints = r.u32() as usize;

    let expected = fixed + joints * 16 + splat_count * SPLAT_RECORD_LEN + group_count * GROUP_RECORD_LEN;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(BundleError::Inconsistent(format!(
            "{} trailing bytes after the group table",
            bytes.len() - expected
        )));
    }
    let limb_rotations = (0..joints).map(|_| r.quat()).collect();
    let splats = (0..splat_count)
        .map(|_| BundleSplat {
            vertex: r.u32(),
            rel_position: r.vec3(),
            rel_rotation: r.quat(),
            scale: r.vec3(),
            color: r.vec3(),
            opacity: r.f32(),
        })
        .collect();
    let groups = (0..group_count).map(|_| Group { bone: r.u32(), start: r.u32(), end: r.u32() }).collect();
    let bundle = AvatarBundle {
        vertex_count,
        rig_hash,
        fit: FitBlock { yaw, translation, scale, limb_rotations },
        splats,
        groups,
    };
    bundle.validate()?;
    Ok(bundle)
}
