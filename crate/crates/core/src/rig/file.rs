//! `rig.json` (de)serialization and the rig content hash.

use glam::{Quat, Vec3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Influences, Joint, RigError, SkinnedRig, MAX_INFLUENCES};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointFile {
    pub name: String,
    pub parent: Option<usize>,
    /// `[x, y, z, w]`
    pub bind_rotation: [f32; 4],
    pub bind_translation: [f32; 3],
}

/// On-disk rig layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigFile {
    pub vertices: Vec<[f32; 3]>,
    #[serde(default)]
    pub triangles: Vec<[u32; 3]>,
    pub joints: Vec<JointFile>,
    /// Per vertex, up to four `[joint, weight]` pairs.
    pub skin: Vec<Vec<(usize, f32)>>,
}

impl RigFile {
    pub fn from_rig(rig: &SkinnedRig) -> Self {
        Self {
            vertices: rig.vertices().iter().map(|v| v.to_array()).collect(),
            triangles: rig.triangles().to_vec(),
            joints: rig
                .joints()
                .iter()
                .map(|j| JointFile {
                    name: j.name.clone(),
                    parent: j.parent,
                    bind_rotation: j.bind_rotation.to_array(),
                    bind_translation: j.bind_translation.to_array(),
                })
                .collect(),
            skin: rig.skin().iter().map(|inf| inf.iter().collect()).collect(),
        }
    }

    pub fn into_rig(self) -> Result<SkinnedRig, RigError> {
        let mut skin = Vec::with_capacity(self.skin.len());
        for (v, pairs) in self.skin.iter().enumerate() {
            if pairs.len() > MAX_INFLUENCES {
                return Err(RigError::Invalid(format!(
                    "vertex {v} has {} influences (max {MAX_INFLUENCES})",
                    pairs.len()
                )));
            }
            skin.push(Influences::from_pairs(pairs));
        }
        let joints = self
            .joints
            .into_iter()
            .map(|j| Joint {
                name: j.name,
                parent: j.parent,
                bind_rotation: Quat::from_array(j.bind_rotation),
                bind_translation: Vec3::from_array(j.bind_translation),
            })
            .collect();
        SkinnedRig::new(
            self.vertices.into_iter().map(Vec3::from_array).collect(),
            self.triangles,
            joints,
            skin,
        )
    }
}

impl SkinnedRig {
    pub fn from_json(text: &str) -> Result<Self, RigError> {
        serde_json::from_str::<RigFile>(text)?.into_rig()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&RigFile::from_rig(self)).expect("rig serializes")
    }
}

/// SHA-256 over a canonical little-endian encoding of every rig field, so
/// the hash is independent of JSON formatting.
pub fn rig_content_hash(rig: &SkinnedRig) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"splatrig-rig-v1");
    let u32le = |h: &mut Sha256, v: usize| h.update((v as u32).to_le_bytes());
    let f32le = |h: &mut Sha256, v: f32| h.update(v.to_le_bytes());

    u32le(&mut h, rig.vertices().len());
    for v in rig.vertices() {
        v.to_array().into_iter().for_each(|c| f32le(&mut h, c));
    }
    u32le(&mut h, rig.triangles().len());
    for t in rig.triangles() {
        t.iter().for_each(|&i| u32le(&mut h, i as usize));
    }
    u32le(&mut h, rig.joints().len());
    for j in rig.joints() {
        u32le(&mut h, j.name.len());
        h.update(j.name.as_bytes());
        h.update(j.parent.map_or(-1i32, |p| p as i32).to_le_bytes());
        j.bind_rotation.to_array().into_iter().for_each(|c| f32le(&mut h, c));
        j.bind_translation.to_array().into_iter().for_each(|c| f32le(&mut h, c));
    }
    for inf in rig.skin() {
        h.update([inf.count]);
        for (j, w) in inf.iter() {
            u32le(&mut h, j);
            f32le(&mut h, w);
        }
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::build_template_humanoid;

    #[test]
    fn json_roundtrip_preserves_hash() {
        let rig = build_template_humanoid(1.0).unwrap();
        let text = rig.to_json();
        let back = SkinnedRig::from_json(&text).unwrap();
        assert_eq!(back.content_hash(), rig.content_hash());
        assert_eq!(back.vertices(), rig.vertices());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = build_template_humanoid(1.0).unwrap();
        let b = build_template_humanoid(1.1).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn unnormalized_weights_fail_to_load() {
        let text = r#"{"vertices":[[0,0,0]],"joints":[{"name":"a","parent":null,
            "bind_rotation":[0,0,0,1],"bind_translation":[0,0,0]}],"skin":[[[0,0.5]]]}"#;
        assert!(matches!(SkinnedRig::from_json(text), Err(RigError::WeightSum { .. })));
    }
}
