//! Procedural humanoid template built from capsules.
//!
//! The template stands in A-pose (arms 45° from vertical, legs 5° apart),
//! faces +Z and has its feet on `y = 0`. Joint names follow the VRM humanoid
//! bone names so animation files authored for VRM skeletons map directly.

use glam::{DVec3, Quat};
use rand::Rng;

use super::{Influences, Joint, RigError, SkinnedRig};

pub const JOINT_NAMES: [&str; 17] = [
    "hips",
    "spine",
    "chest",
    "neck",
    "head",
    "leftUpperArm",
    "leftLowerArm",
    "leftHand",
    "rightUpperArm",
    "rightLowerArm",
    "rightHand",
    "leftUpperLeg",
    "leftLowerLeg",
    "leftFoot",
    "rightUpperLeg",
    "rightLowerLeg",
    "rightFoot",
];

const PARENTS: [Option<usize>; 17] = [
    None,
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(2),
    Some(5),
    Some(6),
    Some(2),
    Some(8),
    Some(9),
    Some(0),
    Some(11),
    Some(12),
    Some(0),
    Some(14),
    Some(15),
];

/// Shoulder abduction of the bind pose, from the downward vertical.
pub const BIND_SHOULDER_ABDUCTION_DEG: f64 = 45.0;
/// Hip abduction of the bind pose.
pub const BIND_HIP_ABDUCTION_DEG: f64 = 5.0;
/// Approximate number of generated mesh vertices.
pub const TARGET_VERTEX_COUNT: usize = 4000;

const BLEND_WINDOW: f64 = 0.2;
const TORSO_BOUNDARIES: [f64; 2] = [0.60, 0.70];
const TORSO_HALF_WINDOW: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq)]
enum WeightRule {
    Fixed(usize),
    /// Owner bone blended half-way into its parent near `a` and its child near `b`.
    Chain { owner: usize, parent: Option<usize>, child: Option<usize> },
    /// Hips / spine / chest blended by height.
    TorsoBands,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placement {
    Center,
    Left,
    /// Mirror image (x -> -x) of the capsule at this index.
    MirrorOf(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Capsule {
    pub a: DVec3,
    pub b: DVec3,
    pub radius: f64,
    rule: WeightRule,
    placement: Placement,
}

impl Capsule {
    pub fn area(&self) -> f64 {
        let len = (self.b - self.a).length();
        2.0 * std::f64::consts::PI * self.radius * len + 4.0 * std::f64::consts::PI * self.radius * self.radius
    }

    fn frame(&self) -> (DVec3, DVec3, DVec3, f64) {
        let axis = self.b - self.a;
        let len = axis.length();
        let d = if len > 1e-12 { axis / len } else { DVec3::Y };
        let reference = if d.z.abs() < 0.9 { DVec3::Z } else { DVec3::X };
        let e1 = d.cross(reference).normalize();
        let e2 = d.cross(e1);
        (d, e1, e2, len)
    }
}

/// Capsule geometry and skinning rules of the template at a given height.
#[derive(Debug, Clone)]
pub struct HumanoidShape {
    pub height: f64,
    /// Bind-pose joint positions, indexed like [`JOINT_NAMES`].
    pub joints: Vec<DVec3>,
    pub capsules: Vec<Capsule>,
    torso_boundaries: [f64; 2],
    torso_half_window: f64,
}

impl HumanoidShape {
    pub fn new(height: f64) -> Result<Self, RigError> {
        if !(0.5..=2.5).contains(&height) {
            return Err(RigError::HeightOutOfRange(height));
        }
        let h = height;
        let p = |x: f64, y: f64, z: f64| DVec3::new(x, y, z) * h;

        let (sa, ca) = BIND_SHOULDER_ABDUCTION_DEG.to_radians().sin_cos();
        let arm_dir = DVec3::new(sa, -ca, 0.0);
        let (sl, cl) = BIND_HIP_ABDUCTION_DEG.to_radians().sin_cos();
        let leg_dir = DVec3::new(sl, -cl, 0.0);

        let shoulder = p(0.15, 0.80, 0.0);
        let elbow = shoulder + arm_dir * (0.16 * h);
        let wrist = elbow + arm_dir * (0.15 * h);
        let fingertip = wrist + arm_dir * (0.07 * h);
        let hip = p(0.06, 0.50, 0.0);
        let knee = hip + leg_dir * (0.22 * h);
        let ankle = knee + leg_dir * (0.22 * h);

        let mirror = |v: DVec3| DVec3::new(-v.x, v.y, v.z);
        let joints = vec![
            p(0.0, 0.53, 0.0),
            p(0.0, 0.60, 0.0),
            p(0.0, 0.70, 0.0),
            p(0.0, 0.82, 0.0),
            p(0.0, 0.87, 0.0),
            shoulder,
            elbow,
            wrist,
            mirror(shoulder),
            mirror(elbow),
            mirror(wrist),
            hip,
            knee,
            ankle,
            mirror(hip),
            mirror(knee),
            mirror(ankle),
        ];

        use Placement::*;
        use WeightRule::*;
        let cap = |a, b, r: f64, rule, placement| Capsule { a, b, radius: r * h, rule, placement };
        let chain = |owner, parent, child| Chain { owner, parent, child };
        let heel = DVec3::new(ankle.x, 0.03 * h, -0.02 * h);
        let toe = DVec3::new(ankle.x, 0.03 * h, 0.10 * h);

        let mut capsules = vec![
            cap(p(-0.07, 0.53, 0.0), p(0.07, 0.53, 0.0), 0.08, TorsoBands, Center),
            cap(p(-0.06, 0.65, 0.0), p(0.06, 0.65, 0.0), 0.08, TorsoBands, Center),
            cap(p(-0.08, 0.75, 0.0), p(0.08, 0.75, 0.0), 0.085, TorsoBands, Center),
            cap(joints[3], joints[4], 0.035, chain(3, Some(2), Some(4)), Center),
            cap(p(0.0, 0.93, 0.0), p(0.0, 0.93, 0.0), 0.07, Fixed(4), Center),
            cap(shoulder, elbow, 0.035, chain(5, Some(2), Some(6)), Left),
            cap(elbow, wrist, 0.03, chain(6, Some(5), Some(7)), Left),
            cap(wrist, fingertip, 0.025, chain(7, Some(6), None), Left),
            cap(hip, knee, 0.05, chain(11, Some(0), Some(12)), Left),
            cap(knee, ankle, 0.04, chain(12, Some(11), Some(13)), Left),
            cap(heel, toe, 0.03, chain(13, Some(12), None), Left),
        ];
        // right side: joints 5..=7 -> 8..=10 and 11..=13 -> 14..=16
        let to_right = |j: usize| match j {
            5..=7 => j + 3,
            11..=13 => j + 3,
            other => other,
        };
        let left: Vec<(usize, Capsule)> =
            capsules.iter().copied().enumerate().filter(|(_, c)| c.placement == Left).collect();
        for (i, c) in left {
            let rule = match c.rule {
                Chain { owner, parent, child } => Chain {
                    owner: to_right(owner),
                    parent: parent.map(to_right),
                    child: child.map(to_right),
                },
                Fixed(j) => Fixed(to_right(j)),
                TorsoBands => TorsoBands,
            };
            capsules.push(Capsule { a: mirror(c.a), b: mirror(c.b), radius: c.radius, rule, placement: MirrorOf(i) });
        }

        Ok(Self {
            height,
            joints,
            capsules,
            torso_boundaries: TORSO_BOUNDARIES.map(|y| y * h),
            torso_half_window: TORSO_HALF_WINDOW * h,
        })
    }

    /// Skin weights of a bind-pose surface point of capsule `c`.
    pub fn weights(&self, c: usize, p: DVec3) -> Influences {
        let capsule = &self.capsules[c];
        match capsule.rule {
            WeightRule::Fixed(j) => Influences::single(j),
            WeightRule::Chain { owner, parent, child } => {
                let axis = capsule.b - capsule.a;
                let len2 = axis.length_squared();
                let u = if len2 > 0.0 { ((p - capsule.a).dot(axis) / len2).clamp(0.0, 1.0) } else { 0.5 };
                let other = match (parent, child) {
                    (Some(pj), _) if u < BLEND_WINDOW => Some((pj, 0.5 * (1.0 - u / BLEND_WINDOW))),
                    (_, Some(cj)) if u > 1.0 - BLEND_WINDOW => {
                        Some((cj, 0.5 * (u - (1.0 - BLEND_WINDOW)) / BLEND_WINDOW))
                    }
                    _ => None,
                };
                blend_pair(owner, other)
            }
            WeightRule::TorsoBands => {
                let [b1, b2] = self.torso_boundaries;
                let hw = self.torso_half_window;
                let y = p.y;
                if y < b1 - hw {
                    Influences::single(0)
                } else if y <= b1 + hw {
                    blend_pair(1, Some((0, (b1 + hw - y) / (2.0 * hw))))
                } else if y < b2 - hw {
                    Influences::single(1)
                } else if y <= b2 + hw {
                    blend_pair(2, Some((1, (b2 + hw - y) / (2.0 * hw))))
                } else {
                    Influences::single(2)
                }
            }
        }
    }

    pub fn total_area(&self) -> f64 {
        self.capsules.iter().map(Capsule::area).sum()
    }

    /// Deterministic, roughly even sampling of every capsule surface with
    /// spacing `h`; exactly mirror-symmetric in x.
    pub fn grid_points(&self, spacing: f64) -> Vec<(DVec3, Influences)> {
        let mut per_capsule: Vec<Vec<DVec3>> = Vec::with_capacity(self.capsules.len());
        for c in &self.capsules {
            let pts = match c.placement {
                Placement::MirrorOf(i) => {
                    per_capsule[i].iter().map(|v: &DVec3| DVec3::new(-v.x, v.y, v.z)).collect()
                }
                Placement::Left => capsule_grid(c, spacing),
                Placement::Center => symmetrize(capsule_grid(c, spacing)),
            };
            per_capsule.push(pts);
        }
        per_capsule
            .into_iter()
            .enumerate()
            .flat_map(|(c, pts)| pts.into_iter().map(move |p| (c, p)))
            .map(|(c, p)| (p, self.weights(c, p)))
            .collect()
    }

    /// Uniform random surface samples (area-weighted over capsules).
    pub fn sample_surface(&self, n: usize, rng: &mut impl Rng) -> Vec<(DVec3, Influences)> {
        let areas: Vec<f64> = self.capsules.iter().map(Capsule::area).collect();
        let total: f64 = areas.iter().sum();
        (0..n)
            .map(|_| {
                let mut pick = rng.random_range(0.0..total);
                let mut c = 0;
                while c + 1 < areas.len() && pick >= areas[c] {
                    pick -= areas[c];
                    c += 1;
                }
                let p = sample_capsule(&self.capsules[c], rng);
                (p, self.weights(c, p))
            })
            .collect()
    }

    pub fn build_rig(&self) -> Result<SkinnedRig, RigError> {
        let spacing = (self.total_area() / TARGET_VERTEX_COUNT as f64).sqrt();
        let points = self.grid_points(spacing);
        let joints = JOINT_NAMES
            .iter()
            .zip(PARENTS)
            .enumerate()
            .map(|(j, (name, parent))| Joint {
                name: name.to_string(),
                parent,
                bind_rotation: Quat::IDENTITY,
                bind_translation: match parent {
                    Some(p) => (self.joints[j] - self.joints[p]).as_vec3(),
                    None => self.joints[j].as_vec3(),
                },
            })
            .collect();
        let (vertices, skin): (Vec<_>, Vec<_>) =
            points.into_iter().map(|(p, w)| (p.as_vec3(), w)).unzip();
        SkinnedRig::new(vertices, Vec::new(), joints, skin)
    }
}

fn blend_pair(owner: usize, other: Option<(usize, f64)>) -> Influences {
    match other {
        Some((j, w)) if w > 0.0 => {
            let w = w as f32;
            Influences::from_pairs(&[(owner, 1.0 - w), (j, w)])
        }
        _ => Influences::single(owner),
    }
}

fn symmetrize(points: Vec<DVec3>) -> Vec<DVec3> {
    const EPS: f64 = 1e-9;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        if p.x > EPS {
            out.push(p);
            out.push(DVec3::new(-p.x, p.y, p.z));
        } else if p.x.abs() <= EPS {
            out.push(DVec3::new(0.0, p.y, p.z));
        }
    }
    out
}

fn capsule_grid(c: &Capsule, spacing: f64) -> Vec<DVec3> {
    use std::f64::consts::{FRAC_PI_2, TAU};
    let (d, e1, e2, len) = c.frame();
    let r = c.radius;
    let ring = |center: DVec3, radius: f64, n: usize, out: &mut Vec<DVec3>, offset: DVec3| {
        for k in 0..n {
            let phi = TAU * (k as f64 + 0.5) / n as f64;
            out.push(center + offset + (e1 * phi.cos() + e2 * phi.sin()) * radius);
        }
    };
    let mut out = Vec::new();
    if len > 1e-12 {
        let rings = ((len / spacing).round() as usize).max(1);
        let around = ((TAU * r / spacing).round() as usize).max(6);
        for i in 0..rings {
            let u = (i as f64 + 0.5) / rings as f64;
            ring(c.a + d * (u * len), r, around, &mut out, DVec3::ZERO);
        }
    }
    let lat = ((FRAC_PI_2 * r / spacing).round() as usize).max(1);
    for (end, dir) in [(c.a, -d), (c.b, d)] {
        for i in 0..lat {
            let alpha = FRAC_PI_2 * (i as f64 + 0.5) / lat as f64;
            let ring_r = r * alpha.sin();
            let n = ((TAU * ring_r / spacing).round() as usize).max(1);
            ring(end, ring_r, n, &mut out, dir * (r * alpha.cos()));
        }
    }
    out
}

fn sample_capsule(c: &Capsule, rng: &mut impl Rng) -> DVec3 {
    use std::f64::consts::{PI, TAU};
    let (d, e1, e2, len) = c.frame();
    let r = c.radius;
    let cyl = TAU * r * len;
    let caps = 4.0 * PI * r * r;
    let phi = rng.random_range(0.0..TAU);
    let radial = e1 * phi.cos() + e2 * phi.sin();
    if rng.random_range(0.0..cyl + caps) < cyl {
        c.a + d * (rng.random_range(0.0..1.0) * len) + radial * r
    } else {
        // uniform on a sphere, split at the equator between the two ends
        let z: f64 = rng.random_range(-1.0..1.0);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let end = if z >= 0.0 { c.b } else { c.a };
        end + (d * z + radial * s) * r
    }
}

/// The procedural humanoid rig at `height` meters.
pub fn build_template_humanoid(height: f64) -> Result<SkinnedRig, RigError> {
    HumanoidShape::new(height)?.build_rig()
}
