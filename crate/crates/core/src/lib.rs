//! Turn a static Gaussian-splat scan of a person into an animatable avatar.
//!
//! The pipeline runs in two phases:
//!
//! * **preprocessing**: [`isolation`] strips background splats and normalizes
//!   the subject, [`fit`] places a skinned humanoid [`rig`] over it, and
//!   [`binding`] attaches every splat to its nearest mesh vertex with a
//!   relative transform, producing an [`binding::AvatarBundle`].
//! * **runtime**: [`runtime`] skins the rig each frame, moves all splats from
//!   their bindings in parallel and produces a back-to-front draw order by
//!   sorting bone-level groups instead of individual splats.
//!
//! Everything is deterministic and runs on the CPU.

pub mod binding;
pub mod fit;
pub mod isolation;
pub mod math;
pub mod pipeline;
pub mod rig;
pub mod runtime;
pub mod splat_io;
pub mod synth;

pub use binding::{
    assign_groups, compute_bindings, AvatarBundle, BindingSet, BundleError, GroupTable,
    SpatialIndex, SplatBinding,
};
pub use fit::{estimate_front_axis, fit_limb_angles, fit_similarity, FitError, FitResult};
pub use isolation::{filter_subject, normalize_cloud, FilterParams, FilterReport};
pub use rig::{AnimationClip, Pose, RigError, SkinnedRig};
pub use runtime::{full_sort, group_sort, run_frame, CameraState, DrawOrder, FramePacket, SortMode};
pub use splat_io::{parse_splat_ply, write_splat_ply, Splat, SplatCloud, SplatIoError};

pub use glam;
