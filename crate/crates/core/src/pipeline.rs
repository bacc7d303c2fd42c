//! End-to-end preprocessing: filter, normalize, fit, bind, export.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::binding::{
    assign_groups, build_bundle, compute_bindings, export_bundle, AvatarBundle, BindError, BundleError, Group,
};
use crate::fit::{estimate_front_axis, fit_limb_angles, fit_similarity, FitError, FitReport, FitResult};
use crate::isolation::{filter_subject, normalize_cloud, FilterParams, FilterReport, IsolationError, NormalizationTransform};
use crate::math::percentile;
use crate::rig::SkinnedRig;
use crate::splat_io::SplatCloud;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterParams,
    /// Subject height after normalization; defaults to the rig's height.
    pub target_height: Option<f64>,
    /// Front direction in radians; skips front-axis estimation when set.
    pub manual_yaw: Option<f64>,
    pub skip_limb_fit: bool,
    /// Continue with the best placement when the fit objective is too high.
    pub accept_poor_fit: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { filter: FilterParams::default(), target_height: None, manual_yaw: None, skip_limb_fit: false, accept_poor_fit: false }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("subject filtering failed: {0}")]
    Filter(#[from] IsolationError),
    #[error("template fit failed: {0}")]
    Fit(#[from] FitError),
    #[error("binding failed: {0}")]
    Bind(#[from] BindError),
    #[error("bundle export failed: {0}")]
    Bundle(#[from] BundleError),
}

#[derive(Debug, Clone, Serialize)]
pub struct BindingReport {
    pub splat_count: usize,
    pub mean_vertex_distance: f64,
    pub max_vertex_distance: f64,
    pub groups: Vec<Group>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub filter: FilterReport,
    pub normalization: NormalizationTransform,
    pub target_height: f64,
    pub yaw_source: &'static str,
    pub fit: FitReport,
    pub fit_warning: Option<String>,
    pub binding: BindingReport,
    /// Wall-clock milliseconds per stage; not covered by determinism guarantees.
    pub timings_ms: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub bundle: AvatarBundle,
    pub bundle_bytes: Vec<u8>,
    pub fit: FitResult,
    pub report: PipelineReport,
}

/// Height of the bind-pose rig, measured like a subject's height.
pub fn rig_height(rig: &SkinnedRig) -> f64 {
    let ys: Vec<f32> = rig.vertices().iter().map(|v| v.y).collect();
    percentile(&ys, 0.99, 1) as f64 - percentile(&ys, 0.01, 2) as f64
}

fn timed<T>(timings: &mut BTreeMap<&'static str, f64>, stage: &'static str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.insert(stage, start.elapsed().as_secs_f64() * 1e3);
    out
}

pub fn run_pipeline(cloud: &SplatCloud, rig: &SkinnedRig, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let mut timings = BTreeMap::new();
    let (subject, filter_report) = timed(&mut timings, "filter", || filter_subject(cloud, &config.filter))?;
    let target_height = config.target_height.unwrap_or_else(|| rig_height(rig));
    let (normalized, normalization) = timed(&mut timings, "normalize", || normalize_cloud(&subject, target_height))?;

    let mut fit_warning = None;
    let fit = timed(&mut timings, "fit", || -> Result<FitResult, FitError> {
        let yaw = match config.manual_yaw {
            Some(y) => y,
            None => estimate_front_axis(&normalized)?,
        };
        let base = match fit_similarity(&normalized, rig, yaw) {
            Ok(f) => f,
            Err(FitError::PoorFit { objective, best }) if config.accept_poor_fit => {
                fit_warning = Some(format!("fit objective {objective:.4} m is above the acceptance threshold"));
                *best
            }
            Err(e) => return Err(e),
        };
        if config.skip_limb_fit {
            Ok(base)
        } else {
            fit_limb_angles(&normalized, rig, &base)
        }
    })?;

    let (bundle, bindings_report) = timed(&mut timings, "bind", || -> Result<_, PipelineError> {
        let set = compute_bindings(&normalized, rig, &fit)?;
        let groups = assign_groups(&set, rig);
        let report = BindingReport {
            splat_count: set.len(),
            mean_vertex_distance: set.distances.iter().sum::<f64>() / set.len() as f64,
            max_vertex_distance: set.distances.iter().copied().fold(0.0, f64::max),
            groups: groups.groups.clone(),
        };
        Ok((build_bundle(&set, &groups, &normalized), report))
    })?;
    let bundle_bytes = timed(&mut timings, "export", || export_bundle(&bundle))?;

    let report = PipelineReport {
        filter: filter_report,
        normalization,
        target_height,
        yaw_source: if config.manual_yaw.is_some() { "manual" } else { "estimated" },
        fit: fit.report(),
        fit_warning,
        binding: bindings_report,
        timings_ms: timings,
    };
    Ok(PipelineOutput { bundle, bundle_bytes, fit, report })
}
