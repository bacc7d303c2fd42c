use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use splatrig_core::glam::{DVec3, Vec3};
use splatrig_core::isolation::FilterParams;
use splatrig_core::pipeline::{rig_height, run_pipeline, PipelineConfig, PipelineReport};
use splatrig_core::rig::build_template_humanoid;
use splatrig_core::runtime::{order_divergence, AvatarRuntime};
use splatrig_core::splat_io::cloud_stats;
use splatrig_core::synth::{sample_subject, scene_background, walk_clip, SubjectParams};
use splatrig_core::{
    run_frame, write_splat_ply, AnimationClip, AvatarBundle, CameraState, Pose, SkinnedRig, SortMode, Splat,
    SplatCloud,
};

use crate::error::CliError;
use crate::files::{read, read_bundle, read_cloud, read_clip, read_rig, sidecar, write_atomic};
use crate::{BenchArgs, BenchModeArg, BindArgs, PoseArgs, SynthArgs};

fn fmt_vec(v: impl Into<DVec3>) -> String {
    let v = v.into();
    format!("{:.6} {:.6} {:.6}", v.x, v.y, v.z)
}

pub fn info(input: &Path) -> Result<(), CliError> {
    let cloud = read_cloud(input)?;
    let stats = cloud_stats(&cloud).map_err(|e| CliError::format(input, e))?;
    println!("file: {}", input.display());
    println!("count: {}", stats.count);
    println!("sh_degree: {}", cloud.sh_degree);
    println!("aabb_min: {}", fmt_vec(stats.aabb_min.as_dvec3()));
    println!("aabb_max: {}", fmt_vec(stats.aabb_max.as_dvec3()));
    println!("centroid: {}", fmt_vec(stats.centroid));
    println!("opacity_weighted_centroid: {}", fmt_vec(stats.opacity_weighted_centroid));
    println!("fields: {}", cloud.source_field_names.join(","));
    Ok(())
}

#[derive(Serialize)]
struct BindReportFile<'a> {
    input: String,
    rig: String,
    bundle: String,
    bundle_bytes: usize,
    #[serde(flatten)]
    pipeline: &'a PipelineReport,
}

fn filter_params(args: &BindArgs) -> Result<FilterParams, CliError> {
    let mut params = match &args.filter_config {
        Some(path) => {
            let text = String::from_utf8(read(path)?).map_err(|e| CliError::format(path, e))?;
            FilterParams::from_kv_str(&text).map_err(|e| CliError::format(path, e))?
        }
        None => FilterParams::default(),
    };
    if let Some(r) = args.cylinder_radius {
        params.cylinder_radius = Some(r);
    }
    if let Some(o) = args.opacity_min {
        params.opacity_min = o;
    }
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(params)
}

pub fn bind(args: &BindArgs) -> Result<(), CliError> {
    let filter = filter_params(args)?;
    if let Some(h) = args.target_height {
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::Usage(format!("--target-height must be positive, got {h}")));
        }
    }
    if let Some(y) = args.manual_yaw {
        if !y.is_finite() {
            return Err(CliError::Usage("--manual-yaw must be finite".into()));
        }
    }
    let cloud = read_cloud(&args.input)?;
    let rig = read_rig(&args.rig)?;
    let config = PipelineConfig {
        filter,
        target_height: args.target_height,
        manual_yaw: args.manual_yaw.map(f64::to_radians),
        skip_limb_fit: args.skip_limb_fit,
        accept_poor_fit: args.accept_poor_fit,
    };
    let out = run_pipeline(&cloud, &rig, &config)?;

    let report_path = args.report.clone().unwrap_or_else(|| sidecar(&args.out, "report.json"));
    let report = BindReportFile {
        input: args.input.display().to_string(),
        rig: args.rig.display().to_string(),
        bundle: args.out.display().to_string(),
        bundle_bytes: out.bundle_bytes.len(),
        pipeline: &out.report,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&args.out, &out.bundle_bytes)?;
    write_atomic(&report_path, json.as_bytes())?;

    let r = &out.report;
    println!(
        "kept {} of {} splats, yaw {:.2} deg, scale {:.4}, objective {:.4} m",
        r.filter.kept_count, r.filter.input_count, r.fit.yaw_deg, r.fit.uniform_scale, r.fit.objective
    );
    if let Some(w) = &r.fit_warning {
        eprintln!("warning: {w}");
    }
    println!("wrote {} ({} bytes, {} groups)", args.out.display(), out.bundle_bytes.len(), out.bundle.groups.len());
    println!("wrote {}", report_path.display());
    Ok(())
}

/// Point the camera orbits around: mid-height of the placed avatar.
fn avatar_center(bundle: &AvatarBundle, rig: &SkinnedRig) -> Vec3 {
    let fit = &bundle.fit;
    fit.translation + Vec3::Y * (0.5 * rig_height(rig) * fit.scale as f64) as f32
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn pose(args: &PoseArgs) -> Result<(), CliError> {
    if !(args.t >= 0.0 && args.t.is_finite()) {
        return Err(CliError::Usage(format!("time must be a non-negative number of seconds, got {}", args.t)));
    }
    let bundle = read_bundle(&args.bundle)?;
    let rig = read_rig(&args.rig)?;
    let clip = match &args.anim {
        Some(path) => read_clip(path, &rig)?,
        None => AnimationClip::from_pose(&bundle.fit.limb_pose()),
    };
    let cam = &args.camera;
    let camera = CameraState::orbit(avatar_center(&bundle, &rig), cam.distance, cam.elevation, cam.azimuth.to_radians());
    let mode = SortMode::from(args.mode);
    let packet = run_frame(&bundle, &rig, &clip, args.t, &camera, mode).map_err(runtime_err)?;

    let mut splats = Vec::with_capacity(packet.order.len());
    let mut csv = String::from("rank,index,depth\n");
    for (rank, &i) in packet.order.indices.iter().enumerate() {
        let i = i as usize;
        let s = &bundle.splats[i];
        splats.push(Splat {
            position: packet.positions[i],
            rotation: packet.rotations[i],
            scale: s.scale * packet.scale_factor,
            opacity: s.opacity,
            color: s.color,
            sh_rest: Vec::new(),
        });
        writeln!(csv, "{rank},{i},{}", camera.depth(packet.positions[i])).unwrap();
    }
    let ply = write_splat_ply(&SplatCloud::new(splats)).map_err(runtime_err)?;
    let order_path = sidecar(&args.out, "order.csv");
    write_atomic(&args.out, &ply)?;
    write_atomic(&order_path, csv.as_bytes())?;
    println!("wrote {} ({} splats, {mode} order)", args.out.display(), packet.order.len());
    println!("wrote {}", order_path.display());
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

#[derive(Default)]
struct ModeStats {
    update: Vec<f64>,
    sort: Vec<f64>,
    inversion: Vec<f64>,
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    let bundle = read_bundle(&args.bundle)?;
    let rig = read_rig(&args.rig)?;
    let clip = read_clip(&args.anim, &rig)?;
    let mut rt = AvatarRuntime::new(&bundle, &rig).map_err(runtime_err)?;
    let modes: &[SortMode] = match args.mode {
        BenchModeArg::Group => &[SortMode::Group],
        BenchModeArg::Full => &[SortMode::Full],
        BenchModeArg::All => &[SortMode::Group, SortMode::Full],
    };
    let center = avatar_center(&bundle, &rig);
    let (n, g) = (bundle.splat_count(), bundle.groups.len());
    let frames = args.frames as usize;

    let mut csv = String::from("frame,t,N,G,mode,ms_update,ms_sort,inversion_fraction,max_depth_error\n");
    let mut stats: Vec<ModeStats> = modes.iter().map(|_| ModeStats::default()).collect();
    let (mut positions, mut rotations) = (Vec::new(), Vec::new());
    for k in 0..frames {
        let u = k as f64 / frames as f64;
        let t = clip.duration as f64 * u;
        let camera = CameraState::orbit(center, args.distance, 0.5, std::f64::consts::TAU * u);
        let pose = clip.sample(&rig, t).map_err(runtime_err)?;
        let start = Instant::now();
        rt.update(&pose, &mut positions, &mut rotations).map_err(runtime_err)?;
        let ms_update = start.elapsed().as_secs_f64() * 1e3;

        let mut orders = Vec::with_capacity(modes.len());
        for &mode in modes {
            let start = Instant::now();
            let order = rt.sort(&positions, &camera, mode);
            orders.push((order, start.elapsed().as_secs_f64() * 1e3));
        }
        let reference = match modes.iter().position(|&m| m == SortMode::Full) {
            Some(i) => orders[i].0.clone(),
            None => rt.sort(&positions, &camera, SortMode::Full),
        };
        let depths = splatrig_core::runtime::depths(&positions, &camera);
        for ((mode, (order, ms_sort)), st) in modes.iter().zip(&orders).zip(&mut stats) {
            let div = order_divergence(order, &reference, &depths).map_err(runtime_err)?;
            writeln!(
                csv,
                "{k},{t:.6},{n},{g},{mode},{ms_update:.4},{ms_sort:.4},{:.6},{:.6}",
                div.inversion_fraction, div.max_depth_error
            )
            .unwrap();
            st.update.push(ms_update);
            st.sort.push(*ms_sort);
            st.inversion.push(div.inversion_fraction);
        }
    }
    for (mode, st) in modes.iter().zip(&mut stats) {
        writeln!(
            csv,
            "# summary mode={mode} frames={frames} N={n} G={g} median_ms_update={:.4} median_ms_sort={:.4} median_inversion_fraction={:.6}",
            median(&mut st.update),
            median(&mut st.sort),
            median(&mut st.inversion)
        )
        .unwrap();
    }
    match &args.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let usage = |e: splatrig_core::RigError| CliError::Usage(e.to_string());
    if args.splats < 10 {
        return Err(CliError::Usage("--splats must be at least 10".into()));
    }
    let rig = build_template_humanoid(args.height).map_err(usage)?;
    let params = SubjectParams {
        yaw: args.yaw.to_radians(),
        shoulder_deg: args.shoulder,
        noise: 0.001,
        ..SubjectParams::default()
    };
    let mut scene = sample_subject(args.height, &params, args.splats, args.seed).map_err(usage)?;
    scene.splats.extend(scene_background(args.background, args.seed.wrapping_add(1)).splats);
    let clip = walk_clip(&rig, &Pose::bind(&rig)).map_err(usage)?;

    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let ply = write_splat_ply(&scene).map_err(runtime_err)?;
    let files = [
        ("scene.ply", ply),
        ("rig.json", rig.to_json().into_bytes()),
        ("anim.json", clip.to_json(&rig).into_bytes()),
    ];
    for (name, bytes) in files {
        let path = args.out_dir.join(name);
        write_atomic(&path, &bytes)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
