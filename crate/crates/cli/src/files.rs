use std::fs;
use std::io::{self, Write};
use std::path::Path;

use splatrig_core::binding::import_bundle;
use splatrig_core::{parse_splat_ply, AnimationClip, AvatarBundle, SkinnedRig, SplatCloud};

use crate::error::CliError;

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CliError::Missing(path.to_path_buf()),
        _ => CliError::io(path, e),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|e| CliError::format(path, e))
}

pub fn read_cloud(path: &Path) -> Result<SplatCloud, CliError> {
    parse_splat_ply(&read(path)?).map_err(|e| CliError::format(path, e))
}

pub fn read_rig(path: &Path) -> Result<SkinnedRig, CliError> {
    SkinnedRig::from_json(&read_text(path)?).map_err(|e| CliError::format(path, e))
}

pub fn read_clip(path: &Path, rig: &SkinnedRig) -> Result<AnimationClip, CliError> {
    AnimationClip::from_json(&read_text(path)?, rig).map_err(|e| CliError::format(path, e))
}

pub fn read_bundle(path: &Path) -> Result<AvatarBundle, CliError> {
    import_bundle(&read(path)?).map_err(|e| CliError::format(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// `out.bundle` -> `out.bundle.<suffix>`
pub fn sidecar(path: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    name.into()
}
