//! Reading and writing Gaussian splats in the binary PLY layout emitted by
//! the reference 3DGS trainer and most scanning apps.
//!
//! Raw attributes are stored in activation-free form: logit opacity, log
//! scale, SH DC coefficients and an unnormalized `(w, x, y, z)` quaternion.
//! [`parse_splat_ply`] decodes them into linear values; [`write_splat_ply`]
//! re-encodes so that `parse(write(cloud))` reproduces every decoded field
//! bit for bit.

use glam::{DVec3, Quat, Vec3};
use thiserror::Error;

/// Normalization constant of the degree-0 real spherical harmonic, `1 / (2 sqrt(pi))`.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

const POSITION: [&str; 3] = ["x", "y", "z"];
const DC: [&str; 3] = ["f_dc_0", "f_dc_1", "f_dc_2"];
const SCALE: [&str; 3] = ["scale_0", "scale_1", "scale_2"];
const ROT: [&str; 4] = ["rot_0", "rot_1", "rot_2", "rot_3"];

#[derive(Debug, Error)]
pub enum SplatIoError {
    #[error("PLY format error at header line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("PLY schema error: property `{property}` {problem}")]
    Schema { property: String, problem: String },
    #[error("PLY body truncated: expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },
    #[error("splat {index}: cannot decode {field}")]
    Decode { index: usize, field: &'static str },
    #[error("splat cloud is empty")]
    Empty,
    #[error("splat {index}: {message}")]
    Invalid { index: usize, message: String },
}

/// A single Gaussian primitive with decoded (linear-domain) attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    pub position: Vec3,
    /// Unit quaternion, `w >= 0`.
    pub rotation: Quat,
    /// Per-axis standard deviations in meters.
    pub scale: Vec3,
    pub opacity: f32,
    /// Linear RGB in `[0, 1]`.
    pub color: Vec3,
    /// Higher-order SH coefficients in `f_rest_*` index order, carried opaquely.
    pub sh_rest: Vec<f32>,
}

impl Splat {
    /// A small opaque grey splat at `position`.
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            rotation: Quat::IDENTITY,
            scale: Vec3::splat(0.01),
            opacity: 1.0,
            color: Vec3::splat(0.5),
            sh_rest: Vec::new(),
        }
    }

    /// Field-by-field equality on raw float bits.
    pub fn bit_eq(&self, other: &Self) -> bool {
        crate::math::bits_eq(&self.position.to_array(), &other.position.to_array())
            && crate::math::bits_eq(&self.rotation.to_array(), &other.rotation.to_array())
            && crate::math::bits_eq(&self.scale.to_array(), &other.scale.to_array())
            && self.opacity.to_bits() == other.opacity.to_bits()
            && crate::math::bits_eq(&self.color.to_array(), &other.color.to_array())
            && crate::math::bits_eq(&self.sh_rest, &other.sh_rest)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatCloud {
    pub splats: Vec<Splat>,
    /// 0..=3; every splat carries `((deg + 1)^2 - 1) * 3` rest coefficients.
    pub sh_degree: u8,
    /// Vertex property names in file order, as read.
    pub source_field_names: Vec<String>,
}

impl SplatCloud {
    pub fn new(splats: Vec<Splat>) -> Self {
        Self { splats, sh_degree: 0, source_field_names: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.splats.iter().map(|s| s.position).collect()
    }

    /// Keeps splats whose index is flagged in `keep`, preserving order.
    pub fn subset(&self, keep: &[bool]) -> Self {
        Self {
            splats: self
                .splats
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(s, _)| s.clone())
                .collect(),
            sh_degree: self.sh_degree,
            source_field_names: self.source_field_names.clone(),
        }
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.sh_degree == other.sh_degree
            && self.splats.len() == other.splats.len()
            && self.splats.iter().zip(&other.splats).all(|(a, b)| a.bit_eq(b))
    }
}

/// Number of `f_rest_*` floats per splat for an SH degree.
pub fn sh_rest_len(degree: u8) -> usize {
    let d = degree as usize;
    ((d + 1) * (d + 1) - 1) * 3
}

fn sh_degree_for_rest_len(len: usize) -> Option<u8> {
    (0..=3u8).find(|&d| sh_rest_len(d) == len)
}

// ---------------------------------------------------------------------------
// Attribute coding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Appearance {
    pub opacity: f32,
    pub scale: Vec3,
    pub color: Vec3,
}

/// Raw attribute that failed to decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("non-finite or degenerate {0}")]
pub struct DecodeFailure(pub &'static str);

fn decode_opacity(raw: f32) -> f32 {
    (1.0 / (1.0 + (-(raw as f64)).exp())) as f32
}

fn decode_scale(raw: f32) -> f32 {
    (raw as f64).exp() as f32
}

fn decode_dc(raw: f32) -> f32 {
    (0.5 + SH_C0 * raw as f64).clamp(0.0, 1.0) as f32
}

/// Applies the storage activations: logistic opacity, exponential scale and
/// DC-to-RGB color.
pub fn decode_appearance(
    raw_opacity: f32,
    raw_scale: [f32; 3],
    raw_dc: [f32; 3],
) -> Result<Appearance, DecodeFailure> {
    if !raw_opacity.is_finite() {
        return Err(DecodeFailure("opacity"));
    }
    if raw_scale.iter().any(|v| !v.is_finite()) {
        return Err(DecodeFailure("scale"));
    }
    if raw_dc.iter().any(|v| !v.is_finite()) {
        return Err(DecodeFailure("color"));
    }
    Ok(Appearance {
        opacity: decode_opacity(raw_opacity),
        scale: Vec3::from_array(raw_scale.map(decode_scale)),
        color: Vec3::from_array(raw_dc.map(decode_dc)),
    })
}

/// Finds a raw value near `guess` whose decode reproduces `target` exactly.
///
/// The decoders are monotone, so walking a few ulps toward the target is
/// enough for every value that came out of a decoder in the first place.
/// Values no raw input can produce get the closest attempt.
fn refine_raw(guess: f64, target: f32, decode: impl Fn(f32) -> f32) -> f32 {
    let mut raw = guess as f32;
    if !raw.is_finite() {
        raw = if guess > 0.0 { f32::MAX } else { f32::MIN };
    }
    let mut best = raw;
    let mut best_err = f64::INFINITY;
    for _ in 0..128 {
        let got = decode(raw);
        if got.to_bits() == target.to_bits() {
            return raw;
        }
        let err = (got as f64 - target as f64).abs();
        if err < best_err {
            best = raw;
            best_err = err;
        }
        raw = if got < target { raw.next_up() } else { raw.next_down() };
    }
    best
}

fn encode_opacity(opacity: f32) -> f32 {
    let o = opacity as f64;
    let guess = if o <= 0.0 {
        -1000.0
    } else if o >= 1.0 {
        1000.0
    } else {
        (o / (1.0 - o)).ln()
    };
    refine_raw(guess, opacity, decode_opacity)
}

fn encode_scale(scale: f32) -> f32 {
    refine_raw((scale as f64).ln(), scale, decode_scale)
}

fn encode_dc(color: f32) -> f32 {
    refine_raw((color as f64 - 0.5) / SH_C0, color, decode_dc)
}

/// Inverse of [`decode_appearance`]; returns `(raw_opacity, raw_scale, raw_dc)`.
pub fn encode_appearance(app: &Appearance) -> (f32, [f32; 3], [f32; 3]) {
    (
        encode_opacity(app.opacity),
        app.scale.to_array().map(encode_scale),
        app.color.to_array().map(encode_dc),
    )
}

/// Rounds a splat's opacity, scale and color to the nearest values the
/// storage activations can produce, so the splat survives a write/parse
/// cycle bit-exactly.
pub fn snap_to_storage(splat: &mut Splat) {
    let app = Appearance { opacity: splat.opacity, scale: splat.scale, color: splat.color };
    let (o, sc, dc) = encode_appearance(&app);
    let app = decode_appearance(o, sc, dc).expect("encoded values are finite");
    splat.opacity = app.opacity;
    splat.scale = app.scale;
    splat.color = app.color;
}

/// Decodes a raw `(w, x, y, z)` quaternion into a canonical unit quaternion.
///
/// Inputs already unit to single precision pass through untouched so that
/// decoding is idempotent.
pub fn decode_rotation(raw_wxyz: [f32; 4]) -> Result<Quat, DecodeFailure> {
    let [w, x, y, z] = raw_wxyz;
    if raw_wxyz.iter().any(|v| !v.is_finite()) {
        return Err(DecodeFailure("rotation"));
    }
    let n2: f64 = raw_wxyz.iter().map(|&v| (v as f64) * (v as f64)).sum();
    if n2 < 1e-24 {
        return Err(DecodeFailure("rotation"));
    }
    let q = if (n2 - 1.0).abs() <= 1e-6 {
        Quat::from_xyzw(x, y, z, w)
    } else {
        let n = n2.sqrt();
        Quat::from_xyzw(
            (x as f64 / n) as f32,
            (y as f64 / n) as f32,
            (z as f64 / n) as f32,
            (w as f64 / n) as f32,
        )
    };
    Ok(if q.w < 0.0 { -q } else { q })
}

// ---------------------------------------------------------------------------
// Header
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
    stride: usize,
}

struct Header {
    elements: Vec<Element>,
    body_offset: usize,
}

fn format_err(line: usize, message: impl Into<String>) -> SplatIoError {
    SplatIoError::Format { line, message: message.into() }
}

fn parse_header(bytes: &[u8]) -> Result<Header, SplatIoError> {
    const END: &[u8] = b"end_header";
    let mut elements: Vec<Element> = Vec::new();
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut saw_format = false;
    loop {
        line_no += 1;
        let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(format_err(line_no, "header is not terminated by `end_header`"));
        };
        let raw = &bytes[pos..pos + nl];
        pos += nl + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let line = std::str::from_utf8(raw)
            .map_err(|_| format_err(line_no, "header line is not valid UTF-8"))?;
        let mut words = line.split_ascii_whitespace();
        let keyword = words.next().unwrap_or("");
        if line_no == 1 {
            if line != "ply" {
                return Err(format_err(1, format!("expected magic `ply`, found `{line}`")));
            }
            continue;
        }
        match keyword {
            "format" => {
                let kind = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if kind != "binary_little_endian" {
                    return Err(format_err(
                        line_no,
                        format!("unsupported format `{kind}`; only binary_little_endian is read"),
                    ));
                }
                if version != "1.0" {
                    return Err(format_err(line_no, format!("unsupported version `{version}`")));
                }
                saw_format = true;
            }
            "comment" | "obj_info" | "" => {}
            "element" => {
                let name = words.next().ok_or_else(|| format_err(line_no, "element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| format_err(line_no, format!("bad element count in `{line}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    stride: 0,
                });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| format_err(line_no, "property before any element"))?;
                let ty_name = words.next().unwrap_or("");
                if ty_name == "list" {
                    return Err(format_err(line_no, "list properties are not supported"));
                }
                let ty = ScalarType::parse(ty_name)
                    .ok_or_else(|| format_err(line_no, format!("unknown property type `{ty_name}`")))?;
                let name = words
                    .next()
                    .ok_or_else(|| format_err(line_no, "property without name"))?;
                element.properties.push(Property {
                    name: name.to_string(),
                    ty,
                    offset: element.stride,
                });
                element.stride += ty.size();
            }
            _ if line.as_bytes() == END => break,
            _ => return Err(format_err(line_no, format!("unrecognized header line `{line}`"))),
        }
    }
    if !saw_format {
        return Err(format_err(line_no, "missing `format` line"));
    }
    Ok(Header { elements, body_offset: pos })
}

// ---------------------------------------------------------------------------
// Parse / write
// ---------------------------------------------------------------------------

#[inline]
fn read_f32(row: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(row[offset..offset + 4].try_into().unwrap())
}

/// Parses a binary little-endian 3DGS PLY into decoded splats.
pub fn parse_splat_ply(bytes: &[u8]) -> Result<SplatCloud, SplatIoError> {
    let header = parse_header(bytes)?;
    let vertex_pos = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| SplatIoError::Schema {
            property: "vertex".into(),
            problem: "element is missing".into(),
        })?;

    let body_len: usize = header.elements.iter().map(|e| e.count * e.stride).sum();
    let actual = bytes.len() - header.body_offset;
    if actual < body_len {
        return Err(SplatIoError::Length { expected: body_len, actual });
    }
    let vertex_start = header.body_offset
        + header.elements[..vertex_pos].iter().map(|e| e.count * e.stride).sum::<usize>();
    let vertex = &header.elements[vertex_pos];

    let offset_of = |name: &str| -> Result<usize, SplatIoError> {
        let p = vertex.properties.iter().find(|p| p.name == name).ok_or_else(|| {
            SplatIoError::Schema { property: name.to_string(), problem: "is missing".into() }
        })?;
        if p.ty != ScalarType::F32 {
            return Err(SplatIoError::Schema {
                property: name.to_string(),
                problem: "must be float".into(),
            });
        }
        Ok(p.offset)
    };

    let pos_off = POSITION.map(offset_of);
    let dc_off = DC.map(offset_of);
    let opacity_off = offset_of("opacity");
    let scale_off = SCALE.map(offset_of);
    let rot_off = ROT.map(offset_of);
    // Report in canonical order so the first missing property is named.
    let pos_off = collect_offsets(pos_off)?;
    let dc_off = collect_offsets(dc_off)?;
    let opacity_off = opacity_off?;
    let scale_off = collect_offsets(scale_off)?;
    let rot_off = collect_offsets(rot_off)?;

    let rest_count = vertex.properties.iter().filter(|p| p.name.starts_with("f_rest_")).count();
    let sh_degree = sh_degree_for_rest_len(rest_count).ok_or_else(|| SplatIoError::Schema {
        property: "f_rest_*".into(),
        problem: format!("has {rest_count} entries, which matches no SH degree"),
    })?;
    let rest_off = (0..rest_count)
        .map(|k| offset_of(&format!("f_rest_{k}")))
        .collect::<Result<Vec<_>, _>>()?;

    let mut splats = Vec::with_capacity(vertex.count);
    for index in 0..vertex.count {
        let start = vertex_start + index * vertex.stride;
        let row = &bytes[start..start + vertex.stride];
        let decode_err = |DecodeFailure(field)| SplatIoError::Decode { index, field };

        let position = Vec3::from_array(pos_off.map(|o| read_f32(row, o)));
        if !position.is_finite() {
            return Err(SplatIoError::Decode { index, field: "position" });
        }
        let app = decode_appearance(
            read_f32(row, opacity_off),
            scale_off.map(|o| read_f32(row, o)),
            dc_off.map(|o| read_f32(row, o)),
        )
        .map_err(decode_err)?;
        let rotation = decode_rotation(rot_off.map(|o| read_f32(row, o))).map_err(decode_err)?;
        let sh_rest: Vec<f32> = rest_off.iter().map(|&o| read_f32(row, o)).collect();
        splats.push(Splat {
            position,
            rotation,
            scale: app.scale,
            opacity: app.opacity,
            color: app.color,
            sh_rest,
        });
    }

    Ok(SplatCloud {
        splats,
        sh_degree,
        source_field_names: vertex.properties.iter().map(|p| p.name.clone()).collect(),
    })
}

fn collect_offsets<const N: usize>(
    offs: [Result<usize, SplatIoError>; N],
) -> Result<[usize; N], SplatIoError> {
    let mut out = [0usize; N];
    for (slot, o) in out.iter_mut().zip(offs) {
        *slot = o?;
    }
    Ok(out)
}

/// Property names in canonical write order for a given SH degree.
pub fn canonical_field_names(sh_degree: u8) -> Vec<String> {
    let mut names: Vec<String> = POSITION.iter().chain(DC.iter()).map(|s| s.to_string()).collect();
    names.extend((0..sh_rest_len(sh_degree)).map(|k| format!("f_rest_{k}")));
    names.push("opacity".into());
    names.extend(SCALE.iter().chain(ROT.iter()).map(|s| s.to_string()));
    names
}

/// Encodes a cloud as binary little-endian PLY in canonical property order.
pub fn write_splat_ply(cloud: &SplatCloud) -> Result<Vec<u8>, SplatIoError> {
    if cloud.splats.is_empty() {
        return Err(SplatIoError::Empty);
    }
    if cloud.sh_degree > 3 {
        return Err(SplatIoError::Schema {
            property: "f_rest_*".into(),
            problem: format!("sh_degree {} exceeds 3", cloud.sh_degree),
        });
    }
    let rest_len = sh_rest_len(cloud.sh_degree);
    let names = canonical_field_names(cloud.sh_degree);

    let mut out = Vec::with_capacity(256 + cloud.len() * names.len() * 4);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    for name in &names {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    for (index, s) in cloud.splats.iter().enumerate() {
        if s.sh_rest.len() != rest_len {
            return Err(SplatIoError::Invalid {
                index,
                message: format!("has {} SH rest coefficients, expected {rest_len}", s.sh_rest.len()),
            });
        }
        if !(s.scale.cmpgt(Vec3::ZERO).all()) {
            return Err(SplatIoError::Invalid { index, message: "scale must be positive".into() });
        }
        let (raw_opacity, raw_scale, raw_dc) = encode_appearance(&Appearance {
            opacity: s.opacity,
            scale: s.scale,
            color: s.color,
        });
        let q = s.rotation;
        let mut push = |v: f32| out.extend_from_slice(&v.to_le_bytes());
        s.position.to_array().into_iter().for_each(&mut push);
        raw_dc.into_iter().for_each(&mut push);
        s.sh_rest.iter().copied().for_each(&mut push);
        push(raw_opacity);
        raw_scale.into_iter().for_each(&mut push);
        [q.w, q.x, q.y, q.z].into_iter().for_each(&mut push);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudStats {
    pub count: usize,
    pub aabb_min: Vec3,
    pub aabb_max: Vec3,
    pub centroid: DVec3,
    /// Centroid weighted by decoded opacity; equals `centroid` when every
    /// opacity is zero.
    pub opacity_weighted_centroid: DVec3,
}

pub fn cloud_stats(cloud: &SplatCloud) -> Result<CloudStats, SplatIoError> {
    if cloud.is_empty() {
        return Err(SplatIoError::Empty);
    }
    let mut min = Vec3::splat(f32::INFINITY);
    let mut max = Vec3::splat(f32::NEG_INFINITY);
    let mut sum = DVec3::ZERO;
    let mut wsum = DVec3::ZERO;
    let mut wtotal = 0.0f64;
    for s in &cloud.splats {
        min = min.min(s.position);
        max = max.max(s.position);
        let p = s.position.as_dvec3();
        sum += p;
        wsum += p * s.opacity as f64;
        wtotal += s.opacity as f64;
    }
    let centroid = sum / cloud.len() as f64;
    Ok(CloudStats {
        count: cloud.len(),
        aabb_min: min,
        aabb_max: max,
        centroid,
        opacity_weighted_centroid: if wtotal > 0.0 { wsum / wtotal } else { centroid },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_ply(names: &[&str], rows: &[Vec<f32>]) -> Vec<u8> {
        let mut out = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", rows.len());
        for n in names {
            out.push_str(&format!("property float {n}\n"));
        }
        out.push_str("end_header\n");
        let mut bytes = out.into_bytes();
        for r in rows {
            for v in r {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    const CANON: [&str; 14] = [
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
        "rot_0", "rot_1", "rot_2", "rot_3",
    ];

    #[test]
    fn decodes_zero_raw_values() {
        let mut row = vec![0.0f32; 14];
        row[10] = 1.0; // rot_0 is w
        let cloud = parse_splat_ply(&raw_ply(&CANON, &[row])).unwrap();
        let s = &cloud.splats[0];
        assert_eq!(s.position, Vec3::ZERO);
        assert_eq!(s.rotation, Quat::IDENTITY);
        assert_eq!(s.scale, Vec3::ONE);
        assert_eq!(s.opacity, 0.5);
        assert_eq!(s.color, Vec3::splat(0.5));
        assert_eq!(cloud.sh_degree, 0);
    }

    #[test]
    fn missing_property_is_named() {
        let names: Vec<&str> = CANON.iter().copied().filter(|&n| n != "scale_2").collect();
        let err = parse_splat_ply(&raw_ply(&names, &[vec![0.0; 13]])).unwrap_err();
        match err {
            SplatIoError::Schema { property, .. } => assert_eq!(property, "scale_2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_body_reports_sizes() {
        let mut row = vec![0.0f32; 14];
        row[10] = 1.0;
        let mut bytes = raw_ply(&CANON, &[row.clone(), row]);
        bytes.truncate(bytes.len() - 6);
        match parse_splat_ply(&bytes).unwrap_err() {
            SplatIoError::Length { expected, actual } => {
                assert_eq!(expected, 112);
                assert_eq!(actual, 106);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ascii_is_rejected_with_line() {
        let bytes = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        match parse_splat_ply(bytes).unwrap_err() {
            SplatIoError::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_unterminated_header() {
        assert!(matches!(
            parse_splat_ply(b"plx\nformat binary_little_endian 1.0\n").unwrap_err(),
            SplatIoError::Format { line: 1, .. }
        ));
        assert!(matches!(
            parse_splat_ply(b"ply\nformat binary_little_endian 1.0\nelement vertex 1\n").unwrap_err(),
            SplatIoError::Format { .. }
        ));
    }

    #[test]
    fn normals_are_tolerated() {
        let names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
            "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"];
        let mut row = vec![0.0f32; 17];
        row[0] = 3.0;
        row[3] = 9.0;
        row[13] = 2.0;
        let cloud = parse_splat_ply(&raw_ply(&names, &[row])).unwrap();
        assert_eq!(cloud.splats[0].position.x, 3.0);
        assert_eq!(cloud.splats[0].rotation, Quat::IDENTITY);
        assert_eq!(cloud.source_field_names.len(), 17);
    }

    #[test]
    fn other_scalar_types_are_skipped() {
        let mut header = String::from("ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
        for n in &CANON[..6] {
            header.push_str(&format!("property float {n}\n"));
        }
        header.push_str("property uchar red\nproperty double extra\n");
        for n in &CANON[6..] {
            header.push_str(&format!("property float {n}\n"));
        }
        header.push_str("end_header\n");
        let mut bytes = header.into_bytes();
        let vals = [1.0f32, 2.0, 3.0, 0.0, 0.0, 0.0];
        vals.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
        bytes.push(255);
        bytes.extend_from_slice(&7.0f64.to_le_bytes());
        let tail = [0.0f32, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        tail.iter().for_each(|v| bytes.extend_from_slice(&v.to_le_bytes()));
        let cloud = parse_splat_ply(&bytes).unwrap();
        assert_eq!(cloud.splats[0].position, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(cloud.splats[0].opacity, 0.5);
    }

    #[test]
    fn zero_quaternion_is_decode_error() {
        let row = vec![0.0f32; 14];
        match parse_splat_ply(&raw_ply(&CANON, &[row])).unwrap_err() {
            SplatIoError::Decode { index: 0, field } => assert_eq!(field, "rotation"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_raw_is_decode_error_with_index() {
        let mut ok = vec![0.0f32; 14];
        ok[10] = 1.0;
        let mut bad = ok.clone();
        bad[6] = f32::NAN;
        match parse_splat_ply(&raw_ply(&CANON, &[ok, bad])).unwrap_err() {
            SplatIoError::Decode { index, field } => {
                assert_eq!(index, 1);
                assert_eq!(field, "opacity");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rotation_is_reordered_and_canonicalized() {
        // raw (w, x, y, z) = (-2, 0, 0, 0) → identity after normalization and sign flip
        let q = decode_rotation([-2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q, Quat::IDENTITY);
        let q = decode_rotation([0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(q, Quat::from_xyzw(0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn dc_saturates_at_one() {
        // Independent evaluation of 1 / (2 sqrt(pi)).
        let c0 = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
        assert!((c0 - SH_C0).abs() < 1e-16);
        let raw = (0.5 / c0) as f32;
        assert!((raw - 1.772_453_9).abs() < 1e-6);
        let app = decode_appearance(0.0, [0.0; 3], [raw, 10.0, -10.0]).unwrap();
        assert_eq!(app.color, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn encode_inverts_decode_on_extremes() {
        for o in [0.0f32, 1.0, 0.5, 1e-6, 0.999_999] {
            let raw = encode_opacity(o);
            assert!(raw.is_finite());
            assert!((decode_opacity(raw) - o).abs() <= 1e-6, "{o}");
        }
        for c in [0.0f32, 1.0, 0.25] {
            assert_eq!(decode_dc(encode_dc(c)), c);
        }
    }

    #[test]
    fn sh_degree_zero_header_has_14_properties() {
        let bytes = write_splat_ply(&SplatCloud::new(vec![Splat::at(Vec3::ZERO)])).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert_eq!(text.matches("property float").count(), 14);
    }

    #[test]
    fn empty_cloud_cannot_be_written() {
        assert!(matches!(write_splat_ply(&SplatCloud::default()), Err(SplatIoError::Empty)));
    }

    #[test]
    fn stats_of_simple_clouds() {
        let one = SplatCloud::new(vec![Splat::at(Vec3::new(1.0, 2.0, 3.0))]);
        let st = cloud_stats(&one).unwrap();
        assert_eq!(st.centroid, DVec3::new(1.0, 2.0, 3.0));
        assert_eq!(st.aabb_min, st.aabb_max);

        let mut a = Splat::at(Vec3::ZERO);
        a.opacity = 0.5;
        let mut b = Splat::at(Vec3::new(2.0, 0.0, 0.0));
        b.opacity = 0.5;
        let st = cloud_stats(&SplatCloud::new(vec![a, b])).unwrap();
        assert_eq!(st.centroid, DVec3::new(1.0, 0.0, 0.0));
        assert_eq!(st.opacity_weighted_centroid, DVec3::new(1.0, 0.0, 0.0));
    }
}
