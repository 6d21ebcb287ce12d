//! Readers and writers for point clouds, calibrations, mask sets and label files.
//!
//! * Point clouds: KITTI velodyne binary, records of four little-endian `f32`
//!   (`x y z intensity`).
//! * Calibration: `KEY: v1 v2 ...` text. Either KITTI object calibration
//!   (`P2`, `R0_rect`, `Tr_velo_to_cam`) or a single `P` line with 12 values.
//!   An optional `image_size: W H` line carries the image dimensions.
//! * Masks: JSON with `height`, `width` and `instances`, each mask run-length
//!   encoded over row-major pixels, zeros first.
//! * Labels: one `instance_id,class_id` line per point after a `#` header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CameraCalibration, Diagnostics, InstanceCatalog, Mask, MaskInstance, MaskSet, PointCloud,
    SegmentationResult,
};

const RECORD_BYTES: usize = 16;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// point clouds

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    parse_point_cloud(&read_bytes(path)?, path)
}

/// Decodes velodyne records; `origin` only labels errors.
pub fn parse_point_cloud(bytes: &[u8], origin: &Path) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(Error::Truncated {
            path: origin.to_path_buf(),
            len: bytes.len(),
            offset: bytes.len() - bytes.len() % RECORD_BYTES,
        });
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (record, chunk) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let mut vals = [0f32; 4];
        for (v, b) in vals.iter_mut().zip(chunk.chunks_exact(4)) {
            *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteRecord {
                path: origin.to_path_buf(),
                record,
                offset: record * RECORD_BYTES,
            });
        }
        points.push([vals[0] as f64, vals[1] as f64, vals[2] as f64]);
        intensity.push(vals[3]);
    }
    PointCloud::with_intensity(points, intensity)
}

/// Encodes a cloud as velodyne records. Coordinates are narrowed to `f32`;
/// missing intensity is written as 0.
pub fn encode_point_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for (i, p) in cloud.points().iter().enumerate() {
        let w = cloud.intensity().map_or(0.0, |v| v[i]);
        for v in [p[0] as f32, p[1] as f32, p[2] as f32, w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_point_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), encode_point_cloud(cloud))
}

// ---------------------------------------------------------------------------
// calibration

struct CalibEntry {
    line: usize,
    values: Vec<f64>,
}

fn parse_calib_entries(text: &str, origin: &Path) -> Result<BTreeMap<String, CalibEntry>> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, rest) = trimmed.split_once(':').ok_or_else(|| Error::Syntax {
            path: origin.to_path_buf(),
            line,
            message: "expected `KEY: values`".into(),
        })?;
        let values = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Syntax {
                        path: origin.to_path_buf(),
                        line,
                        message: format!("`{tok}` is not a finite number"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.insert(key.trim().to_string(), CalibEntry { line, values });
    }
    Ok(entries)
}

fn take_values<'a>(
    entries: &'a BTreeMap<String, CalibEntry>,
    key: &str,
    expected: usize,
    origin: &Path,
) -> Result<&'a [f64]> {
    let entry = entries.get(key).ok_or_else(|| Error::MissingKey {
        path: origin.to_path_buf(),
        key: key.to_string(),
    })?;
    if entry.values.len() != expected {
        return Err(Error::ValueCount {
            path: origin.to_path_buf(),
            line: entry.line,
            key: key.to_string(),
            expected,
            found: entry.values.len(),
        });
    }
    Ok(&entry.values)
}

/// `P2 · R0_rect · Tr_velo_to_cam`, with the rectification and extrinsics promoted to 4x4.
pub fn compose_kitti_projection(
    p2: &Matrix3x4<f64>,
    r0_rect: &Matrix3<f64>,
    velo_to_cam: &Matrix3x4<f64>,
) -> Matrix3x4<f64> {
    let mut r0 = Matrix4::identity();
    r0.fixed_view_mut::<3, 3>(0, 0).copy_from(r0_rect);
    let mut tr = Matrix4::identity();
    tr.fixed_view_mut::<3, 4>(0, 0).copy_from(velo_to_cam);
    p2 * r0 * tr
}

pub fn read_calibration(
    path: impl AsRef<Path>,
    image_size: Option<(u32, u32)>,
) -> Result<CameraCalibration> {
    let path = path.as_ref();
    parse_calibration(&read_text(path)?, path, image_size)
}

/// Parses calibration text. Image dimensions come from an `image_size` line,
/// falling back to `image_size`; the two must agree when both are present.
pub fn parse_calibration(
    text: &str,
    origin: &Path,
    image_size: Option<(u32, u32)>,
) -> Result<CameraCalibration> {
    let entries = parse_calib_entries(text, origin)?;
    let projection = if entries.contains_key("P") {
        Matrix3x4::from_row_slice(take_values(&entries, "P", 12, origin)?)
    } else {
        let p2 = Matrix3x4::from_row_slice(take_values(&entries, "P2", 12, origin)?);
        let r0 = Matrix3::from_row_slice(take_values(&entries, "R0_rect", 9, origin)?);
        let tr = Matrix3x4::from_row_slice(take_values(&entries, "Tr_velo_to_cam", 12, origin)?);
        compose_kitti_projection(&p2, &r0, &tr)
    };

    let from_file = match entries.get("image_size") {
        Some(_) => {
            let v = take_values(&entries, "image_size", 2, origin)?;
            let line = entries["image_size"].line;
            let dim = |x: f64| -> Result<u32> {
                if x.fract() == 0.0 && x >= 1.0 && x <= u32::MAX as f64 {
                    Ok(x as u32)
                } else {
                    Err(Error::Syntax {
                        path: origin.to_path_buf(),
                        line,
                        message: format!("image dimension {x} is not a positive integer"),
                    })
                }
            };
            Some((dim(v[0])?, dim(v[1])?))
        }
        None => None,
    };
    let (width, height) = match (from_file, image_size) {
        (Some(f), Some(given)) if f != given => {
            return Err(Error::InvalidCalibration(format!(
                "{}: image_size {}x{} disagrees with {}x{}",
                origin.display(),
                f.0,
                f.1,
                given.0,
                given.1
            )))
        }
        (Some(f), _) => f,
        (None, Some(given)) => given,
        (None, None) => {
            return Err(Error::MissingKey {
                path: origin.to_path_buf(),
                key: "image_size".into(),
            })
        }
    };
    CameraCalibration::new(projection, width, height)
}

/// Writes the single-matrix form with an `image_size` line.
pub fn format_calibration(calib: &CameraCalibration) -> String {
    let p = calib.projection();
    let mut s = String::from("P:");
    for r in 0..3 {
        for c in 0..4 {
            let _ = write!(s, " {:?}", p[(r, c)]);
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "image_size: {} {}", calib.width(), calib.height());
    s
}

pub fn write_calibration(calib: &CameraCalibration, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_calibration(calib))
}

// ---------------------------------------------------------------------------
// masks

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskFile {
    height: u32,
    width: u32,
    instances: Vec<MaskRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRecord {
    instance_index: u32,
    class_id: u32,
    class_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    counts: Vec<u64>,
}

/// Run lengths of a binary mask, zeros first.
pub fn rle_encode(bits: &[bool]) -> Vec<u64> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &b in bits {
        if b != current {
            counts.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    counts.push(run);
    counts
}

/// Expands run lengths into `n_pixels` bits. Returns `None` when the counts do not sum to `n_pixels`.
pub fn rle_decode(counts: &[u64], n_pixels: usize) -> Option<Vec<bool>> {
    let total: u64 = counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c))?;
    if total != n_pixels as u64 {
        return None;
    }
    let mut bits = Vec::with_capacity(n_pixels);
    for (k, &c) in counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(k % 2 == 1, c as usize));
    }
    Some(bits)
}

pub fn read_masks(path: impl AsRef<Path>) -> Result<MaskSet> {
    let path = path.as_ref();
    parse_masks(&read_text(path)?, path)
}

pub fn parse_masks(text: &str, origin: &Path) -> Result<MaskSet> {
    let file: MaskFile = serde_json::from_str(text).map_err(|e| Error::Syntax {
        path: origin.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let n_pixels = file.width as usize * file.height as usize;
    let mut seen = std::collections::BTreeSet::new();
    let mut instances = Vec::with_capacity(file.instances.len());
    for rec in file.instances {
        if !seen.insert(rec.instance_index) {
            return Err(Error::InvalidMaskSet(format!(
                "{}: duplicate instance_index {}",
                origin.display(),
                rec.instance_index
            )));
        }
        if rec.class_id == 0 {
            return Err(Error::InvalidMaskSet(format!(
                "{}: instance {} has class_id 0",
                origin.display(),
                rec.instance_index
            )));
        }
        let bits = rle_decode(&rec.counts, n_pixels).ok_or_else(|| Error::RleSum {
            path: origin.to_path_buf(),
            instance: rec.instance_index,
            expected: n_pixels as u64,
            found: rec.counts.iter().fold(0u64, |a, &c| a.saturating_add(c)),
        })?;
        instances.push(MaskInstance {
            instance_index: rec.instance_index,
            class_id: rec.class_id,
            class_name: rec.class_name,
            score: rec.score,
            mask: Mask::from_bits(bits),
        });
    }
    MaskSet::new(file.width, file.height, instances)
}

pub fn format_masks(masks: &MaskSet) -> String {
    let file = MaskFile {
        height: masks.height(),
        width: masks.width(),
        instances: masks
            .instances()
            .iter()
            .map(|inst| MaskRecord {
                instance_index: inst.instance_index,
                class_id: inst.class_id,
                class_name: inst.class_name.clone(),
                score: inst.score,
                counts: rle_encode(inst.mask.bits()),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("mask file serializes");
    s.push('\n');
    s
}

pub fn write_masks(masks: &MaskSet, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_masks(masks))
}

// ---------------------------------------------------------------------------
// labels

const LABEL_MAGIC: &str = "ldls-labels 1";

pub fn format_labels(result: &SegmentationResult) -> String {
    let mut s = String::with_capacity(result.len() * 4 + 256);
    let d = &result.diagnostics;
    let _ = writeln!(s, "# {LABEL_MAGIC}");
    let _ = writeln!(s, "# points {}", result.len());
    let _ = writeln!(s, "# iterations_run {}", d.iterations_run);
    let _ = writeln!(s, "# converged {}", d.converged);
    let _ = writeln!(s, "# points_in_fov {}", d.points_in_fov);
    for (id, info) in result.instance_table() {
        let _ = writeln!(
            s,
            "# instance {id} {} {} {}",
            info.class_id, info.point_count, info.class_name
        );
    }
    for (i, c) in result.instance_ids().iter().zip(result.class_ids()) {
        let _ = writeln!(s, "{i},{c}");
    }
    s
}

pub fn write_labels(result: &SegmentationResult, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), format_labels(result))
}

pub fn read_labels(path: impl AsRef<Path>, expected_points: Option<usize>) -> Result<SegmentationResult> {
    let path = path.as_ref();
    parse_labels(&read_text(path)?, path, expected_points)
}

fn syntax(origin: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        path: origin.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, origin: &Path, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| syntax(origin, line, format!("expected {what}")))
}

pub fn parse_labels(
    text: &str,
    origin: &Path,
    expected_points: Option<usize>,
) -> Result<SegmentationResult> {
    let mut diagnostics = Diagnostics::default();
    let mut declared_points = None;
    let mut catalog = InstanceCatalog::new();
    let mut header_counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut instance_ids = Vec::new();
    let mut class_ids = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(header) = raw.strip_prefix('#') {
            if !instance_ids.is_empty() {
                return Err(syntax(origin, line, "header line after label body"));
            }
            let header = header.trim();
            let mut toks = header.splitn(2, ' ');
            let key = toks.next().unwrap_or_default();
            let rest = toks.next().unwrap_or_default().trim();
            match key {
                "points" => declared_points = Some(parse_num(Some(rest), origin, line, "a point count")?),
                "iterations_run" => {
                    diagnostics.iterations_run = parse_num(Some(rest), origin, line, "an iteration count")?
                }
                "converged" => diagnostics.converged = parse_num(Some(rest), origin, line, "true or false")?,
                "points_in_fov" => {
                    diagnostics.points_in_fov = parse_num(Some(rest), origin, line, "a point count")?
                }
                "instance" => {
                    let mut f = rest.splitn(4, ' ');
                    let id: u32 = parse_num(f.next(), origin, line, "an instance id")?;
                    let class_id: u32 = parse_num(f.next(), origin, line, "a class id")?;
                    let count: usize = parse_num(f.next(), origin, line, "a point count")?;
                    let name = f.next().unwrap_or_default().to_string();
                    if id == 0 || class_id == 0 {
                        return Err(syntax(origin, line, "instance and class ids in the table must be nonzero"));
                    }
                    if catalog.insert(id, (class_id, name)).is_some() {
                        return Err(syntax(origin, line, format!("instance {id} listed twice")));
                    }
                    header_counts.insert(id, count);
                }
                _ => {}
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let (a, b) = raw
            .trim()
            .split_once(',')
            .ok_or_else(|| syntax(origin, line, "expected `instance_id,class_id`"))?;
        let id: u32 = parse_num(Some(a.trim()), origin, line, "an instance id")?;
        let class_id: u32 = parse_num(Some(b.trim()), origin, line, "a class id")?;
        let expected_class = if id == 0 {
            Some(0)
        } else {
            catalog.get(&id).map(|(c, _)| *c)
        };
        match expected_class {
            None => return Err(syntax(origin, line, format!("instance {id} missing from the header table"))),
            Some(c) if c != class_id => {
                return Err(syntax(
                    origin,
                    line,
                    format!("instance {id} has class {class_id}, header says {c}"),
                ))
            }
            _ => {}
        }
        instance_ids.push(id);
        class_ids.push(class_id);
    }

    for expected in [declared_points, expected_points].into_iter().flatten() {
        if expected != instance_ids.len() {
            return Err(Error::PointCount {
                path: origin.to_path_buf(),
                expected,
                found: instance_ids.len(),
            });
        }
    }

    let result = SegmentationResult::from_instances(instance_ids, &catalog, diagnostics)?;
    for (&id, &header) in &header_counts {
        let body = result.instance_table().get(&id).map_or(0, |i| i.point_count);
        if body != header {
            return Err(Error::HeaderCount {
                path: origin.to_path_buf(),
                instance: id,
                header,
                body,
            });
        }
    }
    Ok(result)
}
