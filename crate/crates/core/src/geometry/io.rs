//! `PCL1` binary clouds and plain-text XYZ.
//!
//! Binary layout (little-endian): magic `PCL1`, `u32` point count, then
//! `count × 3` `f32` coordinates.

use std::fmt::Write as _;
use std::path::Path;

use super::{GeometryError, PointCloud};

pub const PCL_MAGIC: &[u8; 4] = b"PCL1";

pub fn write_pcl(pc: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + pc.raw_bytes());
    out.extend_from_slice(PCL_MAGIC);
    out.extend_from_slice(&(pc.len() as u32).to_le_bytes());
    for v in pc.points().iter().flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_pcl(bytes: &[u8]) -> Result<PointCloud, GeometryError> {
    if bytes.len() < 8 || &bytes[..4] != PCL_MAGIC {
        return Err(GeometryError::Format("missing PCL1 header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() != n * 12 {
        return Err(GeometryError::Format(format!(
            "{n} points need {} bytes, found {}",
            n * 12,
            body.len()
        )));
    }
    let flat: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    PointCloud::from_flat(&flat)
}

pub fn write_pcl_file(pc: &PointCloud, path: &Path) -> Result<(), GeometryError> {
    std::fs::write(path, write_pcl(pc))?;
    Ok(())
}

pub fn read_pcl_file(path: &Path) -> Result<PointCloud, GeometryError> {
    read_pcl(&std::fs::read(path)?)
}

/// One `x y z` triple per line.
pub fn write_xyz(pc: &PointCloud) -> String {
    let mut s = String::with_capacity(pc.len() * 32);
    for p in pc.points() {
        writeln!(s, "{} {} {}", p[0], p[1], p[2]).expect("writing to a String");
    }
    s
}

/// Parses `x y z` lines; blank lines and `#` comments are skipped.
pub fn read_xyz(text: &str) -> Result<PointCloud, GeometryError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| GeometryError::Format(format!("line {}: {e}", i + 1)))?;
        if vals.len() != 3 {
            return Err(GeometryError::Format(format!(
                "line {}: expected 3 values, got {}",
                i + 1,
                vals.len()
            )));
        }
        points.push([vals[0], vals[1], vals[2]]);
    }
    PointCloud::new(points)
}
