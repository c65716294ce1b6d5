use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Metrics, Point, PointCloud};
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "method,accuracy,completeness,outlier_pct,wall_time_seconds";

const SIGNIFICANT: usize = 6;

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `printf("%.6g")`: six significant digits, trailing zeros removed,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn format_g(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Round first so the exponent reflects carries such as 9.999999 -> 10.
    let sci = format!("{:.*e}", SIGNIFICANT - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_fraction(mantissa), sign, exp.abs())
    } else {
        let decimals = (SIGNIFICANT as i32 - 1 - exp) as usize;
        trim_fraction(&format!("{v:.decimals$}")).to_string()
    }
}

/// One `x y z amplitude` line per point.
pub fn xyz_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in &cloud.points {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            format_g(p.x),
            format_g(p.y),
            format_g(p.z),
            format_g(p.amplitude)
        );
    }
    out
}

pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, xyz_string(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                Error::InvalidParameter(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
        let [x, y, z, amplitude] = vals[..] else {
            return Err(Error::InvalidParameter(format!(
                "{}:{}: expected 4 columns, found {}",
                path.display(),
                i + 1,
                vals.len()
            )));
        };
        points.push(Point { x, y, z, amplitude });
    }
    Ok(PointCloud { points })
}

/// Binary little-endian PLY with double `x y z amplitude` vertex properties.
pub fn ply_bytes(cloud: &PointCloud) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property double x\nproperty double y\nproperty double z\n\
         property double amplitude\nend_header\n",
        cloud.len()
    );
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * 32);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.amplitude] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, ply_bytes(cloud)).map_err(|e| Error::io(path, e))
}

pub fn metrics_row(m: &Metrics) -> String {
    format!(
        "{},{},{},{},{}",
        m.method,
        format_g(m.accuracy),
        format_g(m.completeness),
        format_g(m.outlier_pct),
        format_g(m.wall_time_seconds)
    )
}

/// Header plus one row per method.
pub fn metrics_csv(rows: &[Metrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in rows {
        out.push_str(&metrics_row(m));
        out.push('\n');
    }
    out
}
