//! XYZL ASCII point-cloud files.
//!
//! ```text
//! #xyzl v1 cols=7
//! 0.5 1.25 0 200 10 10 3
//! ```
//!
//! The header declares the column count: 3 (`x y z`), 4 (`x y z label`),
//! 6 (`x y z r g b`) or 7 (`x y z r g b label`). Lines are LF-terminated.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point, PointCloud};
use crate::error::{Error, Result};

const MAGIC: &str = "#xyzl v1";

pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    parse_cloud(&text)
}

pub fn parse_cloud(text: &str) -> Result<PointCloud> {
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    let cols = parse_header(header)?;
    let has_colors = cols >= 6;
    let has_labels = cols == 4 || cols == 7;

    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut labels = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line_no = i + 2;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != cols {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {cols} columns, found {}", fields.len()),
            });
        }
        let mut xyz = [0.0; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad coordinate {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite coordinate {f:?}"),
                });
            }
            xyz[k] = v;
        }
        points.push(Point::new(xyz[0], xyz[1], xyz[2]));
        if has_colors {
            let mut rgb = [0u8; 3];
            for (k, f) in fields[3..6].iter().enumerate() {
                rgb[k] = f.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad color component {f:?}"),
                })?;
            }
            colors.push(rgb);
        }
        if has_labels {
            let f = fields[cols - 1];
            labels.push(f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad label {f:?}"),
            })?);
        }
    }
    PointCloud::new(
        points,
        has_colors.then_some(colors),
        has_labels.then_some(labels),
    )
}

fn parse_header(header: &str) -> Result<usize> {
    let err = |message: String| Error::Parse { line: 1, message };
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| err(format!("missing `{MAGIC}` header")))?;
    let cols = rest
        .trim()
        .strip_prefix("cols=")
        .ok_or_else(|| err("header lacks cols=".into()))?;
    match cols.parse::<usize>() {
        Ok(c @ (3 | 4 | 6 | 7)) => Ok(c),
        _ => Err(err(format!("unsupported column count {cols:?}"))),
    }
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_cloud(cloud))?;
    Ok(())
}

pub fn format_cloud(cloud: &PointCloud) -> String {
    let cols = 3
        + if cloud.colors().is_some() { 3 } else { 0 }
        + if cloud.labels().is_some() { 1 } else { 0 };
    let mut out = String::with_capacity(32 * (cloud.len() + 1));
    out.push_str(&format!("{MAGIC} cols={cols}\n"));
    for (i, p) in cloud.points().iter().enumerate() {
        // `{}` on f64 prints the shortest string that parses back exactly.
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(c) = cloud.colors() {
            let [r, g, b] = c[i];
            let _ = write!(out, " {r} {g} {b}");
        }
        if let Some(l) = cloud.labels() {
            let _ = write!(out, " {}", l[i]);
        }
        out.push('\n');
    }
    out
}
