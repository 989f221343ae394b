//! ASCII PLY and CSV point-cloud readers and writers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::write_atomic;
use crate::real::Real;

use super::ScenePointCloud;

/// Parses an ASCII PLY document. Only the `x`, `y`, `z` properties of the
/// `vertex` element are read; other properties and elements are skipped.
pub fn parse_ply<T: Real>(text: &str) -> Result<Vec<Vec3<T>>> {
    let err = |msg: String| Error::parse("PLY", msg);
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err("missing 'ply' magic line".into())),
    }

    // (element name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    for (ln, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(err(format!(
                        "line {}: only ascii PLY is supported, found {:?}",
                        ln + 1,
                        toks.get(1).unwrap_or(&"")
                    )));
                }
                saw_format = true;
            }
            Some("element") => {
                let (name, count) = match (toks.get(1), toks.get(2)) {
                    (Some(n), Some(c)) => (n, c),
                    _ => return Err(err(format!("line {}: malformed element", ln + 1))),
                };
                let count = count
                    .parse::<usize>()
                    .map_err(|e| err(format!("line {}: bad element count: {e}", ln + 1)))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(format!("line {}: property before element", ln + 1)))?;
                if toks.get(1) == Some(&"list") {
                    return Err(err(format!("line {}: list properties are not supported", ln + 1)));
                }
                let name = toks
                    .get(2)
                    .ok_or_else(|| err(format!("line {}: malformed property", ln + 1)))?;
                el.2.push(name.to_string());
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(other) => return Err(err(format!("line {}: unexpected header keyword '{other}'", ln + 1))),
        }
    }
    if !saw_format || !header_done {
        return Err(err("incomplete header".into()));
    }

    let mut points = None;
    for (name, count, props) in &elements {
        if name == "vertex" {
            let col = |c: &str| {
                props
                    .iter()
                    .position(|p| p == c)
                    .ok_or_else(|| err(format!("vertex element lacks property '{c}'")))
            };
            let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
            let mut pts = Vec::with_capacity(*count);
            for _ in 0..*count {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| err(format!("expected {count} vertices, file ended early")))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != props.len() {
                    return Err(err(format!(
                        "line {}: expected {} values, found {}",
                        ln + 1,
                        props.len(),
                        toks.len()
                    )));
                }
                let num = |i: usize| {
                    toks[i]
                        .parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| err(format!("line {}: {e}", ln + 1)))
                };
                pts.push(Vec3::new(num(cx)?, num(cy)?, num(cz)?));
            }
            points = Some(pts);
        } else {
            for _ in 0..*count {
                lines
                    .next()
                    .ok_or_else(|| err(format!("element '{name}' truncated")))?;
            }
        }
    }
    points.ok_or_else(|| err("no vertex element".into()))
}

/// Parses `x,y,z` rows. Blank lines, `#` comments and a non-numeric header
/// row are ignored.
pub fn parse_csv<T: Real>(text: &str) -> Result<Vec<Vec3<T>>> {
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => pts.push(Vec3::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))),
            Ok(v) => {
                return Err(Error::parse(
                    "CSV",
                    format!("line {}: expected 3 values, found {}", ln + 1, v.len()),
                ))
            }
            Err(_) if pts.is_empty() && ln == first_content_line(text) => {}
            Err(e) => return Err(Error::parse("CSV", format!("line {}: {e}", ln + 1))),
        }
    }
    Ok(pts)
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

pub fn format_ply<T: Real>(points: &[Vec3<T>]) -> String {
    let mut s = String::with_capacity(64 + points.len() * 32);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", points.len());
    s.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

pub fn format_csv<T: Real>(points: &[Vec3<T>]) -> String {
    let mut s = String::from("x,y,z\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.x, p.y, p.z);
    }
    s
}

/// Reads a scene point cloud, choosing the format from the extension
/// (`.ply` or `.csv`).
pub fn read_point_cloud<T: Real>(path: &Path) -> Result<ScenePointCloud<T>> {
    let text = std::fs::read_to_string(path)?;
    let pts = match extension(path).as_deref() {
        Some("ply") => parse_ply(&text),
        Some("csv") => parse_csv(&text),
        _ => Err(Error::invalid(format!(
            "{}: unknown point cloud extension (expected .ply or .csv)",
            path.display()
        ))),
    }
    .map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{} ({context})", path.display()),
            message,
        },
        other => other,
    })?;
    ScenePointCloud::new(pts)
}

pub fn write_point_cloud<T: Real>(path: &Path, points: &[Vec3<T>]) -> Result<()> {
    let text = match extension(path).as_deref() {
        Some("csv") => format_csv(points),
        _ => format_ply(points),
    };
    write_atomic(path, text.as_bytes())
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}
