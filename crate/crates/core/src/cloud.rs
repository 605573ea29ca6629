//! Point clouds and ASCII PLY interchange.

use std::io::{BufRead, Write};

use crate::error::{FsdError, Result};
use crate::Vec3;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            normals: None,
        }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(FsdError::invalid("points and normals differ in length"));
        }
        Ok(Self {
            points,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Writes clouds as one ASCII PLY. With more than one cloud, a
/// `comment object_index=<i> vertices=<n>` line per object records the
/// split; vertices follow in object order. Normals are written when every
/// cloud has them.
pub fn write_ply<W: Write>(mut out: W, clouds: &[PointCloud]) -> Result<()> {
    let total: usize = clouds.iter().map(PointCloud::len).sum();
    let normals = !clouds.is_empty() && clouds.iter().all(|c| c.normals.is_some());
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    if clouds.len() > 1 {
        for (i, c) in clouds.iter().enumerate() {
            writeln!(out, "comment object_index={i} vertices={}", c.len())?;
        }
    }
    writeln!(out, "element vertex {total}")?;
    for p in ["x", "y", "z"] {
        writeln!(out, "property double {p}")?;
    }
    if normals {
        for p in ["nx", "ny", "nz"] {
            writeln!(out, "property double {p}")?;
        }
    }
    writeln!(out, "end_header")?;
    for c in clouds {
        for (i, p) in c.points.iter().enumerate() {
            write!(out, "{} {} {}", p.x, p.y, p.z)?;
            if let (true, Some(n)) = (normals, &c.normals) {
                let n = n[i];
                write!(out, " {} {} {}", n.x, n.y, n.z)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Reads an ASCII PLY written by [`write_ply`] or any ASCII PLY with a
/// vertex element carrying `x y z` (and optionally `nx ny nz`). Returns one
/// cloud per `object_index` comment, or a single cloud.
pub fn read_ply<R: BufRead>(input: R) -> Result<Vec<PointCloud>> {
    let mut lines = input.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| FsdError::format(what, "unexpected end of file"))?
            .map_err(FsdError::from)
    };
    if next("magic")?.trim() != "ply" {
        return Err(FsdError::format("magic", "expected `ply`"));
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut splits: Vec<usize> = Vec::new();
    let mut other_elements = false;
    loop {
        let line = next("header")?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(FsdError::format(
                    "format",
                    format!("unsupported PLY format {fmt}"),
                ))
            }
            ["comment", rest @ ..] => {
                if let Some(n) = rest.iter().find_map(|t| t.strip_prefix("vertices=")) {
                    if rest.iter().any(|t| t.starts_with("object_index=")) {
                        splits.push(n.parse().map_err(|_| {
                            FsdError::format("comment", format!("bad vertex count `{n}`"))
                        })?);
                    }
                }
            }
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    if vertex_count.is_some() || other_elements {
                        return Err(FsdError::format(
                            "element",
                            "vertex element must come first",
                        ));
                    }
                    vertex_count = Some(count.parse::<usize>().map_err(|_| {
                        FsdError::format("element vertex", format!("bad count `{count}`"))
                    })?);
                } else {
                    other_elements = true;
                }
            }
            ["property", .., name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    let count = vertex_count.ok_or_else(|| FsdError::format("element vertex", "missing"))?;
    let col = |name: &str| props.iter().position(|p| p == name);
    let (x, y, z) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(FsdError::format("property", "vertex needs x, y, z")),
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::new();
    for i in 0..count {
        let line = next("vertex")?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| FsdError::format(format!("vertex[{i}]"), "non-numeric value"))?;
        if vals.len() != props.len() {
            return Err(FsdError::format(
                format!("vertex[{i}]"),
                format!("expected {} values, found {}", props.len(), vals.len()),
            ));
        }
        points.push(Vec3::new(vals[x], vals[y], vals[z]));
        if let Some((a, b, c)) = normal_cols {
            normals.push(Vec3::new(vals[a], vals[b], vals[c]));
        }
    }
    let normals = normal_cols.map(|_| normals);

    if splits.is_empty() {
        return Ok(vec![PointCloud { points, normals }]);
    }
    if splits.iter().sum::<usize>() != count {
        return Err(FsdError::format(
            "comment",
            "object vertex counts do not sum to the total",
        ));
    }
    let mut clouds = Vec::with_capacity(splits.len());
    let mut start = 0;
    for n in splits {
        clouds.push(PointCloud {
            points: points[start..start + n].to_vec(),
            normals: normals.as_ref().map(|v| v[start..start + n].to_vec()),
        });
        start += n;
    }
    Ok(clouds)
}
