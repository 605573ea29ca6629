//! Pinhole back-projection and 16-bit PGM depth maps.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(FsdError::invalid("focal lengths must be positive"));
        }
        Ok(())
    }

    /// Pixel `(u, v)` of a camera-frame point.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        )
    }
}

/// Row-major depth in meters; zero marks invalid pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(FsdError::invalid(format!(
                "{} depth values for a {width}x{height} map",
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FsdError::invalid(
                "depth values must be finite and non-negative",
            ));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<bool>,
}

/// Lifts valid, unmasked pixels to camera-frame points in row-major order.
pub fn backproject_depth(
    depth: &DepthMap,
    intrinsics: &CameraIntrinsics,
    mask: Option<&Mask>,
) -> Result<Vec<Vec3>> {
    intrinsics.validate()?;
    if let Some(m) = mask {
        if m.width != depth.width
            || m.height != depth.height
            || m.values.len() != depth.values.len()
        {
            return Err(FsdError::invalid(format!(
                "mask is {}x{} but depth is {}x{}",
                m.width, m.height, depth.width, depth.height
            )));
        }
    }
    let mut out = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v * depth.width + u;
            let z = depth.values[i];
            if z <= 0.0 || mask.is_some_and(|m| !m.values[i]) {
                continue;
            }
            out.push(intrinsics.unproject(u as f64, v as f64, z));
        }
    }
    Ok(out)
}

/// Raw 16-bit (or 8-bit) grayscale image with header comments.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
    pub comments: Vec<String>,
}

pub fn read_pgm<R: BufRead>(mut input: R) -> Result<Pgm> {
    let mut fields: Vec<String> = Vec::new();
    let mut comments = Vec::new();
    // magic, width, height, maxval; comments may appear between them
    while fields.len() < 4 {
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(FsdError::format("pgm header", "unexpected end of file"));
        }
        let (content, comment) = match line.find('#') {
            Some(i) => (&line[..i], Some(line[i + 1..].trim().to_string())),
            None => (&line[..], None),
        };
        fields.extend(content.split_whitespace().map(str::to_string));
        comments.extend(comment);
    }
    if fields.len() > 4 {
        return Err(FsdError::format(
            "pgm header",
            "pixel data must start on a new line",
        ));
    }
    if fields[0] != "P5" {
        return Err(FsdError::format(
            "pgm magic",
            format!("expected P5, found {}", fields[0]),
        ));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| FsdError::format(what.to_string(), format!("bad value `{s}`")))
    };
    let width = parse(&fields[1], "pgm width")?;
    let height = parse(&fields[2], "pgm height")?;
    let maxval = parse(&fields[3], "pgm maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(FsdError::format(
            "pgm maxval",
            format!("{maxval} out of range"),
        ));
    }
    let bytes_per = if maxval > 255 { 2 } else { 1 };
    let mut data = vec![0u8; width * height * bytes_per];
    input
        .read_exact(&mut data)
        .map_err(|_| FsdError::format("pgm pixels", "truncated pixel data"))?;
    let pixels = if bytes_per == 2 {
        data.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data.iter().map(|&b| b as u16).collect()
    };
    Ok(Pgm {
        width,
        height,
        maxval: maxval as u16,
        pixels,
        comments,
    })
}

pub fn write_pgm<W: Write>(mut out: W, pgm: &Pgm) -> Result<()> {
    writeln!(out, "P5")?;
    for c in &pgm.comments {
        writeln!(out, "# {c}")?;
    }
    write!(out, "{} {}\n{}\n", pgm.width, pgm.height, pgm.maxval)?;
    if pgm.maxval > 255 {
        for p in &pgm.pixels {
            out.write_all(&p.to_be_bytes())?;
        }
    } else {
        let bytes: Vec<u8> = pgm.pixels.iter().map(|&p| p as u8).collect();
        out.write_all(&bytes)?;
    }
    Ok(())
}

const SCALE_KEY: &str = "scale_mm_per_unit=";

/// Reads a depth PGM. Stored value times `scale_mm_per_unit` gives
/// millimeters (default 1 when the comment is absent).
pub fn read_depth_pgm<R: BufRead>(input: R) -> Result<DepthMap> {
    let pgm = read_pgm(input)?;
    let mut scale = 1.0;
    for c in &pgm.comments {
        if let Some(v) = c.strip_prefix(SCALE_KEY) {
            scale = v.trim().parse::<f64>().map_err(|_| {
                FsdError::format("pgm scale_mm_per_unit", format!("bad value `{v}`"))
            })?;
        }
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(FsdError::format(
            "pgm scale_mm_per_unit",
            "must be positive",
        ));
    }
    let values = pgm
        .pixels
        .iter()
        .map(|&p| p as f64 * scale / 1000.0)
        .collect();
    DepthMap::new(pgm.width, pgm.height, values)
}

/// Writes a depth map as 16-bit PGM, rounding to the nearest unit.
pub fn write_depth_pgm<W: Write>(out: W, depth: &DepthMap, scale_mm_per_unit: f64) -> Result<()> {
    if !(scale_mm_per_unit > 0.0 && scale_mm_per_unit.is_finite()) {
        return Err(FsdError::invalid("scale_mm_per_unit must be positive"));
    }
    let mut pixels = Vec::with_capacity(depth.values.len());
    for &d in &depth.values {
        let units = (d * 1000.0 / scale_mm_per_unit).round();
        if units > u16::MAX as f64 {
            return Err(FsdError::invalid(format!(
                "depth {d} m exceeds the 16-bit range at {scale_mm_per_unit} mm per unit"
            )));
        }
        pixels.push(units as u16);
    }
    write_pgm(
        out,
        &Pgm {
            width: depth.width,
            height: depth.height,
            maxval: u16::MAX,
            pixels,
            comments: vec![format!("{SCALE_KEY}{scale_mm_per_unit}")],
        },
    )
}

/// Reads a mask PGM; any non-zero pixel is set.
pub fn read_mask_pgm<R: BufRead>(input: R) -> Result<Mask> {
    let pgm = read_pgm(input)?;
    Ok(Mask {
        width: pgm.width,
        height: pgm.height,
        values: pgm.pixels.iter().map(|&p| p != 0).collect(),
    })
}

pub fn read_intrinsics<R: Read>(input: R) -> Result<CameraIntrinsics> {
    let k: CameraIntrinsics = serde_json::from_reader(input)
        .map_err(|e| FsdError::format("intrinsics", e.to_string()))?;
    k.validate()?;
    Ok(k)
}
