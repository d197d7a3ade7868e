//! Binary silhouette and depth rasterization.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

pub const DEFAULT_IMAGE_SIZE: u32 = 512;
const NEAR: f64 = 1e-6;
const BAND_ROWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Lens {
    /// Half of the visible height in world units.
    Orthographic { half_height: f64 },
    /// Vertical field of view in radians.
    Perspective { fov: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub lens: Lens,
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy)]
struct Basis {
    right: Vec3,
    up: Vec3,
    forward: Vec3,
}

impl Camera {
    pub fn new(lens: Lens, position: Vec3, target: Vec3, up: Vec3, width: u32, height: u32) -> Result<Camera> {
        let c = Camera { lens, position, target, up, width, height };
        c.validate()?;
        Ok(c)
    }

    pub fn orthographic(half_height: f64, position: Vec3, target: Vec3, size: u32) -> Result<Camera> {
        Camera::new(Lens::Orthographic { half_height }, position, target, Vec3::z(), size, size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("camera", "image dimensions must be at least 1"));
        }
        match self.lens {
            Lens::Orthographic { half_height } if !(half_height > 0.0 && half_height.is_finite()) => {
                return Err(Error::param("half_height", "must be positive"));
            }
            Lens::Perspective { fov } if !(fov > 0.0 && fov < std::f64::consts::PI) => {
                return Err(Error::param("fov", "must lie in (0, pi)"));
            }
            _ => {}
        }
        let view = self.target - self.position;
        if view.norm() <= 1e-12 {
            return Err(Error::param("camera", "position coincides with target"));
        }
        if view.normalize().cross(&self.up).norm() <= 1e-9 {
            return Err(Error::param("camera", "view direction is parallel to up"));
        }
        Ok(())
    }

    fn basis(&self) -> Basis {
        let forward = (self.target - self.position).normalize();
        let right = forward.cross(&self.up).normalize();
        Basis {
            right,
            up: right.cross(&forward),
            forward,
        }
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// World extent of one pixel (orthographic only).
    pub fn pixel_size(&self) -> Option<f64> {
        match self.lens {
            Lens::Orthographic { half_height } => Some(2.0 * half_height / self.height as f64),
            Lens::Perspective { .. } => None,
        }
    }

    /// Screen position (pixels, y down) and view depth.
    fn project(&self, b: &Basis, p: &Vec3) -> (f64, f64, f64) {
        let d = p - self.position;
        let z = d.dot(&b.forward);
        let (x, y) = (d.dot(&b.right), d.dot(&b.up));
        let (nx, ny) = match self.lens {
            Lens::Orthographic { half_height } => (x / (half_height * self.aspect()), y / half_height),
            Lens::Perspective { fov } => {
                let t = (0.5 * fov).tan();
                (x / (z * t * self.aspect()), y / (z * t))
            }
        };
        (
            (nx + 1.0) * 0.5 * self.width as f64,
            (1.0 - ny) * 0.5 * self.height as f64,
            z,
        )
    }
}

/// Cameras at azimuths 2πk/N around `center`, all at the same elevation.
pub fn uniform_trajectory(
    count: usize,
    elevation: f64,
    radius: f64,
    center: Vec3,
    lens: Lens,
    width: u32,
    height: u32,
) -> Result<Vec<Camera>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    if !(radius > 0.0) {
        return Err(Error::param("radius", "must be positive"));
    }
    (0..count)
        .map(|k| {
            let az = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let dir = Vec3::new(elevation.cos() * az.cos(), elevation.cos() * az.sin(), elevation.sin());
            Camera::new(lens, center + dir * radius, center, Vec3::z(), width, height)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    /// Row-major, top row first; +∞ marks background.
    pub depth: Vec<f64>,
}

impl RasterImage {
    pub fn background(width: u32, height: u32) -> Self {
        RasterImage {
            width,
            height,
            depth: vec![f64::INFINITY; width as usize * height as usize],
        }
    }

    pub fn from_mask(width: u32, height: u32, mask: &[bool]) -> Result<Self> {
        if mask.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!("{} pixels for {width}x{height}", mask.len())));
        }
        Ok(RasterImage {
            width,
            height,
            depth: mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect(),
        })
    }

    pub fn is_set(&self, x: u32, y: u32) -> bool {
        self.depth[(y * self.width + x) as usize].is_finite()
    }

    pub fn foreground(&self) -> Vec<bool> {
        self.depth.iter().map(|d| d.is_finite()).collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }

    pub fn to_pbm(&self) -> Vec<u8> {
        let mut out = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
        let row_bytes = (self.width as usize).div_ceil(8);
        for y in 0..self.height {
            let mut row = vec![0u8; row_bytes];
            for x in 0..self.width {
                if self.is_set(x, y) {
                    row[x as usize / 8] |= 0x80 >> (x % 8);
                }
            }
            out.extend_from_slice(&row);
        }
        out
    }

    /// Accepts plain (P1) and raw (P4) bitmaps.
    pub fn from_pbm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::parse("pbm", m.to_string());
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("unexpected end of header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        let w: u32 = token()?.parse().map_err(|_| bad("bad width"))?;
        let h: u32 = token()?.parse().map_err(|_| bad("bad height"))?;
        let n = w as usize * h as usize;
        let mut mask = Vec::with_capacity(n);
        match magic.as_str() {
            "P1" => {
                let body = &bytes[pos..];
                for &c in body {
                    match c {
                        b'0' => mask.push(false),
                        b'1' => mask.push(true),
                        c if c.is_ascii_whitespace() => {}
                        _ => return Err(bad("unexpected byte in P1 body")),
                    }
                }
            }
            "P4" => {
                let body = &bytes[(pos + 1).min(bytes.len())..];
                let row_bytes = (w as usize).div_ceil(8);
                if body.len() < row_bytes * h as usize {
                    return Err(bad("truncated P4 body"));
                }
                for y in 0..h as usize {
                    for x in 0..w as usize {
                        mask.push(body[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0);
                    }
                }
            }
            _ => return Err(bad("not a PBM file")),
        }
        if mask.len() < n {
            return Err(bad("too few pixels"));
        }
        mask.truncate(n);
        RasterImage::from_mask(w, h, &mask)
    }

    /// 16-bit depth: background 0, foreground mapped so the nearest pixel is
    /// 65535 and the farthest is 1.
    pub fn to_pgm16(&self) -> Vec<u8> {
        let finite = self.depth.iter().filter(|d| d.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = finite.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        for &d in &self.depth {
            let v: u16 = if !d.is_finite() {
                0
            } else if hi > lo {
                (1.0 + (hi - d) / (hi - lo) * 65534.0).round() as u16
            } else {
                65535
            };
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn save_pbm(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_pbm())
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_pgm16())
    }

    pub fn load_pbm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        RasterImage::from_pbm(&bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

struct ScreenTri {
    p: [(f64, f64); 3],
    /// Orthographic: depth; perspective: 1/depth.
    q: [f64; 3],
    area: f64,
    top_left: [bool; 3],
    rows: (usize, usize),
    cols: (usize, usize),
}

/// Evaluated from the lexicographically smaller endpoint so that a shared
/// edge gives exactly opposite values for its two triangles.
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let raw = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    if a <= b {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

fn is_top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

fn setup(mesh: &TriangleMesh, camera: &Camera, basis: &Basis, f: usize) -> Option<ScreenTri> {
    let perspective = matches!(camera.lens, Lens::Perspective { .. });
    let mut p = [(0.0, 0.0); 3];
    let mut q = [0.0; 3];
    for (k, v) in mesh.triangle(f).into_iter().enumerate() {
        let (x, y, z) = camera.project(basis, v);
        if perspective && z < NEAR {
            return None;
        }
        p[k] = (x, y);
        q[k] = if perspective { 1.0 / z } else { z };
    }
    let mut area = edge(p[0], p[1], p[2]);
    if area == 0.0 || !area.is_finite() {
        return None;
    }
    if area < 0.0 {
        p.swap(1, 2);
        q.swap(1, 2);
        area = -area;
    }
    let (w, h) = (camera.width as f64, camera.height as f64);
    let min_x = p.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    if max_x < 0.0 || max_y < 0.0 || min_x > w || min_y > h {
        return None;
    }
    let span = |lo: f64, hi: f64, n: f64| -> (usize, usize) {
        let a = (lo - 0.5).ceil().max(0.0) as usize;
        let b = ((hi - 0.5).floor() + 1.0).clamp(0.0, n) as usize;
        (a, b)
    };
    Some(ScreenTri {
        top_left: [is_top_left(p[1], p[2]), is_top_left(p[2], p[0]), is_top_left(p[0], p[1])],
        p,
        q,
        area,
        rows: span(min_y, max_y, h),
        cols: span(min_x, max_x, w),
    })
}

/// Z-buffered rasterization of every face (no culling) with the top-left
/// fill rule at pixel centers.
pub fn rasterize(mesh: &TriangleMesh, camera: &Camera) -> RasterImage {
    let basis = camera.basis();
    let perspective = matches!(camera.lens, Lens::Perspective { .. });
    let tris: Vec<ScreenTri> = (0..mesh.faces.len())
        .into_par_iter()
        .filter_map(|f| setup(mesh, camera, &basis, f))
        .collect();
    let width = camera.width as usize;
    let mut image = RasterImage::background(camera.width, camera.height);
    image
        .depth
        .par_chunks_mut(width * BAND_ROWS)
        .enumerate()
        .for_each(|(band, buf)| {
            let row0 = band * BAND_ROWS;
            let row1 = row0 + buf.len() / width;
            for t in &tris {
                let (r0, r1) = (t.rows.0.max(row0), t.rows.1.min(row1));
                for y in r0..r1 {
                    let py = y as f64 + 0.5;
                    for x in t.cols.0..t.cols.1 {
                        let pt = (x as f64 + 0.5, py);
                        let w = [edge(t.p[1], t.p[2], pt), edge(t.p[2], t.p[0], pt), edge(t.p[0], t.p[1], pt)];
                        if (0..3).any(|k| w[k] < 0.0 || (w[k] == 0.0 && !t.top_left[k])) {
                            continue;
                        }
                        let q = (w[0] * t.q[0] + w[1] * t.q[1] + w[2] * t.q[2]) / t.area;
                        let depth = if perspective { 1.0 / q } else { q };
                        let cell = &mut buf[(y - row0) * width + x];
                        if depth < *cell {
                            *cell = depth;
                        }
                    }
                }
            }
        });
    image
}

/// |A∩B| / |A∪B| over foreground pixels; two empty images score 1.
pub fn silhouette_iou(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.depth.iter().zip(&b.depth) {
        let (p, q) = (x.is_finite(), y.is_finite());
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_validation() {
        let o = Vec3::zeros();
        assert!(Camera::orthographic(0.5, Vec3::new(0.0, 0.0, 2.0), o, 8).is_err());
        assert!(Camera::orthographic(0.5, o, o, 8).is_err());
        assert!(Camera::orthographic(0.5, Vec3::x() * 2.0, o, 0).is_err());
        assert!(Camera::new(Lens::Perspective { fov: 3.2 }, Vec3::x(), o, Vec3::z(), 4, 4).is_err());
        assert!(Camera::orthographic(0.5, Vec3::x() * 2.0, o, 8).is_ok());
    }

    #[test]
    fn pbm_round_trip() {
        let mask: Vec<bool> = (0..11 * 3).map(|i| i % 3 == 0).collect();
        let img = RasterImage::from_mask(11, 3, &mask).unwrap();
        assert_eq!(RasterImage::from_pbm(&img.to_pbm()).unwrap(), img);
        let plain = RasterImage::from_pbm(b"P1\n# c\n3 2\n1 0 1\n0 1 0\n").unwrap();
        assert_eq!(plain.foreground(), vec![true, false, true, false, true, false]);
        assert!(RasterImage::from_pbm(b"P4\n8 8\n").is_err());
    }

    #[test]
    fn iou_cases() {
        let e = RasterImage::background(4, 4);
        assert_eq!(silhouette_iou(&e, &e).unwrap(), 1.0);
        let a = RasterImage::from_mask(4, 1, &[true, true, false, false]).unwrap();
        let b = RasterImage::from_mask(4, 1, &[false, true, true, false]).unwrap();
        let c = RasterImage::from_mask(4, 1, &[false, false, true, true]).unwrap();
        assert!((silhouette_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(silhouette_iou(&a, &c).unwrap(), 0.0);
        assert!(silhouette_iou(&a, &e).is_err());
    }
}
