//! Binary surface occupancy on an M³ grid over [−0.5, 0.5]³, morphological
//! dilation, and voxelized positional encodings.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{morton_encode, triangle_box_overlap, Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::sdf::{cell_of, SparseSdfGrid};

const PRIOR_MAGIC: &[u8; 8] = b"SMVOXP01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Structuring {
    #[default]
    Chebyshev,
    L1,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelPrior {
    pub resolution: u32,
    bits: Vec<u64>,
    /// Total dilation radius applied so far, in cells.
    pub dilation_radius: u32,
    /// Identifier of the source mesh.
    pub source: String,
}

impl VoxelPrior {
    pub fn empty(resolution: u32) -> Self {
        let cells = resolution as usize * resolution as usize * resolution as usize;
        VoxelPrior {
            resolution,
            bits: vec![0; cells.div_ceil(64)],
            dilation_radius: 0,
            source: String::new(),
        }
    }

    pub fn full(resolution: u32) -> Self {
        let mut p = Self::empty(resolution);
        let n = resolution as i32;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    p.set([i, j, k]);
                }
            }
        }
        p
    }

    #[inline]
    fn index(&self, c: [i32; 3]) -> Option<usize> {
        let m = self.resolution as i32;
        if c.iter().any(|&x| x < 0 || x >= m) {
            return None;
        }
        Some(((c[2] as usize * m as usize) + c[1] as usize) * m as usize + c[0] as usize)
    }

    /// Cells outside the grid are never occupied.
    #[inline]
    pub fn get(&self, c: [i32; 3]) -> bool {
        self.index(c)
            .is_some_and(|i| self.bits[i / 64] >> (i % 64) & 1 == 1)
    }

    pub fn set(&mut self, c: [i32; 3]) {
        if let Some(i) = self.index(c) {
            self.bits[i / 64] |= 1 << (i % 64);
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupied cells in x-fastest linear order.
    pub fn occupied_cells(&self) -> Vec<[i32; 3]> {
        let m = self.resolution as usize;
        let mut out = Vec::new();
        for (w, &word) in self.bits.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = w * 64 + b;
                out.push([(i % m) as i32, (i / m % m) as i32, (i / (m * m)) as i32]);
            }
        }
        out
    }

    pub fn cell_size(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(PRIOR_MAGIC)?;
        w.write_all(&self.resolution.to_le_bytes())?;
        w.write_all(&self.dilation_radius.to_le_bytes())?;
        w.write_all(&(self.source.len() as u32).to_le_bytes())?;
        w.write_all(self.source.as_bytes())?;
        for word in &self.bits {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<VoxelPrior> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| Error::parse(format!("byte {pos}"), "unexpected end of prior file"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != PRIOR_MAGIC {
            return Err(Error::parse("byte 0", "bad voxel prior magic"));
        }
        let resolution = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let dilation_radius = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let source = String::from_utf8(take(len)?.to_vec())
            .map_err(|_| Error::parse("source", "source id is not UTF-8"))?;
        let mut prior = VoxelPrior::empty(resolution);
        for word in prior.bits.iter_mut() {
            *word = u64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        prior.dilation_radius = dilation_radius;
        prior.source = source;
        Ok(prior)
    }

    pub fn to_json(&self) -> PriorJson {
        PriorJson {
            resolution: self.resolution,
            dilation_radius: self.dilation_radius,
            source: self.source.clone(),
            occupied: self.occupied_cells(),
        }
    }

    pub fn from_json(j: &PriorJson) -> Result<VoxelPrior> {
        let mut p = VoxelPrior::empty(j.resolution);
        for &c in &j.occupied {
            if p.index(c).is_none() {
                return Err(Error::Schema {
                    pointer: "/occupied".into(),
                    message: format!("cell {c:?} outside {}³ grid", j.resolution),
                });
            }
            p.set(c);
        }
        p.dilation_radius = j.dilation_radius;
        p.source = j.source.clone();
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<VoxelPrior> {
        Self::read_binary(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorJson {
    pub resolution: u32,
    pub dilation_radius: u32,
    pub source: String,
    pub occupied: Vec<[i32; 3]>,
}

/// Conservative surface voxelization: a cell is occupied iff some triangle
/// overlaps its closed box. Triangles outside the domain are clipped.
pub fn voxelize_surface(mesh: &TriangleMesh, resolution: u32) -> Result<VoxelPrior> {
    if resolution < 4 {
        return Err(Error::param("resolution", format!("{resolution} < 4")));
    }
    let m = resolution as i32;
    let h = 1.0 / resolution as f64;
    let half = Vec3::repeat(0.5 * h);
    let bits = (0..mesh.faces.len())
        .into_par_iter()
        .fold(
            || VoxelPrior::empty(resolution),
            |mut acc, f| {
                let tri = mesh.triangle(f);
                let b = Aabb::from_points(tri);
                let lo: Vec<i32> = (0..3).map(|a| (cell_of(b.min[a], resolution) - 1).max(0)).collect();
                let hi: Vec<i32> = (0..3).map(|a| cell_of(b.max[a], resolution).min(m - 1)).collect();
                for k in lo[2]..=hi[2] {
                    for j in lo[1]..=hi[1] {
                        for i in lo[0]..=hi[0] {
                            let center = Vec3::new(
                                (i as f64 + 0.5) * h - 0.5,
                                (j as f64 + 0.5) * h - 0.5,
                                (k as f64 + 0.5) * h - 0.5,
                            );
                            if triangle_box_overlap(&center, &half, tri) {
                                acc.set([i, j, k]);
                            }
                        }
                    }
                }
                acc
            },
        )
        .map(|p| p.bits)
        .reduce(
            || VoxelPrior::empty(resolution).bits,
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x |= y;
                }
                a
            },
        );
    Ok(VoxelPrior {
        resolution,
        bits,
        dilation_radius: 0,
        source: String::new(),
    })
}

pub fn dilate(prior: &VoxelPrior, radius: u32, structuring: Structuring) -> VoxelPrior {
    let mut out = prior.clone();
    if radius == 0 {
        return out;
    }
    let m = prior.resolution as i32;
    out.dilation_radius = prior.dilation_radius + radius;
    match structuring {
        // The Chebyshev ball is a cube, so dilation separates into three
        // 1-D max filters.
        Structuring::Chebyshev => {
            let r = radius as i32;
            let mut cur = prior.clone();
            for axis in 0..3 {
                let src = cur.clone();
                let next: Vec<Vec<[i32; 3]>> = (0..m)
                    .into_par_iter()
                    .map(|k| {
                        let mut cells = Vec::new();
                        for j in 0..m {
                            for i in 0..m {
                                let c = [i, j, k];
                                let hit = (-r..=r).any(|d| {
                                    let mut q = c;
                                    q[axis] += d;
                                    src.get(q)
                                });
                                if hit {
                                    cells.push(c);
                                }
                            }
                        }
                        cells
                    })
                    .collect();
                cur = VoxelPrior::empty(prior.resolution);
                for c in next.into_iter().flatten() {
                    cur.set(c);
                }
            }
            out.bits = cur.bits;
        }
        Structuring::L1 => {
            // r-fold 6-neighborhood dilation yields the Manhattan ball.
            let mut cur = prior.clone();
            for _ in 0..radius {
                let src = cur.clone();
                for c in src.occupied_cells() {
                    for axis in 0..3 {
                        for d in [-1, 1] {
                            let mut q = c;
                            q[axis] += d;
                            cur.set(q);
                        }
                    }
                }
            }
            out.bits = cur.bits;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingEntry {
    pub cell: [i32; 3],
    pub center: Vec3,
    pub morton: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoxelPositionalEncoding {
    pub entries: Vec<EncodingEntry>,
}

impl VoxelPositionalEncoding {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,k,x,y,z\n");
        for e in &self.entries {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.cell[0], e.cell[1], e.cell[2], e.center.x, e.center.y, e.center.z
            ));
        }
        s
    }
}

pub fn positional_encoding(prior: &VoxelPrior) -> VoxelPositionalEncoding {
    let m = prior.resolution as f64;
    let mut entries: Vec<EncodingEntry> = prior
        .occupied_cells()
        .into_iter()
        .map(|c| EncodingEntry {
            cell: c,
            center: Vec3::new(
                (c[0] as f64 + 0.5) / m - 0.5,
                (c[1] as f64 + 0.5) / m - 0.5,
                (c[2] as f64 + 0.5) / m - 0.5,
            ),
            morton: morton_encode(c[0] as u32, c[1] as u32, c[2] as u32),
        })
        .collect();
    entries.sort_by_key(|e| e.morton);
    VoxelPositionalEncoding { entries }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    /// Fine sign-change cells whose coarse ancestor is unoccupied.
    pub missed: Vec<[i32; 3]>,
}

impl CoverageReport {
    pub fn is_covered(&self) -> bool {
        self.missed.is_empty()
    }
}

/// Coarse ancestor of a fine cell. Fine cells outside the domain map to
/// ancestors outside the prior grid, which are never occupied.
#[inline]
pub fn ancestor(cell: &[i32; 3], ratio: i32) -> [i32; 3] {
    [
        cell[0].div_euclid(ratio),
        cell[1].div_euclid(ratio),
        cell[2].div_euclid(ratio),
    ]
}

pub fn coverage_check(prior: &VoxelPrior, grid: &SparseSdfGrid) -> Result<CoverageReport> {
    if prior.resolution == 0 || grid.resolution % prior.resolution != 0 {
        return Err(Error::DimensionMismatch(format!(
            "prior resolution {} does not divide grid resolution {}",
            prior.resolution, grid.resolution
        )));
    }
    let ratio = (grid.resolution / prior.resolution) as i32;
    let missed = grid
        .sign_change_cells()
        .into_iter()
        .filter(|c| !prior.get(ancestor(c, ratio)))
        .collect();
    Ok(CoverageReport { missed })
}
