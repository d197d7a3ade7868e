//! Narrow-band sparse sampling of a signed distance field on a virtual N³
//! lattice over [−0.5, 0.5]³.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::distance::DistanceField;
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub type CellIndex = [i32; 3];

const GRID_MAGIC: &[u8; 8] = b"SMSDFG01";

/// Corner `c` of a cell sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
#[inline]
pub fn corner_offset(c: usize) -> [i32; 3] {
    [(c & 1) as i32, ((c >> 1) & 1) as i32, ((c >> 2) & 1) as i32]
}

#[inline]
pub fn lattice_coord(i: i32, resolution: u32) -> f64 {
    i as f64 / resolution as f64 - 0.5
}

#[inline]
pub fn lattice_point(p: &CellIndex, resolution: u32) -> Vec3 {
    Vec3::new(
        lattice_coord(p[0], resolution),
        lattice_coord(p[1], resolution),
        lattice_coord(p[2], resolution),
    )
}

#[inline]
pub fn cell_center(c: &CellIndex, resolution: u32) -> Vec3 {
    let n = resolution as f64;
    Vec3::new(
        (c[0] as f64 + 0.5) / n - 0.5,
        (c[1] as f64 + 0.5) / n - 0.5,
        (c[2] as f64 + 0.5) / n - 0.5,
    )
}

#[inline]
pub fn is_inside_value(v: f64) -> bool {
    v < 0.0
}

/// The 12 cell edges as (corner a, corner b, axis) with a < b.
pub const CELL_EDGES: [(usize, usize, usize); 12] = [
    (0, 1, 0),
    (2, 3, 0),
    (4, 5, 0),
    (6, 7, 0),
    (0, 2, 1),
    (1, 3, 1),
    (4, 6, 1),
    (5, 7, 1),
    (0, 4, 2),
    (1, 5, 2),
    (2, 6, 2),
    (3, 7, 2),
];

/// The four cells sharing the lattice edge that starts at `p` along `axis`,
/// in counter-clockwise order seen from the +axis side.
pub fn cells_around_edge(p: &CellIndex, axis: usize) -> [CellIndex; 4] {
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let at = |du: i32, dv: i32| {
        let mut c = *p;
        c[u] -= du;
        c[v] -= dv;
        c
    };
    [at(1, 1), at(0, 1), at(0, 0), at(1, 0)]
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SamplingStats {
    /// Fine cells whose center distance was evaluated.
    pub center_evaluations: usize,
    /// Lattice points whose signed distance was evaluated.
    pub corner_evaluations: usize,
    /// Active cells admitted by the distance band.
    pub band_cells: usize,
    /// Active cells admitted only because they touch a sign change.
    pub closure_cells: usize,
}

/// Narrow-band signed distance samples: active cells with their 8 corner
/// values, sorted by cell index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSdfGrid {
    pub resolution: u32,
    pub band: f64,
    pub cells: BTreeMap<CellIndex, [f64; 8]>,
    pub stats: SamplingStats,
}

impl SparseSdfGrid {
    pub fn cell_size(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn has_sign_change(corners: &[f64; 8]) -> bool {
        let first = is_inside_value(corners[0]);
        corners.iter().any(|&v| is_inside_value(v) != first)
    }

    pub fn sign_change_cells(&self) -> Vec<CellIndex> {
        self.cells
            .iter()
            .filter(|(_, c)| Self::has_sign_change(c))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&self.resolution.to_le_bytes())?;
        w.write_all(&self.band.to_le_bytes())?;
        w.write_all(&(self.cells.len() as u64).to_le_bytes())?;
        for (k, corners) in &self.cells {
            for c in k {
                w.write_all(&c.to_le_bytes())?;
            }
            for v in corners {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<SparseSdfGrid> {
        let mut all = Vec::new();
        r.read_to_end(&mut all)
            .map_err(|e| Error::parse("byte 0", e.to_string()))?;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            let s = all
                .get(*pos..*pos + n)
                .ok_or_else(|| Error::parse(format!("byte {pos}"), "unexpected end of grid file"))?;
            *pos += n;
            Ok(s)
        };
        let mut pos = 0;
        if take(&mut pos, 8)? != GRID_MAGIC {
            return Err(Error::parse("byte 0", "bad sparse grid magic"));
        }
        let resolution = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        let band = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let mut cells = BTreeMap::new();
        for _ in 0..count {
            let mut k = [0i32; 3];
            for c in &mut k {
                *c = i32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
            }
            let mut corners = [0.0; 8];
            for v in &mut corners {
                *v = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
            }
            cells.insert(k, corners);
        }
        Ok(SparseSdfGrid {
            resolution,
            band,
            cells,
            stats: SamplingStats::default(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        self.write_binary(&mut f).map_err(|e| Error::io(path, e))?;
        f.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<SparseSdfGrid> {
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(&mut f)
    }
}

pub fn validate_grid_params(resolution: u32, band: f64) -> Result<()> {
    if resolution < 8 {
        return Err(Error::param("resolution", format!("{resolution} < 8")));
    }
    let h = 1.0 / resolution as f64;
    if !(band >= 2.0 * h) {
        return Err(Error::param("band", format!("{band} < 2h = {}", 2.0 * h)));
    }
    Ok(())
}

/// Shared machinery for the flood-fill and the prior-pruned samplers.
pub(crate) struct GridBuilder<'a, F: DistanceField + ?Sized> {
    field: &'a F,
    pub resolution: u32,
    pub band: f64,
    lattice: HashMap<CellIndex, f64>,
    pub active: HashSet<CellIndex>,
    pub stats: SamplingStats,
    lo: i32,
    hi: i32,
}

impl<'a, F: DistanceField + ?Sized> GridBuilder<'a, F> {
    pub fn new(field: &'a F, resolution: u32, band: f64) -> Self {
        let pad = (band * resolution as f64).ceil() as i32 + 2;
        GridBuilder {
            field,
            resolution,
            band,
            lattice: HashMap::new(),
            active: HashSet::new(),
            stats: SamplingStats::default(),
            lo: -pad,
            hi: resolution as i32 + pad,
        }
    }

    pub fn in_range(&self, c: &CellIndex) -> bool {
        c.iter().all(|&x| x >= self.lo && x < self.hi)
    }

    /// Activate every candidate whose center lies within the band. Returns
    /// the per-candidate verdicts in input order.
    pub fn test_band(&mut self, candidates: &[CellIndex]) -> Vec<bool> {
        let n = self.resolution;
        let band = self.band;
        let field = self.field;
        let verdicts: Vec<bool> = candidates
            .par_iter()
            .map(|c| field.unsigned_distance(&cell_center(c, n)) <= band)
            .collect();
        self.stats.center_evaluations += candidates.len();
        for (c, &ok) in candidates.iter().zip(&verdicts) {
            if ok && self.active.insert(*c) {
                self.stats.band_cells += 1;
            }
        }
        verdicts
    }

    /// Evaluate every not-yet-known lattice corner of `cells`.
    pub fn evaluate_corners(&mut self, cells: &[CellIndex]) {
        let mut needed: Vec<CellIndex> = cells
            .iter()
            .flat_map(|c| {
                (0..8).map(move |k| {
                    let o = corner_offset(k);
                    [c[0] + o[0], c[1] + o[1], c[2] + o[2]]
                })
            })
            .filter(|p| !self.lattice.contains_key(p))
            .collect();
        needed.sort_unstable();
        needed.dedup();
        let n = self.resolution;
        let field = self.field;
        let values: Vec<f64> = needed
            .par_iter()
            .map(|p| field.signed_distance(&lattice_point(p, n)).distance)
            .collect();
        self.stats.corner_evaluations += needed.len();
        self.lattice.extend(needed.into_iter().zip(values));
    }

    fn corners(&self, c: &CellIndex) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (k, slot) in out.iter_mut().enumerate() {
            let o = corner_offset(k);
            *slot = self.lattice[&[c[0] + o[0], c[1] + o[1], c[2] + o[2]]];
        }
        out
    }

    /// Grow the active set until every cell sharing a sign-change edge with
    /// an active cell is itself active (subject to `allow`).
    pub fn close_sign_changes(&mut self, allow: impl Fn(&CellIndex) -> bool) {
        let mut frontier: Vec<CellIndex> = self.active.iter().copied().collect();
        frontier.sort_unstable();
        self.evaluate_corners(&frontier);
        while !frontier.is_empty() {
            let mut added: Vec<CellIndex> = Vec::new();
            for c in &frontier {
                let corners = self.corners(c);
                for &(a, b, axis) in &CELL_EDGES {
                    if is_inside_value(corners[a]) == is_inside_value(corners[b]) {
                        continue;
                    }
                    let o = corner_offset(a);
                    let p = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                    for n in cells_around_edge(&p, axis) {
                        if !self.active.contains(&n) && self.in_range(&n) && allow(&n) {
                            added.push(n);
                        }
                    }
                }
            }
            added.sort_unstable();
            added.dedup();
            self.evaluate_corners(&added);
            for c in &added {
                self.active.insert(*c);
            }
            self.stats.closure_cells += added.len();
            frontier = added;
        }
    }

    pub fn finish(self) -> SparseSdfGrid {
        let mut keys: Vec<CellIndex> = self.active.iter().copied().collect();
        keys.sort_unstable();
        let cells = keys.iter().map(|c| (*c, self.corners(c))).collect();
        SparseSdfGrid {
            resolution: self.resolution,
            band: self.band,
            cells,
            stats: self.stats,
        }
    }
}

/// Breadth-first narrow-band sampling. Starting from the cells that contain
/// surface, a cell is active when its center's unsigned distance is at most
/// `band`; the band is then closed under sign-change adjacency so every
/// sign-change edge has all four of its cells. Corner values are evaluated
/// once per lattice point.
pub fn sample_sparse_grid<F: DistanceField + ?Sized>(
    field: &F,
    resolution: u32,
    band: f64,
) -> Result<SparseSdfGrid> {
    validate_grid_params(resolution, band)?;
    let mut b = GridBuilder::new(field, resolution, band);
    let mut visited: HashSet<CellIndex> = HashSet::new();
    let mut level: Vec<CellIndex> = field
        .seed_cells(resolution)
        .into_iter()
        .filter(|c| b.in_range(c))
        .collect();
    level.sort_unstable();
    level.dedup();
    visited.extend(level.iter().copied());
    while !level.is_empty() {
        let verdicts = b.test_band(&level);
        let mut next = Vec::new();
        for (c, ok) in level.iter().zip(verdicts) {
            if !ok {
                continue;
            }
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let n = [c[0] + dx, c[1] + dy, c[2] + dz];
                        if b.in_range(&n) && visited.insert(n) {
                            next.push(n);
                        }
                    }
                }
            }
        }
        next.sort_unstable();
        level = next;
    }
    b.close_sign_changes(|_| true);
    Ok(b.finish())
}
