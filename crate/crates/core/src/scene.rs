//! Layout-driven scene composition with AABB collision resolution.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::{load_mesh, MeshFormat, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub asset: String,
    #[serde(default)]
    pub translate: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aabb: Option<BoxSpec>,
}

impl Placement {
    pub fn new(asset: &str, translate: [f64; 3]) -> Self {
        Placement {
            asset: asset.to_string(),
            translate,
            yaw: 0.0,
            scale: 1.0,
            aabb: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneLayout {
    #[serde(default)]
    pub ground: f64,
    pub placements: Vec<Placement>,
}

impl SceneLayout {
    /// Parses and validates; every failure carries a JSON pointer.
    pub fn from_json(text: &str) -> Result<SceneLayout> {
        let layout: SceneLayout = crate::error::from_json(text)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |pointer: String, message: &str| Error::Schema {
            pointer,
            message: message.to_string(),
        };
        if !self.ground.is_finite() {
            return Err(schema("/ground".into(), "must be finite"));
        }
        for (i, p) in self.placements.iter().enumerate() {
            if !(p.scale > 0.0 && p.scale.is_finite()) {
                return Err(schema(format!("/placements/{i}/scale"), "must be positive"));
            }
            if !p.yaw.is_finite() || p.translate.iter().any(|t| !t.is_finite()) {
                return Err(schema(format!("/placements/{i}"), "non-finite transform"));
            }
            if p.asset.is_empty() {
                return Err(schema(format!("/placements/{i}/asset"), "empty asset reference"));
            }
            if let Some(b) = &p.aabb {
                if (0..3).any(|k| !(b.max[k] >= b.min[k])) {
                    return Err(schema(format!("/placements/{i}/aabb"), "max must not be below min"));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SceneLayout> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SceneLayout::from_json(&text)
    }
}

/// Loads every referenced asset, resolving relative paths against `base`.
pub fn load_assets(layout: &SceneLayout, base: &Path) -> Result<HashMap<String, TriangleMesh>> {
    let mut store = HashMap::new();
    for p in &layout.placements {
        if store.contains_key(&p.asset) {
            continue;
        }
        let path: PathBuf = base.join(&p.asset);
        if !path.is_file() {
            return Err(Error::MissingAsset(path.display().to_string()));
        }
        let format = MeshFormat::from_path(&path)
            .ok_or_else(|| Error::param("asset", format!("unknown mesh format for {}", path.display())))?;
        store.insert(p.asset.clone(), load_mesh(&path, format)?);
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub asset: String,
    pub mesh: TriangleMesh,
    pub scale: f64,
    pub yaw: f64,
    pub translation: Vec3,
}

impl Instance {
    pub fn aabb(&self) -> Aabb {
        self.mesh.bbox()
    }

    fn shift(&mut self, t: &Vec3) {
        self.translation += t;
        self.mesh = self.mesh.translated(t);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedScene {
    pub instances: Vec<Instance>,
}

impl ComposedScene {
    pub fn aabb(&self) -> Aabb {
        self.instances.iter().fold(Aabb::empty(), |b, i| b.union(&i.aabb()))
    }
}

fn yawed(v: &Vec3, yaw: f64) -> Vec3 {
    let (s, c) = yaw.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

fn transform(mesh: &TriangleMesh, scale: f64, yaw: f64, t: &Vec3) -> TriangleMesh {
    mesh.map_vertices(|v| yawed(&(v * scale), yaw) + t)
}

/// Scale, then yaw about +z, then translate. A target box replaces the
/// translation and scale with the largest uniform scale that fits, centered.
pub fn place_assets(layout: &SceneLayout, assets: &HashMap<String, TriangleMesh>) -> Result<ComposedScene> {
    layout.validate()?;
    let instances = layout
        .placements
        .par_iter()
        .map(|p| {
            let mesh = assets.get(&p.asset).ok_or_else(|| Error::MissingAsset(p.asset.clone()))?;
            let (scale, translation) = match &p.aabb {
                None => (p.scale, Vec3::from(p.translate)),
                Some(b) => {
                    let rotated = transform(mesh, 1.0, p.yaw, &Vec3::zeros()).bbox();
                    let (e, want) = (rotated.extent(), Vec3::from(b.max) - Vec3::from(b.min));
                    let s = (0..3)
                        .filter(|&k| e[k] > 0.0)
                        .map(|k| want[k] / e[k])
                        .fold(f64::INFINITY, f64::min);
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::param("aabb", format!("cannot fit {} into the target box", p.asset)));
                    }
                    let center = (Vec3::from(b.min) + Vec3::from(b.max)) * 0.5;
                    (s, center - rotated.center() * s)
                }
            };
            Ok(Instance {
                asset: p.asset.clone(),
                mesh: transform(mesh, scale, p.yaw, &translation),
                scale,
                yaw: p.yaw,
                translation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComposedScene { instances })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CollisionReport {
    pub iterations: usize,
    /// Pairs that were moved apart at least once.
    pub resolved_pairs: Vec<(usize, usize)>,
    /// Pairs still closer than the gap when the iteration cap was hit.
    pub unresolved_pairs: Vec<(usize, usize)>,
}

/// Largest per-axis separation; negative when the boxes overlap.
pub fn aabb_gap(a: &Aabb, b: &Aabb) -> f64 {
    (0..3)
        .map(|k| (b.min[k] - a.max[k]).max(a.min[k] - b.max[k]))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn overlap_volume(a: &Aabb, b: &Aabb) -> f64 {
    (0..3)
        .map(|k| (a.max[k].min(b.max[k]) - a.min[k].max(b.min[k])).max(0.0))
        .product()
}

pub fn total_overlap(boxes: &[Aabb]) -> f64 {
    let mut t = 0.0;
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            t += overlap_volume(&boxes[i], &boxes[j]);
        }
    }
    t
}

fn violating(boxes: &[Aabb], min_gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if aabb_gap(&boxes[i], &boxes[j]) < min_gap {
                out.push((i, j));
            }
        }
    }
    out
}

/// Pushes apart pairs whose boxes are closer than `min_gap`, in pair index
/// order, moving the smaller instance horizontally along the cheapest
/// direction that does not increase the total overlap volume.
pub fn resolve_collisions(mut scene: ComposedScene, min_gap: f64, max_iters: usize) -> (ComposedScene, CollisionReport) {
    let mut report = CollisionReport::default();
    let mut boxes: Vec<Aabb> = scene.instances.iter().map(Instance::aabb).collect();
    for _ in 0..max_iters {
        let pairs = violating(&boxes, min_gap);
        if pairs.is_empty() {
            break;
        }
        report.iterations += 1;
        for (i, j) in pairs {
            if aabb_gap(&boxes[i], &boxes[j]) >= min_gap {
                continue;
            }
            let (m, o) = if boxes[i].volume() < boxes[j].volume() { (i, j) } else { (j, i) };
            let (bm, bo) = (boxes[m], boxes[o]);
            let mut moves: Vec<Vec3> = Vec::with_capacity(4);
            for k in 0..2 {
                let mut up = Vec3::zeros();
                up[k] = bo.max[k] + min_gap - bm.min[k];
                let mut down = Vec3::zeros();
                down[k] = (bo.min[k] - min_gap) - bm.max[k];
                moves.push(up);
                moves.push(down);
            }
            moves.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
            let before = total_overlap(&boxes);
            for t in moves {
                let mut trial = boxes.clone();
                trial[m] = bm.translated(&t);
                if total_overlap(&trial) <= before {
                    boxes = trial;
                    scene.instances[m].shift(&t);
                    if !report.resolved_pairs.contains(&(i, j)) {
                        report.resolved_pairs.push((i, j));
                    }
                    break;
                }
            }
        }
    }
    report.unresolved_pairs = violating(&boxes, min_gap);
    report.resolved_pairs.sort_unstable();
    (scene, report)
}

/// Rests every instance on the plane z = `ground`.
pub fn align_to_ground(mut scene: ComposedScene, ground: f64) -> ComposedScene {
    for inst in &mut scene.instances {
        let dz = ground - inst.aabb().min.z;
        if dz != 0.0 {
            inst.translation.z += dz;
            inst.mesh = inst.mesh.map_vertices(|v| Vec3::new(v.x, v.y, v.z + dz));
        }
    }
    scene
}

/// One OBJ with an object group per instance.
pub fn scene_obj(scene: &ComposedScene) -> String {
    let mut s = String::new();
    let mut base = 0;
    for (k, inst) in scene.instances.iter().enumerate() {
        let stem = Path::new(&inst.asset)
            .file_stem()
            .map(|x| x.to_string_lossy().replace(char::is_whitespace, "_"))
            .unwrap_or_default();
        let _ = writeln!(s, "o instance_{k}_{stem}");
        let _ = writeln!(s, "g instance_{k}_{stem}");
        crate::mesh::write_obj_body(&mut s, &inst.mesh, base);
        base += inst.mesh.vertices.len();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub asset: String,
    pub scale: f64,
    pub yaw: f64,
    pub translation: [f64; 3],
    pub aabb: BoxSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneManifest {
    pub ground: f64,
    pub instances: Vec<InstanceRecord>,
    pub collisions: CollisionReport,
    pub aabb: BoxSpec,
}

fn box_spec(b: &Aabb) -> BoxSpec {
    BoxSpec {
        min: [b.min.x, b.min.y, b.min.z],
        max: [b.max.x, b.max.y, b.max.z],
    }
}

pub fn scene_manifest(scene: &ComposedScene, ground: f64, collisions: CollisionReport) -> SceneManifest {
    SceneManifest {
        ground,
        instances: scene
            .instances
            .iter()
            .map(|i| InstanceRecord {
                asset: i.asset.clone(),
                scale: i.scale,
                yaw: i.yaw,
                translation: [i.translation.x, i.translation.y, i.translation.z],
                aabb: box_spec(&i.aabb()),
            })
            .collect(),
        collisions,
        aabb: box_spec(&scene.aabb()),
    }
}

/// Place, rest on the ground, then separate horizontally.
pub fn compose(
    layout: &SceneLayout,
    assets: &HashMap<String, TriangleMesh>,
    min_gap: f64,
    max_iters: usize,
) -> Result<(ComposedScene, SceneManifest)> {
    let placed = align_to_ground(place_assets(layout, assets)?, layout.ground);
    let (scene, report) = resolve_collisions(placed, min_gap, max_iters);
    let manifest = scene_manifest(&scene, layout.ground, report);
    Ok((scene, manifest))
}
