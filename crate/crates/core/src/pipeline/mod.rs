//! End-to-end commands over the library stages, with content-hashed
//! resumability.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{
    AdjudicatorConfig, ArticulateConfig, ComposeConfig, DecimateConfig, ExtractConfig, PartsConfig, PipelineConfig,
    RemeshConfig, ViewsConfig,
};
pub use manifest::{hash_bytes, hash_file, hash_json, Diagnostics, RunManifest, StageRecord, StageRunner, StageStatus, MANIFEST_FILE};

use crate::articulation::{
    adjudicate, assign_physical_props, build_kinematic_graph, fit_motion_range, generate_axis_candidates, group_parts,
    search_interval, Adjudicator, CommandAdjudicator, Grouping, HeuristicAdjudicator, Joint, JointCandidate, JointEdge,
    JointType, FLAG_UNFITTED, FLAG_UNRELIABLE,
};
use crate::decimate::decimate_detailed;
use crate::dmc::{collect_hermite, extract_dual_mesh_detailed, extract_hierarchical, remesh_field, remesh_watertight};
use crate::error::{from_json, Error, Result};
use crate::mesh::{load_mesh, normalize_to_unit_cube, save_mesh, validate, MeshFormat, NormalizationTransform, TriangleMesh};
use crate::parts::{
    mask_nms, project_to_faces, propagate_labels, sample_surface, split_parts, MasksFile, PartLabeling, PointCloudSample,
};
use crate::render::{rasterize, uniform_trajectory, Camera, Lens, RasterImage};
use crate::scene::{compose, load_assets, scene_obj, SceneLayout};
use crate::sdf::{sample_sparse_grid, SparseSdfGrid};
use crate::urdf::export_urdf;
use crate::voxel::{coverage_check, dilate, positional_encoding, voxelize_surface, VoxelPrior};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_ADJUDICATOR: i32 = 4;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Stage { source, .. } => match source.as_ref() {
            Error::AdjudicatorProtocol(_) | Error::AdjudicatorIndex { .. } => EXIT_ADJUDICATOR,
            Error::Schema { .. } => EXIT_VALIDATION,
            _ => EXIT_STAGE,
        },
        Error::AdjudicatorProtocol(_) | Error::AdjudicatorIndex { .. } => EXIT_ADJUDICATOR,
        Error::Schema { .. } | Error::InvalidParameter { .. } => EXIT_VALIDATION,
        _ => EXIT_STAGE,
    }
}

fn inputs<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn outputs(files: &[&str]) -> Vec<String> {
    files.iter().map(|s| s.to_string()).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

fn load_any(path: &Path) -> Result<TriangleMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::param("input", format!("unknown mesh format for {}", path.display())))?;
    load_mesh(path, format)
}

fn save_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_mesh(mesh, path, MeshFormat::Obj)
}

fn mesh_diagnostics(d: &mut Diagnostics, prefix: &str, mesh: &TriangleMesh) {
    let v = validate(mesh);
    d.insert(format!("{prefix}vertices"), json!(mesh.vertices.len()));
    d.insert(format!("{prefix}faces"), json!(mesh.faces.len()));
    d.insert(format!("{prefix}watertight"), json!(v.watertight));
    d.insert(format!("{prefix}manifold"), json!(v.manifold));
}

fn diag<const N: usize>(pairs: [(&str, Value); N]) -> Diagnostics {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

const NORMALIZED: &str = "normalized.obj";
const TRANSFORM: &str = "normalization.json";

fn stage_normalize(run: &mut StageRunner, input: &Path, cfg: &PipelineConfig) -> Result<()> {
    let ins = inputs([("input", hash_file(input)?), ("margin", hash_json(&cfg.remesh.margin))]);
    run.run("normalize", ins, &outputs(&[NORMALIZED, TRANSFORM]), |dir| {
        let mesh = load_any(input)?;
        let (normalized, t) = normalize_to_unit_cube(&mesh, cfg.remesh.margin)?;
        save_obj(&normalized, &dir.join(NORMALIZED))?;
        write_json(&dir.join(TRANSFORM), &t)?;
        let mut d = Diagnostics::new();
        mesh_diagnostics(&mut d, "input_", &mesh);
        Ok(d)
    })
}

fn stage_export(run: &mut StageRunner, source_stage: &str, source: &str) -> Result<()> {
    let ins = inputs([
        ("mesh", run.output_hash(source_stage, source)),
        ("transform", run.output_hash("normalize", TRANSFORM)),
    ]);
    let source = source.to_string();
    run.run("export", ins, &outputs(&["mesh.obj"]), |dir| {
        let mesh = load_mesh(&dir.join(&source), MeshFormat::Obj)?;
        let t: NormalizationTransform = read_json(&dir.join(TRANSFORM))?;
        let restored = mesh.map_vertices(|v| t.apply_inverse(v));
        save_obj(&restored, &dir.join("mesh.obj"))?;
        let mut d = Diagnostics::new();
        mesh_diagnostics(&mut d, "", &restored);
        Ok(d)
    })
}

/// normalize → sample → dual extraction → optional decimation → export in
/// the input frame.
pub fn cmd_remesh(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let mut run = StageRunner::new(out, "remesh", cfg.seed, hash_json(cfg))?;
    stage_normalize(&mut run, input, cfg)?;
    let extraction = cfg.remesh.extraction;

    let ins = inputs([("mesh", run.output_hash("normalize", NORMALIZED)), ("extraction", hash_json(&extraction))]);
    run.run("sample", ins, &outputs(&["grid.bin"]), |dir| {
        let mesh = load_mesh(&dir.join(NORMALIZED), MeshFormat::Obj)?;
        let field = remesh_field(&mesh)?;
        let grid = sample_sparse_grid(&field, extraction.resolution, extraction.band_width())?;
        grid.save(&dir.join("grid.bin"))?;
        Ok(diag([
            ("active_cells", json!(grid.cells.len())),
            ("band_cells", json!(grid.stats.band_cells)),
            ("closure_cells", json!(grid.stats.closure_cells)),
            ("corner_evaluations", json!(grid.stats.corner_evaluations)),
        ]))
    })?;

    let ins = inputs([
        ("mesh", run.output_hash("normalize", NORMALIZED)),
        ("grid", run.output_hash("sample", "grid.bin")),
        ("extraction", hash_json(&extraction)),
    ]);
    run.run("remesh", ins, &outputs(&["remeshed.obj"]), |dir| {
        let mesh = load_mesh(&dir.join(NORMALIZED), MeshFormat::Obj)?;
        let grid = SparseSdfGrid::load(&dir.join("grid.bin"))?;
        let field = remesh_field(&mesh)?;
        let hermite = collect_hermite(&grid, &field);
        let dual = extract_dual_mesh_detailed(&grid, &hermite, &extraction, true)?;
        save_obj(&dual.mesh, &dir.join("remeshed.obj"))?;
        let mut d = diag([("qef_fallbacks", json!(dual.stats.qef_fallbacks))]);
        mesh_diagnostics(&mut d, "", &dual.mesh);
        Ok(d)
    })?;

    let mut last = ("remesh", "remeshed.obj");
    if let Some(dec) = &cfg.remesh.decimate {
        let ins = inputs([("mesh", run.output_hash("remesh", "remeshed.obj")), ("decimate", hash_json(dec))]);
        run.run("decimate", ins, &outputs(&["decimated.obj"]), |dir| {
            let mesh = load_mesh(&dir.join("remeshed.obj"), MeshFormat::Obj)?;
            let out = decimate_detailed(&mesh, dec.target_faces, dec.preserve_sharp, dec.sharp_angle_degrees.to_radians())?;
            save_obj(&out.mesh, &dir.join("decimated.obj"))?;
            let mut d = diag([
                ("collapses", json!(out.report.collapses)),
                ("stopped_early", json!(out.report.stopped_early)),
            ]);
            mesh_diagnostics(&mut d, "", &out.mesh);
            Ok(d)
        })?;
        last = ("decimate", "decimated.obj");
    }
    stage_export(&mut run, last.0, last.1)?;
    Ok(run.finish())
}

/// normalize → coarse remesh → voxelize + dilate → prior-pruned extraction
/// at full resolution → export.
pub fn cmd_extract(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    cfg.validate_extract()?;
    let mut run = StageRunner::new(out, "extract", cfg.seed, hash_json(cfg))?;
    stage_normalize(&mut run, input, cfg)?;
    let extraction = cfg.remesh.extraction;
    let coarse_res = extraction.resolution / cfg.extract.coarse_divisor;

    let ins = inputs([
        ("mesh", run.output_hash("normalize", NORMALIZED)),
        ("extraction", hash_json(&extraction)),
        ("prior", hash_json(&(cfg.extract.coarse_divisor, cfg.extract.dilation, cfg.extract.structuring))),
    ]);
    run.run("prior", ins, &outputs(&["coarse.obj", "prior.bin", "prior_encoding.csv"]), |dir| {
        let mesh = load_mesh(&dir.join(NORMALIZED), MeshFormat::Obj)?;
        let coarse = remesh_watertight(&mesh, &extraction.with_resolution(coarse_res))?;
        if coarse.mesh.faces.is_empty() {
            log::warn!("coarse mesh is empty; the prior covers nothing");
            let path = dir.join("coarse.obj");
            std::fs::write(&path, "").map_err(|e| Error::io(&path, e))?;
        } else {
            save_obj(&coarse.mesh, &dir.join("coarse.obj"))?;
        }
        let mut prior = dilate(&voxelize_surface(&coarse.mesh, coarse_res)?, cfg.extract.dilation, cfg.extract.structuring);
        prior.source = run_source(input);
        prior.save(&dir.join("prior.bin"))?;
        let csv = positional_encoding(&prior).to_csv();
        let path = dir.join("prior_encoding.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        Ok(diag([
            ("coarse_resolution", json!(coarse_res)),
            ("coarse_faces", json!(coarse.mesh.faces.len())),
            ("occupied_cells", json!(prior.occupied_count())),
        ]))
    })?;

    let ins = inputs([
        ("mesh", run.output_hash("normalize", NORMALIZED)),
        ("prior", run.output_hash("prior", "prior.bin")),
        ("extraction", hash_json(&extraction)),
        ("verify_coverage", cfg.extract.verify_coverage.to_string()),
    ]);
    run.run("extract", ins, &outputs(&["fine.obj", "coverage.json"]), |dir| {
        let mesh = load_mesh(&dir.join(NORMALIZED), MeshFormat::Obj)?;
        let prior = VoxelPrior::load(&dir.join("prior.bin"))?;
        let field = remesh_field(&mesh)?;
        let out = extract_hierarchical(&field, &prior, &extraction)?;
        let mut missed = out.missing_cells.clone();
        if cfg.extract.verify_coverage {
            let dense = sample_sparse_grid(&field, extraction.resolution, extraction.band_width())?;
            missed.extend(coverage_check(&prior, &dense)?.missed);
            missed.sort_unstable();
            missed.dedup();
        }
        write_json(
            &dir.join("coverage.json"),
            &json!({
                "covered": missed.is_empty(),
                "verified_against_dense": cfg.extract.verify_coverage,
                "missing_cells": missed,
            }),
        )?;
        if !missed.is_empty() {
            return Err(Error::BandIncomplete { cells: missed });
        }
        save_obj(&out.mesh, &dir.join("fine.obj"))?;
        let mut d = diag([
            ("qef_fallbacks", json!(out.extraction.qef_fallbacks)),
            ("fine_evaluations", json!(out.stats.fine_evaluations)),
            ("mid_evaluations", json!(out.stats.mid_evaluations)),
            ("corner_evaluations", json!(out.stats.corner_evaluations)),
            ("warnings", json!(out.warnings)),
        ]);
        mesh_diagnostics(&mut d, "", &out.mesh);
        Ok(d)
    })?;
    stage_export(&mut run, "extract", "fine.obj")?;
    Ok(run.finish())
}

fn run_source(input: &Path) -> String {
    input.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn part_file(k: usize) -> String {
    format!("parts/part_{k}.obj")
}

/// sample → NMS + projection + propagation → split → per-part remesh.
/// Without masks the whole mesh is a single part.
pub fn cmd_parts(input: &Path, masks: Option<&Path>, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let masks_file: Option<(MasksFile, String, Option<PathBuf>)> = match masks {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let file: MasksFile = from_json(&text)?;
            let external = p.parent().unwrap_or(Path::new(".")).join(&file.points_file);
            let external = (!file.points_file.is_empty() && external.is_file()).then_some(external);
            Some((file, hash_bytes(text.as_bytes()), external))
        }
    };
    let mut run = StageRunner::new(out, "parts", cfg.seed, hash_json(cfg))?;
    let input_hash = hash_file(input)?;
    let pc = &cfg.parts;

    let external = masks_file.as_ref().and_then(|m| m.2.clone());
    let external_hash = match &external {
        Some(p) => hash_file(p)?,
        None => String::new(),
    };
    let ins = inputs([
        ("input", input_hash.clone()),
        ("samples", pc.samples.to_string()),
        ("seed", cfg.seed.to_string()),
        ("points", external_hash),
    ]);
    run.run("sample", ins, &outputs(&["points.csv"]), |dir| {
        let mesh = load_any(input)?;
        let sample = match &external {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let s = PointCloudSample::from_csv(&text)?;
                if let Some(&f) = s.faces.iter().find(|&&f| f as usize >= mesh.faces.len()) {
                    return Err(Error::param("points", format!("face {f} out of range")));
                }
                s
            }
            None => sample_surface(&mesh, pc.samples, cfg.seed)?,
        };
        let path = dir.join("points.csv");
        std::fs::write(&path, sample.to_csv()).map_err(|e| Error::io(&path, e))?;
        Ok(diag([("points", json!(sample.len())), ("external", json!(external.is_some()))]))
    })?;

    let ins = inputs([
        ("input", input_hash.clone()),
        ("points", run.output_hash("sample", "points.csv")),
        ("masks", masks_file.as_ref().map(|m| m.1.clone()).unwrap_or_default()),
        ("nms_threshold", hash_json(&pc.nms_threshold)),
    ]);
    run.run("label", ins, &outputs(&["labeling.json", "kept_masks.json"]), |dir| {
        let mesh = load_any(input)?;
        let path = dir.join("points.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sample = PointCloudSample::from_csv(&text)?;
        let masks = match &masks_file {
            Some((f, _, _)) => f.to_masks(sample.len())?,
            None => Vec::new(),
        };
        let kept = mask_nms(&masks, pc.nms_threshold);
        let mut warnings = Vec::new();
        let (labeling, report) = if kept.is_empty() {
            let w = "no masks survived; the whole mesh is one part";
            log::warn!("{w}");
            warnings.push(w.to_string());
            (PartLabeling::single_part(mesh.faces.len()), Default::default())
        } else {
            propagate_labels(&project_to_faces(&kept, &sample, &mesh), &mesh)
        };
        labeling.save_json(&dir.join("labeling.json"))?;
        write_json(&dir.join("kept_masks.json"), &MasksFile::from_masks("points.csv", &kept))?;
        Ok(diag([
            ("masks", json!(masks.len())),
            ("kept_masks", json!(kept.len())),
            ("parts", json!(labeling.part_count)),
            ("propagated_faces", json!(report.propagated_faces)),
            ("fresh_components", json!(report.fresh_components)),
            ("warnings", json!(warnings)),
        ]))
    })?;

    let labeling: PartLabeling = read_json(&run.path("labeling.json"))?;
    let files: Vec<String> = (0..labeling.part_count as usize).map(part_file).collect();
    let ins = inputs([
        ("input", input_hash),
        ("labeling", run.output_hash("label", "labeling.json")),
        ("resolution", pc.resolution.to_string()),
        ("remesh", hash_json(&(cfg.remesh.margin, cfg.remesh.extraction))),
    ]);
    run.run("split", ins, &files, |dir| {
        let mesh = load_any(input)?;
        let (_, t) = normalize_to_unit_cube(&mesh, cfg.remesh.margin)?;
        let config = cfg.remesh.extraction.with_resolution(pc.resolution);
        let pieces = split_parts(&labeling, &mesh);
        let mut watertight = Vec::with_capacity(pieces.len());
        let mut faces = Vec::with_capacity(pieces.len());
        for (k, piece) in pieces.iter().enumerate() {
            let local = piece.map_vertices(|v| t.apply(v));
            let remeshed = remesh_watertight(&local, &config)?.mesh;
            let part = remeshed.map_vertices(|v| t.apply_inverse(v));
            watertight.push(validate(&part).watertight);
            faces.push(part.faces.len());
            save_obj(&part, &dir.join(part_file(k)))?;
        }
        Ok(diag([("parts", json!(pieces.len())), ("watertight", json!(watertight)), ("faces", json!(faces))]))
    })?;
    Ok(run.finish())
}

/// Loads `part_0.obj`, `part_1.obj`, … from a directory; ids must be
/// contiguous from zero.
pub fn load_part_dir(dir: &Path) -> Result<Vec<(PathBuf, TriangleMesh)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(k) = name.strip_prefix("part_").and_then(|s| s.strip_suffix(".obj")).and_then(|s| s.parse::<usize>().ok()) {
            ids.push(k);
        }
    }
    ids.sort_unstable();
    if ids.is_empty() {
        return Err(Error::MissingAsset(dir.join("part_0.obj").display().to_string()));
    }
    if let Some(gap) = (0..ids.len()).find(|&i| ids[i] != i) {
        return Err(Error::MissingAsset(dir.join(format!("part_{gap}.obj")).display().to_string()));
    }
    ids.into_iter()
        .map(|k| {
            let p = dir.join(format!("part_{k}.obj"));
            load_mesh(&p, MeshFormat::Obj).map(|m| (p, m))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAnalysis {
    pub parent: usize,
    pub child: usize,
    pub disconnected: bool,
    pub candidates: Vec<JointCandidate>,
    /// Chosen candidate; `None` for disconnected parts.
    pub chosen: Option<usize>,
    pub joint_type: JointType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub root: usize,
    pub edges: Vec<EdgeAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFit {
    pub child: usize,
    pub lower: f64,
    pub upper: f64,
    pub flags: Vec<String>,
    pub frame_ious: Vec<f64>,
}

fn merged_except(parts: &[TriangleMesh], child: usize) -> TriangleMesh {
    let mut rest = TriangleMesh::default();
    for (k, p) in parts.iter().enumerate() {
        if k != child {
            rest.append(p);
        }
    }
    rest
}

fn make_adjudicator(cfg: &AdjudicatorConfig) -> Box<dyn Adjudicator> {
    match cfg {
        AdjudicatorConfig::Heuristic => Box::new(HeuristicAdjudicator),
        AdjudicatorConfig::Command { program, args } => Box::new(CommandAdjudicator::new(program.clone(), args.clone())),
    }
}

fn render_views(parts: &[TriangleMesh], views: &ViewsConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    if views.count == 0 {
        return Ok(Vec::new());
    }
    let mut all = TriangleMesh::default();
    for p in parts {
        all.append(p);
    }
    let b = all.bbox();
    let lens = Lens::Orthographic {
        half_height: 0.6 * b.diagonal().max(1e-9),
    };
    let cams = uniform_trajectory(
        views.count,
        views.elevation_degrees.to_radians(),
        views.radius * b.diagonal().max(1e-9),
        b.center(),
        lens,
        views.size,
        views.size,
    )?;
    let vdir = dir.join("views");
    std::fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
    cams.iter()
        .enumerate()
        .map(|(k, cam)| {
            let p = vdir.join(format!("view_{k}.pbm"));
            rasterize(&all, cam).save_pbm(&p)?;
            Ok(p)
        })
        .collect()
}

/// Target silhouettes for `child`: `part_<child>/*.pbm` sorted by name.
fn load_targets(targets: &Path, child: usize) -> Result<Option<Vec<RasterImage>>> {
    let dir = targets.join(format!("part_{child}"));
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pbm"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Ok(None);
    }
    files.iter().map(|p| RasterImage::load_pbm(p)).collect::<Result<Vec<_>>>().map(Some)
}

fn hash_tree(dir: &Path) -> Result<String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = e.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut listing = Vec::with_capacity(files.len());
    for f in &files {
        let rel = f.strip_prefix(dir).unwrap_or(f).to_string_lossy().into_owned();
        listing.push((rel, hash_file(f)?));
    }
    Ok(hash_json(&listing))
}

/// grouping → candidate pools → adjudication → silhouette fits → physical
/// properties → kinematic graph and URDF.
pub fn cmd_articulate(parts_dir: &Path, targets: Option<&Path>, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let ac = &cfg.articulate;
    let loaded = load_part_dir(parts_dir)?;
    let part_hashes: Vec<String> = loaded.iter().map(|(p, _)| hash_file(p)).collect::<Result<_>>()?;
    let parts: Vec<TriangleMesh> = loaded.into_iter().map(|(_, m)| m).collect();
    let mut run = StageRunner::new(out, "articulate", cfg.seed, hash_json(cfg))?;

    let ins = inputs([
        ("parts", hash_json(&part_hashes)),
        ("contact_tolerance", hash_json(&ac.contact_tolerance)),
        ("adjudicator", hash_json(&ac.adjudicator)),
        ("views", hash_json(&ac.views)),
    ]);
    let mut analysis_outputs = outputs(&["grouping.json", "analysis.json"]);
    analysis_outputs.extend((0..ac.views.count).map(|k| format!("views/view_{k}.pbm")));
    run.run("analyze", ins, &analysis_outputs, |dir| {
        let grouping = group_parts(&parts, ac.contact_tolerance)?;
        write_json(&dir.join("grouping.json"), &grouping)?;
        let views = render_views(&parts, &ac.views, dir)?;
        let adjudicator = make_adjudicator(&ac.adjudicator);
        let edges = analyze_edges(&grouping, &parts, ac.contact_tolerance, &views, adjudicator.as_ref())?;
        write_json(&dir.join("analysis.json"), &Analysis { root: grouping.root, edges: edges.clone() })?;
        Ok(diag([
            ("edges", json!(edges.len())),
            ("disconnected", json!(grouping.disconnected.len())),
            ("root", json!(grouping.root)),
        ]))
    })?;

    let Analysis { root, edges: analysis } = read_json(&run.path("analysis.json"))?;
    let targets_hash = match targets {
        Some(t) if t.is_dir() => hash_tree(t)?,
        _ => String::new(),
    };
    let ins = inputs([("analysis", run.output_hash("analyze", "analysis.json")), ("targets", targets_hash)]);
    run.run("fit", ins, &outputs(&["fits.json"]), |dir| {
        let camera: Option<Camera> = match targets {
            Some(t) if t.join("camera.json").is_file() => Some(read_json(&t.join("camera.json"))?),
            _ => None,
        };
        let mut fits = Vec::new();
        let (mut unfitted, mut unreliable) = (0usize, 0usize);
        for e in &analysis {
            let Some(chosen) = e.chosen else { continue };
            if e.joint_type == JointType::Fixed {
                continue;
            }
            let joint = &e.candidates[chosen];
            let rest = merged_except(&parts, e.child);
            let frames = match (targets, &camera) {
                (Some(t), Some(_)) => load_targets(t, e.child)?,
                _ => None,
            };
            let fit = match (frames, &camera) {
                (Some(frames), Some(cam)) => {
                    let m = fit_motion_range(&rest, &parts[e.child], joint, e.joint_type, &frames, cam)?;
                    let mut flags = Vec::new();
                    if m.unreliable_frames() > 0 {
                        unreliable += m.unreliable_frames();
                        flags.push(FLAG_UNRELIABLE.to_string());
                    }
                    EdgeFit {
                        child: e.child,
                        lower: m.lower,
                        upper: m.upper,
                        flags,
                        frame_ious: m.frames.iter().map(|f| f.iou).collect(),
                    }
                }
                _ => {
                    unfitted += 1;
                    let (lower, upper) = search_interval(&rest, e.joint_type);
                    EdgeFit {
                        child: e.child,
                        lower,
                        upper,
                        flags: vec![FLAG_UNFITTED.to_string()],
                        frame_ious: Vec::new(),
                    }
                }
            };
            fits.push(fit);
        }
        write_json(&dir.join("fits.json"), &fits)?;
        Ok(diag([("unfitted_joints", json!(unfitted)), ("unreliable_frames", json!(unreliable))]))
    })?;

    let fits: Vec<EdgeFit> = read_json(&run.path("fits.json"))?;
    let urdf_file = format!("{}.urdf", ac.name);
    let mut export_outputs = outputs(&["graph.json", "props.json", &urdf_file]);
    export_outputs.extend((0..parts.len()).map(|k| format!("meshes/part_{k}.obj")));
    let ins = inputs([
        ("parts", hash_json(&part_hashes)),
        ("analysis", run.output_hash("analyze", "analysis.json")),
        ("fits", run.output_hash("fit", "fits.json")),
        ("physics", hash_json(&(ac.density, &ac.densities, ac.friction, &ac.name))),
    ]);
    run.run("export", ins, &export_outputs, |dir| {
        let densities: Vec<f64> = (0..parts.len()).map(|k| ac.densities.get(k).copied().unwrap_or(ac.density)).collect();
        let props = assign_physical_props(&parts, &densities, &vec![ac.friction; parts.len()])?;
        let mut edges = Vec::new();
        for e in analysis.iter().filter(|e| !e.disconnected) {
            let c = &e.candidates[e.chosen.expect("connected edges are adjudicated")];
            let (joint, flags) = if e.joint_type == JointType::Fixed {
                (Joint::fixed(c.origin), Vec::new())
            } else {
                let f = fits.iter().find(|f| f.child == e.child).expect("fit per moving joint");
                (
                    Joint {
                        joint_type: e.joint_type,
                        axis: c.axis.normalize(),
                        origin: c.origin,
                        lower: f.lower,
                        upper: f.upper,
                    },
                    f.flags.clone(),
                )
            };
            edges.push(JointEdge {
                parent: e.parent,
                child: e.child,
                joint,
                flags,
            });
        }
        let graph = build_kinematic_graph(parts.len(), root, edges)?;
        let mdir = dir.join("meshes");
        std::fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
        let mut names = Vec::with_capacity(parts.len());
        for (k, p) in parts.iter().enumerate() {
            save_obj(p, &mdir.join(format!("part_{k}.obj")))?;
            names.push(format!("meshes/part_{k}.obj"));
        }
        write_json(&dir.join("graph.json"), &graph)?;
        write_json(&dir.join("props.json"), &props)?;
        export_urdf(&dir.join(&urdf_file), &ac.name, &graph, &props, &names, dir)?;
        Ok(diag([
            ("revolute", json!(graph.count(JointType::Revolute))),
            ("prismatic", json!(graph.count(JointType::Prismatic))),
            ("fixed", json!(graph.count(JointType::Fixed))),
            ("total_mass", json!(props.iter().map(|p| p.mass).sum::<f64>())),
        ]))
    })?;
    Ok(run.finish())
}

fn analyze_edges(
    grouping: &Grouping,
    parts: &[TriangleMesh],
    tol: f64,
    views: &[PathBuf],
    adjudicator: &dyn Adjudicator,
) -> Result<Vec<EdgeAnalysis>> {
    grouping
        .tree
        .iter()
        .map(|&(parent, child)| {
            if grouping.disconnected.contains(&child) {
                return Ok(EdgeAnalysis {
                    parent,
                    child,
                    disconnected: true,
                    candidates: Vec::new(),
                    chosen: None,
                    joint_type: JointType::Fixed,
                });
            }
            let candidates = generate_axis_candidates(&parts[child], &parts[parent], tol)?;
            let (chosen, joint_type) = adjudicate(&candidates, views, adjudicator)?;
            let index = candidates.iter().position(|c| *c == chosen).expect("chosen from the pool");
            Ok(EdgeAnalysis {
                parent,
                child,
                disconnected: false,
                candidates,
                chosen: Some(index),
                joint_type,
            })
        })
        .collect()
}

const SCENE_OBJ: &str = "scene.obj";
const SCENE_JSON: &str = "scene.json";

/// place → ground → collision resolution → OBJ and manifest.
pub fn cmd_compose(layout_path: &Path, cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let layout = SceneLayout::load(layout_path)?;
    let base = layout_path.parent().unwrap_or(Path::new("."));
    let mut asset_hashes = BTreeMap::new();
    for p in &layout.placements {
        let path = base.join(&p.asset);
        if !path.is_file() {
            return Err(Error::MissingAsset(path.display().to_string()));
        }
        if !asset_hashes.contains_key(&p.asset) {
            asset_hashes.insert(p.asset.clone(), hash_file(&path)?);
        }
    }
    let mut run = StageRunner::new(out, "compose", cfg.seed, hash_json(cfg))?;
    let ins = inputs([
        ("layout", hash_file(layout_path)?),
        ("assets", hash_json(&asset_hashes)),
        ("compose", hash_json(&cfg.compose)),
    ]);
    run.run("compose", ins, &outputs(&[SCENE_OBJ, SCENE_JSON]), |dir| {
        let assets = load_assets(&layout, base)?;
        let (scene, manifest) = compose(&layout, &assets, cfg.compose.min_gap, cfg.compose.max_iters)?;
        let path = dir.join(SCENE_OBJ);
        std::fs::write(&path, scene_obj(&scene)).map_err(|e| Error::io(&path, e))?;
        write_json(&dir.join(SCENE_JSON), &manifest)?;
        Ok(diag([
            ("instances", json!(scene.instances.len())),
            ("resolved_pairs", json!(manifest.collisions.resolved_pairs)),
            ("unresolved_collisions", json!(manifest.collisions.unresolved_pairs.len())),
            ("iterations", json!(manifest.collisions.iterations)),
        ]))
    })?;
    Ok(run.finish())
}
