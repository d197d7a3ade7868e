use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sharpmesh::articulation::fixtures::door_fixture;
use sharpmesh::mesh::primitives::{icosphere, remove_faces, unit_cube};
use sharpmesh::mesh::{save_mesh, MeshFormat};
use sharpmesh::pipeline::{RunManifest, MANIFEST_FILE};
use sharpmesh::TriangleMesh;
use tempfile::TempDir;

fn sharpmesh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharpmesh"))
        .args(args)
        .env_remove("SHARPMESH_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_mesh(dir: &Path, name: &str, mesh: &TriangleMesh) -> PathBuf {
    let p = dir.join(name);
    save_mesh(mesh, &p, MeshFormat::Obj).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(out: &Path) -> RunManifest {
    RunManifest::load(&out.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn remesh_succeeds_and_rerun_skips() {
    let dir = TempDir::new().unwrap();
    let input = write_mesh(dir.path(), "cube.obj", &remove_faces(&unit_cube(), |c| c.z > 0.49));
    let out = dir.path().join("run");
    let o = sharpmesh(&["remesh", s(&input), "--resolution", "32", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("remesh") && l.contains("done")), "{stdout}");
    let first = manifest(&out);

    let o = sharpmesh(&["remesh", s(&input), "--resolution", "32", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).lines().all(|l| l.contains("skipped")));
    assert_eq!(manifest(&out).output_hashes(), first.output_hashes());

    let fresh = dir.path().join("fresh");
    let o = sharpmesh(&["remesh", s(&input), "--resolution", "32", "--out", s(&fresh), "--threads", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&fresh).output_hashes(), first.output_hashes());
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write_mesh(dir.path(), "cube.obj", &unit_cube());
    let out = dir.path().join("run");
    let o = sharpmesh(&["remesh", s(&input), "--resolution", "4", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/remesh/extraction/resolution"));
    assert!(!out.exists());

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"remesh": {"margin": 0.05, "colour": 1}}"#).unwrap();
    let o = sharpmesh(&["remesh", s(&input), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/remesh"));
}

#[test]
fn thread_count_from_environment() {
    let dir = TempDir::new().unwrap();
    let input = write_mesh(dir.path(), "cube.obj", &unit_cube());
    let o = Command::new(env!("CARGO_BIN_EXE_sharpmesh"))
        .args(["remesh", s(&input), "--resolution", "16", "--out", s(&dir.path().join("run"))])
        .env("SHARPMESH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/threads"));
}

#[test]
fn stage_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("broken.obj");
    std::fs::write(&input, "v 0 0 0\nv 1 0 0\nf 1 2 7\n").unwrap();
    let o = sharpmesh(&["remesh", s(&input), "--resolution", "16", "--out", s(&dir.path().join("run"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("normalize"));
}

#[test]
fn extract_runs() {
    let dir = TempDir::new().unwrap();
    let input = write_mesh(dir.path(), "ball.obj", &icosphere(0.4, 2));
    let out = dir.path().join("run");
    let o = sharpmesh(&["extract", s(&input), "--resolution", "64", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("fine.obj").is_file() && out.join("prior.bin").is_file());
}

#[test]
fn parts_runs_without_masks() {
    let dir = TempDir::new().unwrap();
    let input = write_mesh(dir.path(), "ball.obj", &icosphere(0.4, 2));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"parts": {"samples": 500, "resolution": 16}}"#).unwrap();
    let out = dir.path().join("run");
    let o = sharpmesh(&["parts", s(&input), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("parts/part_0.obj").is_file());
}

fn door_parts(dir: &Path) -> PathBuf {
    let parts = dir.join("parts");
    std::fs::create_dir_all(&parts).unwrap();
    for (k, p) in door_fixture().parts.iter().enumerate() {
        write_mesh(&parts, &format!("part_{k}.obj"), p);
    }
    parts
}

#[cfg(unix)]
#[test]
fn articulate_exit_codes() {
    use std::os::unix::fs::PermissionsExt;
    let dir = TempDir::new().unwrap();
    let parts = door_parts(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"articulate": {"name": "door", "views": {"count": 1, "size": 16}}}"#).unwrap();
    let out = dir.path().join("run");
    let o = sharpmesh(&["articulate", s(&parts), "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("door.urdf").is_file());

    let script = dir.path().join("liar.sh");
    std::fs::write(&script, "#!/bin/sh\ncat > /dev/null\necho '{\"index\": 999}'\n").unwrap();
    std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        format!(
            r#"{{"articulate": {{"views": {{"count": 1, "size": 16}}, "adjudicator": {{"mode": "command", "program": "{}"}}}}}}"#,
            script.display()
        ),
    )
    .unwrap();
    let o = sharpmesh(&["articulate", s(&parts), "--config", s(&bad), "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compose_runs_and_reports_missing_assets() {
    let dir = TempDir::new().unwrap();
    write_mesh(dir.path(), "cube.obj", &unit_cube());
    let layout = dir.path().join("layout.json");
    std::fs::write(
        &layout,
        r#"{"placements": [{"asset": "cube.obj"}, {"asset": "cube.obj", "translate": [0.5, 0, 0]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = sharpmesh(&["compose", s(&layout), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let scene: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scene.json")).unwrap()).unwrap();
    assert_eq!(scene["instances"].as_array().unwrap().len(), 2);

    std::fs::write(&layout, r#"{"placements": [{"asset": "nowhere.obj"}]}"#).unwrap();
    let o = sharpmesh(&["compose", s(&layout), "--out", s(&dir.path().join("x"))]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.obj"));
}
