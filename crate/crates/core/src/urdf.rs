//! URDF export of kinematic graphs and a reader for the subset we write.
//!
//! Every link frame sits at the world position of its incoming joint origin
//! (the root at the world origin), unrotated, so meshes stored in world
//! coordinates get a visual offset of minus the link frame.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Matrix3, Rotation3};

use crate::articulation::{build_kinematic_graph, Joint, JointEdge, JointType, KinematicGraph, PhysicalProps};
use crate::error::{Error, Result};
use crate::geom::Vec3;

const EFFORT: f64 = 100.0;
const VELOCITY: f64 = 1.0;

pub fn link_name(k: usize) -> String {
    format!("part_{k}")
}

pub fn joint_name(parent: usize, child: usize) -> String {
    format!("joint_{parent}_{child}")
}

fn v3(v: &Vec3) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn link_frames(graph: &KinematicGraph) -> Vec<Vec3> {
    let mut frames = vec![Vec3::zeros(); graph.part_count];
    for e in &graph.edges {
        frames[e.child] = e.joint.origin;
    }
    frames
}

/// URDF text for `graph`. `meshes[k]` is the file name of part k, resolved
/// against `mesh_dir` for the existence check and written as given.
pub fn urdf_string(
    name: &str,
    graph: &KinematicGraph,
    props: &[PhysicalProps],
    meshes: &[String],
    mesh_dir: &Path,
) -> Result<String> {
    let graph = build_kinematic_graph(graph.part_count, graph.root, graph.edges.clone())?;
    if props.len() != graph.part_count || meshes.len() != graph.part_count {
        return Err(Error::DimensionMismatch(format!(
            "{} parts, {} property sets, {} meshes",
            graph.part_count,
            props.len(),
            meshes.len()
        )));
    }
    for m in meshes {
        if !mesh_dir.join(m).is_file() {
            return Err(Error::MissingAsset(mesh_dir.join(m).display().to_string()));
        }
    }
    let frames = link_frames(&graph);
    let mut s = format!("<?xml version=\"1.0\"?>\n<robot name=\"{}\">\n", escape(name));
    for k in 0..graph.part_count {
        let p = &props[k];
        let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(p.principal_axes).euler_angles();
        let mesh = escape(&meshes[k]);
        let offset = v3(&-frames[k]);
        s += &format!("  <link name=\"{}\">\n", link_name(k));
        s += "    <inertial>\n";
        s += &format!(
            "      <origin xyz=\"{}\" rpy=\"{roll} {pitch} {yaw}\"/>\n",
            v3(&(p.centroid - frames[k]))
        );
        s += &format!("      <mass value=\"{}\"/>\n", p.mass);
        s += &format!(
            "      <inertia ixx=\"{}\" ixy=\"0\" ixz=\"0\" iyy=\"{}\" iyz=\"0\" izz=\"{}\"/>\n",
            p.inertia.x, p.inertia.y, p.inertia.z
        );
        s += "    </inertial>\n";
        for tag in ["visual", "collision"] {
            s += &format!(
                "    <{tag}>\n      <origin xyz=\"{offset}\" rpy=\"0 0 0\"/>\n      <geometry><mesh filename=\"{mesh}\"/></geometry>\n    </{tag}>\n"
            );
        }
        s += &format!(
            "    <contact><lateral_friction value=\"{}\"/><density value=\"{}\"/></contact>\n",
            p.friction, p.density
        );
        s += "  </link>\n";
    }
    for e in &graph.edges {
        let j = &e.joint;
        s += &format!(
            "  <joint name=\"{}\" type=\"{}\">\n",
            joint_name(e.parent, e.child),
            j.joint_type.as_str()
        );
        s += &format!("    <parent link=\"{}\"/>\n", link_name(e.parent));
        s += &format!("    <child link=\"{}\"/>\n", link_name(e.child));
        s += &format!("    <origin xyz=\"{}\" rpy=\"0 0 0\"/>\n", v3(&(j.origin - frames[e.parent])));
        if j.joint_type != JointType::Fixed {
            s += &format!("    <axis xyz=\"{}\"/>\n", v3(&j.axis));
            s += &format!(
                "    <limit lower=\"{}\" upper=\"{}\" effort=\"{EFFORT}\" velocity=\"{VELOCITY}\"/>\n",
                j.lower, j.upper
            );
        }
        s += "  </joint>\n";
    }
    s += "</robot>\n";
    Ok(s)
}

pub fn export_urdf(
    path: &Path,
    name: &str,
    graph: &KinematicGraph,
    props: &[PhysicalProps],
    meshes: &[String],
    mesh_dir: &Path,
) -> Result<()> {
    let text = urdf_string(name, graph, props, meshes, mesh_dir)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfLink {
    pub mass: f64,
    /// Diagonal inertia in the inertial frame.
    pub inertia: Vec3,
    pub inertial_axes: Matrix3<f64>,
    /// World-space center of mass.
    pub centroid: Vec3,
    pub mesh: Option<String>,
    pub friction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrdfModel {
    pub name: String,
    pub graph: KinematicGraph,
    pub links: Vec<UrdfLink>,
}

fn parse_vec(s: &str, what: &str) -> Result<Vec3> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse("urdf", format!("bad {what} {s:?}")))?;
    if v.len() != 3 {
        return Err(Error::parse("urdf", format!("{what} needs 3 numbers")));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn num(node: roxmltree::Node, attr: &str) -> Result<f64> {
    node.attribute(attr)
        .ok_or_else(|| Error::parse("urdf", format!("<{}> lacks {attr}", node.tag_name().name())))?
        .parse()
        .map_err(|_| Error::parse("urdf", format!("bad {attr} on <{}>", node.tag_name().name())))
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, tag: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn part_index(name: &str) -> Result<usize> {
    name.strip_prefix("part_")
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| Error::parse("urdf", format!("link {name:?} is not named part_k")))
}

fn origin_of(node: Option<roxmltree::Node>) -> Result<(Vec3, Vec3)> {
    match node {
        None => Ok((Vec3::zeros(), Vec3::zeros())),
        Some(o) => Ok((
            o.attribute("xyz").map_or(Ok(Vec3::zeros()), |s| parse_vec(s, "xyz"))?,
            o.attribute("rpy").map_or(Ok(Vec3::zeros()), |s| parse_vec(s, "rpy"))?,
        )),
    }
}

/// Reads URDF written by `export_urdf` back into a graph.
pub fn read_urdf(text: &str) -> Result<UrdfModel> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::parse("urdf", e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(Error::parse("urdf", "root element is not <robot>"));
    }
    let mut raw_links: HashMap<usize, (UrdfLink, Vec3)> = HashMap::new();
    for l in robot.children().filter(|c| c.has_tag_name("link")) {
        let k = part_index(l.attribute("name").unwrap_or(""))?;
        let mut link = UrdfLink {
            mass: 0.0,
            inertia: Vec3::zeros(),
            inertial_axes: Matrix3::identity(),
            centroid: Vec3::zeros(),
            mesh: child(l, "visual")
                .and_then(|v| child(v, "geometry"))
                .and_then(|g| child(g, "mesh"))
                .and_then(|m| m.attribute("filename"))
                .map(str::to_string),
            friction: child(l, "contact")
                .and_then(|c| child(c, "lateral_friction"))
                .map(|f| num(f, "value"))
                .transpose()?,
        };
        let mut local_centroid = Vec3::zeros();
        if let Some(i) = child(l, "inertial") {
            let (xyz, rpy) = origin_of(child(i, "origin"))?;
            local_centroid = xyz;
            link.inertial_axes = *Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z).matrix();
            if let Some(m) = child(i, "mass") {
                link.mass = num(m, "value")?;
            }
            if let Some(t) = child(i, "inertia") {
                link.inertia = Vec3::new(num(t, "ixx")?, num(t, "iyy")?, num(t, "izz")?);
            }
        }
        if raw_links.insert(k, (link, local_centroid)).is_some() {
            return Err(Error::parse("urdf", format!("duplicate link part_{k}")));
        }
    }
    let n = raw_links.len();
    if (0..n).any(|k| !raw_links.contains_key(&k)) {
        return Err(Error::parse("urdf", "link indices are not contiguous from part_0"));
    }

    struct RawJoint {
        parent: usize,
        child: usize,
        joint_type: JointType,
        offset: Vec3,
        axis: Vec3,
        lower: f64,
        upper: f64,
    }
    let mut raw = Vec::new();
    for j in robot.children().filter(|c| c.has_tag_name("joint")) {
        let joint_type = match j.attribute("type") {
            Some("fixed") => JointType::Fixed,
            Some("revolute") => JointType::Revolute,
            Some("prismatic") => JointType::Prismatic,
            other => return Err(Error::parse("urdf", format!("unsupported joint type {other:?}"))),
        };
        let link_of = |tag: &str| -> Result<usize> {
            part_index(child(j, tag).and_then(|n| n.attribute("link")).unwrap_or(""))
        };
        let (offset, _) = origin_of(child(j, "origin"))?;
        let axis = child(j, "axis")
            .and_then(|a| a.attribute("xyz"))
            .map_or(Ok(Vec3::z()), |s| parse_vec(s, "axis"))?;
        let (lower, upper) = match child(j, "limit") {
            Some(l) if joint_type != JointType::Fixed => (num(l, "lower")?, num(l, "upper")?),
            _ => (0.0, 0.0),
        };
        raw.push(RawJoint {
            parent: link_of("parent")?,
            child: link_of("child")?,
            joint_type,
            offset,
            axis,
            lower,
            upper,
        });
    }
    let children: Vec<usize> = raw.iter().map(|j| j.child).collect();
    let root = (0..n)
        .find(|k| !children.contains(k))
        .ok_or_else(|| Error::parse("urdf", "no root link"))?;

    // Accumulate world frames breadth-first from the root.
    let mut frames: Vec<Option<Vec3>> = vec![None; n];
    frames[root] = Some(Vec3::zeros());
    let mut progressed = true;
    while progressed {
        progressed = false;
        for j in &raw {
            if j.parent >= n || j.child >= n {
                return Err(Error::parse("urdf", "joint references a missing link"));
            }
            if let (Some(p), None) = (frames[j.parent], frames[j.child]) {
                frames[j.child] = Some(p + j.offset);
                progressed = true;
            }
        }
    }
    let mut edges = Vec::with_capacity(raw.len());
    for j in &raw {
        let origin = frames[j.child].ok_or_else(|| Error::Cycle(vec![j.parent, j.child]))?;
        edges.push(JointEdge {
            parent: j.parent,
            child: j.child,
            joint: Joint {
                joint_type: j.joint_type,
                axis: j.axis,
                origin,
                lower: j.lower,
                upper: j.upper,
            },
            flags: Vec::new(),
        });
    }
    let graph = build_kinematic_graph(n, root, edges)?;
    let links = (0..n)
        .map(|k| {
            let (mut link, local) = raw_links.remove(&k).expect("contiguous");
            link.centroid = local + frames[k].unwrap_or_default();
            link
        })
        .collect();
    Ok(UrdfModel {
        name: robot.attribute("name").unwrap_or("").to_string(),
        graph,
        links,
    })
}

pub fn load_urdf(path: &Path) -> Result<UrdfModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_urdf(&text)
}
