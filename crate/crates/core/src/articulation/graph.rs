use serde::{Deserialize, Serialize};

use super::JointType;
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const FLAG_DISCONNECTED: &str = "disconnected";
pub const FLAG_UNFITTED: &str = "unfitted";
pub const FLAG_UNRELIABLE: &str = "unreliable";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub axis: Vec3,
    /// World-space point on the axis.
    pub origin: Vec3,
    pub lower: f64,
    pub upper: f64,
}

impl Joint {
    pub fn fixed(origin: Vec3) -> Joint {
        Joint {
            joint_type: JointType::Fixed,
            axis: Vec3::z(),
            origin,
            lower: 0.0,
            upper: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEdge {
    pub parent: usize,
    pub child: usize,
    pub joint: Joint,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicGraph {
    pub part_count: usize,
    pub root: usize,
    /// Sorted by child id.
    pub edges: Vec<JointEdge>,
}

impl KinematicGraph {
    pub fn parent_edge(&self, child: usize) -> Option<&JointEdge> {
        self.edges.iter().find(|e| e.child == child)
    }

    pub fn children(&self, parent: usize) -> impl Iterator<Item = &JointEdge> {
        self.edges.iter().filter(move |e| e.parent == parent)
    }

    /// Nodes in breadth-first order from the root.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order = vec![self.root];
        let mut i = 0;
        while i < order.len() {
            let p = order[i];
            order.extend(self.children(p).map(|e| e.child));
            i += 1;
        }
        order
    }

    pub fn count(&self, t: JointType) -> usize {
        self.edges.iter().filter(|e| e.joint.joint_type == t).count()
    }
}

fn check_joint(e: &JointEdge) -> Result<Joint> {
    let mut j = e.joint.clone();
    let tag = format!("joint {}->{}", e.parent, e.child);
    let n = j.axis.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidGraph(format!("{tag}: axis is not unit length")));
    }
    if !(j.lower <= j.upper) {
        return Err(Error::InvalidGraph(format!("{tag}: lower limit exceeds upper")));
    }
    match j.joint_type {
        JointType::Revolute if j.lower < -2.0 * std::f64::consts::PI || j.upper > 2.0 * std::f64::consts::PI => {
            return Err(Error::InvalidGraph(format!("{tag}: revolute limits exceed 2π")));
        }
        JointType::Fixed => {
            j.lower = 0.0;
            j.upper = 0.0;
        }
        _ => {}
    }
    Ok(j)
}

/// Validates the caller's edges as a tree rooted at `root`. Parts with no
/// incoming edge are attached to the root with flagged fixed joints.
pub fn build_kinematic_graph(part_count: usize, root: usize, edges: Vec<JointEdge>) -> Result<KinematicGraph> {
    if root >= part_count {
        return Err(Error::InvalidGraph(format!("root {root} out of range for {part_count} parts")));
    }
    let mut parent: Vec<Option<usize>> = vec![None; part_count];
    let mut checked = Vec::with_capacity(edges.len());
    for mut e in edges {
        if e.parent >= part_count || e.child >= part_count {
            return Err(Error::InvalidGraph(format!("edge {}->{} names a missing part", e.parent, e.child)));
        }
        if e.parent == e.child {
            return Err(Error::Cycle(vec![e.child]));
        }
        if let Some(p) = parent[e.child] {
            return Err(Error::InvalidGraph(format!("part {} has two parents ({p} and {})", e.child, e.parent)));
        }
        parent[e.child] = Some(e.parent);
        e.joint = check_joint(&e)?;
        checked.push(e);
    }
    for start in 0..part_count {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(p) = parent[cur] {
            if let Some(pos) = path.iter().position(|&x| x == p) {
                let mut cycle = path[pos..].to_vec();
                cycle.sort_unstable();
                return Err(Error::Cycle(cycle));
            }
            path.push(p);
            cur = p;
        }
    }
    if let Some(p) = parent[root] {
        return Err(Error::InvalidGraph(format!("root {root} has parent {p}")));
    }
    for (k, p) in parent.iter().enumerate() {
        if k != root && p.is_none() {
            checked.push(JointEdge {
                parent: root,
                child: k,
                joint: Joint::fixed(Vec3::zeros()),
                flags: vec![FLAG_DISCONNECTED.to_string()],
            });
        }
    }
    checked.sort_by_key(|e| e.child);
    Ok(KinematicGraph {
        part_count,
        root,
        edges: checked,
    })
}
