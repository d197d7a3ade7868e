//! Articulation inference over decomposed parts.

mod adjudicate;
mod candidates;
pub mod fixtures;
mod fit;
mod graph;
mod grouping;
mod physics;

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

pub use adjudicate::{adjudicate, Adjudicator, CommandAdjudicator, Decision, HeuristicAdjudicator};
pub use candidates::{generate_axis_candidates, Obb};
pub use fit::{fit_motion_range, posed_scene, search_interval, transform_child, FrameFit, MotionFit, SWEEP_SAMPLES, UNRELIABLE_IOU};
pub use graph::{build_kinematic_graph, Joint, JointEdge, KinematicGraph, FLAG_DISCONNECTED, FLAG_UNFITTED, FLAG_UNRELIABLE};
pub use grouping::{contact_points, group_parts, Contact, Grouping};
pub use physics::{assign_physical_props, mass_properties, MassProperties, PhysicalProps, DEFAULT_DENSITY, DEFAULT_FRICTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Fixed,
    Revolute,
    Prismatic,
}

impl JointType {
    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Fixed => "fixed",
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
        }
    }
}

/// Which geometric operator produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    ObbAxis,
    ObbEdge,
    ContactPca,
    ContactNormal,
}

impl Generator {
    /// Higher wins ties in the heuristic adjudicator.
    pub fn priority(self) -> u8 {
        match self {
            Generator::ObbEdge => 3,
            Generator::ContactPca => 2,
            Generator::ContactNormal => 1,
            Generator::ObbAxis => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCandidate {
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub axis: Vec3,
    pub origin: Vec3,
    #[serde(rename = "tag")]
    pub generator: Generator,
    pub score: f64,
}

/// Flip `v` so that its largest-magnitude component is positive.
pub fn canonical_axis(v: &Vec3) -> Vec3 {
    let v = v.normalize();
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}
