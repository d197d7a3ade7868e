use rayon::prelude::*;
use serde::Serialize;

use super::{JointCandidate, JointType};
use crate::error::{Error, Result};
use crate::geom::rotate_about_axis;
use crate::mesh::TriangleMesh;
use crate::render::{rasterize, silhouette_iou, Camera, RasterImage};

pub const SWEEP_SAMPLES: usize = 65;
pub const UNRELIABLE_IOU: f64 = 0.5;
const REFINE_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameFit {
    pub theta: f64,
    pub iou: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionFit {
    pub lower: f64,
    pub upper: f64,
    pub frames: Vec<FrameFit>,
    /// The searched parameter interval.
    pub interval: (f64, f64),
}

impl MotionFit {
    pub fn unreliable_frames(&self) -> usize {
        self.frames.iter().filter(|f| !f.reliable).count()
    }
}

/// Child pose at joint parameter `theta` (radians or world units).
pub fn transform_child(child: &TriangleMesh, joint: &JointCandidate, joint_type: JointType, theta: f64) -> TriangleMesh {
    match joint_type {
        JointType::Revolute => child.map_vertices(|v| rotate_about_axis(v, &joint.origin, &joint.axis, theta)),
        JointType::Prismatic => child.translated(&(joint.axis * theta)),
        JointType::Fixed => child.clone(),
    }
}

pub fn posed_scene(parent: &TriangleMesh, child: &TriangleMesh, joint: &JointCandidate, joint_type: JointType, theta: f64) -> TriangleMesh {
    let mut scene = parent.clone();
    scene.append(&transform_child(child, joint, joint_type, theta));
    scene
}

/// Joint parameter range searched by the fit; also the default limits of an
/// unfitted joint.
pub fn search_interval(parent: &TriangleMesh, joint_type: JointType) -> (f64, f64) {
    match joint_type {
        JointType::Revolute => (-std::f64::consts::PI, std::f64::consts::PI),
        JointType::Prismatic => {
            let d = parent.bbox().diagonal();
            (-d, d)
        }
        JointType::Fixed => (0.0, 0.0),
    }
}

fn fit_frame(objective: impl Fn(f64) -> f64, interval: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = interval;
    if hi <= lo {
        return (lo, objective(lo));
    }
    let step = (hi - lo) / (SWEEP_SAMPLES - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..SWEEP_SAMPLES {
        let t = lo + step * k as f64;
        let v = objective(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > REFINE_RESOLUTION {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

/// Per-frame joint parameter maximizing silhouette IoU against each target,
/// by a uniform sweep followed by golden-section refinement around the best
/// sample. The range is the span of the per-frame optima.
pub fn fit_motion_range(
    parent: &TriangleMesh,
    child: &TriangleMesh,
    joint: &JointCandidate,
    joint_type: JointType,
    targets: &[RasterImage],
    camera: &Camera,
) -> Result<MotionFit> {
    if targets.is_empty() {
        return Err(Error::param("targets", "no target frames"));
    }
    camera.validate()?;
    for t in targets {
        if t.width != camera.width || t.height != camera.height {
            return Err(Error::DimensionMismatch(format!(
                "target {}x{} vs camera {}x{}",
                t.width, t.height, camera.width, camera.height
            )));
        }
    }
    let interval = search_interval(parent, joint_type);
    let frames: Vec<FrameFit> = targets
        .par_iter()
        .map(|target| {
            let objective = |theta: f64| {
                let img = rasterize(&posed_scene(parent, child, joint, joint_type, theta), camera);
                silhouette_iou(&img, target).expect("dimensions checked")
            };
            let (theta, iou) = fit_frame(objective, interval);
            FrameFit {
                theta,
                iou,
                reliable: iou >= UNRELIABLE_IOU,
            }
        })
        .collect();
    let lower = frames.iter().map(|f| f.theta).fold(f64::INFINITY, f64::min);
    let upper = frames.iter().map(|f| f.theta).fold(f64::NEG_INFINITY, f64::max);
    Ok(MotionFit {
        lower,
        upper,
        frames,
        interval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_then_refine_finds_smooth_peak() {
        let (t, v) = fit_frame(|x| -(x - 0.4321).powi(2), (-3.0, 3.0));
        assert!((t - 0.4321).abs() < 1e-3, "{t}");
        assert!(v <= 0.0);
    }

    #[test]
    fn degenerate_interval() {
        assert_eq!(fit_frame(|_| 1.0, (0.0, 0.0)), (0.0, 1.0));
    }
}
