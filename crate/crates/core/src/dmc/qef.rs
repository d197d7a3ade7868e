use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{sorted_symmetric_eigen, Aabb, Vec3};

/// Relative eigenvalue cutoff below which a QEF direction is treated as
/// unconstrained and left at the mass point.
const SINGULAR_CUTOFF: f64 = 1e-9;

/// Lawson refinement steps run after the p-ramp in linf mode.
pub const LAWSON_ITERS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QefMode {
    L2,
    #[default]
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneConstraint {
    pub point: Vec3,
    /// Unit normal.
    pub normal: Vec3,
    pub weight: f64,
}

impl PlaneConstraint {
    #[inline]
    pub fn residual(&self, x: &Vec3) -> f64 {
        self.normal.dot(&(x - self.point))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QefProblem {
    pub constraints: Vec<PlaneConstraint>,
    pub mass_point: Vec3,
    pub bounds: Aabb,
}

impl QefProblem {
    pub fn new(constraints: Vec<PlaneConstraint>, bounds: Aabb) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::param("constraints", "QEF needs at least one plane"));
        }
        for c in &constraints {
            if (c.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::param("normal", format!("non-unit normal {:?}", c.normal)));
            }
        }
        let mass_point =
            constraints.iter().map(|c| c.point).sum::<Vec3>() / constraints.len() as f64;
        Ok(QefProblem {
            constraints,
            mass_point,
            bounds,
        })
    }

    /// max wᵢ·|rᵢ(x)|
    pub fn max_residual(&self, x: &Vec3) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.weight * c.residual(x).abs())
            .fold(0.0, f64::max)
    }

    /// Σ wᵢ rᵢ(x)² + λ|x − mass point|²
    pub fn l2_objective(&self, x: &Vec3, lambda: f64) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.weight * c.residual(x).powi(2))
            .sum::<f64>()
            + lambda * (x - self.mass_point).norm_squared()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QefSolution {
    pub vertex: Vec3,
    /// Some direction of the system was degenerate and fell back to the
    /// mass point.
    pub singular: bool,
    pub max_residual: f64,
}

/// Minimizes Σ ωᵢ rᵢ² + λ|x − m|² with per-constraint weights `omega`.
/// Degenerate eigen-directions of the normal matrix stay at the mass point.
fn weighted_least_squares(problem: &QefProblem, omega: &[f64], lambda: f64) -> (Vec3, bool) {
    let m = problem.mass_point;
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vec3::zeros();
    for (c, &w) in problem.constraints.iter().zip(omega) {
        a += c.normal * c.normal.transpose() * w;
        // residual measured from the mass point: n·(m + y − p) = 0
        b += c.normal * (w * c.normal.dot(&(c.point - m)));
    }
    a += Matrix3::identity() * lambda;
    let (vals, vecs) = sorted_symmetric_eigen(&a);
    let cutoff = SINGULAR_CUTOFF * vals[0].abs().max(f64::MIN_POSITIVE);
    let mut y = Vec3::zeros();
    let mut singular = false;
    for i in 0..3 {
        let v = vecs.column(i).into_owned();
        if vals[i] > cutoff {
            y += v * (v.dot(&b) / vals[i]);
        } else {
            singular = true;
        }
    }
    (m + y, singular)
}

fn clamp_to(bounds: &Aabb, x: Vec3) -> Vec3 {
    Vec3::new(
        x.x.clamp(bounds.min.x, bounds.max.x),
        x.y.clamp(bounds.min.y, bounds.max.y),
        x.z.clamp(bounds.min.z, bounds.max.z),
    )
}

pub fn solve_l2(problem: &QefProblem, lambda: f64) -> (Vec3, bool) {
    let omega: Vec<f64> = problem.constraints.iter().map(|c| c.weight).collect();
    weighted_least_squares(problem, &omega, lambda)
}

/// Iterates of the linf solver. Each entry is the best point so far and its
/// max residual, so the residual sequence is non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct LinfTrace {
    pub iterates: Vec<(Vec3, f64)>,
    pub singular: bool,
}

/// Approximate minimax placement: IRLS with weights ∝ |rᵢ|^(p−2) as p ramps
/// from 2 to 8 over `iters` steps, then Lawson's multiplicative updates.
/// Weights are rescaled to keep the constraint mass equal to Σ wᵢ, so `lambda`
/// regularizes on the same scale as in l2 mode.
pub fn solve_linf_trace(problem: &QefProblem, lambda: f64, iters: usize) -> LinfTrace {
    let base: Vec<f64> = problem.constraints.iter().map(|c| c.weight).collect();
    let mass: f64 = base.iter().sum();
    let (mut x, mut singular) = weighted_least_squares(problem, &base, lambda);
    let mut best = (x, problem.max_residual(&x));
    let mut iterates = vec![best];
    let floor = 1e-12 * problem.bounds.diagonal().max(1e-300);
    let iters = iters.max(1);

    let normalize = |omega: &mut Vec<f64>| {
        let s: f64 = omega.iter().sum();
        if s > 0.0 {
            for w in omega.iter_mut() {
                *w *= mass / s;
            }
        }
    };

    for k in 1..iters {
        let p = 2.0 + 6.0 * k as f64 / (iters - 1).max(1) as f64;
        let mut omega: Vec<f64> = problem
            .constraints
            .iter()
            .zip(&base)
            .map(|(c, &w)| w * (w * c.residual(&x).abs()).max(floor).powf(p - 2.0))
            .collect();
        normalize(&mut omega);
        let (nx, s) = weighted_least_squares(problem, &omega, lambda);
        singular |= s;
        x = nx;
        let r = problem.max_residual(&x);
        if r < best.1 {
            best = (x, r);
        }
        iterates.push(best);
    }

    // Lawson: uᵢ ← uᵢ·wᵢ|rᵢ|, which converges to the minimax solution.
    let mut u = base.clone();
    normalize(&mut u);
    x = best.0;
    for _ in 0..LAWSON_ITERS {
        let mut next: Vec<f64> = problem
            .constraints
            .iter()
            .zip(&u)
            .map(|(c, &ui)| ui * (c.weight * c.residual(&x).abs()).max(floor))
            .collect();
        normalize(&mut next);
        u = next;
        let omega: Vec<f64> = u.iter().zip(&base).map(|(ui, w)| ui * w).collect();
        let (nx, s) = weighted_least_squares(problem, &omega, lambda);
        singular |= s;
        x = nx;
        let r = problem.max_residual(&x);
        if r < best.1 {
            best = (x, r);
        }
        iterates.push(best);
        if best.1 <= floor {
            break;
        }
    }
    LinfTrace { iterates, singular }
}

pub fn solve_qef(problem: &QefProblem, mode: QefMode, lambda: f64, irls_iters: usize, clamp: bool) -> QefSolution {
    let (x, singular) = match mode {
        QefMode::L2 => solve_l2(problem, lambda),
        QefMode::Linf => {
            let trace = solve_linf_trace(problem, lambda, irls_iters);
            (trace.iterates.last().expect("at least one iterate").0, trace.singular)
        }
    };
    let vertex = if clamp { clamp_to(&problem.bounds, x) } else { x };
    QefSolution {
        vertex,
        singular,
        max_residual: problem.max_residual(&vertex),
    }
}
