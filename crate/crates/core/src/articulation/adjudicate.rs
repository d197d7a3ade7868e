use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::candidates::rank_cmp;
use super::{JointCandidate, JointType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub index: usize,
    pub joint_type: JointType,
}

pub trait Adjudicator: Sync {
    fn decide(&self, candidates: &[JointCandidate], views: &[PathBuf]) -> Result<Decision>;
}

/// Highest score, then generator priority, then lowest index; the joint type
/// is the candidate's own.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAdjudicator;

impl Adjudicator for HeuristicAdjudicator {
    fn decide(&self, candidates: &[JointCandidate], _views: &[PathBuf]) -> Result<Decision> {
        let mut best = 0;
        for i in 1..candidates.len() {
            if rank_cmp(&candidates[i], &candidates[best]).is_lt() {
                best = i;
            }
        }
        Ok(Decision {
            index: best,
            joint_type: candidates[best].joint_type,
        })
    }
}

#[derive(Serialize)]
struct Request<'a> {
    candidates: &'a [JointCandidate],
    views: Vec<String>,
}

/// Out-of-process adjudication: the request goes to standard input as JSON
/// and the reply `{index, joint_type}` is read from standard output.
#[derive(Debug, Clone)]
pub struct CommandAdjudicator {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandAdjudicator {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        CommandAdjudicator { program: program.into(), args }
    }
}

impl Adjudicator for CommandAdjudicator {
    fn decide(&self, candidates: &[JointCandidate], views: &[PathBuf]) -> Result<Decision> {
        let proto = |m: String| Error::AdjudicatorProtocol(m);
        let request = serde_json::to_vec(&Request {
            candidates,
            views: views.iter().map(|p| p.display().to_string()).collect(),
        })
        .map_err(|e| proto(e.to_string()))?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| proto(format!("cannot start {}: {e}", self.program)))?;
        // A process that exits without reading its input closes the pipe.
        let _ = child.stdin.take().expect("piped stdin").write_all(&request);
        let out = child.wait_with_output().map_err(|e| proto(e.to_string()))?;
        if !out.status.success() {
            return Err(proto(format!("{} exited with {}", self.program, out.status)));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| {
            proto(format!(
                "malformed reply {:?}: {e}",
                String::from_utf8_lossy(&out.stdout).trim()
            ))
        })
    }
}

/// Picks one candidate. A single-candidate pool is returned without asking.
pub fn adjudicate(
    candidates: &[JointCandidate],
    views: &[PathBuf],
    adjudicator: &dyn Adjudicator,
) -> Result<(JointCandidate, JointType)> {
    match candidates.len() {
        0 => Err(Error::param("candidates", "pool is empty")),
        1 => Ok((candidates[0].clone(), candidates[0].joint_type)),
        len => {
            let d = adjudicator.decide(candidates, views)?;
            if d.index >= len {
                return Err(Error::AdjudicatorIndex { index: d.index, len });
            }
            Ok((candidates[d.index].clone(), d.joint_type))
        }
    }
}
