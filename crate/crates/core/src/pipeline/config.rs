use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dmc::ExtractionConfig;
use crate::error::{from_json, Error, Result};
use crate::voxel::Structuring;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecimateConfig {
    pub target_faces: usize,
    pub preserve_sharp: bool,
    pub sharp_angle_degrees: f64,
}

impl Default for DecimateConfig {
    fn default() -> Self {
        DecimateConfig {
            target_faces: 5000,
            preserve_sharp: true,
            sharp_angle_degrees: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemeshConfig {
    pub margin: f64,
    pub extraction: ExtractionConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decimate: Option<DecimateConfig>,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        RemeshConfig {
            margin: 0.05,
            extraction: ExtractionConfig::default(),
            decimate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    /// The prior is built at `extraction.resolution / coarse_divisor`.
    pub coarse_divisor: u32,
    pub dilation: u32,
    pub structuring: Structuring,
    /// Also sample the dense band and check the prior against it.
    pub verify_coverage: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            coarse_divisor: 8,
            dilation: 1,
            structuring: Structuring::Chebyshev,
            verify_coverage: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartsConfig {
    pub samples: usize,
    pub nms_threshold: f64,
    /// Per-part remesh resolution.
    pub resolution: u32,
}

impl Default for PartsConfig {
    fn default() -> Self {
        PartsConfig {
            samples: 20_000,
            nms_threshold: crate::parts::DEFAULT_NMS_THRESHOLD,
            resolution: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "lowercase")]
pub enum AdjudicatorConfig {
    Heuristic,
    Command {
        program: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewsConfig {
    pub count: usize,
    pub elevation_degrees: f64,
    pub radius: f64,
    pub size: u32,
}

impl Default for ViewsConfig {
    fn default() -> Self {
        ViewsConfig {
            count: 4,
            elevation_degrees: 30.0,
            radius: 3.0,
            size: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArticulateConfig {
    pub name: String,
    pub contact_tolerance: f64,
    pub density: f64,
    /// Per-part overrides of `density`, indexed by part id.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<f64>,
    pub friction: f64,
    pub adjudicator: AdjudicatorConfig,
    pub views: ViewsConfig,
}

impl Default for ArticulateConfig {
    fn default() -> Self {
        ArticulateConfig {
            name: "object".to_string(),
            contact_tolerance: 0.005,
            density: crate::articulation::DEFAULT_DENSITY,
            densities: Vec::new(),
            friction: crate::articulation::DEFAULT_FRICTION,
            adjudicator: AdjudicatorConfig::Heuristic,
            views: ViewsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComposeConfig {
    pub min_gap: f64,
    pub max_iters: usize,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        ComposeConfig {
            min_gap: 0.01,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub remesh: RemeshConfig,
    pub extract: ExtractConfig,
    pub parts: PartsConfig,
    pub articulate: ArticulateConfig,
    pub compose: ComposeConfig,
}

fn bad(pointer: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn finite_in(pointer: &str, v: f64, lo: f64, hi: f64, open_lo: bool) -> Result<()> {
    let ok = v.is_finite() && v <= hi && if open_lo { v > lo } else { v >= lo };
    if ok {
        Ok(())
    } else {
        let l = if open_lo { "(" } else { "[" };
        Err(bad(pointer, format!("{v} outside {l}{lo}, {hi}]")))
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        let c: PipelineConfig = from_json(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_json(&text)
    }

    /// Range checks for every numeric parameter; errors point at the field.
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(bad("/threads", "must be at least 1"));
            }
        }
        let r = &self.remesh;
        if !(r.margin.is_finite() && (0.0..0.5).contains(&r.margin)) {
            return Err(bad("/remesh/margin", format!("{} outside [0, 0.5)", r.margin)));
        }
        let e = &r.extraction;
        if e.resolution < 8 {
            return Err(bad("/remesh/extraction/resolution", format!("{} < 8", e.resolution)));
        }
        if e.resolution > 4096 {
            return Err(bad("/remesh/extraction/resolution", format!("{} > 4096", e.resolution)));
        }
        finite_in("/remesh/extraction/lambda", e.lambda, 0.0, 1e6, false)?;
        if e.irls_iters < 1 {
            return Err(bad("/remesh/extraction/irls_iters", "must be at least 1"));
        }
        finite_in("/remesh/extraction/band", e.band, 2.0, 64.0, false)?;
        if let Some(d) = &r.decimate {
            if d.target_faces < 4 {
                return Err(bad("/remesh/decimate/target_faces", format!("{} < 4", d.target_faces)));
            }
            finite_in("/remesh/decimate/sharp_angle_degrees", d.sharp_angle_degrees, 0.0, 180.0, true)?;
        }

        let x = &self.extract;
        if x.coarse_divisor < 1 || e.resolution % x.coarse_divisor != 0 {
            return Err(bad(
                "/extract/coarse_divisor",
                format!("{} does not divide resolution {}", x.coarse_divisor, e.resolution),
            ));
        }
        if x.dilation > 16 {
            return Err(bad("/extract/dilation", format!("{} > 16", x.dilation)));
        }

        let p = &self.parts;
        if p.samples < 1 {
            return Err(bad("/parts/samples", "must be at least 1"));
        }
        finite_in("/parts/nms_threshold", p.nms_threshold, 0.0, 1.0, false)?;
        if p.resolution < 8 || p.resolution > 4096 {
            return Err(bad("/parts/resolution", format!("{} outside [8, 4096]", p.resolution)));
        }

        let a = &self.articulate;
        if a.name.is_empty() || a.name.contains(|c: char| c == '"' || c == '<' || c == '&') {
            return Err(bad("/articulate/name", "must be a non-empty XML-safe name"));
        }
        finite_in("/articulate/contact_tolerance", a.contact_tolerance, 0.0, 1.0, true)?;
        finite_in("/articulate/density", a.density, 0.0, 1e6, true)?;
        for (i, d) in a.densities.iter().enumerate() {
            finite_in(&format!("/articulate/densities/{i}"), *d, 0.0, 1e6, true)?;
        }
        finite_in("/articulate/friction", a.friction, 0.0, 10.0, false)?;
        if let AdjudicatorConfig::Command { program, .. } = &a.adjudicator {
            if program.is_empty() {
                return Err(bad("/articulate/adjudicator/program", "must not be empty"));
            }
        }
        let v = &a.views;
        if v.count > 64 {
            return Err(bad("/articulate/views/count", format!("{} > 64", v.count)));
        }
        finite_in("/articulate/views/elevation_degrees", v.elevation_degrees, -89.0, 89.0, false)?;
        finite_in("/articulate/views/radius", v.radius, 0.0, 1e6, true)?;
        if v.size < 8 || v.size > 4096 {
            return Err(bad("/articulate/views/size", format!("{} outside [8, 4096]", v.size)));
        }

        let c = &self.compose;
        finite_in("/compose/min_gap", c.min_gap, 0.0, 1e6, false)?;
        Ok(())
    }

    /// Extra check for hierarchical extraction: the coarse level needs at
    /// least 8 cells per axis.
    pub fn validate_extract(&self) -> Result<()> {
        let coarse = self.remesh.extraction.resolution / self.extract.coarse_divisor;
        if coarse < 8 || self.extract.coarse_divisor < 2 {
            return Err(bad(
                "/extract/coarse_divisor",
                format!("coarse resolution {coarse} must be ≥ 8 with a divisor ≥ 2"),
            ));
        }
        Ok(())
    }
}
