//! Scenario files: JSON documents describing a measure, a span, two weights
//! and the checks to run on them.

use std::path::Path;

use bergman_core::kernel::FunctionSpan;
use bergman_core::measure::{build_discrete_measure, build_disk_measure, QuadratureMeasure, WeightFamily};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureDesc {
    Disk {
        radius: f64,
        n_radial: usize,
        n_angular: usize,
    },
    Discrete {
        points: Vec<[f64; 2]>,
        masses: Vec<f64>,
    },
}

impl MeasureDesc {
    pub fn build(&self) -> Result<QuadratureMeasure, bergman_core::Error> {
        match self {
            Self::Disk {
                radius,
                n_radial,
                n_angular,
            } => build_disk_measure(*radius, *n_radial, *n_angular),
            Self::Discrete { points, masses } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                build_discrete_measure(&pts, masses)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpanDesc {
    /// `1, z, ..., z^degree`
    Monomials { degree: usize },
    /// One row per node, one `[re, im]` pair per basis function.
    Tabulated { values: Vec<Vec<[f64; 2]>> },
}

impl SpanDesc {
    pub fn build(&self, measure: &QuadratureMeasure) -> Result<FunctionSpan, bergman_core::Error> {
        match self {
            Self::Monomials { degree } => Ok(FunctionSpan::monomials(*degree, measure)),
            Self::Tabulated { values } => {
                let rows = values.len();
                if rows != measure.len() {
                    return Err(bergman_core::Error::DimensionMismatch {
                        expected: measure.len(),
                        actual: rows,
                    });
                }
                let cols = values.first().map_or(0, Vec::len);
                if values.iter().any(|r| r.len() != cols) {
                    return Err(bergman_core::Error::InvalidConfiguration(
                        "tabulated span rows have different lengths".into(),
                    ));
                }
                FunctionSpan::tabulated(DMatrix::from_fn(rows, cols, |j, m| {
                    Complex64::new(values[j][m][0], values[j][m][1])
                }))
            }
        }
    }

    pub fn from_span(span: &FunctionSpan) -> Self {
        let v = span.values();
        Self::Tabulated {
            values: (0..v.nrows())
                .map(|j| (0..v.ncols()).map(|m| [v[(j, m)].re, v[(j, m)].im]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Structural,
    Comparison,
    Sweep,
    Homotopy,
    Tcz,
    Maxprinciple,
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Structural => "structural",
            Self::Comparison => "comparison",
            Self::Sweep => "sweep",
            Self::Homotopy => "homotopy",
            Self::Tcz => "tcz",
            Self::Maxprinciple => "maxprinciple",
        }
    }
}

/// Acceptance thresholds. Every value is multiplied by the run's
/// tolerance scale before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub trace: f64,
    pub reproducing: f64,
    pub orthonormality: f64,
    pub psd: f64,
    pub shift_covariance: f64,
    pub comparison: f64,
    pub strictness: f64,
    pub derivative_forms: f64,
    pub nonnegativity: f64,
    pub fd: f64,
    pub monotone: f64,
    pub endpoints: f64,
    pub fd_order: f64,
    pub tcz_max_dev: f64,
    pub tcz_slack: f64,
    pub tcz_origin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trace: 1e-9,
            reproducing: 1e-9,
            orthonormality: 1e-10,
            psd: 1e-12,
            shift_covariance: 1e-12,
            comparison: 1e-12,
            strictness: 1e-10,
            derivative_forms: 1e-10,
            nonnegativity: 1e-12,
            fd: 1e-6,
            monotone: 1e-12,
            endpoints: 1e-12,
            fd_order: 0.2,
            tcz_max_dev: 0.05,
            tcz_slack: 0.1,
            tcz_origin: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            trace: self.trace * s,
            reproducing: self.reproducing * s,
            orthonormality: self.orthonormality * s,
            psd: self.psd * s,
            shift_covariance: self.shift_covariance * s,
            comparison: self.comparison * s,
            strictness: self.strictness / s,
            derivative_forms: self.derivative_forms * s,
            nonnegativity: self.nonnegativity * s,
            fd: self.fd * s,
            monotone: self.monotone * s,
            endpoints: self.endpoints * s,
            fd_order: self.fd_order * s,
            tcz_max_dev: self.tcz_max_dev * s,
            tcz_slack: self.tcz_slack * s,
            tcz_origin: self.tcz_origin * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub c_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Step for the central difference reported next to each derivative.
    pub fd_step: f64,
    /// Step ladder for the convergence-order measurement.
    pub fd_order_steps: Vec<f64>,
    /// Point on the path where the order is measured.
    pub fd_order_t: f64,
    pub bound_steps: Vec<f64>,
    pub k_ladder: Vec<f64>,
    pub degree_factor: f64,
    /// Defaults to half the disk radius.
    pub interior_radius: Option<f64>,
    /// Node indices; defaults to `{B_phi >= B_psi}`.
    pub omega: Option<Vec<usize>>,
    pub tolerances: Tolerances,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            c_grid: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            t_grid: bergman_core::homotopy::uniform_grid(bergman_core::homotopy::DEFAULT_T_POINTS),
            fd_step: bergman_core::homotopy::DEFAULT_FD_STEP,
            fd_order_steps: bergman_core::homotopy::FD_ORDER_STEPS.to_vec(),
            fd_order_t: 0.5,
            bound_steps: vec![0.5, 0.1, 0.01],
            k_ladder: vec![10.0, 20.0, 40.0],
            degree_factor: 1.5,
            interior_radius: None,
            omega: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub measure: MeasureDesc,
    pub span: SpanDesc,
    pub phi: WeightFamily,
    pub psi: WeightFamily,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}
