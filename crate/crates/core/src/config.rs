//! Run configuration, read from TOML.
//!
//! Matrices are written row-major as nested arrays. A minimal configuration:
//!
//! ```toml
//! seed = 1
//! samples = 200
//! confidence = 0.9
//! merge_radius = 0.0
//! horizon = 3
//!
//! [model]
//! a = [[[0.5]]]
//! b = [[[1.0]]]
//! alpha_hat = [1.0]
//! control = [[-1.0], [1.0]]
//! noise = { kind = "gaussian", covariance = [[0.01]] }
//!
//! [partition]
//! lower = [-2.0]
//! upper = [2.0]
//! counts = [4]
//! goal = { lower = [-1.0], upper = [1.0] }
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HyperRectangle, Partition, VPolytope};
use crate::imdp::Objective;
use crate::model::{ActionTargets, NoiseSpec, ParametricLinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub samples: usize,
    pub confidence: f64,
    #[serde(default)]
    pub merge_radius: f64,
    pub horizon: usize,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub targets: TargetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Vertex matrices `A_1..A_r`.
    pub a: Vec<Vec<Vec<f64>>>,
    /// Vertex matrices `B_1..B_r`.
    pub b: Vec<Vec<Vec<f64>>>,
    pub alpha_hat: Vec<f64>,
    /// Vertices of the control polytope.
    pub control: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<BoxConfig>,
    pub noise: NoiseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxConfig {
    pub fn to_box(&self) -> Result<HyperRectangle> {
        HyperRectangle::new(self.lower.clone(), self.upper.clone())
    }
}

impl From<&HyperRectangle> for BoxConfig {
    fn from(b: &HyperRectangle) -> Self {
        Self {
            lower: b.lower().to_vec(),
            upper: b.upper().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    Gaussian { covariance: Vec<Vec<f64>> },
    /// Samples listed inline, drawn in order with wrap-around.
    Replay { samples: Vec<Vec<f64>> },
    /// Whitespace-separated samples, one per line.
    ReplayFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<BoxConfig>,
    /// Boxes to avoid; cells whose interior meets one become failure states.
    #[serde(default, rename = "unsafe", skip_serializing_if = "Vec::is_empty")]
    pub unsafe_boxes: Vec<BoxConfig>,
}

/// Family of action targets. Defaults to one target per partition cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    #[default]
    Cells,
    /// Each cell scaled about its center by a per-dimension factor.
    ScaledCells { scale: Vec<f64> },
    /// Boxes of fixed widths centered on each cell, independent of the grid.
    CenteredBoxes { widths: Vec<f64> },
    Boxes { boxes: Vec<BoxConfig> },
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let NoiseConfig::ReplayFile { path: p } = &mut cfg.model.noise {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks scalar ranges and that the dimensions of all parts agree.
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        if !(self.merge_radius >= 0.0 && self.merge_radius.is_finite()) {
            return Err(Error::Config("merge_radius must be finite and nonnegative".into()));
        }
        let n = self.partition.lower.len();
        if self.partition.upper.len() != n || self.partition.counts.len() != n {
            return Err(Error::Config(
                "partition lower, upper and counts must have equal length".into(),
            ));
        }
        let a0 = self
            .model
            .a
            .first()
            .ok_or_else(|| Error::Config("model needs at least one vertex matrix".into()))?;
        if a0.len() != n {
            return Err(Error::Config(format!(
                "model state dimension {} does not match partition dimension {n}",
                a0.len()
            )));
        }
        let domain = HyperRectangle::new(self.partition.lower.clone(), self.partition.upper.clone())
            .map_err(|e| Error::Config(format!("partition domain: {e}")))?;
        if let Some(goal) = &self.partition.goal {
            let g = goal.to_box()?;
            if g.dim() != n {
                return Err(Error::Config("goal dimension does not match partition".into()));
            }
            let inside = (0..n).all(|d| {
                g.lower()[d] >= domain.lower()[d] && g.upper()[d] <= domain.upper()[d]
            });
            if !inside {
                return Err(Error::Config("goal must lie inside the partition domain".into()));
            }
        }
        for b in &self.partition.unsafe_boxes {
            if b.to_box()?.dim() != n {
                return Err(Error::Config("unsafe box dimension does not match partition".into()));
            }
        }
        match &self.targets {
            TargetConfig::Cells => {}
            TargetConfig::ScaledCells { scale } => {
                if scale.len() != n || scale.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config(
                        "target scale needs one positive factor per dimension".into(),
                    ));
                }
            }
            TargetConfig::CenteredBoxes { widths } => {
                if widths.len() != n || widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(Error::Config(
                        "target widths need one positive value per dimension".into(),
                    ));
                }
            }
            TargetConfig::Boxes { boxes } => {
                if boxes.is_empty() {
                    return Err(Error::Config("target list is empty".into()));
                }
                for b in boxes {
                    if b.to_box()?.dim() != n {
                        return Err(Error::Config(
                            "target box dimension does not match partition".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ParametricLinearModel> {
        let a = self
            .model
            .a
            .iter()
            .map(|m| matrix_from_rows(m))
            .collect::<Result<Vec<_>>>()?;
        let b = self
            .model
            .b
            .iter()
            .map(|m| matrix_from_rows(m))
            .collect::<Result<Vec<_>>>()?;
        let control = VPolytope::from_rows(&self.model.control)?;
        let mut model = ParametricLinearModel::new(
            a,
            b,
            DVector::from_vec(self.model.alpha_hat.clone()),
            control,
        )?
        .with_horizon(self.horizon)
        .with_noise(self.model.noise.to_spec()?)?;
        if let Some(q) = &self.model.disturbance {
            model = model.with_disturbance(q.to_box()?)?;
        }
        Ok(model)
    }

    pub fn build_partition(&self) -> Result<Partition> {
        let p = &self.partition;
        let domain = HyperRectangle::new(p.lower.clone(), p.upper.clone())?;
        let goal = p.goal.as_ref().map(BoxConfig::to_box).transpose()?;
        let unsafe_boxes = p
            .unsafe_boxes
            .iter()
            .map(BoxConfig::to_box)
            .collect::<Result<Vec<_>>>()?;
        Partition::grid(domain, &p.counts, goal.as_ref(), &unsafe_boxes)
    }

    pub fn build_targets(&self, partition: &Partition) -> Result<ActionTargets> {
        match &self.targets {
            TargetConfig::Cells => ActionTargets::from_partition(partition),
            TargetConfig::ScaledCells { scale } => {
                ActionTargets::from_boxes(&scaled_cells(partition, scale))
            }
            TargetConfig::CenteredBoxes { widths } => {
                ActionTargets::from_boxes(&centered_boxes(partition, widths))
            }
            TargetConfig::Boxes { boxes } => ActionTargets::from_boxes(
                &boxes
                    .iter()
                    .map(BoxConfig::to_box)
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }
}

/// Every partition cell scaled about its center by `scale[d]` in dimension `d`,
/// clipped to the partition domain.
pub fn scaled_cells(partition: &Partition, scale: &[f64]) -> Vec<HyperRectangle> {
    boxes_around_centers(partition, |r, d| r.widths()[d] * scale[d])
}

/// A box of the given widths around every cell center, clipped to the domain.
pub fn centered_boxes(partition: &Partition, widths: &[f64]) -> Vec<HyperRectangle> {
    boxes_around_centers(partition, |_, d| widths[d])
}

fn boxes_around_centers(
    partition: &Partition,
    width: impl Fn(&HyperRectangle, usize) -> f64,
) -> Vec<HyperRectangle> {
    let dom = partition.domain();
    partition
        .regions()
        .iter()
        .map(|r| {
            let c = r.center();
            let lower = (0..c.len())
                .map(|d| (c[d] - 0.5 * width(r, d)).max(dom.lower()[d]))
                .collect();
            let upper = (0..c.len())
                .map(|d| (c[d] + 0.5 * width(r, d)).min(dom.upper()[d]))
                .collect();
            HyperRectangle::new_unchecked(lower, upper)
        })
        .collect()
}

impl NoiseConfig {
    pub fn to_spec(&self) -> Result<NoiseSpec> {
        match self {
            NoiseConfig::Gaussian { covariance } => Ok(NoiseSpec::Gaussian {
                covariance: matrix_from_rows(covariance)?,
            }),
            NoiseConfig::Replay { samples } => replay(samples),
            NoiseConfig::ReplayFile { path } => {
                let text = std::fs::read_to_string(path)?;
                let rows = text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                    .map(|(i, l)| {
                        l.split_whitespace()
                            .map(|t| {
                                t.parse::<f64>().map_err(|e| Error::Parse {
                                    line: i + 1,
                                    msg: e.to_string(),
                                })
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                replay(&rows)
            }
        }
    }
}

fn replay(rows: &[Vec<f64>]) -> Result<NoiseSpec> {
    if rows.is_empty() {
        return Err(Error::Config("replay noise needs at least one sample".into()));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("replay samples have inconsistent dimension".into()));
    }
    Ok(NoiseSpec::Replay {
        samples: rows.iter().map(|r| DVector::from_vec(r.clone())).collect(),
    })
}

/// Row-major nested rows to a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::Config("matrix must be nonempty".into()));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config("matrix rows have unequal length".into()));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

/// Inverse of [`matrix_from_rows`].
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
seed = 3
samples = 50
confidence = 0.9
horizon = 2

[model]
a = [[[0.5]]]
b = [[[1.0]]]
alpha_hat = [1.0]
control = [[-1.0], [1.0]]
noise = { kind = "gaussian", covariance = [[0.01]] }

[partition]
lower = [-2.0]
upper = [2.0]
counts = [4]
goal = { lower = [-1.0], upper = [1.0] }
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(TOY).unwrap();
        assert_eq!(cfg.objective, Objective::ReachAvoid);
        assert_eq!(cfg.targets, TargetConfig::Cells);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn builds_parts() {
        let cfg = RunConfig::from_toml_str(TOY).unwrap();
        let model = cfg.build_model().unwrap();
        assert_eq!(model.horizon(), 2);
        let partition = cfg.build_partition().unwrap();
        assert_eq!(partition.len(), 4);
        assert_eq!(partition.goal_mask(), &[false, true, true, false]);
        assert_eq!(cfg.build_targets(&partition).unwrap().len(), 4);
    }

    #[test]
    fn rejects_goal_outside_domain() {
        let text = TOY.replace("upper = [1.0] }", "upper = [3.0] }");
        let err = RunConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("goal"), "{err}");
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let text = TOY.replace("counts = [4]", "counts = [4, 2]");
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn scaled_cells_keep_centers() {
        let cfg = RunConfig::from_toml_str(TOY).unwrap();
        let partition = cfg.build_partition().unwrap();
        let cells = scaled_cells(&partition, &[1.5]);
        assert_eq!(cells[0].lower(), &[-2.0]);
        assert_eq!(cells[0].upper(), &[-0.75]);
        assert_eq!(cells[1].lower(), &[-1.25]);
        assert_eq!(cells[1].upper(), &[0.25]);
    }
}
