use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{AugmentConfig, DatasetKind};
use crate::error::{Error, Result};
use crate::labeling::{DEFAULT_ICP_RATE, DEFAULT_OVERLAY_VALUE};
use crate::losses::LossConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bp,
    Ff,
    Symba,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bp => "bp",
            Algorithm::Ff => "ff",
            Algorithm::Symba => "symba",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelingKind {
    None,
    Overlay,
    Icp,
}

impl fmt::Display for LabelingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelingKind::None => "none",
            LabelingKind::Overlay => "overlay",
            LabelingKind::Icp => "icp",
        })
    }
}

/// Everything that determines a training run. Defaults reproduce the
/// two-layer, 500-unit MNIST SymBa setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetKind,
    pub algorithm: Algorithm,
    pub labeling: LabelingKind,
    /// Hidden widths, first layer first.
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// FF threshold.
    pub theta: f64,
    /// SymBa scale factor.
    pub alpha: f64,
    pub icp_rate: f64,
    pub overlay_value: f64,
    pub seed: u64,
    pub augment: Option<AugmentConfig>,
    pub eval_every: usize,
    /// Use only the first N training samples.
    pub train_limit: Option<usize>,
    /// Use only the first N test samples.
    pub test_limit: Option<usize>,
    /// Training-set accuracy is measured on this many leading samples (0 = off).
    pub train_eval_samples: usize,
    /// Whether layer 1 contributes to the goodness used for classification.
    pub include_first_layer: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Mnist,
            algorithm: Algorithm::Symba,
            labeling: LabelingKind::Icp,
            layers: vec![500, 500],
            epochs: 120,
            batch_size: 4096,
            lr: 1e-3,
            theta: 2.0,
            alpha: 4.0,
            icp_rate: DEFAULT_ICP_RATE,
            overlay_value: DEFAULT_OVERLAY_VALUE,
            seed: 0,
            augment: None,
            eval_every: 1,
            train_limit: None,
            test_limit: None,
            train_eval_samples: 0,
            include_first_layer: true,
        }
    }
}

impl TrainConfig {
    /// Collects every violated constraint rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.layers.is_empty() {
            errs.push("layers: at least one layer is required".to_string());
        }
        if let Some(i) = self.layers.iter().position(|&w| w == 0) {
            errs.push(format!("layers[{i}]: width must be >= 1"));
        }
        if self.epochs == 0 {
            errs.push("epochs: must be >= 1".into());
        }
        if self.batch_size == 0 {
            errs.push("batch_size: must be >= 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            errs.push(format!("lr: must be finite and >= 0, got {}", self.lr));
        }
        if self.eval_every == 0 {
            errs.push("eval_every: must be >= 1".into());
        }
        match (self.algorithm, self.labeling) {
            (Algorithm::Bp, LabelingKind::None) => {}
            (Algorithm::Bp, l) => errs.push(format!("labeling: bp takes no labeling, got {l}")),
            (a, LabelingKind::None) => {
                errs.push(format!("labeling: {a} needs overlay or icp"))
            }
            _ => {}
        }
        if self.algorithm == Algorithm::Ff && !self.theta.is_finite() {
            errs.push(format!("theta: must be finite, got {}", self.theta));
        }
        if self.algorithm == Algorithm::Symba && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            errs.push(format!("alpha: must be > 0, got {}", self.alpha));
        }
        if self.labeling == LabelingKind::Icp && !(self.icp_rate > 0.0 && self.icp_rate <= 1.0) {
            errs.push(format!("icp_rate: must be in (0, 1], got {}", self.icp_rate));
        }
        if !self.overlay_value.is_finite() {
            errs.push("overlay_value: must be finite".into());
        }
        if let Some(aug) = &self.augment {
            if aug.crop_pad < 0 {
                errs.push(format!("augment.crop_pad: must be >= 0, got {}", aug.crop_pad));
            }
        }
        if self.train_limit == Some(0) {
            errs.push("train_limit: must be >= 1 when set".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let cfg = match self.algorithm {
            Algorithm::Ff => LossConfig::Ff { theta: self.theta },
            Algorithm::Symba => LossConfig::Symba { alpha: self.alpha },
            Algorithm::Bp => {
                return Err(Error::Config(vec!["bp has no layer-local loss".into()]))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(vec![format!("config: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
