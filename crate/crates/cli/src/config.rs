use std::path::{Path, PathBuf};

use brownfield_core::clustering::{self, ClusterParams};
use brownfield_core::export::SavingsInput;
use brownfield_core::pose::PoseParams;
use brownfield_core::scene::{Class, SceneSpec};
use brownfield_core::segnet::{NetworkConfig, TrainConfig};
use brownfield_core::uncertainty;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a pipeline run depends on. Loaded from TOML; command-line
/// flags override `seed` and `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of every derived seed: scene generation, training, Monte Carlo
    /// sampling and RANSAC.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub segnet: SegnetConfig,
    pub uncertainty: UncertaintyConfig,
    pub clustering: ClusteringConfig,
    pub pose: PoseConfig,
    pub quality: QualityConfig,
    pub savings: SavingsInput,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            segnet: SegnetConfig::default(),
            uncertainty: UncertaintyConfig::default(),
            clustering: ClusteringConfig::default(),
            pose: PoseConfig::default(),
            quality: QualityConfig::default(),
            savings: SavingsInput {
                cost_per_m2: 1.5,
                area_per_plant: 950_000.0,
                scanned_fraction: 0.6,
                n_plants: 10.0,
                scans_per_year: 1.0,
                automation_degree: 0.7,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Template for every synthetic tact; its `seed` is replaced per tact.
    pub scene: SceneSpec,
    pub train_tacts: usize,
    pub test_tacts: usize,
    /// Cloud to process instead of the synthetic test tacts. Evaluation
    /// columns stay empty when it carries no labels.
    pub input: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            scene: SceneSpec { points_per_m2: 60.0, occlusion_fraction: 0.1, ..SceneSpec::default() },
            train_tacts: 8,
            test_tacts: 2,
            input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegnetConfig {
    pub network: NetworkConfig,
    /// Optimizer settings; the defaults of the network's mode when absent.
    /// Its `seed` is replaced by the pipeline seed.
    pub train: Option<TrainConfig>,
    /// Epoch count applied on top of whichever optimizer settings are used.
    pub epochs: Option<usize>,
    /// Edge of the square xy blocks, meters.
    pub block_edge: f64,
    /// Monte Carlo forward passes per block at inference.
    pub mc_samples: usize,
}

impl Default for SegnetConfig {
    fn default() -> Self {
        SegnetConfig { network: NetworkConfig::default(), train: None, epochs: None, block_edge: 3.0, mc_samples: 50 }
    }
}

impl SegnetConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let base = self.train.clone().unwrap_or_else(|| TrainConfig::for_mode(self.network.mode));
        TrainConfig { seed, epochs: self.epochs.unwrap_or(base.epochs), ..base }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    /// Method whose flags decide which points the later stages drop.
    pub method: uncertainty::Method,
    pub k_sigma: f64,
    pub level: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig { method: uncertainty::Method::Predictive, k_sigma: 2.0, level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    /// Method used to split classes into instances before pose estimation.
    pub method: clustering::Method,
    /// When `k` is unset, methods that need it use the true instance count
    /// in the report and fail in the pose stage.
    pub params: ClusterParams,
    /// Classes and methods compared in the clustering report.
    pub report_classes: Vec<Class>,
    pub report_methods: Vec<clustering::Method>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            method: clustering::Method::Optics,
            params: ClusterParams::default(),
            report_classes: vec![Class::Car, Class::Hanger],
            report_methods: clustering::Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseConfig {
    pub classes: Vec<Class>,
    pub params: PoseParams,
    /// Sampling density of the reference templates; the scene density when
    /// absent.
    pub reference_density: Option<f64>,
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig {
            // Clutter boxes have random sizes, so no fixed template fits them.
            classes: Class::ALL.iter().copied().filter(|&c| c != Class::Clutter).collect(),
            params: PoseParams::default(),
            reference_density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub tol_mm: f64,
    pub radius_mm: f64,
    /// Clouds compared by the quality stage; the first synthetic test tact
    /// and its noise-free twin when absent.
    pub measured: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig { tol_mm: 10.0, radius_mm: 10.0, measured: None, reference: None }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.data.scene.validate()?;
        if self.data.train_tacts == 0 {
            return bad("data.train_tacts must be >= 1".into());
        }
        if self.data.test_tacts == 0 && self.data.input.is_none() {
            return bad("data.test_tacts must be >= 1 unless data.input is set".into());
        }
        self.segnet.network.validate()?;
        self.segnet.train_config(self.seed).validate()?;
        if !(self.segnet.block_edge > 0.0) || !self.segnet.block_edge.is_finite() {
            return bad(format!("segnet.block_edge must be > 0, got {}", self.segnet.block_edge));
        }
        if self.segnet.mc_samples < 2 {
            return bad(format!("segnet.mc_samples must be >= 2, got {}", self.segnet.mc_samples));
        }
        if !(self.uncertainty.k_sigma >= 0.0) || !self.uncertainty.k_sigma.is_finite() {
            return bad(format!("uncertainty.k_sigma must be >= 0, got {}", self.uncertainty.k_sigma));
        }
        if !(self.uncertainty.level > 0.0 && self.uncertainty.level < 1.0) {
            return bad(format!("uncertainty.level must lie in (0, 1), got {}", self.uncertainty.level));
        }
        if let Some(d) = self.pose.reference_density {
            if !(d > 0.0) || !d.is_finite() {
                return bad(format!("pose.reference_density must be > 0, got {d}"));
            }
        }
        for (name, v) in [("quality.tol_mm", self.quality.tol_mm), ("quality.radius_mm", self.quality.radius_mm)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        self.savings.validate()?;
        Ok(())
    }

    pub fn reference_density(&self) -> f64 {
        self.pose.reference_density.unwrap_or(self.data.scene.points_per_m2)
    }
}
