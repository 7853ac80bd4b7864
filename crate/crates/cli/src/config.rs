//! The single-JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use geolift_core::ingestion::DirectedPolicy;
use geolift_core::kernels::KernelSpec;
use geolift_core::manifold::{ComponentPolicy, NeighborRuleConfig};
use geolift_core::spectral::{RankChoice, SpectralConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Output directory; `--out` on the command line takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub spectral: Option<SpectralConfig>,
    #[serde(default)]
    pub isomap: Option<IsomapSection>,
    #[serde(default)]
    pub evaluation: Option<EvaluationSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InputConfig {
    /// Simulate a latent position graph from a catalog kernel.
    Simulate { kernel: KernelSpec, n: usize },
    /// TSV edge list; vertices indexed by first appearance.
    EdgeList {
        path: PathBuf,
        #[serde(default = "default_policy")]
        directed_policy: DirectedPolicy,
    },
    /// Dense symmetric matrix CSV.
    Dense { path: PathBuf },
    /// Time-series CSV turned into a Pearson correlation matrix.
    TimeSeries { path: PathBuf },
}

fn default_policy() -> DirectedPolicy {
    DirectedPolicy::SymmetrizeUnion
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsomapSection {
    pub rule: NeighborRuleConfig,
    #[serde(default = "default_d")]
    pub d: RankChoice,
    #[serde(default = "default_max_auto_d")]
    pub max_auto_d: usize,
    #[serde(default = "default_component_policy")]
    pub component_policy: ComponentPolicy,
    /// Gate for the O(n^2) geodesics.csv artifact.
    #[serde(default)]
    pub write_geodesics: bool,
    /// Emit scatter.svg of the 2-D output, optionally coloured by a
    /// covariate column.
    #[serde(default)]
    pub scatter: Option<ScatterSection>,
}

fn default_d() -> RankChoice {
    RankChoice::Fixed(2)
}

fn default_max_auto_d() -> usize {
    10
}

fn default_component_policy() -> ComponentPolicy {
    ComponentPolicy::LargestComponent
}

impl IsomapSection {
    pub fn core_config(&self) -> geolift_core::manifold::IsomapConfig {
        geolift_core::manifold::IsomapConfig {
            rule: self.rule,
            d: self.d,
            max_auto_d: self.max_auto_d,
            component_policy: self.component_policy,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSection {
    #[serde(default)]
    pub covariate: Option<CovariateRef>,
}

/// A numeric column in a CSV file, aligned with the original input rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateRef {
    pub path: PathBuf,
    #[serde(default)]
    pub column: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    /// True positions for the Procrustes recovery error.
    #[serde(default)]
    pub recovery_truth: Option<PathBuf>,
    /// True positions for the geodesic-vs-latent regression.
    #[serde(default)]
    pub regression_truth: Option<PathBuf>,
    /// Covariate for the Spearman monotonicity diagnostic (against the first
    /// output coordinate).
    #[serde(default)]
    pub monotonicity: Option<CovariateRef>,
    #[serde(default)]
    pub emd: Option<EmdSection>,
    /// Cap on the (D_Z, D_M) sample pairs written to pairs.csv.
    #[serde(default = "default_pairs_limit")]
    pub pairs_limit: usize,
}

fn default_pairs_limit() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmdSection {
    /// One label per line, aligned with the original input rows.
    pub labels: PathBuf,
    pub group_a: String,
    pub group_b: String,
    pub sample: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_reps() -> usize {
    100
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn input_required(&self) -> Result<&InputConfig, CliError> {
        self.input
            .as_ref()
            .ok_or_else(|| CliError::Usage("config is missing the \"input\" section".into()))
    }

    pub fn isomap_required(&self) -> Result<&IsomapSection, CliError> {
        self.isomap
            .as_ref()
            .ok_or_else(|| CliError::Usage("config is missing the \"isomap\" section".into()))
    }

    pub fn spectral_or_default(&self) -> SpectralConfig {
        self.spectral.clone().unwrap_or_default()
    }
}
